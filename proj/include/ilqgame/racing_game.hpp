#pragma once

#include <span>
#include <vector>

#include "ilqgame/game.hpp"
#include "ilqgame/racing_costs.hpp"
#include "ilqgame/track.hpp"
#include "ilqgame/vehicle_dynamics.hpp"

namespace ilqgame {

struct RacingPlayer {
  CostParams costs;
  GGDiamond gg;
};

/// N point-mass racers on a shared track, coupled through their costs.
class RacingGame {
 public:
  RacingGame(Track track, std::vector<RacingPlayer> players, double dt)
      : track_(std::move(track)), players_(std::move(players)), dt_(dt) {
    if (players_.empty()) throw std::invalid_argument("RacingGame: no players");
    if (!(dt_ > 0.0)) throw std::invalid_argument("RacingGame: dt must be > 0");
  }

  const Track& track() const noexcept { return track_; }
  const std::vector<RacingPlayer>& players() const noexcept { return players_; }
  double dt() const noexcept { return dt_; }

  std::size_t num_players() const noexcept { return players_.size(); }
  Eigen::Index state_dim() const noexcept {
    return kPlayerStateDim * static_cast<Eigen::Index>(players_.size());
  }
  Eigen::Index input_dim(PlayerIndex) const noexcept { return kPlayerInputDim; }
  Eigen::Index player_state_offset(PlayerIndex i) const noexcept {
    return kPlayerStateDim * static_cast<Eigen::Index>(i);
  }
  Eigen::Index player_state_dim(PlayerIndex) const noexcept {
    return kPlayerStateDim;
  }

  Vector step(std::size_t, const Vector& x, std::span<const Vector> u) const {
    return ilqgame::step(x, u, track_, dt_);
  }

  void linearize(std::size_t, const Vector& x, std::span<const Vector> u,
                 Matrix& A, std::vector<Matrix>& B) const {
    linearize_step(x, u, track_, dt_, A, B);
  }

  double stage_cost(PlayerIndex i, std::size_t, const Vector& x,
                    std::span<const Vector> u) const {
    return ilqgame::stage_cost(i, x, u[i], players_[i].costs, players_[i].gg,
                               track_);
  }

  double terminal_cost(PlayerIndex i, const Vector& x) const {
    return ilqgame::terminal_cost(i, x, players_[i].costs);
  }

  QuadraticCostStage quadratize_stage(PlayerIndex i, std::size_t,
                                      const Vector& x,
                                      std::span<const Vector> u) const {
    return ilqgame::quadratize_stage(i, x, u[i], players_[i].costs,
                                     players_[i].gg, track_);
  }

  QuadraticCostStage quadratize_terminal(PlayerIndex i, const Vector& x) const {
    return ilqgame::quadratize_terminal(i, x, players_[i].costs);
  }

 private:
  Track track_;
  std::vector<RacingPlayer> players_;
  double dt_;
};

static_assert(DynamicGame<RacingGame>);

/// Opponent forecast of the sequential baseline: every player keeps its
/// initial speed, lateral offset, heading and accelerations while its
/// progress grows at the initial speed.
inline std::vector<Vector> constant_velocity_prediction(const Vector& x0,
                                                        std::size_t K,
                                                        double dt) {
  std::vector<Vector> states(K + 1, x0);
  const std::size_t N = joint_player_count(x0);
  for (std::size_t k = 1; k <= K; ++k) {
    for (std::size_t j = 0; j < N; ++j) {
      player_block(states[k], j)(kS) =
          player_block(x0, j)(kS) +
          player_block(x0, j)(kV) * dt * static_cast<double>(k);
    }
  }
  return states;
}

}  // namespace ilqgame
