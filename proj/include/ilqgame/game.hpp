#pragma once

// Generic N-player discrete-time game interface, trajectories, rollout, and
// construction of the local LQ approximation along a nominal trajectory.

#include <concepts>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ilqgame/core.hpp"
#include "ilqgame/lq_game.hpp"

namespace ilqgame {

/// Inputs at one stage, one vector per player.
using StageInputs = std::vector<Vector>;

/// A discrete-time game x_{k+1} = f_k(x_k, u_k^1..u_k^N) with per-player
/// stage costs g_k^i(x_k, u_k) and terminal costs g_K^i(x_K).
template <class G>
concept DynamicGame = requires(const G& g, std::size_t k, PlayerIndex i,
                               const Vector& x, std::span<const Vector> u,
                               Matrix& A, std::vector<Matrix>& B) {
  { g.num_players() } -> std::convertible_to<std::size_t>;
  { g.state_dim() } -> std::convertible_to<Eigen::Index>;
  { g.input_dim(i) } -> std::convertible_to<Eigen::Index>;
  { g.player_state_offset(i) } -> std::convertible_to<Eigen::Index>;
  { g.player_state_dim(i) } -> std::convertible_to<Eigen::Index>;
  { g.step(k, x, u) } -> std::convertible_to<Vector>;
  g.linearize(k, x, u, A, B);
  { g.stage_cost(i, k, x, u) } -> std::convertible_to<double>;
  { g.terminal_cost(i, x) } -> std::convertible_to<double>;
  { g.quadratize_stage(i, k, x, u) } -> std::convertible_to<QuadraticCostStage>;
  { g.quadratize_terminal(i, x) } -> std::convertible_to<QuadraticCostStage>;
};

enum class SolverMode { kFeedback, kOpenLoop, kIlqrBaseline };

inline std::string to_string(SolverMode mode) {
  switch (mode) {
    case SolverMode::kFeedback:
      return "feedback";
    case SolverMode::kOpenLoop:
      return "open-loop";
    case SolverMode::kIlqrBaseline:
      return "ilqr";
  }
  return "unknown";
}

inline SolverMode solver_mode_from_string(const std::string& s) {
  if (s == "feedback") return SolverMode::kFeedback;
  if (s == "open-loop" || s == "openloop" || s == "open_loop") {
    return SolverMode::kOpenLoop;
  }
  if (s == "ilqr" || s == "ilqr-baseline") return SolverMode::kIlqrBaseline;
  throw std::invalid_argument("unknown solver mode '" + s +
                              "' (expected feedback | open-loop | ilqr)");
}

struct GameTrajectory {
  std::vector<Vector> states;       // K + 1
  std::vector<StageInputs> inputs;  // K stages, one entry per player
  std::vector<double> costs;        // total cost per player
  std::size_t iteration = 0;
  SolverMode mode = SolverMode::kFeedback;

  std::size_t horizon() const noexcept { return inputs.size(); }
  std::size_t num_players() const noexcept {
    return costs.size();
  }
};

/// Rethrows errors from stage-wise evaluations with the stage attached.
template <class Fn>
decltype(auto) at_stage(std::size_t k, Fn&& fn) {
  try {
    return fn();
  } catch (const SingularityError& e) {
    std::ostringstream msg;
    msg << "stage " << k << ": " << e.what();
    throw SingularityError(msg.str(), static_cast<long>(k));
  } catch (const DomainError& e) {
    std::ostringstream msg;
    msg << "stage " << k << ": " << e.what();
    throw DomainError(msg.str());
  }
}

template <DynamicGame G>
std::vector<double> total_costs(const G& game, const std::vector<Vector>& states,
                                const std::vector<StageInputs>& inputs) {
  const std::size_t N = game.num_players();
  const std::size_t K = inputs.size();
  std::vector<double> costs(N, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      costs[i] += game.stage_cost(i, k, states[k], inputs[k]);
    }
    costs[i] += game.terminal_cost(i, states[K]);
  }
  return costs;
}

/// Forward simulation from x0 under fixed input sequences, with costs.
template <DynamicGame G>
GameTrajectory rollout(const G& game, const Vector& x0,
                       std::vector<StageInputs> inputs) {
  GameTrajectory traj;
  traj.states.reserve(inputs.size() + 1);
  traj.states.push_back(x0);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (inputs[k].size() != game.num_players()) {
      throw std::invalid_argument("rollout: one input per player required");
    }
    traj.states.push_back(
        at_stage(k, [&] { return Vector(game.step(k, traj.states[k], inputs[k])); }));
  }
  traj.inputs = std::move(inputs);
  traj.costs = total_costs(game, traj.states, traj.inputs);
  return traj;
}

/// Zero input sequences of length K.
template <DynamicGame G>
std::vector<StageInputs> zero_inputs(const G& game, std::size_t K) {
  StageInputs stage;
  for (std::size_t i = 0; i < game.num_players(); ++i) {
    stage.push_back(Vector::Zero(game.input_dim(i)));
  }
  return std::vector<StageInputs>(K, stage);
}

/// Linearize the dynamics and quadratize every player's cost along a
/// nominal trajectory.
template <DynamicGame G>
LqApproximation lq_approximation(const G& game, const GameTrajectory& nominal) {
  const std::size_t K = nominal.horizon();
  const std::size_t N = game.num_players();
  LqApproximation lq;
  lq.dynamics.resize(K);
  lq.costs.assign(K + 1, std::vector<QuadraticCostStage>(N));
  for (std::size_t k = 0; k < K; ++k) {
    at_stage(k, [&] {
      game.linearize(k, nominal.states[k], nominal.inputs[k], lq.dynamics[k].A,
                     lq.dynamics[k].B);
      for (std::size_t i = 0; i < N; ++i) {
        lq.costs[k][i] =
            game.quadratize_stage(i, k, nominal.states[k], nominal.inputs[k]);
      }
    });
  }
  for (std::size_t i = 0; i < N; ++i) {
    lq.costs[K][i] = game.quadratize_terminal(i, nominal.states[K]);
  }
  return lq;
}

}  // namespace ilqgame
