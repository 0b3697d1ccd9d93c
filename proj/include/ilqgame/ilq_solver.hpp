#pragma once

// Iterative LQ game solver: linearize and quadratize along the nominal
// trajectory, solve the local LQ game (feedback or open-loop), and update
// the nominal with a damped forward pass until the state trajectory stops
// moving.

#include <cmath>
#include <optional>
#include <sstream>
#include <span>
#include <vector>

#include "ilqgame/game.hpp"
#include "ilqgame/lq_game.hpp"

namespace ilqgame {

struct SolverSettings {
  SolverMode mode = SolverMode::kFeedback;
  double eta = 0.3;
  std::size_t max_iterations = 500;
  /// Stop once max |x_new - x_old| over the whole trajectory drops below this.
  double convergence_tol = 1e-4;
  /// Player optimized by the sequential baseline; everybody else follows
  /// the prediction.
  PlayerIndex ego = 0;
  /// Keep every intermediate trajectory in the report.
  bool record_history = false;

  std::vector<std::string> violations() const {
    std::vector<std::string> out;
    if (!(eta > 0.0 && eta <= 1.0)) out.push_back("eta must be in (0, 1]");
    if (max_iterations < 1) out.push_back("max_iterations must be >= 1");
    if (!(convergence_tol > 0.0)) out.push_back("tol must be > 0");
    return out;
  }

  void validate() const {
    const auto v = violations();
    if (!v.empty()) throw std::invalid_argument("invalid solver settings: " + v.front());
  }

  bool operator==(const SolverSettings&) const = default;
};

struct SolveReport {
  bool converged = false;
  std::size_t iterations = 0;
  /// change_norms[t] = max-norm between the state trajectories before and
  /// after forward pass t.
  std::vector<double> change_norms;
  /// Per-player total costs after each forward pass.
  std::vector<std::vector<double>> iteration_costs;
  GameTrajectory trajectory;
  StrategySet strategies;
  /// Initial rollout followed by every accepted trajectory, if recorded.
  std::vector<GameTrajectory> history;
};

/// u_new = u_hat - K (x_new - x_hat) - eta k, rolled out through the game
/// dynamics from the nominal initial state. Open-loop strategies carry no
/// gain term.
template <DynamicGame G>
GameTrajectory forward_pass(const G& game, const GameTrajectory& nominal,
                            const StrategySet& strategies, double eta) {
  const std::size_t K = nominal.horizon();
  const std::size_t N = game.num_players();
  if (strategies.horizon() != K || strategies.num_players() != N) {
    throw std::invalid_argument("forward_pass: strategy dimensions do not match");
  }
  const bool use_gains = strategies.type == EquilibriumType::kFeedback;

  GameTrajectory out;
  out.mode = nominal.mode;
  out.iteration = nominal.iteration + 1;
  out.states.reserve(K + 1);
  out.states.push_back(nominal.states.front());
  out.inputs.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    const Vector dx = out.states[k] - nominal.states[k];
    auto& u = out.inputs[k];
    u.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
      const auto& law = strategies(k, i);
      u[i] = nominal.inputs[k][i] - eta * law.offset;
      if (use_gains) u[i].noalias() -= law.gain * dx;
    }
    out.states.push_back(
        at_stage(k, [&] { return Vector(game.step(k, out.states[k], u)); }));
  }
  out.costs = total_costs(game, out.states, out.inputs);
  return out;
}

/// One player's optimal-control problem inside an N-player game. The other
/// players either keep fixed input sequences and evolve under the game
/// dynamics, or follow a prescribed joint-state trajectory regardless of
/// the dynamics. The joint state is kept whole.
template <DynamicGame G>
class SinglePlayerProblem {
 public:
  SinglePlayerProblem(const G& game, PlayerIndex player,
                      std::vector<StageInputs> frozen_inputs,
                      std::vector<Vector> prescribed_states = {})
      : game_(game),
        player_(player),
        frozen_(std::move(frozen_inputs)),
        prescribed_(std::move(prescribed_states)) {
    if (player_ >= game_.num_players()) {
      throw std::invalid_argument("SinglePlayerProblem: player out of range");
    }
    if (!prescribed_.empty() && prescribed_.size() != frozen_.size() + 1) {
      throw std::invalid_argument(
          "SinglePlayerProblem: prescribed trajectory needs K + 1 states");
    }
  }

  PlayerIndex player() const noexcept { return player_; }
  bool prescribed() const noexcept { return !prescribed_.empty(); }

  std::size_t num_players() const noexcept { return 1; }
  Eigen::Index state_dim() const { return game_.state_dim(); }
  Eigen::Index input_dim(PlayerIndex) const { return game_.input_dim(player_); }
  Eigen::Index player_state_offset(PlayerIndex) const {
    return game_.player_state_offset(player_);
  }
  Eigen::Index player_state_dim(PlayerIndex) const {
    return game_.player_state_dim(player_);
  }

  /// Joint inputs at stage k with this player's input substituted.
  StageInputs full_inputs(std::size_t k, std::span<const Vector> u) const {
    StageInputs out = frozen_.at(k);
    out[player_] = u[0];
    return out;
  }

  /// Overwrites all other players' blocks of x with the prescription at k.
  void apply_prescription(std::size_t k, Vector& x) const {
    if (prescribed_.empty()) return;
    for (std::size_t j = 0; j < game_.num_players(); ++j) {
      if (j == player_) continue;
      const auto off = game_.player_state_offset(j);
      const auto dim = game_.player_state_dim(j);
      x.segment(off, dim) = prescribed_[k].segment(off, dim);
    }
  }

  Vector step(std::size_t k, const Vector& x, std::span<const Vector> u) const {
    Vector next = game_.step(k, x, full_inputs(k, u));
    apply_prescription(k + 1, next);
    return next;
  }

  void linearize(std::size_t k, const Vector& x, std::span<const Vector> u,
                 Matrix& A, std::vector<Matrix>& B) const {
    std::vector<Matrix> all_B;
    game_.linearize(k, x, full_inputs(k, u), A, all_B);
    B.assign(1, std::move(all_B[player_]));
    if (prescribed_.empty()) return;
    for (std::size_t j = 0; j < game_.num_players(); ++j) {
      if (j == player_) continue;
      const auto off = game_.player_state_offset(j);
      const auto dim = game_.player_state_dim(j);
      A.middleRows(off, dim).setZero();
      B[0].middleRows(off, dim).setZero();
    }
  }

  double stage_cost(PlayerIndex, std::size_t k, const Vector& x,
                    std::span<const Vector> u) const {
    return game_.stage_cost(player_, k, x, full_inputs(k, u));
  }

  double terminal_cost(PlayerIndex, const Vector& x) const {
    return game_.terminal_cost(player_, x);
  }

  QuadraticCostStage quadratize_stage(PlayerIndex, std::size_t k, const Vector& x,
                                      std::span<const Vector> u) const {
    QuadraticCostStage c = game_.quadratize_stage(player_, k, x, full_inputs(k, u));
    c.R = {std::move(c.R[player_])};
    c.r = {std::move(c.r[player_])};
    return c;
  }

  QuadraticCostStage quadratize_terminal(PlayerIndex, const Vector& x) const {
    return game_.quadratize_terminal(player_, x);
  }

 private:
  const G& game_;
  PlayerIndex player_;
  std::vector<StageInputs> frozen_;
  std::vector<Vector> prescribed_;
};

namespace detail {

template <class Fn>
decltype(auto) at_iteration(std::size_t it, Fn&& fn) {
  auto prefix = [it](const std::exception& e) {
    std::ostringstream msg;
    msg << "iteration " << it << ": " << e.what();
    return msg.str();
  };
  try {
    return fn();
  } catch (const SolverSingularityError& e) {
    throw SolverSingularityError(prefix(e), e.stage(), e.condition());
  } catch (const SingularityError& e) {
    throw SingularityError(prefix(e), e.stage());
  } catch (const DomainError& e) {
    throw DomainError(prefix(e));
  }
}

/// Shared iteration for feedback and open-loop modes. `costs_of` maps a
/// trajectory to the per-player costs stored in the report.
template <DynamicGame G, class CostsOf>
SolveReport iterate(const G& game, GameTrajectory nominal,
                    EquilibriumType type, const SolverSettings& settings,
                    CostsOf&& costs_of) {
  SolveReport report;
  if (settings.record_history) report.history.push_back(nominal);
  const Vector zero_dx = Vector::Zero(game.state_dim());

  for (std::size_t it = 1; it <= settings.max_iterations; ++it) {
    GameTrajectory next = at_iteration(it, [&] {
      const LqApproximation lq = lq_approximation(game, nominal);
      report.strategies = type == EquilibriumType::kFeedback
                              ? solve_feedback_lq(lq)
                              : solve_openloop_lq(lq, zero_dx);
      return forward_pass(game, nominal, report.strategies, settings.eta);
    });
    const double change = max_abs_difference(next.states, nominal.states);
    report.change_norms.push_back(change);
    report.iteration_costs.push_back(costs_of(next));
    report.iterations = it;
    nominal = std::move(next);
    if (settings.record_history) report.history.push_back(nominal);
    if (change < settings.convergence_tol) {
      report.converged = true;
      break;
    }
  }
  report.trajectory = std::move(nominal);
  return report;
}

}  // namespace detail

/// Runs the iterative solver from x0 and the initial input guess.
///
/// In baseline mode only `settings.ego` is optimized (plain iLQR) while the
/// other players follow `prediction`, a joint-state trajectory of length
/// K + 1; without one, the rollout of the initial inputs is used. Returns a
/// report with converged = false when max_iterations is exhausted.
template <DynamicGame G>
SolveReport solve(const G& game, const Vector& x0,
                  std::vector<StageInputs> initial_inputs,
                  const SolverSettings& settings,
                  const std::vector<Vector>* prediction = nullptr) {
  settings.validate();
  if (x0.size() != game.state_dim()) {
    throw std::invalid_argument("solve: x0 dimension mismatch");
  }
  const std::size_t K = initial_inputs.size();

  if (settings.mode != SolverMode::kIlqrBaseline) {
    GameTrajectory nominal = rollout(game, x0, std::move(initial_inputs));
    nominal.mode = settings.mode;
    const auto type = settings.mode == SolverMode::kFeedback
                          ? EquilibriumType::kFeedback
                          : EquilibriumType::kOpenLoop;
    return detail::iterate(game, std::move(nominal), type, settings,
                           [](const GameTrajectory& t) { return t.costs; });
  }

  const PlayerIndex ego = settings.ego;
  std::vector<Vector> predicted =
      prediction ? *prediction : rollout(game, x0, initial_inputs).states;
  if (predicted.size() != K + 1) {
    throw std::invalid_argument("solve: prediction must hold K + 1 states");
  }
  const SinglePlayerProblem<G> problem(game, ego, initial_inputs, predicted);

  Vector start = x0;
  problem.apply_prescription(0, start);
  std::vector<StageInputs> own(K);
  for (std::size_t k = 0; k < K; ++k) own[k] = {initial_inputs[k][ego]};

  auto joint_inputs = [&](const GameTrajectory& t) {
    std::vector<StageInputs> u(K);
    for (std::size_t k = 0; k < K; ++k) u[k] = problem.full_inputs(k, t.inputs[k]);
    return u;
  };
  auto lift = [&](const GameTrajectory& t) {
    GameTrajectory full;
    full.states = t.states;
    full.inputs = joint_inputs(t);
    full.costs = total_costs(game, full.states, full.inputs);
    full.iteration = t.iteration;
    full.mode = SolverMode::kIlqrBaseline;
    return full;
  };

  GameTrajectory nominal = rollout(problem, start, std::move(own));
  SolveReport sub = detail::iterate(
      problem, std::move(nominal), EquilibriumType::kFeedback, settings,
      [&](const GameTrajectory& t) {
        return total_costs(game, t.states, joint_inputs(t));
      });

  SolveReport report;
  report.converged = sub.converged;
  report.iterations = sub.iterations;
  report.change_norms = std::move(sub.change_norms);
  report.iteration_costs = std::move(sub.iteration_costs);
  report.trajectory = lift(sub.trajectory);
  for (const auto& t : sub.history) report.history.push_back(lift(t));

  report.strategies.type = EquilibriumType::kFeedback;
  report.strategies.laws.assign(K, std::vector<AffineLaw>(game.num_players()));
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t j = 0; j < game.num_players(); ++j) {
      auto& law = report.strategies(k, j);
      if (j == ego) {
        law = sub.strategies(k, 0);
      } else {
        law.gain = Matrix::Zero(game.input_dim(j), game.state_dim());
        law.offset = Vector::Zero(game.input_dim(j));
      }
    }
  }
  return report;
}

struct BestResponseGap {
  /// J^i(solution) - J^i(best response); >= -tolerance at a local optimum.
  double gap = 0.0;
  /// gap / max(1, |J^i(solution)|)
  double relative = 0.0;
  double solution_cost = 0.0;
  double best_response_cost = 0.0;
  /// False when the inner iLQR did not converge; the gap is then unverified.
  bool verified = false;
  std::size_t iterations = 0;
};

/// Open-loop Nash check for player i: freeze every other player's input
/// sequence, run single-player iLQR warm-started at the solution, and report
/// how much player i could gain by deviating.
template <DynamicGame G>
BestResponseGap best_response_gap(const G& game, const GameTrajectory& solution,
                                  PlayerIndex i, const SolverSettings& settings) {
  const std::size_t K = solution.horizon();
  const SinglePlayerProblem<G> problem(game, i, solution.inputs);
  std::vector<StageInputs> own(K);
  for (std::size_t k = 0; k < K; ++k) own[k] = {solution.inputs[k][i]};

  SolverSettings inner = settings;
  inner.mode = SolverMode::kFeedback;
  inner.record_history = false;
  const SolveReport rep = solve(problem, solution.states.front(), std::move(own), inner);

  BestResponseGap out;
  out.solution_cost = total_costs(game, solution.states, solution.inputs)[i];
  out.best_response_cost = rep.trajectory.costs[0];
  out.gap = out.solution_cost - out.best_response_cost;
  out.relative = out.gap / std::max(1.0, std::abs(out.solution_cost));
  out.verified = rep.converged;
  out.iterations = rep.iterations;
  return out;
}

}  // namespace ilqgame
