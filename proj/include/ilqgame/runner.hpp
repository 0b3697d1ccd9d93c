#pragma once

// Scenario execution: solve, optionally certify, export.

#include <filesystem>
#include <optional>
#include <variant>

#include "ilqgame/export.hpp"
#include "ilqgame/ilq_solver.hpp"
#include "ilqgame/scenario.hpp"

namespace ilqgame {

/// CLI exit statuses.
enum ExitStatus : int { kExitConverged = 0, kExitHardError = 1, kExitNotConverged = 2 };

struct RunOptions {
  std::optional<SolverMode> mode;
  std::optional<double> eta;
  std::optional<std::size_t> max_iterations;
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
  bool certify = false;
};

struct RunOutcome {
  SolveReport report;
  RunMetadata metadata;
  TrajectoryLayout layout;
  double dt = 0.0;

  int exit_status() const { return report.converged ? kExitConverged : kExitNotConverged; }
};

inline SolverSettings apply_overrides(SolverSettings s, const RunOptions& o) {
  if (o.mode) s.mode = *o.mode;
  if (o.eta) s.eta = *o.eta;
  if (o.max_iterations) s.max_iterations = *o.max_iterations;
  if (o.tol) s.convergence_tol = *o.tol;
  s.validate();
  return s;
}

template <DynamicGame G>
RunOutcome run_game(const G& game, const Vector& x0, std::vector<StageInputs> init,
                    const SolverSettings& settings, const std::vector<Vector>* prediction,
                    bool certify, TrajectoryLayout layout, double dt) {
  RunOutcome out;
  out.report = solve(game, x0, std::move(init), settings, prediction);
  out.metadata = make_metadata(out.report, settings);
  if (certify) {
    std::vector<BestResponseGap> gaps;
    for (std::size_t i = 0; i < game.num_players(); ++i) {
      gaps.push_back(best_response_gap(game, out.report.trajectory, i, settings));
    }
    out.metadata.gaps = std::move(gaps);
  }
  out.layout = std::move(layout);
  out.dt = dt;
  return out;
}

inline RunOutcome run_scenario(const RacingScenario& sc, const RunOptions& opts) {
  const SolverSettings settings = apply_overrides(sc.solver, opts);
  const RacingGame game = sc.game();
  const auto prediction = sc.opponent_prediction();
  return run_game(game, sc.initial_state(), sc.initial_inputs(), settings,
                  settings.mode == SolverMode::kIlqrBaseline ? &prediction : nullptr,
                  opts.certify,
                  layout_of(game, std::vector<PlayerFields>(game.num_players(), racing_fields())),
                  sc.dt);
}

inline RunOutcome run_scenario(LqScenario sc, const RunOptions& opts) {
  if (opts.seed) sc.spec.seed = *opts.seed;
  const SolverSettings settings = apply_overrides(sc.solver, opts);
  const LinearQuadraticGame game = sc.game();
  return run_game(game, sc.initial_state(), zero_inputs(game, sc.spec.horizon), settings,
                  nullptr, opts.certify, layout_of(game, generic_fields(game)), 1.0);
}

inline RunOutcome run_scenario(const Scenario& sc, const RunOptions& opts) {
  return std::visit([&](const auto& s) { return run_scenario(s, opts); }, sc);
}

inline void export_outcome(const std::filesystem::path& dir, const RunOutcome& o) {
  export_run(dir, o.report.trajectory, o.dt, o.layout, o.metadata);
}

}  // namespace ilqgame
