// Command-line entry point: solve a scenario (or a sweep of scenarios) and
// export trajectories plus run metadata.
//
//   ilqgame SCENARIO.json --out DIR [--mode feedback|open-loop|ilqr]
//           [--eta E] [--max-iters N] [--tol T] [--certify] [--seed S]
//   ilqgame SWEEP.json --sweep --out DIR [...]
//
// A sweep file names a base scenario and a list of JSON-patch variants:
//   {"base": "fig1.json",
//    "variants": [{"name": "...", "patch": [{"op": "replace", "path": ..., "value": ...}]}]}
// Each variant runs on its own thread and writes to DIR/<name>/.

#include <algorithm>
#include <filesystem>
#include <future>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ilqgame/runner.hpp"

namespace fs = std::filesystem;
using namespace ilqgame;

namespace {

int run_one(const Scenario& scenario, const RunOptions& opts, const fs::path& out,
            const std::string& label) {
  try {
    const RunOutcome outcome = run_scenario(scenario, opts);
    export_outcome(out, outcome);
    std::cout << label << ": " << (outcome.report.converged ? "converged" : "NOT converged")
              << " after " << outcome.report.iterations << " iterations -> " << out.string()
              << '\n';
    return outcome.exit_status();
  } catch (const std::exception& e) {
    std::cerr << label << ": error: " << e.what() << '\n';
    return kExitHardError;
  }
}

int run_sweep(const fs::path& sweep_path, const RunOptions& opts, const fs::path& out) {
  const Json sweep = parse_json_file(sweep_path);
  if (!sweep.contains("base") || !sweep["base"].is_string() || !sweep.contains("variants") ||
      !sweep["variants"].is_array()) {
    throw ScenarioError({sweep_path.string() + ": sweep needs \"base\" and \"variants\""});
  }
  const Json base = parse_json_file(sweep_path.parent_path() / sweep["base"].get<std::string>());

  std::vector<std::pair<std::string, Scenario>> jobs;
  for (const auto& v : sweep["variants"]) {
    const std::string name = v.value("name", "variant" + std::to_string(jobs.size()));
    const Json doc = v.contains("patch") ? base.patch(v["patch"]) : base;
    jobs.emplace_back(name, scenario_from_json(doc));
  }

  std::vector<std::future<int>> results;
  for (const auto& [name, sc] : jobs) {
    results.push_back(std::async(std::launch::async, [&, name = name] {
      return run_one(sc, opts, out / name, name);
    }));
  }
  int status = kExitConverged;
  for (auto& r : results) {
    const int s = r.get();
    if (s == kExitHardError || status == kExitHardError) {
      status = kExitHardError;
    } else {
      status = std::max(status, s);
    }
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterative LQ game solver for N-player racing scenarios"};
  std::string scenario_path;
  std::string out_dir = "out";
  std::string mode;
  RunOptions opts;
  double eta = 0.0, tol = 0.0;
  std::size_t max_iters = 0;
  std::uint64_t seed = 0;
  bool sweep = false;

  app.add_option("scenario", scenario_path, "Scenario JSON (or sweep JSON with --sweep)")
      ->required();
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  auto* mode_opt = app.add_option("--mode", mode, "Solver mode")
                       ->check(CLI::IsMember({"feedback", "open-loop", "ilqr"}));
  auto* eta_opt = app.add_option("--eta", eta, "Forward-pass step size in (0, 1]");
  auto* iters_opt = app.add_option("--max-iters", max_iters, "Iteration limit");
  auto* tol_opt = app.add_option("--tol", tol, "Convergence tolerance on state change");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for randomized (random_lq) scenarios");
  app.add_flag("--certify", opts.certify, "Compute per-player best-response gaps");
  app.add_flag("--sweep", sweep, "Treat the input as a sweep file and run all variants");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitConverged : kExitHardError;
  }

  try {
    if (*mode_opt) opts.mode = solver_mode_from_string(mode);
    if (*eta_opt) opts.eta = eta;
    if (*iters_opt) opts.max_iterations = max_iters;
    if (*tol_opt) opts.tol = tol;
    if (*seed_opt) opts.seed = seed;

    if (sweep) return run_sweep(scenario_path, opts, out_dir);
    const Scenario sc = load_scenario(scenario_path);
    return run_one(sc, opts, out_dir, fs::path(scenario_path).stem().string());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitHardError;
  }
}
