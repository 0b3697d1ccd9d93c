#pragma once

// Trajectory CSV and run-metadata JSON.
//
// CSV: header "t,p1_<field>,...,pN_<field>", one row per stage k = 0..K,
// floats with 17 significant digits; input columns are empty on the last row.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ilqgame/game.hpp"
#include "ilqgame/ilq_solver.hpp"

namespace ilqgame {

/// Column names of one player's state and input blocks.
struct PlayerFields {
  std::vector<std::string> state;
  std::vector<std::string> input;
};

inline PlayerFields racing_fields() {
  return {{"s", "V", "n", "chi", "ax", "ay"}, {"jx", "jy"}};
}

/// x0, x1, ... / u0, u1, ... for a game without named fields.
template <DynamicGame G>
std::vector<PlayerFields> generic_fields(const G& game) {
  std::vector<PlayerFields> out;
  for (std::size_t i = 0; i < game.num_players(); ++i) {
    PlayerFields f;
    for (Eigen::Index d = 0; d < game.player_state_dim(i); ++d) f.state.push_back("x" + std::to_string(d));
    for (Eigen::Index d = 0; d < game.input_dim(i); ++d) f.input.push_back("u" + std::to_string(d));
    out.push_back(std::move(f));
  }
  return out;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct TrajectoryLayout {
  std::vector<PlayerFields> fields;
  std::vector<Eigen::Index> state_offsets;
};

template <DynamicGame G>
TrajectoryLayout layout_of(const G& game, std::vector<PlayerFields> fields) {
  TrajectoryLayout out{std::move(fields), {}};
  for (std::size_t i = 0; i < game.num_players(); ++i) {
    out.state_offsets.push_back(game.player_state_offset(i));
  }
  return out;
}

inline std::vector<std::string> csv_header(const TrajectoryLayout& layout) {
  std::vector<std::string> cols{"t"};
  for (std::size_t i = 0; i < layout.fields.size(); ++i) {
    const std::string prefix = "p" + std::to_string(i + 1) + "_";
    for (const auto& f : layout.fields[i].state) cols.push_back(prefix + f);
    for (const auto& f : layout.fields[i].input) cols.push_back(prefix + f);
  }
  return cols;
}

inline void write_trajectory_csv(std::ostream& out, const GameTrajectory& traj,
                                 double dt, const TrajectoryLayout& layout) {
  const auto header = csv_header(layout);
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  const std::size_t K = traj.horizon();
  for (std::size_t k = 0; k <= K; ++k) {
    out << format_double(dt * static_cast<double>(k));
    for (std::size_t i = 0; i < layout.fields.size(); ++i) {
      const auto& f = layout.fields[i];
      for (std::size_t d = 0; d < f.state.size(); ++d) {
        out << ',' << format_double(traj.states[k](layout.state_offsets[i] + static_cast<Eigen::Index>(d)));
      }
      for (std::size_t d = 0; d < f.input.size(); ++d) {
        out << ',';
        if (k < K) out << format_double(traj.inputs[k][i](static_cast<Eigen::Index>(d)));
      }
    }
    out << '\n';
  }
}

/// Parsed CSV: column names and rows; empty cells become NaN.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == name) return c;
    }
    throw std::out_of_range("no column named " + name);
  }
};

inline CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::stringstream ss(l);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV");
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != t.header.size()) throw std::runtime_error("ragged CSV row");
    std::vector<double> row;
    for (const auto& c : cells) {
      row.push_back(c.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(c));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

struct RunMetadata {
  SolverMode mode = SolverMode::kFeedback;
  double eta = 0.0;
  double tol = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> costs;
  std::vector<double> change_norms;
  std::optional<std::vector<BestResponseGap>> gaps;
};

inline nlohmann::json to_json(const RunMetadata& m) {
  nlohmann::json j = {{"mode", to_string(m.mode)},
                      {"eta", m.eta},
                      {"tol", m.tol},
                      {"iterations", m.iterations},
                      {"converged", m.converged},
                      {"costs", m.costs},
                      {"change_norms", m.change_norms}};
  if (m.gaps) {
    nlohmann::json gaps = nlohmann::json::array();
    nlohmann::json detail = nlohmann::json::array();
    for (const auto& g : *m.gaps) {
      gaps.push_back(g.gap);
      detail.push_back({{"gap", g.gap},
                        {"relative", g.relative},
                        {"solution_cost", g.solution_cost},
                        {"best_response_cost", g.best_response_cost},
                        {"status", g.verified ? "verified" : "unverifiable"},
                        {"iterations", g.iterations}});
    }
    j["gaps"] = std::move(gaps);
    j["gap_details"] = std::move(detail);
  }
  return j;
}

inline RunMetadata make_metadata(const SolveReport& report, const SolverSettings& s) {
  RunMetadata m;
  m.mode = s.mode;
  m.eta = s.eta;
  m.tol = s.convergence_tol;
  m.iterations = report.iterations;
  m.converged = report.converged;
  m.costs = report.trajectory.costs;
  m.change_norms = report.change_norms;
  return m;
}

/// Writes trajectory.csv and metadata.json into `dir` (created if needed).
inline void export_run(const std::filesystem::path& dir, const GameTrajectory& traj,
                       double dt, const TrajectoryLayout& layout,
                       const RunMetadata& meta) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::ofstream csv(dir / "trajectory.csv");
  if (!csv) throw std::runtime_error("cannot write " + (dir / "trajectory.csv").string());
  write_trajectory_csv(csv, traj, dt, layout);
  std::ofstream js(dir / "metadata.json");
  if (!js) throw std::runtime_error("cannot write " + (dir / "metadata.json").string());
  js << to_json(meta).dump(2) << '\n';
  if (!csv || !js) throw std::runtime_error("I/O error writing to " + dir.string());
}

}  // namespace ilqgame
