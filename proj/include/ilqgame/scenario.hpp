#pragma once

// Scenario files (JSON). Two game kinds share the format:
//
//   racing (default)
//     track.segments[]  {length_m, curvature_1pm, width_left_m, width_right_m}
//     players[]         {name?, x0 {s,V,n,chi,ax,ay}, costs {...}, gg {...},
//                        initial_inputs? [[jx, jy], ...]}
//     horizon           {K, dt}
//     solver            {mode, eta, max_iterations, tol, ego?}
//
//   random_lq ("game": "random_lq")
//     random_lq         {players, state_dim_per_player, input_dim, K, seed,
//                        linear_terms?, cross_input_terms?}
//     solver            {...}
//
// costs: {R: [[..],[..]] | [r_x, r_y], c_c, c_w, c_ax, c_a, c_g, l_veh, w_veh}
// gg:    {ax_max_table: [[V, a], ...], rho_table: [[V, rho], ...]}
//        or {a0, V_max, rho} for a_x_max(V) = a0 (1 - V/V_max), constant rho.

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ilqgame/ilq_solver.hpp"
#include "ilqgame/linear_quadratic_game.hpp"
#include "ilqgame/racing_game.hpp"

namespace ilqgame {

using Json = nlohmann::json;

/// Raised with every problem found in a scenario, one per line.
class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(std::vector<std::string> problems)
      : std::runtime_error(join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "invalid scenario:";
    for (const auto& p : v) out += "\n  " + p;
    return out;
  }
  std::vector<std::string> problems_;
};

struct ScenarioPlayer {
  std::string name;
  PlayerState x0;
  CostParams costs;
  GGDiamond gg;
  /// Empty means zero jerk at every stage.
  std::vector<PlayerInput> initial_inputs;

  bool operator==(const ScenarioPlayer&) const = default;
};

struct RacingScenario {
  Track track;
  std::vector<ScenarioPlayer> players;
  std::size_t horizon = 50;
  double dt = 0.1;
  SolverSettings solver;

  RacingGame game() const {
    std::vector<RacingPlayer> ps;
    for (const auto& p : players) ps.push_back({p.costs, p.gg});
    return RacingGame(track, std::move(ps), dt);
  }

  Vector initial_state() const {
    std::vector<PlayerState> xs;
    for (const auto& p : players) xs.push_back(p.x0);
    return pack_joint(xs);
  }

  std::vector<StageInputs> initial_inputs() const {
    std::vector<StageInputs> u(horizon, StageInputs(players.size(), InputVector::Zero()));
    for (std::size_t i = 0; i < players.size(); ++i) {
      for (std::size_t k = 0; k < players[i].initial_inputs.size() && k < horizon; ++k) {
        u[k][i] = players[i].initial_inputs[k].to_vector();
      }
    }
    return u;
  }

  /// Constant-velocity, constant-offset forecast used by the baseline.
  std::vector<Vector> opponent_prediction() const {
    return constant_velocity_prediction(initial_state(), horizon, dt);
  }

  bool operator==(const RacingScenario&) const = default;
};

struct LqScenario {
  RandomLqSpec spec;
  SolverSettings solver;

  LinearQuadraticGame game() const { return random_lq_game(spec); }
  /// Deterministic nonzero start derived from the seed.
  Vector initial_state() const {
    std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
    const auto n = spec.state_dim_per_player * static_cast<Eigen::Index>(spec.num_players);
    return detail::random_matrix(rng, n, 1, 1.0);
  }
};

using Scenario = std::variant<RacingScenario, LqScenario>;

namespace detail {

/// JSON pointer -> 1-based source line of the value it names.
using LineMap = std::map<std::string, std::size_t>;

/// Character iterator that counts the newlines preceding the character
/// consumed last, so a token terminated by a newline still reports its own
/// line.
class LineCountingIterator {
 public:
  using iterator_category = std::input_iterator_tag;
  using value_type = char;
  using difference_type = std::ptrdiff_t;
  using pointer = const char*;
  using reference = const char&;

  LineCountingIterator(const char* p, std::size_t* line) : p_(p), line_(line) {}
  reference operator*() const { return *p_; }
  LineCountingIterator& operator++() {
    if (pending_newline_) ++*line_;
    pending_newline_ = *p_ == '\n';
    ++p_;
    return *this;
  }
  LineCountingIterator operator++(int) {
    auto old = *this;
    ++*this;
    return old;
  }
  bool operator==(const LineCountingIterator& o) const { return p_ == o.p_; }

 private:
  const char* p_;
  std::size_t* line_;
  bool pending_newline_ = false;
};

/// SAX handler that records the line of every value by JSON pointer.
class LineRecorder : public nlohmann::json_sax<Json> {
 public:
  LineRecorder(const std::size_t* line, LineMap* out) : line_(line), out_(out) {}

  bool null() override { return value(); }
  bool boolean(bool) override { return value(); }
  bool number_integer(number_integer_t) override { return value(); }
  bool number_unsigned(number_unsigned_t) override { return value(); }
  bool number_float(number_float_t, const string_t&) override { return value(); }
  bool string(string_t&) override { return value(); }
  bool binary(binary_t&) override { return value(); }
  bool start_object(std::size_t) override { return open(false); }
  bool end_object() override { return close(); }
  bool start_array(std::size_t) override { return open(true); }
  bool end_array() override { return close(); }
  bool key(string_t& k) override {
    stack_.back().key = k;
    return true;
  }
  bool parse_error(std::size_t, const std::string&,
                   const nlohmann::detail::exception&) override {
    return false;
  }

 private:
  struct Frame {
    bool array;
    std::size_t index = 0;
    std::string key;
  };

  std::string path() const {
    std::string p;
    for (const auto& f : stack_) {
      p += '/';
      p += f.array ? std::to_string(f.index) : f.key;
    }
    return p;
  }
  void record() { out_->emplace(path(), *line_ + 1); }
  void advance() {
    if (!stack_.empty() && stack_.back().array) ++stack_.back().index;
  }
  bool value() {
    record();
    advance();
    return true;
  }
  bool open(bool array) {
    record();
    stack_.push_back({array});
    return true;
  }
  bool close() {
    stack_.pop_back();
    advance();
    return true;
  }

  const std::size_t* line_;
  LineMap* out_;
  std::vector<Frame> stack_;
};

inline LineMap line_map(const std::string& text) {
  LineMap out;
  std::size_t line = 0;
  LineRecorder rec(&line, &out);
  Json::sax_parse(LineCountingIterator(text.data(), &line),
                  LineCountingIterator(text.data() + text.size(), &line), &rec);
  return out;
}

/// Collects problems while reading a JSON document; each is prefixed with
/// the JSON pointer of the offending value and, when the source text is
/// known, its line (or the line of the closest enclosing value).
class Reader {
 public:
  std::vector<std::string> problems;
  const LineMap* lines = nullptr;

  void fail(const std::string& where, const std::string& what) {
    problems.push_back(locate(where) + where + ": " + what);
  }

  std::string locate(std::string where) const {
    if (!lines) return {};
    while (true) {
      if (const auto it = lines->find(where); it != lines->end()) {
        return "line " + std::to_string(it->second) + ": ";
      }
      if (where.empty()) return {};
      where.erase(where.rfind('/'));
    }
  }

  const Json* field(const Json& obj, const std::string& where, const char* key,
                    bool required = true) {
    if (!obj.is_object()) {
      fail(where, "expected an object");
      return nullptr;
    }
    const auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) fail(where + "/" + key, "missing required field");
      return nullptr;
    }
    return &*it;
  }

  double number(const Json& obj, const std::string& where, const char* key,
                double fallback = 0.0, bool required = true) {
    const Json* v = field(obj, where, key, required);
    if (!v) return fallback;
    if (!v->is_number()) {
      fail(where + "/" + key, "expected a number");
      return fallback;
    }
    return v->get<double>();
  }

  std::size_t count(const Json& obj, const std::string& where, const char* key,
                    std::size_t fallback, bool required = true) {
    const Json* v = field(obj, where, key, required);
    if (!v) return fallback;
    if (!v->is_number_integer() || v->get<long long>() < 0) {
      fail(where + "/" + key, "expected a non-negative integer");
      return fallback;
    }
    return v->get<std::size_t>();
  }

  const Json* array(const Json& obj, const std::string& where, const char* key,
                    bool required = true) {
    const Json* v = field(obj, where, key, required);
    if (v && !v->is_array()) {
      fail(where + "/" + key, "expected an array");
      return nullptr;
    }
    return v;
  }

  std::vector<std::pair<double, double>> table(const Json& arr,
                                               const std::string& where) {
    std::vector<std::pair<double, double>> out;
    for (std::size_t k = 0; k < arr.size(); ++k) {
      const auto& e = arr[k];
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
        fail(where + "/" + std::to_string(k), "expected [V, value]");
        continue;
      }
      out.emplace_back(e[0].get<double>(), e[1].get<double>());
    }
    return out;
  }
};

inline SolverSettings read_solver(Reader& rd, const Json& root) {
  SolverSettings s;
  const Json* js = rd.field(root, "", "solver", false);
  if (!js) return s;
  if (const Json* m = rd.field(*js, "/solver", "mode", false)) {
    try {
      s.mode = solver_mode_from_string(m->get<std::string>());
    } catch (const std::exception& e) {
      rd.fail("/solver/mode", e.what());
    }
  }
  s.eta = rd.number(*js, "/solver", "eta", s.eta, false);
  s.max_iterations = rd.count(*js, "/solver", "max_iterations", s.max_iterations, false);
  s.convergence_tol = rd.number(*js, "/solver", "tol", s.convergence_tol, false);
  s.ego = rd.count(*js, "/solver", "ego", s.ego, false);
  for (const auto& v : s.violations()) rd.fail("/solver", v);
  return s;
}

inline CostParams read_costs(Reader& rd, const Json& jc, const std::string& where) {
  CostParams c;
  if (const Json* R = rd.field(jc, where, "R")) {
    const std::string at = where + "/R";
    if (R->is_array() && R->size() == 2 && (*R)[0].is_number() && (*R)[1].is_number()) {
      c.R_input = Eigen::Vector2d((*R)[0].get<double>(), (*R)[1].get<double>()).asDiagonal();
    } else if (R->is_array() && R->size() == 2 && (*R)[0].is_array() &&
               (*R)[1].is_array() && (*R)[0].size() == 2 && (*R)[1].size() == 2) {
      for (int r = 0; r < 2; ++r) {
        for (int col = 0; col < 2; ++col) {
          const auto& e = (*R)[r][col];
          if (!e.is_number()) {
            rd.fail(at, "expected numbers");
          } else {
            c.R_input(r, col) = e.get<double>();
          }
        }
      }
    } else {
      rd.fail(at, "expected [r_x, r_y] or a 2x2 matrix");
    }
  }
  c.c_c = rd.number(jc, where, "c_c");
  c.c_w = rd.number(jc, where, "c_w");
  c.c_ax = rd.number(jc, where, "c_ax");
  c.c_a = rd.number(jc, where, "c_a");
  c.c_g = rd.number(jc, where, "c_g");
  c.l_veh = rd.number(jc, where, "l_veh", 1.0);
  c.w_veh = rd.number(jc, where, "w_veh", 1.0);
  for (const auto& v : c.violations()) rd.fail(where, v);
  return c;
}

inline GGDiamond read_gg(Reader& rd, const Json& jg, const std::string& where) {
  try {
    if (jg.is_object() && jg.contains("ax_max_table")) {
      const Json* ax = rd.array(jg, where, "ax_max_table");
      const Json* rho = rd.array(jg, where, "rho_table");
      if (!ax || !rho) return {};
      const auto ax_t = rd.table(*ax, where + "/ax_max_table");
      const auto rho_t = rd.table(*rho, where + "/rho_table");
      if (ax_t.empty() || rho_t.empty()) {
        rd.fail(where, "gg tables must not be empty");
        return {};
      }
      return GGDiamond(PiecewiseLinear(ax_t), PiecewiseLinear(rho_t));
    }
    const std::size_t before = rd.problems.size();
    const double a0 = rd.number(jg, where, "a0");
    const double v_max = rd.number(jg, where, "V_max");
    const double rho = rd.number(jg, where, "rho");
    if (rd.problems.size() != before) return {};
    if (!(v_max > 0.0)) {
      rd.fail(where + "/V_max", "must be > 0");
      return {};
    }
    return GGDiamond::linear(a0, v_max, rho);
  } catch (const std::invalid_argument& e) {
    rd.fail(where, e.what());
  }
  return {};
}

inline Json table_json(const PiecewiseLinear& t) {
  Json out = Json::array();
  for (const auto& [x, y] : t.knots()) out.push_back({x, y});
  return out;
}

inline LqScenario read_lq(Reader& rd, const Json& root) {
  LqScenario sc;
  if (const Json* j = rd.field(root, "", "random_lq")) {
    const std::string at = "/random_lq";
    sc.spec.num_players = rd.count(*j, at, "players", 2);
    sc.spec.state_dim_per_player =
        static_cast<Eigen::Index>(rd.count(*j, at, "state_dim_per_player", 2));
    sc.spec.input_dim = static_cast<Eigen::Index>(rd.count(*j, at, "input_dim", 1));
    sc.spec.horizon = rd.count(*j, at, "K", 10);
    sc.spec.seed = rd.count(*j, at, "seed", 1, false);
    if (const Json* b = rd.field(*j, at, "linear_terms", false)) {
      sc.spec.linear_terms = b->is_boolean() ? b->get<bool>() : true;
    }
    if (const Json* b = rd.field(*j, at, "cross_input_terms", false)) {
      sc.spec.cross_input_terms = b->is_boolean() ? b->get<bool>() : false;
    }
    if (sc.spec.num_players < 1) rd.fail(at + "/players", "must be >= 1");
    if (sc.spec.state_dim_per_player < 1) rd.fail(at + "/state_dim_per_player", "must be >= 1");
    if (sc.spec.input_dim < 1) rd.fail(at + "/input_dim", "must be >= 1");
  }
  sc.solver = read_solver(rd, root);
  return sc;
}

inline RacingScenario read_racing(Reader& rd, const Json& root) {
  RacingScenario sc;

  // Track
  std::vector<TrackSegment> segments;
  if (const Json* jt = rd.field(root, "", "track")) {
    if (const Json* segs = rd.array(*jt, "/track", "segments")) {
      if (segs->empty()) rd.fail("/track/segments", "at least one segment required");
      for (std::size_t k = 0; k < segs->size(); ++k) {
        const std::string at = "/track/segments/" + std::to_string(k);
        const auto& js = (*segs)[k];
        TrackSegment seg{rd.number(js, at, "length_m"), rd.number(js, at, "curvature_1pm"),
                         rd.number(js, at, "width_left_m"), rd.number(js, at, "width_right_m")};
        if (!(seg.length > 0.0)) rd.fail(at + "/length_m", "must be > 0");
        if (!(seg.width_left > 0.0)) rd.fail(at + "/width_left_m", "must be > 0");
        if (!(seg.width_right > 0.0)) rd.fail(at + "/width_right_m", "must be > 0");
        if (!(std::abs(seg.curvature) * std::max(seg.width_left, seg.width_right) < 1.0)) {
          rd.fail(at, "|curvature| * max width must be < 1 (curvilinear singularity inside corridor)");
        }
        segments.push_back(seg);
      }
    }
  }
  bool track_ok = false;
  try {
    sc.track = Track(segments);
    track_ok = true;
  } catch (const std::invalid_argument&) {
    // Already reported above.
  }

  // Horizon
  if (const Json* jh = rd.field(root, "", "horizon")) {
    sc.horizon = rd.count(*jh, "/horizon", "K", sc.horizon);
    sc.dt = rd.number(*jh, "/horizon", "dt", sc.dt);
    if (!(sc.dt > 0.0)) rd.fail("/horizon/dt", "must be > 0");
  }

  // Players
  if (const Json* jp = rd.array(root, "", "players")) {
    if (jp->empty()) rd.fail("/players", "at least one player required");
    for (std::size_t i = 0; i < jp->size(); ++i) {
      const std::string at = "/players/" + std::to_string(i);
      const auto& pj = (*jp)[i];
      ScenarioPlayer p;
      p.name = "p" + std::to_string(i + 1);
      if (const Json* nm = rd.field(pj, at, "name", false)) {
        if (nm->is_string()) {
          p.name = nm->get<std::string>();
        } else {
          rd.fail(at + "/name", "expected a string");
        }
      }
      if (const Json* jx = rd.field(pj, at, "x0")) {
        const std::string ax = at + "/x0";
        p.x0 = {rd.number(*jx, ax, "s"),  rd.number(*jx, ax, "V"),
                rd.number(*jx, ax, "n"),  rd.number(*jx, ax, "chi", 0.0, false),
                rd.number(*jx, ax, "ax", 0.0, false), rd.number(*jx, ax, "ay", 0.0, false)};
        if (!(p.x0.V >= kMinSpeed)) {
          rd.fail(ax + "/V", "must be >= " + std::to_string(kMinSpeed));
        }
        if (track_ok) {
          if (!(p.x0.s >= 0.0 && p.x0.s <= sc.track.total_length())) {
            rd.fail(ax + "/s", "outside the track");
          } else {
            const double kappa = sc.track.curvature_at(p.x0.s);
            const auto w = sc.track.width_at(p.x0.s);
            if (!(1.0 - p.x0.n * kappa > 0.0)) {
              rd.fail(ax + "/n", "curvilinear singularity: 1 - n*kappa <= 0 at the start");
            }
            if (p.x0.n > w.left || p.x0.n < -w.right) {
              rd.fail(ax + "/n", "initial lateral offset outside the track corridor");
            }
          }
        }
      }
      if (const Json* jc = rd.field(pj, at, "costs")) p.costs = read_costs(rd, *jc, at + "/costs");
      if (const Json* jg = rd.field(pj, at, "gg")) p.gg = read_gg(rd, *jg, at + "/gg");
      if (const Json* ju = rd.array(pj, at, "initial_inputs", false)) {
        for (std::size_t k = 0; k < ju->size(); ++k) {
          const auto& e = (*ju)[k];
          if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
            rd.fail(at + "/initial_inputs/" + std::to_string(k), "expected [jx, jy]");
            continue;
          }
          p.initial_inputs.push_back({e[0].get<double>(), e[1].get<double>()});
        }
        if (!p.initial_inputs.empty() && p.initial_inputs.size() != sc.horizon) {
          rd.fail(at + "/initial_inputs", "must have exactly K entries");
        }
      }
      sc.players.push_back(std::move(p));
    }
  }

  sc.solver = read_solver(rd, root);
  if (!sc.players.empty() && sc.solver.ego >= sc.players.size()) {
    rd.fail("/solver/ego", "not a valid player index");
  }
  return sc;
}

}  // namespace detail

/// Parses and validates a scenario document. Throws ScenarioError listing
/// every problem. `lines`, if given, adds source lines to the messages.
inline Scenario scenario_from_json(const Json& root,
                                   const detail::LineMap* lines = nullptr) {
  detail::Reader rd;
  rd.lines = lines;
  if (!root.is_object()) throw ScenarioError({rd.locate("") + "/: expected an object"});
  std::string kind = "racing";
  if (const auto it = root.find("game"); it != root.end()) {
    if (it->is_string()) {
      kind = it->get<std::string>();
    } else {
      rd.fail("/game", "expected a string");
    }
  }
  Scenario out;
  if (kind == "racing") {
    out = detail::read_racing(rd, root);
  } else if (kind == "random_lq") {
    out = detail::read_lq(rd, root);
  } else {
    rd.fail("/game", "unknown game kind '" + kind + "' (expected racing | random_lq)");
  }
  if (!rd.problems.empty()) throw ScenarioError(rd.problems);
  return out;
}

inline RacingScenario racing_scenario_from_json(const Json& root,
                                                const detail::LineMap* lines = nullptr) {
  auto sc = scenario_from_json(root, lines);
  if (auto* r = std::get_if<RacingScenario>(&sc)) return std::move(*r);
  throw ScenarioError({"/game: expected a racing scenario"});
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Parsed document plus the source line of every value.
struct SourceDocument {
  Json root;
  detail::LineMap lines;
};

inline SourceDocument parse_json_text(const std::string& text, const std::string& origin) {
  SourceDocument doc;
  try {
    doc.root = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ScenarioError({origin + ": " + e.what()});
  }
  doc.lines = detail::line_map(text);
  return doc;
}

inline Json parse_json_file(const std::filesystem::path& path) {
  return parse_json_text(read_text_file(path), path.string()).root;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  const auto doc = parse_json_text(read_text_file(path), path.string());
  return scenario_from_json(doc.root, &doc.lines);
}

inline RacingScenario load_racing_scenario(const std::filesystem::path& path) {
  const auto doc = parse_json_text(read_text_file(path), path.string());
  return racing_scenario_from_json(doc.root, &doc.lines);
}

inline Json solver_to_json(const SolverSettings& s) {
  return {{"mode", to_string(s.mode)},
          {"eta", s.eta},
          {"max_iterations", s.max_iterations},
          {"tol", s.convergence_tol},
          {"ego", s.ego}};
}

inline Json to_json(const RacingScenario& sc) {
  Json segs = Json::array();
  for (const auto& s : sc.track.segments()) {
    segs.push_back({{"length_m", s.length},
                    {"curvature_1pm", s.curvature},
                    {"width_left_m", s.width_left},
                    {"width_right_m", s.width_right}});
  }
  Json players = Json::array();
  for (const auto& p : sc.players) {
    const auto& c = p.costs;
    Json jp = {
        {"name", p.name},
        {"x0", {{"s", p.x0.s}, {"V", p.x0.V}, {"n", p.x0.n}, {"chi", p.x0.chi},
                {"ax", p.x0.a_x}, {"ay", p.x0.a_y}}},
        {"costs", {{"R", {{c.R_input(0, 0), c.R_input(0, 1)}, {c.R_input(1, 0), c.R_input(1, 1)}}},
                   {"c_c", c.c_c}, {"c_w", c.c_w}, {"c_ax", c.c_ax}, {"c_a", c.c_a},
                   {"c_g", c.c_g}, {"l_veh", c.l_veh}, {"w_veh", c.w_veh}}},
        {"gg", {{"ax_max_table", detail::table_json(p.gg.ax_max())},
                {"rho_table", detail::table_json(p.gg.rho())}}}};
    if (!p.initial_inputs.empty()) {
      Json u = Json::array();
      for (const auto& in : p.initial_inputs) u.push_back({in.j_x, in.j_y});
      jp["initial_inputs"] = std::move(u);
    }
    players.push_back(std::move(jp));
  }
  return {{"game", "racing"},
          {"track", {{"segments", segs}}},
          {"players", players},
          {"horizon", {{"K", sc.horizon}, {"dt", sc.dt}}},
          {"solver", solver_to_json(sc.solver)}};
}

}  // namespace ilqgame
