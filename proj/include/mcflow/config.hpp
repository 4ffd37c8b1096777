#ifndef MCFLOW_CONFIG_HPP_
#define MCFLOW_CONFIG_HPP_

// Run configuration: `key = value` lines with dotted keys, '#' comments.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mcflow/errors.hpp"
#include "mcflow/evolver.hpp"
#include "mcflow/analysis.hpp"
#include "mcflow/scenarios.hpp"

namespace mcflow {

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "scenario.name",      "scenario.R",           "scenario.a",
      "scenario.b",         "scenario.R0",          "scenario.r0",
      "scenario.bulb_r",    "scenario.neck_r",      "scenario.sep",
      "scenario.neck_scale", "grid.N",              "evolve.epsilon",
      "evolve.cfl",         "evolve.t_max",         "evolve.record_stride",
      "evolve.reinit_stride", "evolve.snapshots",   "analyze.tau",
      "analyze.tol",        "analyze.time_tol",     "analyze.angle_tol",
      "analyze.grad_floor", "analyze.cone_C",       "analyze.radii",
      "analyze.samples",    "analyze.delta",        "analyze.align_tol",
      "analyze.eps_search", "output.dir",           "seed"};
  return keys;
}

}  // namespace detail

//! Raw key/value store. Keys are kept sorted so echoes are deterministic.
class Config {
 public:
  static Config parse(std::istream& is, const std::string& source = "<config>") {
    Config c;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw Error(ErrorKind::config, source + ":" + std::to_string(lineno) + ": expected key = value");
      }
      c.set(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorKind::config, "cannot open config " + path);
    return parse(is, path);
  }

  void set(const std::string& key, const std::string& value) {
    if (key.empty()) throw Error(ErrorKind::config, "empty key");
    if (!detail::known_keys().count(key)) throw Error(ErrorKind::config, "unknown key '" + key + "'");
    values_[key] = value;
  }

  //! Applies a `key=value` override from the command line.
  void apply_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::config, "override '" + kv + "' is not key=value");
    set(detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::optional<std::string> get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<double> get_double(const std::string& key) const {
    auto v = get(key);
    if (!v) return std::nullopt;
    double out = 0.0;
    const auto* end = v->data() + v->size();
    auto [p, ec] = std::from_chars(v->data(), end, out);
    if (ec != std::errc() || p != end) throw Error(ErrorKind::config, key + ": '" + *v + "' is not a number");
    return out;
  }

  std::optional<long long> get_int(const std::string& key) const {
    auto v = get(key);
    if (!v) return std::nullopt;
    long long out = 0;
    const auto* end = v->data() + v->size();
    auto [p, ec] = std::from_chars(v->data(), end, out);
    if (ec != std::errc() || p != end) throw Error(ErrorKind::config, key + ": '" + *v + "' is not an integer");
    return out;
  }

  std::optional<bool> get_bool(const std::string& key) const {
    auto v = get(key);
    if (!v) return std::nullopt;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw Error(ErrorKind::config, key + ": '" + *v + "' is not a boolean");
  }

  std::optional<std::vector<double>> get_list(const std::string& key) const {
    auto v = get(key);
    if (!v) return std::nullopt;
    std::vector<double> out;
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      Config tmp;
      tmp.values_["x"] = detail::trim(item);
      out.push_back(*tmp.get_double("x"));
    }
    if (out.empty()) throw Error(ErrorKind::config, key + ": empty list");
    return out;
  }

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

//! Typed, validated view of a Config.
struct RunConfig {
  std::string scenario = "circle";
  std::map<std::string, double> scenario_params;
  int N = 128;
  EvolveParams evolve;
  bool snapshots = false;
  std::optional<double> tau;       // default h
  double tol = kDefaultClassifyTol;
  std::optional<double> time_tol;  // default 0.01 T
  double angle_tol_deg = 5.0;
  double grad_floor = kDefaultGradFloor;
  double cone_C = 1.0;
  std::vector<double> radii{0.2, 0.1, 0.05};
  int samples = 0;
  double delta = 0.2;
  double align_tol = 0.05;
  std::optional<double> eps_search;  // default 0.1 x domain radius
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  Config raw;

  static RunConfig from(const Config& c) {
    RunConfig r;
    r.raw = c;
    if (auto v = c.get("scenario.name")) r.scenario = *v;
    for (const char* p : {"R", "a", "b", "R0", "r0", "bulb_r", "neck_r", "sep", "neck_scale"}) {
      if (auto v = c.get_double(std::string("scenario.") + p)) r.scenario_params[p] = *v;
    }
    if (auto v = c.get_int("grid.N")) r.N = static_cast<int>(*v);
    if (auto v = c.get_double("evolve.epsilon")) r.evolve.epsilon = *v;
    if (auto v = c.get_double("evolve.cfl")) r.evolve.cfl = *v;
    if (auto v = c.get_double("evolve.t_max")) r.evolve.t_max = *v;
    if (auto v = c.get_int("evolve.record_stride")) r.evolve.record_stride = static_cast<int>(*v);
    if (auto v = c.get_int("evolve.reinit_stride")) r.evolve.reinit_stride = static_cast<int>(*v);
    if (auto v = c.get_bool("evolve.snapshots")) r.snapshots = *v;
    if (auto v = c.get_double("analyze.tau")) r.tau = *v;
    if (auto v = c.get_double("analyze.tol")) r.tol = *v;
    if (auto v = c.get_double("analyze.time_tol")) r.time_tol = *v;
    if (auto v = c.get_double("analyze.angle_tol")) r.angle_tol_deg = *v;
    if (auto v = c.get_double("analyze.grad_floor")) r.grad_floor = *v;
    if (auto v = c.get_double("analyze.cone_C")) r.cone_C = *v;
    if (auto v = c.get_list("analyze.radii")) r.radii = *v;
    if (auto v = c.get_int("analyze.samples")) r.samples = static_cast<int>(*v);
    if (auto v = c.get_double("analyze.delta")) r.delta = *v;
    if (auto v = c.get_double("analyze.align_tol")) r.align_tol = *v;
    if (auto v = c.get_double("analyze.eps_search")) r.eps_search = *v;
    if (auto v = c.get("output.dir")) r.output_dir = *v;
    if (auto v = c.get_int("seed")) {
      if (*v < 0) throw Error(ErrorKind::config, "seed must be non-negative");
      r.seed = static_cast<std::uint64_t>(*v);
    }
    r.validate();
    return r;
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorKind::config, m); };
    if (N < 8) fail("grid.N must be >= 8 (grid counts >= 8)");
    try {
      evolve.validate();
    } catch (const Error& e) {
      fail(e.what());
    }
    if (tau && !(*tau > 0.0)) fail("analyze.tau must be positive");
    if (!(tol > 0.0)) fail("analyze.tol must be positive");
    if (time_tol && !(*time_tol > 0.0)) fail("analyze.time_tol must be positive");
    if (!(angle_tol_deg > 0.0)) fail("analyze.angle_tol must be positive");
    if (!(grad_floor > 0.0)) fail("analyze.grad_floor must be positive");
    if (!(cone_C > 0.0)) fail("analyze.cone_C must be positive");
    if (!(delta > 0.0)) fail("analyze.delta must be positive");
    if (!(align_tol > 0.0)) fail("analyze.align_tol must be positive");
    if (eps_search && !(*eps_search > 0.0)) fail("analyze.eps_search must be positive");
    if (samples < 0) fail("analyze.samples must be >= 0");
    ConeSpec c;
    c.radii = radii;
    try {
      c.validate();
    } catch (const Error& e) {
      fail(std::string("analyze.radii: ") + e.what());
    }
  }

  Shape shape() const {
    try {
      return make_shape(scenario, scenario_params);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::config) throw;
      throw Error(ErrorKind::config, "scenario '" + scenario + "': " + e.what());
    }
  }

  AnalysisSettings settings() const {
    AnalysisSettings a;
    a.tau = tau;
    a.tol = tol;
    a.time_tol = time_tol;
    a.angle_tol_deg = angle_tol_deg;
    a.grad_floor = grad_floor;
    a.cone_C = cone_C;
    a.radii = radii;
    a.samples = samples;
    a.delta = delta;
    a.align_tol = align_tol;
    a.eps_search = eps_search;
    a.seed = seed;
    return a;
  }

  //! Resolved settings echoed into reports; output.* keys are excluded so a
  //! stored field analyzed elsewhere yields the same report.
  std::map<std::string, std::string> echo() const {
    std::map<std::string, std::string> out;
    for (const auto& [k, v] : raw.entries()) {
      if (k.rfind("output.", 0) == 0) continue;
      out[k] = v;
    }
    return out;
  }
};

}  // namespace mcflow

#endif  // MCFLOW_CONFIG_HPP_
