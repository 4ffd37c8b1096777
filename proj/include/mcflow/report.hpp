#ifndef MCFLOW_REPORT_HPP_
#define MCFLOW_REPORT_HPP_

// Report and figure emission: JSON report, profile CSVs, PGM heatmaps,
// SHA-256 digests for the run manifest.

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcflow/analysis.hpp"
#include "mcflow/errors.hpp"
#include "mcflow/grid.hpp"

namespace mcflow {

inline constexpr const char* kToolVersion = "0.1.0";

using Json = nlohmann::ordered_json;

//! Shortest decimal text that round-trips to the same double.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

namespace detail {

inline Json vec_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json rows_json(const std::vector<ProfileRow>& rows) {
  Json a = Json::array();
  for (const auto& r : rows) a.push_back({{"radius", r.radius}, {"value", r.value}, {"kept", r.kept}});
  return a;
}

template <class T, class F>
Json outcome_json(std::size_t point, const Outcome<T>& o, F&& body) {
  Json j{{"point", point}};
  if (o.value) {
    body(j, *o.value);
  } else {
    j["error"] = o.error;
  }
  return j;
}

}  // namespace detail

inline Json grid_json(const GridSpec& s) {
  Json counts = Json::array(), origin = Json::array();
  for (int a = 0; a < s.dim; ++a) {
    counts.push_back(s.counts[a]);
    origin.push_back(s.origin[a]);
  }
  return {{"dim", s.dim}, {"counts", counts}, {"origin", origin}, {"h", s.h},
          {"axisymmetric", s.axisymmetric}};
}

inline Json report_json(const Analysis& a, const GridSpec& spec, const AnalysisSettings& cfg,
                        const std::map<std::string, std::string>& echo) {
  const auto& r = a.report;
  Json j;
  j["verdict"] = to_string(r.verdict);
  Json reasons = Json::array();
  for (const auto& x : r.verdict_reasons) {
    reasons.push_back({{"condition", x.condition}, {"passed", x.passed}, {"detail", x.detail}});
  }
  j["verdict_reasons"] = reasons;
  j["extinction_time"] = a.T;
  Json node = Json::array();
  for (int d = 0; d < spec.dim; ++d) node.push_back(a.extinction_node[d]);
  j["extinction_node"] = node;
  j["tolerances"] = {{"tau", a.tau},
                     {"classify_tol", cfg.tol},
                     {"time_tol", a.time_tol},
                     {"angle_tol_deg", cfg.angle_tol_deg},
                     {"grad_floor", cfg.grad_floor},
                     {"cone_C", cfg.cone_C},
                     {"radii", cfg.radii},
                     {"samples", cfg.samples},
                     {"delta", cfg.delta},
                     {"align_tol", cfg.align_tol},
                     {"eps_search", a.eps_search},
                     {"seed", cfg.seed}};
  Json conf = Json::object();
  for (const auto& [k, v] : echo) conf[k] = v;
  j["config"] = conf;
  j["grid"] = grid_json(spec);

  Json clusters = Json::array();
  for (const auto& c : r.time_clusters) clusters.push_back({{"time", c.time}, {"members", c.members}});
  j["time_clusters"] = clusters;

  Json manifolds = Json::array();
  for (std::size_t i = 0; i < r.manifolds.size(); ++i) {
    const auto& m = r.manifolds[i];
    Json mj{{"k", m.k},
            {"n_points", m.members.size()},
            {"closed", m.closed},
            {"fitted", m.fitted},
            {"max_tangency_deg", detail::number_or_null(m.max_tangency * 180.0 / std::numbers::pi)},
            {"u_spread", m.u_spread},
            {"members", m.members}};
    if (i < a.components.size() && m.k >= 1) {
      const auto& l = a.components[i].lipschitz;
      if (l.value) {
        mj["hessian_tangent_lipschitz"] = {
            {"max_ratio", l.value->max_ratio ? Json(*l.value->max_ratio) : Json(nullptr)},
            {"pairs", l.value->pairs},
            {"no_variation", l.value->no_variation}};
      } else {
        mj["hessian_tangent_lipschitz"] = {{"error", l.error}};
      }
    }
    manifolds.push_back(mj);
  }
  j["manifolds"] = manifolds;

  Json points = Json::array();
  for (const auto& p : r.points) {
    points.push_back({{"position", detail::vec_json(p.position)},
                      {"u", p.u_value},
                      {"eigenvalues", detail::vec_json(p.hess.eigen().values)},
                      {"k", p.stratum_k ? Json(*p.stratum_k) : Json(nullptr)},
                      {"residual", p.cylinder_residual}});
  }
  j["points"] = points;
  j["unclassified"] = r.unclassified;

  Json cone = Json::array(), align = Json::array(), resc = Json::array(), trans = Json::array(),
       local = Json::array();
  for (const auto& c : a.components) {
    const auto p = c.representative;
    cone.push_back(detail::outcome_json(p, c.cone, [](Json& o, const auto& v) { o["rows"] = detail::rows_json(v); }));
    local.push_back({{"point", p},
                     {"local_max", c.local.local_max},
                     {"separation", c.local.separation},
                     {"ball_max", c.local.ball_max}});
    if (!c.alignment.value && c.alignment.error.empty()) continue;  // k = 0
    align.push_back(detail::outcome_json(p, c.alignment, [](Json& o, const auto& v) { o["rows"] = detail::rows_json(v); }));
    resc.push_back(detail::outcome_json(p, c.rescaled, [](Json& o, const auto& v) {
      Json rows = Json::array();
      for (const auto& r : v) {
        rows.push_back({{"radius", r.radius},
                        {"normal_radial", r.normal_radial},
                        {"speed_ratio", r.speed_ratio},
                        {"spectrum", detail::vec_json(r.spectrum)},
                        {"spectrum_error", r.spectrum_error},
                        {"curvature_drift", r.curvature_drift},
                        {"kept", r.kept}});
      }
      o["rows"] = rows;
    }));
    trans.push_back(detail::outcome_json(p, c.transverse, [](Json& o, const auto& v) {
      o["position"] = detail::vec_json(v.position);
      o["u"] = v.u;
      o["transverse_gradient"] = v.transverse_gradient;
    }));
  }
  j["profiles"] = {{"cone_continuity", cone}, {"normal_alignment", align}, {"rescaled", resc}};
  j["transverse_max"] = trans;
  j["local_structure"] = local;
  j["residual"] = {{"nodes", a.residual.values.size()},
                   {"median_abs", detail::number_or_null(a.residual.median_abs())}};
  return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::format, "cannot write " + path.string());
  os << text;
  if (!os) throw Error(ErrorKind::format, "failed writing " + path.string());
}

inline std::string profiles_csv(const Analysis& a, bool alignment) {
  std::ostringstream os;
  os << "point,radius,value,kept\n";
  for (const auto& c : a.components) {
    const auto& o = alignment ? c.alignment : c.cone;
    if (!o.value) continue;
    for (const auto& r : *o.value) {
      os << c.representative << ',' << fmt(r.radius) << ',' << fmt(r.value) << ',' << r.kept << '\n';
    }
  }
  return os.str();
}

inline std::string rescaled_csv(const Analysis& a) {
  std::ostringstream os;
  int n = 0;
  for (const auto& c : a.components) {
    if (c.rescaled.value && !c.rescaled.value->empty()) {
      n = static_cast<int>(c.rescaled.value->front().spectrum.size());
      break;
    }
  }
  os << "point,radius,normal_radial,speed_ratio";
  for (int i = 0; i < n; ++i) os << ",spectrum_" << i;
  os << ",spectrum_error,curvature_drift,kept\n";
  for (const auto& c : a.components) {
    if (!c.rescaled.value) continue;
    for (const auto& r : *c.rescaled.value) {
      os << c.representative << ',' << fmt(r.radius) << ',' << fmt(r.normal_radial) << ','
         << fmt(r.speed_ratio);
      for (int i = 0; i < n; ++i) os << ',' << fmt(r.spectrum(i));
      os << ',' << fmt(r.spectrum_error) << ',' << fmt(r.curvature_drift) << ',' << r.kept << '\n';
    }
  }
  return os.str();
}

inline std::string points_csv(const SingularSetReport& r) {
  std::ostringstream os;
  const int d = r.points.empty() ? 0 : static_cast<int>(r.points.front().position.size());
  os << "index";
  for (int i = 0; i < d; ++i) os << ",x" << i;
  os << ",u,k,residual";
  for (int i = 0; i < d; ++i) os << ",eig" << i;
  os << '\n';
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    const auto& p = r.points[i];
    os << i;
    for (int a = 0; a < d; ++a) os << ',' << fmt(p.position(a));
    os << ',' << fmt(p.u_value) << ',' << (p.stratum_k ? std::to_string(*p.stratum_k) : "") << ','
       << fmt(p.cylinder_residual);
    const auto ev = p.hess.eigen().values;
    for (int a = 0; a < d; ++a) os << ',' << fmt(ev(a));
    os << '\n';
  }
  return os.str();
}

//! Node-wise CSV (index, position, value) of a sparse set of nodes.
inline std::string nodes_csv(const GridSpec& s, const std::vector<std::size_t>& nodes,
                             const std::vector<double>& values, const std::string& name) {
  std::ostringstream os;
  const char* ix[] = {"i", "j", "k"};
  const char* px[] = {"x", "y", "z"};
  for (int a = 0; a < s.dim; ++a) os << ix[a] << ',';
  for (int a = 0; a < s.dim; ++a) os << (s.axisymmetric && a == 1 ? "rho" : px[a]) << ',';
  os << name << '\n';
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    const Index idx = s.unflatten(nodes[n]);
    const Vec p = s.position(idx);
    for (int a = 0; a < s.dim; ++a) os << idx[a] << ',';
    for (int a = 0; a < s.dim; ++a) os << fmt(p(a)) << ',';
    os << fmt(values[n]) << '\n';
  }
  return os.str();
}

inline std::string field_csv(const ScalarField& f) {
  std::vector<std::size_t> nodes;
  std::vector<double> values;
  for (std::size_t k = 0; k < f.values.size(); ++k) {
    if (std::isnan(f.values[k])) continue;
    nodes.push_back(k);
    values.push_back(f.values[k]);
  }
  return nodes_csv(f.spec, nodes, values, f.label == FieldLabel::arrival ? "u" : "v");
}

//! 8-bit PGM (P5) of a nodal field: rows follow the first axis, columns the
//! second; 3D fields show the middle slice of the first axis. NaN maps to 0,
//! finite values ramp linearly from 1 (min) to 255 (max).
inline std::string pgm(const GridSpec& s, const std::vector<double>& values) {
  std::size_t offset = 0;
  int rows = s.counts[0], cols = s.counts[1];
  std::size_t row_stride = static_cast<std::size_t>(s.counts[1]), col_stride = 1;
  if (s.dim == 3) {
    const auto st = s.strides();
    offset = static_cast<std::size_t>(s.counts[0] / 2) * st[0];
    rows = s.counts[1];
    cols = s.counts[2];
    row_stride = st[1];
    col_stride = st[2];
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double v = values[offset + r * row_stride + c * col_stride];
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo)) lo = hi = 0.0;
  std::ostringstream os;
  os << "P5\n# min=" << fmt(lo) << " max=" << fmt(hi) << "\n" << cols << ' ' << rows << "\n255\n";
  std::string pixels(static_cast<std::size_t>(rows) * cols, '\0');
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double v = values[offset + r * row_stride + c * col_stride];
      unsigned char px = 0;
      if (std::isfinite(v)) {
        const double t = hi > lo ? (v - lo) / (hi - lo) : 1.0;
        px = static_cast<unsigned char>(1 + std::lround(254.0 * std::clamp(t, 0.0, 1.0)));
      }
      pixels[static_cast<std::size_t>(r) * cols + c] = static_cast<char>(px);
    }
  }
  os << pixels;
  return os.str();
}

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::format, "SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xF]);
  }
  return out;
}

inline std::string file_sha256(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::format, "cannot read " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return sha256_hex(bytes);
}

//! Run manifest: config echo, tool version, per-stage timings and digests of
//! every input and output file (paths relative to the output directory).
struct Manifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::vector<std::pair<std::string, double>> timings;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::string> outputs;  // relative to dir

  Json to_json(const std::filesystem::path& dir) const {
    Json j;
    j["tool"] = "mcflow";
    j["version"] = kToolVersion;
    j["command"] = command;
    Json conf = Json::object();
    for (const auto& [k, v] : config) conf[k] = v;
    j["config"] = conf;
    Json t = Json::object();
    for (const auto& [k, v] : timings) t[k] = v;
    j["timings_s"] = t;
    Json in = Json::array();
    for (const auto& p : inputs) in.push_back({{"path", p.string()}, {"sha256", file_sha256(p)}});
    j["inputs"] = in;
    Json out = Json::array();
    for (const auto& name : outputs) {
      const auto p = dir / name;
      out.push_back({{"path", name},
                     {"bytes", std::filesystem::file_size(p)},
                     {"sha256", file_sha256(p)}});
    }
    j["outputs"] = out;
    return j;
  }
};

}  // namespace mcflow

#endif  // MCFLOW_REPORT_HPP_
