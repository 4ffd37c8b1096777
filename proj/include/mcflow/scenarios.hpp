#ifndef MCFLOW_SCENARIOS_HPP_
#define MCFLOW_SCENARIOS_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>

#include "mcflow/errors.hpp"
#include "mcflow/grid.hpp"
#include "mcflow/linalg.hpp"
#include "mcflow/types.hpp"

namespace mcflow {

enum class ShapeMode { full, axisymmetric };

struct ExpectedOutcome {
  std::optional<Verdict> verdict;
  std::optional<int> k;
  std::optional<int> n_singular_times;
  std::optional<double> T;
};

//! Initial hypersurface given as the zero set of an implicit function that is
//! positive inside. In axisymmetric mode positions are (x, rho).
struct Shape {
  std::string name;
  std::function<double(const Vec&)> implicit;
  ShapeMode mode = ShapeMode::full;
  int dim = 2;
  ExpectedOutcome expected;
  std::function<double(const Vec&)> oracle;  // exact arrival time, if known
  bool thinness_warning = false;
  double half_width = 1.5;  // x (and y) extent of the default box
  double rho_max = 1.5;     // rho extent in axisymmetric mode

  bool axisymmetric() const { return mode == ShapeMode::axisymmetric; }

  //! Default box at n nodes along the first axis.
  GridSpec grid(int n) const {
    if (axisymmetric()) return GridSpec::half_plane(n, -half_width, half_width, rho_max);
    return GridSpec::cube(dim, n, -half_width, half_width);
  }
};

inline ScalarField sample_implicit(const Shape& shape, const GridSpec& spec) {
  if (shape.axisymmetric() != spec.axisymmetric || shape.dim != spec.dim) {
    throw Error(ErrorKind::invalid_parameter, "shape mode does not match the grid");
  }
  return sample_implicit(shape.implicit, spec);
}

//! (R^2 - |x|^2) / (2n): arrival time of a round n-sphere of radius R.
inline double exact_arrival_sphere(double R, int n, double r) {
  if (n < 1) throw Error(ErrorKind::invalid_parameter, "n must be >= 1");
  if (r > R * (1.0 + 1e-12)) throw Error(ErrorKind::outside_domain, "point outside the sphere");
  return (R * R - r * r) / (2.0 * n);
}

inline double exact_arrival_sphere(double R, int n, const Vec& x) {
  return exact_arrival_sphere(R, n, x.norm());
}

//! (R^2 - rho^2) / (2(n-k)): arrival time of a round S^{n-k} x R^k cylinder.
inline double exact_arrival_cylinder(double R, int n, int k, double rho) {
  if (n < 1 || k < 0 || k > n - 1) {
    throw Error(ErrorKind::invalid_parameter, "need 0 <= k <= n-1");
  }
  if (rho > R * (1.0 + 1e-12)) throw Error(ErrorKind::outside_domain, "point outside the cylinder");
  return (R * R - rho * rho) / (2.0 * (n - k));
}

inline Shape make_circle(double R) {
  if (!(R > 0.0)) throw Error(ErrorKind::invalid_parameter, "radius must be positive");
  Shape s;
  s.name = "circle";
  s.dim = 2;
  s.implicit = [R](const Vec& x) { return R - x.norm(); };
  s.oracle = [R](const Vec& x) { return exact_arrival_sphere(R, 1, x); };
  s.expected = {Verdict::C2, 0, 1, R * R / 2.0};
  s.half_width = 1.5 * R;
  return s;
}

inline Shape make_sphere(double R) {
  if (!(R > 0.0)) throw Error(ErrorKind::invalid_parameter, "radius must be positive");
  Shape s;
  s.name = "sphere";
  s.mode = ShapeMode::axisymmetric;
  s.implicit = [R](const Vec& x) { return R - x.norm(); };
  s.oracle = [R](const Vec& x) { return exact_arrival_sphere(R, 2, x); };
  s.expected = {Verdict::C2, 0, 1, R * R / 4.0};
  s.half_width = 1.5 * R;
  s.rho_max = 1.5 * R;
  return s;
}

//! Scaled so |grad| on the boundary stays within [sqrt(b/a), sqrt(a/b)].
inline Shape make_ellipse(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw Error(ErrorKind::invalid_parameter, "semi-axes must be positive");
  Shape s;
  s.name = "ellipse";
  s.dim = 2;
  const double scale = std::sqrt(a * b) / 2.0;
  s.implicit = [a, b, scale](const Vec& x) {
    return scale * (1.0 - (x(0) * x(0)) / (a * a) - (x(1) * x(1)) / (b * b));
  };
  s.expected = {Verdict::C2, 0, 1, std::nullopt};
  s.half_width = 1.5 * std::max(a, b);
  return s;
}

//! Torus of revolution about the x axis; the tube is the disk of radius r0
//! around (0, R0) in the (x, rho) half-plane.
inline Shape make_torus(double R0, double r0) {
  if (!(R0 > 0.0) || !(r0 > 0.0) || r0 >= R0) {
    throw Error(ErrorKind::invalid_parameter, "need 0 < r0 < R0");
  }
  Shape s;
  s.name = "torus";
  s.mode = ShapeMode::axisymmetric;
  s.implicit = [R0, r0](const Vec& x) { return r0 - std::hypot(x(0), x(1) - R0); };
  s.half_width = 1.5 * R0;
  s.rho_max = 1.5 * R0;
  if (r0 < R0 / 3.0) {
    s.expected = {Verdict::C2, 1, 1, r0 * r0 / 2.0};
  } else {
    s.thinness_warning = true;
  }
  return s;
}

namespace detail {

// Mean curvature (positive for convex, in 3D) of the zero set of an
// axisymmetric implicit function, by central differences.
inline double axisymmetric_mean_curvature(const std::function<double(const Vec&)>& f, double x,
                                          double rho, double e = 1e-4) {
  auto unit = [&](double px, double pr) {
    const double gx = (f(make_vec({px + e, pr})) - f(make_vec({px - e, pr}))) / (2 * e);
    const double gr = (f(make_vec({px, pr + e})) - f(make_vec({px, pr - e}))) / (2 * e);
    const double g = std::hypot(gx, gr);
    return std::make_pair(gx / g, gr / g);
  };
  const double div = (unit(x + e, rho).first - unit(x - e, rho).first) / (2 * e) +
                     (unit(x, rho + e).second - unit(x, rho - e).second) / (2 * e) +
                     unit(x, rho).second / rho;
  return -div;
}

}  // namespace detail

//! Minimum sampled mean curvature along the profile curve of an axisymmetric
//! implicit shape spanning |x| <= x_extent, rho <= rho_top.
inline double min_profile_mean_curvature(const std::function<double(const Vec&)>& f,
                                         double x_extent, double rho_top, int samples = 801) {
  double hmin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) {
    const double x = -x_extent + 2.0 * x_extent * i / (samples - 1);
    if (f(make_vec({x, 0.0})) <= 0.0 || f(make_vec({x, rho_top})) > 0.0) continue;
    double lo = 0.0, hi = rho_top;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (f(make_vec({x, mid})) > 0.0 ? lo : hi) = mid;
    }
    if (lo < 1e-3) continue;  // tips: the vertical line is tangent there
    hmin = std::min(hmin, detail::axisymmetric_mean_curvature(f, x, lo));
  }
  return hmin;
}

//! Two balls of radius bulb_r centred at x = +-sep joined by a neck of radius
//! neck_r * cosh(x / s), truncated inside the bulbs and blended by an offset
//! p-norm (p = 8) union. The neck scale s puts the truncated neck end at 80%
//! of the bulb's section radius.
inline Shape make_dumbbell(double bulb_r, double neck_r, double sep, double neck_scale = 0.0) {
  if (!(bulb_r > 0.0) || !(neck_r > 0.0) || !(sep > bulb_r)) {
    throw Error(ErrorKind::invalid_parameter, "need bulb_r, neck_r > 0 and sep > bulb_r");
  }
  const double x_cut = sep - bulb_r / 2.0;
  const double target = 0.8 * std::sqrt(bulb_r * bulb_r - (bulb_r / 2.0) * (bulb_r / 2.0));
  if (neck_r >= target) {
    throw Error(ErrorKind::not_mean_convex,
                "neck is not thinner than the bulbs; no pinch can form");
  }
  const double scale = neck_scale > 0.0 ? neck_scale : x_cut / std::acosh(target / neck_r);
  constexpr double p = 8.0;
  const double offset = bulb_r;
  auto f = [=](const Vec& q) {
    const double x = q(0), rho = q(1);
    const double b1 = bulb_r - std::hypot(x - sep, rho);
    const double b2 = bulb_r - std::hypot(x + sep, rho);
    const double ax = std::abs(x);
    const double nk = std::min(neck_r * std::cosh(std::min(ax, x_cut) / scale) - rho, x_cut - ax);
    double acc = 0.0;
    for (double v : {b1, b2, nk}) acc += std::pow(std::max(v + offset, 0.0), p);
    return std::pow(acc, 1.0 / p) - offset;
  };
  const double hmin = min_profile_mean_curvature(f, sep + bulb_r + 0.01, 1.5 * bulb_r);
  if (!(hmin >= 0.0)) {
    throw Error(ErrorKind::not_mean_convex,
                "sampled initial mean curvature is negative (" + std::to_string(hmin) + ")");
  }
  if (!(neck_r < bulb_r / 2.0)) {
    throw Error(ErrorKind::invalid_parameter, "need neck_r < bulb_r / 2");
  }
  Shape s;
  s.name = "dumbbell";
  s.mode = ShapeMode::axisymmetric;
  s.implicit = f;
  s.expected = {Verdict::notC2, std::nullopt, 2, std::nullopt};
  s.half_width = sep + bulb_r + 0.25;
  s.rho_max = 1.5 * bulb_r;
  return s;
}

//! Registry lookup by name; missing parameters take the canonical values.
inline Shape make_shape(const std::string& name, const std::map<std::string, double>& p = {}) {
  auto get = [&](const char* key, double fallback) {
    auto it = p.find(key);
    return it == p.end() ? fallback : it->second;
  };
  if (name == "circle") return make_circle(get("R", 1.0));
  if (name == "sphere") return make_sphere(get("R", 1.0));
  if (name == "ellipse") return make_ellipse(get("a", 1.0), get("b", 0.5));
  if (name == "torus") return make_torus(get("R0", 1.0), get("r0", 0.25));
  if (name == "dumbbell") return make_dumbbell(get("bulb_r", 0.5), get("neck_r", 0.15), get("sep", 0.75),
                                               get("neck_scale", 0.0));
  throw Error(ErrorKind::config, "unknown scenario '" + name + "'");
}

}  // namespace mcflow

#endif  // MCFLOW_SCENARIOS_HPP_
