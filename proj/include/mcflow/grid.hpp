#ifndef MCFLOW_GRID_HPP_
#define MCFLOW_GRID_HPP_

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mcflow/errors.hpp"
#include "mcflow/linalg.hpp"

namespace mcflow {

using Index = std::array<int, 3>;

inline std::string to_string(const Index& idx, int dim) {
  std::ostringstream ss;
  ss << "(";
  for (int a = 0; a < dim; ++a) ss << (a ? ", " : "") << idx[a];
  ss << ")";
  return ss.str();
}

//! Uniform grid. In axisymmetric mode the grid is the (x, rho) half-plane of
//! a surface of revolution about the x axis; rho is the last axis and starts
//! at 0.
struct GridSpec {
  int dim = 2;
  std::array<int, 3> counts{0, 0, 0};
  std::array<double, 3> origin{0.0, 0.0, 0.0};
  double h = 0.0;
  bool axisymmetric = false;

  //! Full grid on the cube [lo, hi]^dim with n nodes per axis.
  static GridSpec cube(int dim, int n, double lo, double hi) {
    GridSpec g;
    g.dim = dim;
    for (int a = 0; a < dim; ++a) {
      g.counts[a] = n;
      g.origin[a] = lo;
    }
    g.h = (n > 1) ? (hi - lo) / (n - 1) : 0.0;
    g.validate();
    return g;
  }

  //! Axisymmetric half-plane [x_lo, x_hi] x [0, rho_max]; n nodes along x and
  //! as many rho rows as fit at the same spacing.
  static GridSpec half_plane(int n, double x_lo, double x_hi, double rho_max) {
    GridSpec g;
    g.dim = 2;
    g.axisymmetric = true;
    g.h = (n > 1) ? (x_hi - x_lo) / (n - 1) : 0.0;
    g.counts = {n, g.h > 0 ? static_cast<int>(std::floor(rho_max / g.h + 1e-9)) + 1 : 0, 0};
    g.origin = {x_lo, 0.0, 0.0};
    g.validate();
    return g;
  }

  void validate() const {
    if (dim != 2 && dim != 3) {
      throw Error(ErrorKind::invalid_parameter, "grid dimension must be 2 or 3");
    }
    if (!(h > 0.0) || !std::isfinite(h)) {
      throw Error(ErrorKind::invalid_parameter, "grid spacing must be positive");
    }
    for (int a = 0; a < dim; ++a) {
      if (counts[a] < 8) {
        throw Error(ErrorKind::invalid_parameter,
                    "grid counts must be >= 8 on every axis");
      }
    }
    if (axisymmetric && (dim != 2 || origin[1] != 0.0)) {
      throw Error(ErrorKind::invalid_parameter,
                  "axisymmetric grids are 2D with rho starting at 0");
    }
  }

  //! Dimension of the space the field lives in (3 for surfaces of revolution).
  int ambient_dim() const { return axisymmetric ? 3 : dim; }

  std::size_t size() const {
    std::size_t n = 1;
    for (int a = 0; a < dim; ++a) n *= static_cast<std::size_t>(counts[a]);
    return n;
  }

  std::array<std::size_t, 3> strides() const {
    std::array<std::size_t, 3> s{0, 0, 0};
    std::size_t acc = 1;
    for (int a = dim - 1; a >= 0; --a) {
      s[a] = acc;
      acc *= static_cast<std::size_t>(counts[a]);
    }
    return s;
  }

  std::size_t flat(const Index& idx) const {
    auto s = strides();
    std::size_t k = 0;
    for (int a = 0; a < dim; ++a) k += static_cast<std::size_t>(idx[a]) * s[a];
    return k;
  }

  Index unflatten(std::size_t k) const {
    Index idx{0, 0, 0};
    for (int a = dim - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(k % static_cast<std::size_t>(counts[a]));
      k /= static_cast<std::size_t>(counts[a]);
    }
    return idx;
  }

  bool in_range(const Index& idx) const {
    for (int a = 0; a < dim; ++a) {
      if (idx[a] < 0 || idx[a] >= counts[a]) return false;
    }
    return true;
  }

  //! Maps an index onto a stored node, mirroring rho < 0 across the axis in
  //! axisymmetric mode. Returns nothing when the index leaves the grid.
  std::optional<std::size_t> resolve(Index idx) const {
    if (axisymmetric && idx[1] < 0) idx[1] = -idx[1];
    if (!in_range(idx)) return std::nullopt;
    return flat(idx);
  }

  double coord(int axis, int i) const { return origin[axis] + h * i; }

  //! Position in grid coordinates: (x, y[, z]) or (x, rho).
  Vec position(const Index& idx) const {
    Vec p(dim);
    for (int a = 0; a < dim; ++a) p(a) = coord(a, idx[a]);
    return p;
  }

  double extent(int axis) const { return (counts[axis] - 1) * h; }

  bool operator==(const GridSpec& o) const {
    if (dim != o.dim || h != o.h || axisymmetric != o.axisymmetric) return false;
    for (int a = 0; a < dim; ++a) {
      if (counts[a] != o.counts[a] || origin[a] != o.origin[a]) return false;
    }
    return true;
  }
};

enum class FieldLabel { levelset, arrival };

struct ScalarField {
  GridSpec spec;
  std::vector<double> values;
  FieldLabel label = FieldLabel::levelset;

  ScalarField() = default;
  ScalarField(GridSpec s, FieldLabel l = FieldLabel::levelset)
      : spec(s), values(s.size(), 0.0), label(l) {}

  double operator[](std::size_t k) const { return values[k]; }
  double& operator[](std::size_t k) { return values[k]; }
  double at(const Index& idx) const { return values[spec.flat(idx)]; }
};

struct LocalDerivatives {
  Vec gradient;
  SymmetricMatrix hessian;
};

//! Second-order central differences at idx. `fetch(flat)` returns the stored
//! value of a resolved node. Throws out_of_stencil when a stencil node is
//! missing.
template <class Fetch>
LocalDerivatives finite_differences(const GridSpec& spec, const Index& idx,
                                    Fetch&& fetch) {
  const int d = spec.dim;
  auto value = [&](const Index& at) {
    auto k = spec.resolve(at);
    if (!k) {
      throw Error(ErrorKind::out_of_stencil,
                  "stencil leaves the grid at node " + to_string(idx, d));
    }
    return fetch(*k);
  };
  auto shifted = [&](int a, int da, int b, int db) {
    Index j = idx;
    j[a] += da;
    if (b >= 0) j[b] += db;
    return value(j);
  };

  const double h = spec.h;
  const double f0 = value(idx);
  LocalDerivatives out{Vec(d), SymmetricMatrix(d)};
  for (int a = 0; a < d; ++a) {
    const double fp = shifted(a, 1, -1, 0);
    const double fm = shifted(a, -1, -1, 0);
    out.gradient(a) = (fp - fm) / (2.0 * h);
    out.hessian.set(a, a, (fp - 2.0 * f0 + fm) / (h * h));
    for (int b = a + 1; b < d; ++b) {
      const double fpp = shifted(a, 1, b, 1);
      const double fpm = shifted(a, 1, b, -1);
      const double fmp = shifted(a, -1, b, 1);
      const double fmm = shifted(a, -1, b, -1);
      out.hessian.set(a, b, (fpp - fpm - fmp + fmm) / (4.0 * h * h));
    }
  }
  return out;
}

inline LocalDerivatives field_derivatives(const ScalarField& f,
                                          const Index& idx) {
  return finite_differences(f.spec, idx,
                            [&](std::size_t k) { return f.values[k]; });
}

inline Vec gradient_at(const ScalarField& f, const Index& idx) {
  return field_derivatives(f, idx).gradient;
}

inline SymmetricMatrix hessian_at(const ScalarField& f, const Index& idx) {
  return field_derivatives(f, idx).hessian;
}

//! Laplacian of the represented function. For surfaces of revolution this is
//! the 3D Laplacian, adding g_rho / rho (or its on-axis limit h_rho_rho).
inline double ambient_laplacian(const GridSpec& spec, const Index& idx,
                                const LocalDerivatives& d) {
  double lap = d.hessian.trace();
  if (spec.axisymmetric) {
    if (idx[1] == 0) {
      lap += d.hessian(1, 1);
    } else {
      lap += d.gradient(1) / spec.coord(1, idx[1]);
    }
  }
  return lap;
}

//! Regularized level-set operator
//!   lap v - (grad v . Hess v . grad v + eps^2 D) / (|grad v|^2 + eps^2)
//! with D = tr(H^3) / tr(H^2) over the ambient Hessian. Where grad v = 0 the
//! blend falls back to D, which is exact at round sphere and cylinder extrema.
inline double curvature_rhs(const ScalarField& f, const Index& idx,
                            double epsilon) {
  if (!(epsilon > 0.0)) {
    throw Error(ErrorKind::invalid_parameter, "epsilon must be positive");
  }
  const auto d = field_derivatives(f, idx);
  const double g2 = d.gradient.squaredNorm();
  const double quad = d.hessian.quadratic_form(d.gradient, d.gradient);
  const double lap = ambient_laplacian(f.spec, idx, d);
  Eigen::VectorXd ev = d.hessian.eigen().values;
  if (f.spec.axisymmetric) {
    ev.conservativeResize(ev.size() + 1);
    ev(ev.size() - 1) = lap - d.hessian.trace();
  }
  const double tr2 = ev.array().square().sum();
  const double tr3 = ev.array().cube().sum();
  const double degenerate = tr2 > 0.0 ? tr3 / tr2 : 0.0;
  const double eps2 = epsilon * epsilon;
  return lap - (quad + eps2 * degenerate) / (g2 + eps2);
}

//! Samples an implicit function (positive inside) at every node. The
//! positive region must stay at least 4 nodes away from the outer boundary.
inline ScalarField sample_implicit(const std::function<double(const Vec&)>& fn,
                                   const GridSpec& spec) {
  spec.validate();
  ScalarField field(spec, FieldLabel::levelset);
  constexpr int margin = 4;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const Index idx = spec.unflatten(k);
    const double v = fn(spec.position(idx));
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::numerical_blowup,
                  "implicit function is not finite at " + to_string(idx, spec.dim));
    }
    field.values[k] = v;
    if (v <= 0.0) continue;
    for (int a = 0; a < spec.dim; ++a) {
      const bool low_open = !(spec.axisymmetric && a == 1);
      if ((low_open && idx[a] < margin) || idx[a] > spec.counts[a] - 1 - margin) {
        throw Error(ErrorKind::domain_too_small,
                    "positive region reaches the boundary layer at " +
                        to_string(idx, spec.dim));
      }
    }
  }
  return field;
}

//! True when idx has a complete one-node stencil (mirror allowed on the axis).
inline bool has_stencil(const GridSpec& spec, const Index& idx) {
  for (int a = 0; a < spec.dim; ++a) {
    const bool mirrored = spec.axisymmetric && a == 1;
    if ((!mirrored && idx[a] < 1) || idx[a] > spec.counts[a] - 2) return false;
  }
  return true;
}

}  // namespace mcflow

#endif  // MCFLOW_GRID_HPP_
