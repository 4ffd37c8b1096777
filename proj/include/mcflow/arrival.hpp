#ifndef MCFLOW_ARRIVAL_HPP_
#define MCFLOW_ARRIVAL_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "mcflow/errors.hpp"
#include "mcflow/grid.hpp"
#include "mcflow/linalg.hpp"

namespace mcflow {

inline constexpr double kDefaultGradFloor = 0.05;

//! Arrival time u on the swept nodes of a grid. Unswept nodes hold NaN.
struct ArrivalField {
  GridSpec spec;
  std::vector<double> u;
  std::vector<std::uint8_t> mask;
  bool partial = false;

  ArrivalField() = default;
  explicit ArrivalField(const GridSpec& s)
      : spec(s),
        u(s.size(), std::numeric_limits<double>::quiet_NaN()),
        mask(s.size(), 0) {}

  bool masked(std::size_t k) const { return mask[k] != 0; }

  void set(std::size_t k, double value) {
    u[k] = value;
    mask[k] = 1;
  }

  std::size_t masked_count() const {
    std::size_t n = 0;
    for (auto m : mask) n += m;
    return n;
  }

  //! Injects an analytic field; nodes where fn returns nothing stay unmasked.
  static ArrivalField from_function(
      const GridSpec& spec,
      const std::function<std::optional<double>(const Vec&)>& fn) {
    ArrivalField a(spec);
    for (std::size_t k = 0; k < spec.size(); ++k) {
      if (auto v = fn(spec.position(spec.unflatten(k)))) a.set(k, *v);
    }
    return a;
  }

  ScalarField to_scalar_field() const {
    ScalarField f(spec, FieldLabel::arrival);
    f.values = u;
    return f;
  }

  static ArrivalField from_scalar_field(const ScalarField& f) {
    if (f.label != FieldLabel::arrival) {
      throw Error(ErrorKind::format, "field is not flagged as an arrival time");
    }
    ArrivalField a(f.spec);
    for (std::size_t k = 0; k < f.values.size(); ++k) {
      if (std::isfinite(f.values[k])) a.set(k, f.values[k]);
    }
    return a;
  }
};

//! Time at which a linear interpolant between two samples of v hits zero.
inline double crossing_time(double v_prev, double v_next, double t_prev,
                            double t_next) {
  if (!(v_prev > 0.0) || !(v_next <= 0.0) || !(t_prev < t_next)) {
    throw Error(ErrorKind::invalid_crossing,
                "expected v_prev > 0 >= v_next and t_prev < t_next");
  }
  return t_prev + (t_next - t_prev) * v_prev / (v_prev - v_next);
}

//! Finite-difference derivatives of u; every stencil node must be swept.
inline LocalDerivatives arrival_derivatives(const ArrivalField& u,
                                            const Index& idx) {
  return finite_differences(u.spec, idx, [&](std::size_t k) {
    if (!u.masked(k)) {
      throw Error(ErrorKind::out_of_stencil,
                  "stencil leaves the swept region at node " +
                      to_string(idx, u.spec.dim));
    }
    return u.u[k];
  });
}

//! 1 + |grad u| div(grad u / |grad u|), which vanishes where u solves the
//! arrival-time equation classically.
inline double arrival_residual(const ArrivalField& u, const Index& idx,
                            double grad_floor = kDefaultGradFloor) {
  const auto d = arrival_derivatives(u, idx);
  const double g2 = d.gradient.squaredNorm();
  if (std::sqrt(g2) < grad_floor) {
    throw Error(ErrorKind::near_critical,
                "|grad u| below the regular-point floor at " +
                    to_string(idx, u.spec.dim));
  }
  const double quad = d.hessian.quadratic_form(d.gradient, d.gradient);
  return 1.0 + ambient_laplacian(u.spec, idx, d) - quad / g2;
}

//! max u over the swept nodes; ties go to the lowest row-major index.
inline std::pair<double, Index> extinction_time(const ArrivalField& u) {
  if (u.partial) {
    throw Error(ErrorKind::partial_field, "arrival field is partial");
  }
  double best = -std::numeric_limits<double>::infinity();
  std::size_t best_k = 0;
  bool any = false;
  for (std::size_t k = 0; k < u.u.size(); ++k) {
    if (u.masked(k) && u.u[k] > best) {
      best = u.u[k];
      best_k = k;
      any = true;
    }
  }
  if (!any) throw Error(ErrorKind::partial_field, "arrival field has no swept nodes");
  return {best, u.spec.unflatten(best_k)};
}

//! True when every node of the 3^d block around idx exists and is swept.
inline bool neighborhood_swept(const ArrivalField& u, const Index& idx) {
  const auto& s = u.spec;
  const int d = s.dim;
  const int total = (d == 2) ? 9 : 27;
  for (int c = 0; c < total; ++c) {
    Index j = idx;
    int code = c;
    for (int a = 0; a < d; ++a) {
      j[a] += code % 3 - 1;
      code /= 3;
    }
    auto r = s.resolve(j);
    if (!r || !u.masked(*r)) return false;
  }
  return true;
}

//! Value, gradient and Hessian of u in ambient coordinates.
struct Probe {
  double u = 0.0;
  Vec gradient;
  SymmetricMatrix hessian;
};

//! Precomputed nodal derivatives of an arrival field with multilinear
//! interpolation to arbitrary ambient points. For surfaces of revolution the
//! ambient space is 3D with the x axis as the symmetry axis; the hoop
//! curvature term g_rho / rho supplies the azimuthal Hessian entry.
class ArrivalSampler {
 public:
  explicit ArrivalSampler(const ArrivalField& field) : field_(&field) {
    const auto& s = field.spec;
    const int d = s.dim;
    const std::size_t n = s.size();
    valid_.assign(n, 0);
    grad_.assign(n * d, 0.0);
    hess_.assign(n * d * d, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      if (!field.masked(k)) continue;
      const Index idx = s.unflatten(k);
      if (!has_stencil(s, idx)) continue;
      if (!neighborhood_swept(field, idx)) continue;
      const auto ld = arrival_derivatives(field, idx);
      valid_[k] = 1;
      for (int a = 0; a < d; ++a) {
        grad_[k * d + a] = ld.gradient(a);
        for (int b = 0; b < d; ++b) hess_[(k * d + a) * d + b] = ld.hessian(a, b);
      }
    }
  }

  const ArrivalField& field() const { return *field_; }
  const GridSpec& spec() const { return field_->spec; }
  int ambient_dim() const { return spec().ambient_dim(); }

  bool valid(std::size_t k) const { return valid_[k] != 0; }

  Vec node_gradient(std::size_t k) const {
    const int d = spec().dim;
    Vec g(d);
    for (int a = 0; a < d; ++a) g(a) = grad_[k * d + a];
    return g;
  }

  SymmetricMatrix node_hessian(std::size_t k) const {
    const int d = spec().dim;
    SymmetricMatrix m(d);
    for (int a = 0; a < d; ++a) {
      for (int b = a; b < d; ++b) m.set(a, b, hess_[(k * d + a) * d + b]);
    }
    return m;
  }

  //! Ambient position of a node (meridian phi = 0 for surfaces of revolution).
  Vec node_position(std::size_t k) const {
    const Vec p = spec().position(spec().unflatten(k));
    if (!spec().axisymmetric) return p;
    return make_vec({p(0), p(1), 0.0});
  }

  //! Ambient probe at a node, rotated to azimuth phi about the symmetry axis.
  std::optional<Probe> node_probe(std::size_t k, double phi = 0.0) const {
    if (!valid(k)) return std::nullopt;
    const Vec p = spec().position(spec().unflatten(k));
    Probe out{field_->u[k], node_gradient(k), node_hessian(k)};
    if (!spec().axisymmetric) return out;
    return lift(out, p(1), phi, /*on_axis=*/spec().unflatten(k)[1] == 0);
  }

  //! Grid coordinates of an ambient point (x, rho) for surfaces of revolution.
  Vec grid_coords(const Vec& x) const {
    if (!spec().axisymmetric) return x;
    return make_vec({x(0), std::hypot(x(1), x(2))});
  }

  //! Interpolated value only; requires the enclosing cell to be swept.
  std::optional<double> value(const Vec& x) const {
    auto cell = locate(grid_coords(x));
    if (!cell) return std::nullopt;
    double acc = 0.0;
    for (const auto& [k, w] : cell->corners) {
      if (!field_->masked(k)) return std::nullopt;
      acc += w * field_->u[k];
    }
    return acc;
  }

  //! Interpolated probe; requires all cell corners to carry derivatives.
  std::optional<Probe> probe(const Vec& x) const {
    const Vec q = grid_coords(x);
    auto cell = locate(q);
    if (!cell) return std::nullopt;
    const int d = spec().dim;
    Probe out{0.0, Vec::Zero(d), SymmetricMatrix(d)};
    Mat h = Mat::Zero(d, d);
    for (const auto& [k, w] : cell->corners) {
      if (!valid(k)) return std::nullopt;
      out.u += w * field_->u[k];
      for (int a = 0; a < d; ++a) {
        out.gradient(a) += w * grad_[k * d + a];
        for (int b = 0; b < d; ++b) h(a, b) += w * hess_[(k * d + a) * d + b];
      }
    }
    out.hessian = SymmetricMatrix::from_upper(h);
    if (!spec().axisymmetric) return out;
    const double phi = std::atan2(x(2), x(1));
    return lift(out, q(1), phi, q(1) == 0.0);
  }

 private:
  struct Cell {
    std::vector<std::pair<std::size_t, double>> corners;
  };

  std::optional<Cell> locate(const Vec& q) const {
    const auto& s = spec();
    const int d = s.dim;
    Index base{0, 0, 0};
    std::array<double, 3> frac{0, 0, 0};
    for (int a = 0; a < d; ++a) {
      const double t = (q(a) - s.origin[a]) / s.h;
      if (!(t >= -1e-12) || t > s.counts[a] - 1 + 1e-12) return std::nullopt;
      int i = static_cast<int>(std::floor(t));
      if (i > s.counts[a] - 2) i = s.counts[a] - 2;
      if (i < 0) i = 0;
      base[a] = i;
      frac[a] = t - i;
    }
    Cell cell;
    for (int corner = 0; corner < (1 << d); ++corner) {
      Index j = base;
      double w = 1.0;
      for (int a = 0; a < d; ++a) {
        const int bit = (corner >> a) & 1;
        j[a] += bit;
        w *= bit ? frac[a] : 1.0 - frac[a];
      }
      if (w == 0.0) continue;
      cell.corners.emplace_back(s.flat(j), w);
    }
    return cell;
  }

  // Carries an (x, rho) probe into 3D at azimuth phi.
  static Probe lift(const Probe& in, double rho, double phi, bool on_axis) {
    const double c = std::cos(phi), s = std::sin(phi);
    const Vec ex = make_vec({1.0, 0.0, 0.0});
    const Vec er = make_vec({0.0, c, s});
    const Vec ep = make_vec({0.0, -s, c});
    const double gx = in.gradient(0), gr = in.gradient(1);
    const double hoop = (on_axis || rho <= 0.0) ? in.hessian(1, 1) : gr / rho;
    Probe out;
    out.u = in.u;
    out.gradient = gx * ex + gr * er;
    Mat h = in.hessian(0, 0) * ex * ex.transpose() +
            in.hessian(0, 1) * (ex * er.transpose() + er * ex.transpose()) +
            in.hessian(1, 1) * er * er.transpose() + hoop * ep * ep.transpose();
    out.hessian = SymmetricMatrix::from_upper(h);
    return out;
  }

  const ArrivalField* field_;
  std::vector<std::uint8_t> valid_;
  std::vector<double> grad_;
  std::vector<double> hess_;
};

}  // namespace mcflow

#endif  // MCFLOW_ARRIVAL_HPP_
