#ifndef MCFLOW_PROFILES_HPP_
#define MCFLOW_PROFILES_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "mcflow/arrival.hpp"
#include "mcflow/errors.hpp"
#include "mcflow/grid.hpp"
#include "mcflow/linalg.hpp"
#include "mcflow/singular.hpp"

namespace mcflow {

namespace detail {

// Uniform double in [0, 1) from the raw engine output; avoids the
// implementation-defined distributions so samples match across toolchains.
inline double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

//! Deterministic low-discrepancy unit directions: evenly spaced angles with a
//! seeded phase in 2D, a seeded random rotation of a Fibonacci lattice in 3D.
inline std::vector<Vec> sphere_directions(int dim, int count, std::uint64_t seed) {
  if (count < 1) throw Error(ErrorKind::invalid_parameter, "need at least one sample");
  std::mt19937_64 rng(seed);
  std::vector<Vec> out;
  out.reserve(count);
  if (dim == 2) {
    const double phase = detail::unit_draw(rng);
    for (int j = 0; j < count; ++j) {
      const double a = 2.0 * std::numbers::pi * (j + phase) / count;
      out.push_back(make_vec({std::cos(a), std::sin(a)}));
    }
    return out;
  }
  if (dim != 3) throw Error(ErrorKind::invalid_parameter, "directions need dim 2 or 3");
  // Shoemake's uniform random rotation.
  const double u1 = detail::unit_draw(rng), u2 = detail::unit_draw(rng), u3 = detail::unit_draw(rng);
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const Eigen::Quaterniond q(b * std::cos(2.0 * std::numbers::pi * u3),
                             a * std::sin(2.0 * std::numbers::pi * u2),
                             a * std::cos(2.0 * std::numbers::pi * u2),
                             b * std::sin(2.0 * std::numbers::pi * u3));
  const Eigen::Matrix3d R = q.normalized().toRotationMatrix();
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int j = 0; j < count; ++j) {
    const double z = 1.0 - (2.0 * j + 1.0) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Eigen::Vector3d p(r * std::cos(golden * j), r * std::sin(golden * j), z);
    const Eigen::Vector3d w = R * p;
    out.push_back(make_vec({w(0), w(1), w(2)}));
  }
  return out;
}

inline int default_sample_count(int ambient_dim) { return ambient_dim == 2 ? 256 : 1024; }

struct ConeSpec {
  double aperture = 1.0;  // C in |Pi_axis(x - p)| <= C |Pi(x - p)|
  std::vector<double> radii;
  int samples = 0;  // 0 picks the default for the ambient dimension

  void validate() const {
    if (!(aperture > 0.0)) throw Error(ErrorKind::invalid_parameter, "cone aperture must be positive");
    if (radii.empty()) throw Error(ErrorKind::invalid_parameter, "no radii given");
    for (std::size_t i = 0; i < radii.size(); ++i) {
      if (!(radii[i] > 0.0) || (i > 0 && !(radii[i] < radii[i - 1]))) {
        throw Error(ErrorKind::invalid_parameter, "radii must be positive and strictly decreasing");
      }
    }
  }
};

struct ProfileRow {
  double radius = 0.0;
  double value = 0.0;
  std::size_t kept = 0;
};

namespace detail {

inline bool in_cone(const CriticalPoint& p, const Vec& dx, double aperture) {
  return (p.axis_projector * dx).norm() <= aperture * (p.complement_projector * dx).norm() + 1e-15;
}

inline void check_radii(const std::vector<double>& radii) {
  ConeSpec c;
  c.radii = radii;
  c.validate();
}

}  // namespace detail

//! Per radius, max |Hess u(x) - Hess u(p)|_F over sphere samples inside the
//! transverse cone around p.
inline std::vector<ProfileRow> cone_continuity_profile(const ArrivalSampler& s,
                                                       const CriticalPoint& p,
                                                       const ConeSpec& cone,
                                                       std::uint64_t seed = 0) {
  cone.validate();
  const int dim = static_cast<int>(p.position.size());
  const auto dirs = sphere_directions(
      dim, cone.samples > 0 ? cone.samples : default_sample_count(dim), seed);
  std::vector<ProfileRow> out;
  for (double r : cone.radii) {
    ProfileRow row{r, 0.0, 0};
    for (const auto& dir : dirs) {
      const Vec dx = r * dir;
      if (!detail::in_cone(p, dx, cone.aperture)) continue;
      const auto pr = s.probe(p.position + dx);
      if (!pr) continue;
      ++row.kept;
      row.value = std::max(row.value, pr->hessian.frobenius_distance(p.hess));
    }
    if (row.kept == 0) {
      throw Error(ErrorKind::empty_shell, "no cone sample survives at radius " + std::to_string(r));
    }
    out.push_back(row);
  }
  return out;
}

//! Per radius, max |Pi_axis n| over regular samples (|grad u| >= grad_floor r)
//! on the sphere around p.
inline std::vector<ProfileRow> normal_alignment_profile(const ArrivalSampler& s,
                                                        const CriticalPoint& p,
                                                        const std::vector<double>& radii,
                                                        double grad_floor = kDefaultGradFloor,
                                                        int samples = 0, std::uint64_t seed = 0) {
  if (!p.classified() || *p.stratum_k < 1) {
    throw Error(ErrorKind::invalid_parameter, "alignment needs a classified point with k >= 1");
  }
  detail::check_radii(radii);
  const int dim = static_cast<int>(p.position.size());
  const auto dirs = sphere_directions(dim, samples > 0 ? samples : default_sample_count(dim), seed);
  std::vector<ProfileRow> out;
  for (double r : radii) {
    ProfileRow row{r, 0.0, 0};
    for (const auto& dir : dirs) {
      const auto pr = s.probe(p.position + r * dir);
      if (!pr) continue;
      const double g = pr->gradient.norm();
      if (!(g >= grad_floor * r) || g == 0.0) continue;
      ++row.kept;
      row.value = std::max(row.value, (p.axis_projector * pr->gradient).norm() / g);
    }
    if (row.kept == 0) {
      throw Error(ErrorKind::empty_shell, "no regular sample at radius " + std::to_string(r));
    }
    out.push_back(row);
  }
  return out;
}

struct TransverseMax {
  Vec position;
  double u = 0.0;
  double transverse_gradient = 0.0;  // |Pi grad u(q)|
};

//! Hill-climbs u over the slice p + offset + K-perp (pattern search with step
//! halving from h). Fails when the climb reaches the edge of the swept region.
inline TransverseMax transverse_max_point(const ArrivalSampler& s, const CriticalPoint& p,
                                          const Vec& offset, double align_tol = 0.05) {
  if (!p.classified() || *p.stratum_k < 1) {
    throw Error(ErrorKind::invalid_parameter, "transverse search needs k >= 1");
  }
  const int dim = static_cast<int>(p.position.size());
  if (offset.size() != dim) throw Error(ErrorKind::invalid_parameter, "offset has wrong dimension");
  // Orthonormal basis of K-perp from the complement projector.
  Eigen::SelfAdjointEigenSolver<Mat> es(p.complement_projector);
  std::vector<Vec> basis;
  for (int i = 0; i < dim; ++i) {
    if (es.eigenvalues()(i) > 0.5) basis.push_back(es.eigenvectors().col(i));
  }
  const Vec start = p.position + p.axis_projector * offset;
  auto value = [&](const Vec& x) { return s.value(x); };
  auto v0 = value(start);
  if (!v0) throw Error(ErrorKind::no_interior_max, "slice start lies outside the swept region");
  Vec x = start;
  double best = *v0;
  const double h = s.spec().h;
  for (double step = h; step >= h / 64.0; step *= 0.5) {
    bool moved = true;
    int guard = 0;
    while (moved && guard++ < 10000) {
      moved = false;
      for (const auto& b : basis) {
        for (double sgn : {1.0, -1.0}) {
          const Vec y = x + sgn * step * b;
          auto vy = value(y);
          if (vy && *vy > best) {
            best = *vy;
            x = y;
            moved = true;
          }
        }
      }
    }
  }
  for (const auto& b : basis) {
    for (double sgn : {1.0, -1.0}) {
      if (!value(x + sgn * h * b)) {
        throw Error(ErrorKind::no_interior_max, "slice maximum sits on the swept-region boundary");
      }
    }
  }
  const auto pr = s.probe(x);
  if (!pr) throw Error(ErrorKind::no_interior_max, "no derivative data at the slice maximum");
  const double tg = (p.complement_projector * pr->gradient).norm();
  if (tg > align_tol) {
    throw Error(ErrorKind::no_interior_max,
                "slice maximum is not a transverse critical point (|Pi grad u| = " +
                    std::to_string(tg) + ")");
  }
  return {x, best, tg};
}

struct LocalStructure {
  bool local_max = false;
  bool separation = false;
  double ball_max = 0.0;
};

//! Local maximum and kernel-separation tests on the swept nodes of B_delta(p).
//! For surfaces of revolution each node stands for its ring; the point of the
//! ring in p's meridian half-plane is the one closest to p.
inline LocalStructure local_structure_checks(const ArrivalField& u, const CriticalPoint& p,
                                             double delta, double time_tol) {
  const auto& s = u.spec;
  if (!(delta >= 3.0 * s.h * (1.0 - 1e-9))) {
    throw Error(ErrorKind::invalid_parameter, "delta must be at least 3h");
  }
  double phi = 0.0;
  if (s.axisymmetric) phi = std::atan2(p.position(2), p.position(1));
  const double c = std::cos(phi), sn = std::sin(phi);
  LocalStructure out{true, true, -std::numeric_limits<double>::infinity()};
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (!u.masked(k)) continue;
    const Vec g = s.position(s.unflatten(k));
    const Vec x = s.axisymmetric ? make_vec({g(0), g(1) * c, g(1) * sn}) : g;
    const Vec dx = x - p.position;
    if (dx.norm() > delta) continue;
    out.ball_max = std::max(out.ball_max, u.u[k]);
    if (u.u[k] > p.u_value + time_tol) {
      out.local_max = false;
      if ((p.axis_projector * dx).norm() <= s.h) out.separation = false;
    }
  }
  return out;
}

struct GeometryProbe {
  Vec position;
  Vec normal;
  double H = 0.0;
  Mat tangent;              // orthonormal frame e_i of the level set
  SymmetricMatrix A_over_H;  // A / H on the tangent space
  double check_tangential = 0.0;
  double check_normal = 0.0;
  double check_mixed = 0.0;
};

namespace detail {

// Nodal gradient at a possibly mirrored index (rho < 0 flips the rho part).
inline std::optional<Vec> mirrored_gradient(const ArrivalSampler& s, Index j) {
  const auto& spec = s.spec();
  bool flip = false;
  if (spec.axisymmetric && j[1] < 0) {
    j[1] = -j[1];
    flip = true;
  }
  if (!spec.in_range(j)) return std::nullopt;
  const auto k = spec.flat(j);
  if (!s.valid(k)) return std::nullopt;
  Vec g = s.node_gradient(k);
  if (flip) g(1) = -g(1);
  return g;
}

}  // namespace detail

//! Level-set geometry at a regular node. The shape operator comes from
//! differencing the nodal gradient field and normalizing by the chain rule,
//! so it is independent of the Hessian stencil it is checked against.
inline GeometryProbe geometry_probe(const ArrivalSampler& s, const Index& idx,
                                    double grad_floor = kDefaultGradFloor) {
  const auto& spec = s.spec();
  if (!spec.in_range(idx)) throw Error(ErrorKind::out_of_stencil, "node outside the grid");
  const auto k = spec.flat(idx);
  if (!s.valid(k)) {
    throw Error(ErrorKind::out_of_stencil, "node lacks derivative data at " + to_string(idx, spec.dim));
  }
  const Vec g2d = s.node_gradient(k);
  if (g2d.norm() < grad_floor) {
    throw Error(ErrorKind::near_critical, "|grad u| below the regular-point floor at " + to_string(idx, spec.dim));
  }
  if (std::abs(arrival_residual(s.field(), idx, grad_floor)) > 0.5) {
    throw Error(ErrorKind::near_critical,
                "arrival-time equation residual above 0.5 at " + to_string(idx, spec.dim));
  }
  const int d = spec.dim;
  Mat D(d, d);  // D(a, b) = d g_a / d x_b
  for (int b = 0; b < d; ++b) {
    Index ip = idx, im = idx;
    ip[b] += 1;
    im[b] -= 1;
    const auto gp = detail::mirrored_gradient(s, ip);
    const auto gm = detail::mirrored_gradient(s, im);
    if (!gp || !gm) {
      throw Error(ErrorKind::out_of_stencil, "gradient stencil leaves the valid region at " + to_string(idx, spec.dim));
    }
    D.col(b) = (*gp - *gm) / (2.0 * spec.h);
  }
  Mat Dsym = 0.5 * (D + D.transpose());

  auto probe = *s.node_probe(k);
  Vec grad = probe.gradient;
  Mat Damb = Dsym;
  if (spec.axisymmetric) {
    const double rho = spec.coord(1, idx[1]);
    const double hoop = idx[1] == 0 ? Dsym(1, 1) : g2d(1) / rho;
    Damb = Mat::Zero(3, 3);
    Damb.topLeftCorner(2, 2) = Dsym;
    Damb(2, 2) = hoop;
  }
  const int m = static_cast<int>(grad.size());
  const double gn = grad.norm();
  const Vec n = grad / gn;
  const Mat P = Mat::Identity(m, m) - n * n.transpose();
  const Mat J = P * Damb / gn;  // Jacobian of n = grad u / |grad u|
  const Vec grad_abs = Damb * n;  // gradient of |grad u|

  GeometryProbe out;
  out.position = s.node_position(k);
  out.normal = n;
  out.H = 1.0 / gn;
  out.tangent = complement_basis(n);
  const auto& E = out.tangent;
  const SymmetricMatrix A = SymmetricMatrix::from_upper(0.5 * (E.transpose() * J * E + E.transpose() * J.transpose() * E));
  out.A_over_H = SymmetricMatrix::from_upper(A.matrix() / out.H);
  const SymmetricMatrix Ht = probe.hessian.restricted(E);
  out.check_tangential = Ht.frobenius_distance(out.A_over_H);
  out.check_normal = std::abs(probe.hessian.quadratic_form(n, n) - n.dot(grad_abs));
  out.check_mixed = 0.0;
  for (int i = 0; i < E.cols(); ++i) {
    const Vec e = E.col(i);
    out.check_mixed = std::max(out.check_mixed,
                               std::abs(probe.hessian.quadratic_form(e, n) - e.dot(grad_abs)));
  }
  return out;
}

struct RescaledRow {
  double radius = 0.0;
  double normal_radial = 0.0;  // mean |<n, d_rho>|
  double speed_ratio = 0.0;    // mean (n-k) |grad u| / rho
  Vec spectrum;                // mean sorted eigenvalues of -A/H on the tangent space
  double spectrum_error = 0.0; // mean max |eigenvalue - target|
  double curvature_drift = 0.0;  // mean tangential |grad H| / H^2
  std::size_t kept = 0;
};

//! Blow-up diagnostics around a k >= 1 point, averaged over transverse-cone
//! samples. Every row tends to (1, 1, target spectrum, 0) at a cylindrical point.
inline std::vector<RescaledRow> rescaled_profile(const ArrivalSampler& s, const CriticalPoint& p,
                                                 const std::vector<double>& radii,
                                                 double aperture = 1.0, int samples = 0,
                                                 std::uint64_t seed = 0) {
  if (!p.classified() || *p.stratum_k < 1) {
    throw Error(ErrorKind::invalid_parameter, "rescaled profile needs a classified point with k >= 1");
  }
  detail::check_radii(radii);
  const int dim = static_cast<int>(p.position.size());
  const int n = dim - 1, k = *p.stratum_k;
  Vec target(n);
  for (int i = 0; i < n; ++i) target(i) = i < k ? 0.0 : 1.0 / (n - k);
  const auto dirs = sphere_directions(dim, samples > 0 ? samples : default_sample_count(dim), seed);
  std::vector<RescaledRow> out;
  for (double r : radii) {
    RescaledRow row;
    row.radius = r;
    row.spectrum = Vec::Zero(n);
    for (const auto& dir : dirs) {
      const Vec dx = r * dir;
      if (!detail::in_cone(p, dx, aperture)) continue;
      const auto pr = s.probe(p.position + dx);
      if (!pr) continue;
      const double gn = pr->gradient.norm();
      const Vec radial = p.complement_projector * dx;
      const double rho = radial.norm();
      if (gn == 0.0 || rho == 0.0) continue;
      const Vec nrm = pr->gradient / gn;
      const Mat E = complement_basis(nrm);
      // -A/H = -Hess restricted to the tangent space (frame identity).
      const auto ev = SymmetricMatrix::from_upper(-pr->hessian.restricted(E).matrix()).eigen().values;
      Vec sorted = ev;
      std::sort(sorted.data(), sorted.data() + n, [](double a, double b) { return std::abs(a) < std::abs(b); });
      const Mat P = Mat::Identity(dim, dim) - nrm * nrm.transpose();
      ++row.kept;
      row.normal_radial += std::abs(nrm.dot(radial / rho));
      row.speed_ratio += (n - k) * gn / rho;
      row.spectrum += sorted;
      row.spectrum_error += (sorted - target).cwiseAbs().maxCoeff();
      row.curvature_drift += (P * (pr->hessian.matrix() * nrm)).norm();
    }
    if (row.kept == 0) {
      throw Error(ErrorKind::empty_shell, "no cone sample survives at radius " + std::to_string(r));
    }
    const double w = 1.0 / row.kept;
    row.normal_radial *= w;
    row.speed_ratio *= w;
    row.spectrum *= w;
    row.spectrum_error *= w;
    row.curvature_drift *= w;
    out.push_back(row);
  }
  return out;
}

}  // namespace mcflow

#endif  // MCFLOW_PROFILES_HPP_
