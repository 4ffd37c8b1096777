#ifndef MCFLOW_SINGULAR_HPP_
#define MCFLOW_SINGULAR_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mcflow/arrival.hpp"
#include "mcflow/errors.hpp"
#include "mcflow/grid.hpp"
#include "mcflow/linalg.hpp"
#include "mcflow/types.hpp"

namespace mcflow {

inline constexpr double kDefaultClassifyTol = 0.1;

struct StratumFit {
  std::optional<int> k;  // empty when no candidate fits within tol
  double residual = std::numeric_limits<double>::infinity();
  Mat kernel;                // orthonormal basis of K (d x k)
  Mat axis_projector;        // onto K
  Mat complement_projector;  // onto K-perp
};

//! Best cylinder model -Pi/(n-k) for a Hessian in R^{n+1}. The residual is
//! the spectral norm of hess + Pi/(n-k), i.e. the worst eigenvalue misfit.
inline StratumFit classify_stratum(const SymmetricMatrix& hess, int n,
                                   double tol = kDefaultClassifyTol) {
  if (n < 1 || hess.order() != n + 1) {
    throw Error(ErrorKind::invalid_parameter, "Hessian order must be n + 1");
  }
  if (!(tol > 0.0) || !(tol < 0.5 / n)) {
    throw Error(ErrorKind::invalid_parameter, "need 0 < tol < 1/(2n)");
  }
  const int d = n + 1;
  const auto e = hess.eigen();
  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(e.values(a)) < std::abs(e.values(b));
  });

  StratumFit best;
  int best_k = 0;
  for (int k = 0; k <= n - 1; ++k) {
    const double level = -1.0 / (n - k);
    double res = 0.0;
    for (int i = 0; i < d; ++i) {
      const double lambda = e.values(order[i]);
      res = std::max(res, std::abs(i < k ? lambda : lambda - level));
    }
    if (res < best.residual - 1e-14) {
      best.residual = res;
      best_k = k;
    }
  }
  best.kernel = Mat(d, best_k);
  for (int i = 0; i < best_k; ++i) best.kernel.col(i) = e.vectors.col(order[i]);
  best.axis_projector = projector(best.kernel, d);
  best.complement_projector = Mat::Identity(d, d) - best.axis_projector;
  if (best.residual <= tol) best.k = best_k;
  return best;
}

struct CriticalPoint {
  Vec position;  // ambient coordinates
  double u_value = 0.0;
  SymmetricMatrix hess;
  std::optional<int> stratum_k;
  Mat kernel;
  Mat axis_projector;
  Mat complement_projector;
  double cylinder_residual = 0.0;
  double seed_gradient = 0.0;  // |grad u| at the seed node
  std::size_t node = 0;        // seed node (flat index)

  bool classified() const { return stratum_k.has_value(); }
  int n() const { return static_cast<int>(position.size()) - 1; }
};

namespace detail {

inline void apply_fit(CriticalPoint& p, double tol) {
  const auto fit = classify_stratum(p.hess, p.n(), tol);
  p.stratum_k = fit.k;
  p.kernel = fit.kernel;
  p.axis_projector = fit.axis_projector;
  p.complement_projector = fit.complement_projector;
  p.cylinder_residual = fit.residual;
}

// 3^d neighbourhood offsets excluding the centre.
inline std::vector<Index> neighbour_offsets(int d) {
  std::vector<Index> out;
  const int total = (d == 2) ? 9 : 27;
  for (int c = 0; c < total; ++c) {
    Index o{0, 0, 0};
    int code = c;
    bool centre = true;
    for (int a = 0; a < d; ++a) {
      o[a] = code % 3 - 1;
      code /= 3;
      if (o[a] != 0) centre = false;
    }
    if (!centre) out.push_back(o);
  }
  return out;
}

}  // namespace detail

//! Critical points of u: seeds are swept nodes with |grad u| <= tau that are
//! local minima of |grad u|; each takes one Newton step restricted to the
//! well-conditioned part of the nodal Hessian (step clamped to h), and seeds
//! closer than h merge. For surfaces of revolution, axis seeds become single
//! points and off-axis seeds become rings of max(8, ceil(2 pi rho / h)) points.
inline std::vector<CriticalPoint> find_critical_points(const ArrivalSampler& sampler, double tau,
                                                       double tol = kDefaultClassifyTol) {
  const auto& field = sampler.field();
  const auto& s = sampler.spec();
  if (field.partial) throw Error(ErrorKind::partial_field, "arrival field is partial");
  if (!(tau > 0.0)) throw Error(ErrorKind::invalid_parameter, "tau must be positive");
  const int d = s.dim;
  const auto offsets = detail::neighbour_offsets(d);

  struct Seed {
    std::size_t k;
    double g;
    Vec q;  // refined grid-space position
    double u;
  };
  std::vector<Seed> seeds;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (!sampler.valid(k)) continue;
    const Vec g = sampler.node_gradient(k);
    const double gn = g.norm();
    if (gn > tau) continue;
    const Index idx = s.unflatten(k);
    bool minimum = true;
    for (const auto& o : offsets) {
      Index j = idx;
      for (int a = 0; a < d; ++a) j[a] += o[a];
      auto r = s.resolve(j);
      if (!r || !sampler.valid(*r)) continue;
      if (sampler.node_gradient(*r).norm() < gn) {
        minimum = false;
        break;
      }
    }
    if (!minimum) continue;

    const SymmetricMatrix H = sampler.node_hessian(k);
    const auto e = H.eigen();
    const double scale = e.values.cwiseAbs().maxCoeff();
    Vec step = Vec::Zero(d);
    if (scale > 0.0) {
      for (int i = 0; i < d; ++i) {
        if (std::abs(e.values(i)) <= 0.25 * scale) continue;
        step -= (e.vectors.col(i).dot(g) / e.values(i)) * e.vectors.col(i);
      }
    }
    if (s.axisymmetric && idx[1] == 0) step(1) = 0.0;
    if (step.norm() > s.h) step *= s.h / step.norm();
    Vec q = s.position(idx) + step;
    if (s.axisymmetric && q(1) < 0.0) q(1) = 0.0;
    const double u = field.u[k] + g.dot(step) + 0.5 * H.quadratic_form(step, step);
    seeds.push_back({k, gn, q, u});
  }

  std::stable_sort(seeds.begin(), seeds.end(), [](const Seed& a, const Seed& b) {
    return a.g != b.g ? a.g < b.g : a.k < b.k;
  });
  std::vector<Seed> kept;
  for (const auto& sd : seeds) {
    bool dup = false;
    for (const auto& other : kept) {
      if ((other.q - sd.q).norm() <= s.h * (1.0 + 1e-9)) {
        dup = true;
        break;
      }
    }
    if (!dup) kept.push_back(sd);
  }
  std::sort(kept.begin(), kept.end(), [](const Seed& a, const Seed& b) { return a.k < b.k; });

  std::vector<CriticalPoint> out;
  for (const auto& sd : kept) {
    auto make = [&](const Vec& pos, double phi) {
      CriticalPoint p;
      p.position = pos;
      p.u_value = sd.u;
      p.hess = sampler.node_probe(sd.k, phi)->hessian;
      p.seed_gradient = sd.g;
      p.node = sd.k;
      detail::apply_fit(p, tol);
      return p;
    };
    if (!s.axisymmetric) {
      out.push_back(make(sd.q, 0.0));
      continue;
    }
    const double rho = sd.q(1);
    if (rho == 0.0) {
      out.push_back(make(make_vec({sd.q(0), 0.0, 0.0}), 0.0));
      continue;
    }
    const int m = std::max(8, static_cast<int>(std::ceil(2.0 * std::numbers::pi * rho / s.h)));
    for (int j = 0; j < m; ++j) {
      const double phi = 2.0 * std::numbers::pi * j / m;
      out.push_back(make(make_vec({sd.q(0), rho * std::cos(phi), rho * std::sin(phi)}), phi));
    }
  }
  return out;
}

inline std::vector<CriticalPoint> find_critical_points(const ArrivalField& u, double tau,
                                                       double tol = kDefaultClassifyTol) {
  return find_critical_points(ArrivalSampler(u), tau, tol);
}

struct TimeCluster {
  double time = 0.0;  // mean of member times
  std::vector<std::size_t> members;
};

//! Single-linkage clustering of singular times; clusters come out sorted.
inline std::vector<TimeCluster> cluster_singular_times(const std::vector<CriticalPoint>& points,
                                                       double time_tol) {
  if (points.empty()) throw Error(ErrorKind::insufficient_data, "no critical points to cluster");
  if (!(time_tol > 0.0)) throw Error(ErrorKind::invalid_parameter, "time_tol must be positive");
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return points[a].u_value < points[b].u_value;
  });
  std::vector<TimeCluster> out;
  double last = 0.0;
  for (std::size_t i : order) {
    const double t = points[i].u_value;
    if (out.empty() || t - last > time_tol) out.emplace_back();
    out.back().members.push_back(i);
    last = t;
  }
  for (auto& c : out) {
    double acc = 0.0;
    for (auto i : c.members) acc += points[i].u_value;
    c.time = acc / c.members.size();
  }
  return out;
}

struct ManifoldComponent {
  int k = 0;
  std::vector<std::size_t> members;             // indices into the point list
  std::vector<std::vector<std::size_t>> links;  // neighbours per member (point indices)
  bool closed = false;
  bool fitted = false;  // tangent planes available (k >= 1 and enough neighbours)
  double max_tangency = 0.0;  // radians
  double u_spread = 0.0;
  std::vector<Mat> tangents;  // fitted tangent basis per member (k >= 1)
};

//! Groups classified points into connected components (edges at distance
//! <= 3h) and fits each k >= 1 component as a local graph over its Hessian
//! kernel. Unclassified points are ignored.
inline std::vector<ManifoldComponent> fit_singular_manifold(const std::vector<CriticalPoint>& points,
                                                            double h) {
  if (!(h > 0.0)) throw Error(ErrorKind::invalid_parameter, "spacing must be positive");
  const double reach = 3.0 * h * (1.0 + 1e-9);
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].classified()) ids.push_back(i);
  }
  const std::size_t m = ids.size();
  std::vector<std::vector<std::size_t>> adj(m);
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a + 1; b < m; ++b) {
      if ((points[ids[a]].position - points[ids[b]].position).norm() <= reach) {
        adj[a].push_back(b);
        adj[b].push_back(a);
      }
    }
  }
  std::vector<int> comp(m, -1);
  int ncomp = 0;
  for (std::size_t start = 0; start < m; ++start) {
    if (comp[start] >= 0) continue;
    std::vector<std::size_t> stack{start};
    comp[start] = ncomp;
    while (!stack.empty()) {
      auto a = stack.back();
      stack.pop_back();
      for (auto b : adj[a]) {
        if (comp[b] < 0) {
          comp[b] = ncomp;
          stack.push_back(b);
        }
      }
    }
    ++ncomp;
  }

  std::vector<ManifoldComponent> out(ncomp);
  for (std::size_t a = 0; a < m; ++a) out[comp[a]].members.push_back(ids[a]);
  for (std::size_t a = 0; a < m; ++a) {
    auto& c = out[comp[a]];
    std::vector<std::size_t> nb;
    for (auto b : adj[a]) nb.push_back(ids[b]);
    c.links.push_back(nb);
  }

  for (auto& c : out) {
    const int k = *points[c.members.front()].stratum_k;
    for (auto i : c.members) {
      if (*points[i].stratum_k != k) {
        throw Error(ErrorKind::mixed_stratum,
                    "component mixes k=" + std::to_string(k) + " and k=" +
                        std::to_string(*points[i].stratum_k));
      }
    }
    c.k = k;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (auto i : c.members) {
      lo = std::min(lo, points[i].u_value);
      hi = std::max(hi, points[i].u_value);
    }
    c.u_spread = hi - lo;
    if (k == 0) {
      c.closed = true;
      continue;
    }
    c.closed = std::all_of(c.links.begin(), c.links.end(),
                           [](const auto& nb) { return nb.size() >= 2; });
    c.fitted = true;
    for (std::size_t a = 0; a < c.members.size(); ++a) {
      const auto& p = points[c.members[a]];
      const auto& nb = c.links[a];
      if (static_cast<int>(nb.size()) < k + 1) {
        c.fitted = false;
        c.tangents.clear();
        break;
      }
      // w = b + A s over the neighbours, s in K coordinates, w in K-perp.
      const int d = static_cast<int>(p.position.size());
      Eigen::MatrixXd S(nb.size(), k + 1), W(nb.size(), d);
      for (std::size_t r = 0; r < nb.size(); ++r) {
        const Vec dx = points[nb[r]].position - p.position;
        S(r, 0) = 1.0;
        S.block(r, 1, 1, k) = (p.kernel.transpose() * dx).transpose();
        W.row(r) = (p.complement_projector * dx).transpose();
      }
      const Eigen::MatrixXd coef = S.colPivHouseholderQr().solve(W);  // (k+1) x d
      Mat tangent(d, k);
      for (int i = 0; i < k; ++i) {
        tangent.col(i) = p.kernel.col(i) + coef.row(i + 1).transpose();
      }
      Eigen::HouseholderQR<Mat> qr(tangent);
      Mat q = qr.householderQ() * Mat::Identity(d, k);
      c.tangents.push_back(q);
      c.max_tangency = std::max(c.max_tangency, principal_angle(q, p.kernel));
    }
    if (!c.fitted) c.max_tangency = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

inline std::vector<ManifoldComponent> fit_singular_manifold(const std::vector<CriticalPoint>& points,
                                                            const ArrivalField& u) {
  return fit_singular_manifold(points, u.spec.h);
}

struct VerdictReason {
  std::string condition;
  bool passed = false;
  std::string detail;
};

struct SingularSetReport {
  std::vector<CriticalPoint> points;
  std::vector<TimeCluster> time_clusters;
  std::vector<ManifoldComponent> manifolds;
  Verdict verdict = Verdict::inconclusive;
  std::vector<VerdictReason> verdict_reasons;
  std::size_t unclassified = 0;
  double time_tol = 0.0;
  double angle_tol = 0.0;
};

inline constexpr double kDefaultAngleTol = 5.0 * std::numbers::pi / 180.0;

//! C2 test over the detected singular set. Structural failures
//! (several times, several components, mixed or open strata) give notC2;
//! failures that only exceed a numerical tolerance give inconclusive.
inline SingularSetReport c2_verdict(std::vector<CriticalPoint> points, double h, double time_tol,
                                    double angle_tol = kDefaultAngleTol) {
  SingularSetReport r;
  r.time_tol = time_tol;
  r.angle_tol = angle_tol;
  r.points = std::move(points);
  auto reason = [&](std::string cond, bool ok, std::string detail) {
    r.verdict_reasons.push_back({std::move(cond), ok, std::move(detail)});
  };
  if (r.points.empty()) {
    reason("critical points detected", false, "none found");
    return r;
  }
  std::vector<CriticalPoint> classified;
  std::vector<std::size_t> origin;
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    if (r.points[i].classified()) {
      classified.push_back(r.points[i]);
      origin.push_back(i);
    } else {
      ++r.unclassified;
    }
  }
  const double frac = static_cast<double>(r.unclassified) / r.points.size();
  reason("classified fraction", frac <= 0.1,
         std::to_string(r.points.size() - r.unclassified) + " of " +
             std::to_string(r.points.size()));
  if (frac > 0.1 || classified.empty()) return r;

  r.time_clusters = cluster_singular_times(classified, time_tol);
  for (auto& c : r.time_clusters) {
    for (auto& i : c.members) i = origin[i];
  }
  const bool one_time = r.time_clusters.size() == 1;
  reason("single singular time", one_time,
         one_time ? "one cluster"
                  : "multiple singular times (" + std::to_string(r.time_clusters.size()) +
                        " clusters)");

  bool structural = !one_time;
  bool tolerance = false;
  try {
    r.manifolds = fit_singular_manifold(r.points, h);
    reason("uniform stratum", true, "each component has a single k");
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::mixed_stratum) throw;
    reason("uniform stratum", false, std::string("mixed strata: ") + e.what());
    r.verdict = Verdict::notC2;
    return r;
  }
  const bool one_comp = r.manifolds.size() == 1;
  reason("single connected component", one_comp,
         std::to_string(r.manifolds.size()) + " component(s)");
  structural = structural || !one_comp;

  bool closed = true, fitted = true;
  double angle = 0.0, spread = 0.0;
  for (const auto& c : r.manifolds) {
    closed = closed && c.closed;
    if (c.k >= 1) {
      fitted = fitted && c.fitted;
      if (c.fitted) angle = std::max(angle, c.max_tangency);
    }
    spread = std::max(spread, c.u_spread);
  }
  reason("closed components", closed, closed ? "all closed" : "open singular component");
  structural = structural || !closed;
  const bool tangent_ok = fitted && angle <= angle_tol;
  reason("kernel tangency", tangent_ok,
         fitted ? "max angle " + std::to_string(angle * 180.0 / std::numbers::pi) + " deg"
                : "tangent plane could not be fitted");
  const bool spread_ok = spread <= time_tol;
  reason("u constant on components", spread_ok, "spread " + std::to_string(spread));
  tolerance = !tangent_ok || !spread_ok;

  if (structural) {
    r.verdict = Verdict::notC2;
  } else if (tolerance) {
    r.verdict = Verdict::inconclusive;
  } else {
    r.verdict = Verdict::C2;
  }
  return r;
}

//! Largest ratio |Hess(p) - Hess(q)|_F / |P_p - P_q|_op over pairs of a
//! fitted component within 5 neighbour hops.
struct LipschitzResult {
  std::optional<double> max_ratio;
  std::size_t pairs = 0;
  bool no_variation = false;
};

inline LipschitzResult hessian_tangent_lipschitz(const std::vector<CriticalPoint>& points,
                                                 const ManifoldComponent& c) {
  if (c.k < 1 || !c.fitted) {
    throw Error(ErrorKind::invalid_parameter, "need a fitted component with k >= 1");
  }
  if (c.members.size() < 8) {
    throw Error(ErrorKind::insufficient_data, "fewer than 8 points on the component");
  }
  std::vector<std::size_t> pos(points.size(), std::numeric_limits<std::size_t>::max());
  for (std::size_t a = 0; a < c.members.size(); ++a) pos[c.members[a]] = a;
  const int d = static_cast<int>(points[c.members[0]].position.size());
  std::vector<Mat> proj;
  for (const auto& t : c.tangents) proj.push_back(projector(t, d));

  LipschitzResult out;
  bool skipped_all = true;
  for (std::size_t a = 0; a < c.members.size(); ++a) {
    std::vector<int> depth(c.members.size(), -1);
    std::vector<std::size_t> frontier{a};
    depth[a] = 0;
    for (int hop = 1; hop <= 5; ++hop) {
      std::vector<std::size_t> next;
      for (auto x : frontier) {
        for (auto nb : c.links[x]) {
          const auto y = pos[nb];
          if (depth[y] >= 0) continue;
          depth[y] = hop;
          next.push_back(y);
        }
      }
      frontier.swap(next);
    }
    for (std::size_t b = a + 1; b < c.members.size(); ++b) {
      if (depth[b] < 0) continue;
      const double dist = operator_norm(proj[a] - proj[b]);
      if (dist < 1e-6) continue;
      skipped_all = false;
      const double num = points[c.members[a]].hess.frobenius_distance(points[c.members[b]].hess);
      const double ratio = num / dist;
      ++out.pairs;
      if (std::isfinite(ratio)) out.max_ratio = std::max(out.max_ratio.value_or(0.0), ratio);
    }
  }
  out.no_variation = skipped_all;
  return out;
}

}  // namespace mcflow

#endif  // MCFLOW_SINGULAR_HPP_
