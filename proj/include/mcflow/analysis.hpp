#ifndef MCFLOW_ANALYSIS_HPP_
#define MCFLOW_ANALYSIS_HPP_

// Full analyzer pass over an arrival field: critical set, verdict, profiles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "mcflow/arrival.hpp"
#include "mcflow/profiles.hpp"
#include "mcflow/singular.hpp"

namespace mcflow {

struct AnalysisSettings {
  std::optional<double> tau;
  double tol = kDefaultClassifyTol;
  std::optional<double> time_tol;
  double angle_tol_deg = 5.0;
  double grad_floor = kDefaultGradFloor;
  double cone_C = 1.0;
  std::vector<double> radii{0.2, 0.1, 0.05};
  int samples = 0;
  double delta = 0.2;
  double align_tol = 0.05;
  std::optional<double> eps_search;
  std::uint64_t seed = 0;
};

template <class T>
struct Outcome {
  std::optional<T> value;
  std::string error;  // set when the operation failed
};

//! |arrival residual| at every node with derivative data and |grad u| >= floor.
struct ResidualMap {
  std::vector<std::size_t> nodes;
  std::vector<double> values;

  double median_abs() const {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::vector<double> a;
    a.reserve(values.size());
    for (double v : values) a.push_back(std::abs(v));
    std::nth_element(a.begin(), a.begin() + a.size() / 2, a.end());
    return a[a.size() / 2];
  }
};

inline ResidualMap residual_map(const ArrivalField& u, double grad_floor = kDefaultGradFloor) {
  ResidualMap m;
  const auto& s = u.spec;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (!u.masked(k)) continue;
    const Index idx = s.unflatten(k);
    if (!has_stencil(s, idx)) continue;
    try {
      const double r = arrival_residual(u, idx, grad_floor);
      m.nodes.push_back(k);
      m.values.push_back(r);
    } catch (const Error&) {
      // near-critical or stencil outside the swept region
    }
  }
  return m;
}

struct ComponentAnalysis {
  std::size_t representative = 0;  // point index
  Outcome<std::vector<ProfileRow>> cone;
  Outcome<std::vector<ProfileRow>> alignment;
  Outcome<std::vector<RescaledRow>> rescaled;
  Outcome<TransverseMax> transverse;
  Outcome<LipschitzResult> lipschitz;
  LocalStructure local;
};

struct Analysis {
  double T = 0.0;
  Index extinction_node{0, 0, 0};
  double h = 0.0;
  double tau = 0.0;
  double time_tol = 0.0;
  double eps_search = 0.0;
  SingularSetReport report;
  std::vector<ComponentAnalysis> components;
  ResidualMap residual;
};

namespace detail {

template <class T, class F>
Outcome<T> attempt(F&& f) {
  Outcome<T> out;
  try {
    out.value = f();
  } catch (const Error& e) {
    out.error = e.what();
  }
  return out;
}

inline double domain_radius(const GridSpec& s) {
  double r = 0.0;
  for (int a = 0; a < s.dim; ++a) r = std::max(r, 0.5 * s.h * (s.counts[a] - 1));
  return r;
}

}  // namespace detail

inline Analysis analyze_field(const ArrivalField& u, const AnalysisSettings& cfg) {
  Analysis a;
  const auto [T, node] = extinction_time(u);
  a.T = T;
  a.extinction_node = node;
  a.h = u.spec.h;
  a.tau = cfg.tau.value_or(u.spec.h);
  a.time_tol = cfg.time_tol.value_or(0.01 * T);
  a.eps_search = cfg.eps_search.value_or(0.1 * detail::domain_radius(u.spec));

  const ArrivalSampler sampler(u);
  auto points = find_critical_points(sampler, a.tau, cfg.tol);
  a.report = c2_verdict(std::move(points), u.spec.h, a.time_tol,
                        cfg.angle_tol_deg * std::numbers::pi / 180.0);
  const auto& pts = a.report.points;

  for (const auto& comp : a.report.manifolds) {
    ComponentAnalysis ca;
    ca.representative = comp.members.front();
    const auto& p = pts[ca.representative];
    ConeSpec cone;
    cone.aperture = cfg.cone_C;
    cone.radii = cfg.radii;
    cone.samples = cfg.samples;
    ca.cone = detail::attempt<std::vector<ProfileRow>>(
        [&] { return cone_continuity_profile(sampler, p, cone, cfg.seed); });
    ca.local = local_structure_checks(u, p, std::max(cfg.delta, 3.0 * u.spec.h), a.time_tol);
    if (comp.k >= 1) {
      ca.alignment = detail::attempt<std::vector<ProfileRow>>([&] {
        return normal_alignment_profile(sampler, p, cfg.radii, cfg.grad_floor, cfg.samples, cfg.seed);
      });
      ca.rescaled = detail::attempt<std::vector<RescaledRow>>(
          [&] { return rescaled_profile(sampler, p, cfg.radii, cfg.cone_C, cfg.samples, cfg.seed); });
      ca.transverse = detail::attempt<TransverseMax>([&] {
        const Vec offset = std::min(3.0 * u.spec.h, a.eps_search) * p.kernel.col(0);
        return transverse_max_point(sampler, p, offset, cfg.align_tol);
      });
      if (comp.fitted) {
        ca.lipschitz = detail::attempt<LipschitzResult>(
            [&] { return hessian_tangent_lipschitz(pts, comp); });
      } else {
        ca.lipschitz.error = "component has no fitted tangent planes";
      }
    }
    a.components.push_back(std::move(ca));
  }

  a.residual = residual_map(u, cfg.grad_floor);
  return a;
}

}  // namespace mcflow

#endif  // MCFLOW_ANALYSIS_HPP_
