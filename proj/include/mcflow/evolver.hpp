#ifndef MCFLOW_EVOLVER_HPP_
#define MCFLOW_EVOLVER_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "mcflow/arrival.hpp"
#include "mcflow/errors.hpp"
#include "mcflow/grid.hpp"

namespace mcflow {

struct EvolveParams {
  std::optional<double> epsilon;  // defaults to half the grid spacing
  double cfl = 0.4;
  double t_max = 10.0;
  int record_stride = 100;
  int reinit_stride = 0;  // 0 disables reinitialization

  double epsilon_for(const GridSpec& spec) const { return epsilon.value_or(0.5 * spec.h); }

  void validate() const {
    if (!(t_max > 0.0)) throw Error(ErrorKind::invalid_parameter, "t_max must be positive");
    if (!(cfl > 0.0 && cfl <= 1.0)) {
      throw Error(ErrorKind::invalid_parameter, "cfl must lie in (0, 1]");
    }
    if (epsilon && !(*epsilon > 0.0)) {
      throw Error(ErrorKind::invalid_parameter, "epsilon must be positive");
    }
    if (record_stride < 1) throw Error(ErrorKind::invalid_parameter, "record_stride must be >= 1");
    if (reinit_stride < 0) throw Error(ErrorKind::invalid_parameter, "reinit_stride must be >= 0");
  }
};

//! Explicit parabolic limit cfl * h^2 / (2 d_eff); the hoop term of the
//! axisymmetric operator counts as one more dimension.
inline double stable_dt(const GridSpec& spec, const EvolveParams& params) {
  const int d_eff = spec.dim + (spec.axisymmetric ? 1 : 0);
  return params.cfl * spec.h * spec.h / (2.0 * d_eff);
}

struct StepStats {
  std::size_t positive_nodes = 0;
  double max_v = -std::numeric_limits<double>::infinity();
  double min_v = std::numeric_limits<double>::infinity();
};

namespace detail {

// Boundary node -> nearest interior node (homogeneous Neumann copy).
inline std::vector<std::pair<std::size_t, std::size_t>> boundary_map(const GridSpec& s) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const Index idx = s.unflatten(k);
    if (has_stencil(s, idx)) continue;
    Index src = idx;
    for (int a = 0; a < s.dim; ++a) {
      const int lo = (s.axisymmetric && a == 1) ? 0 : 1;
      src[a] = std::clamp(src[a], lo, s.counts[a] - 2);
    }
    out.emplace_back(k, s.flat(src));
  }
  return out;
}

inline double operator_2d(const double* rm, const double* r0, const double* rp, int j,
                          int jm, int jp, double inv_h, double inv_h2, double eps2,
                          double hoop_inv_rho, bool axisymmetric, bool on_axis) {
  const double c = r0[j];
  const double gx = 0.5 * (rp[j] - rm[j]) * inv_h;
  const double gy = 0.5 * (r0[jp] - r0[jm]) * inv_h;
  const double hxx = (rp[j] - 2.0 * c + rm[j]) * inv_h2;
  const double hyy = (r0[jp] - 2.0 * c + r0[jm]) * inv_h2;
  const double hxy = 0.25 * (rp[jp] - rp[jm] - rm[jp] + rm[jm]) * inv_h2;
  double lap = hxx + hyy;
  double hoop = 0.0;
  if (axisymmetric) {
    hoop = on_axis ? hyy : gy * hoop_inv_rho;
    lap += hoop;
  }
  const double quad = gx * gx * hxx + 2.0 * gx * gy * hxy + gy * gy * hyy;
  const double g2 = gx * gx + gy * gy;
  const double tr = hxx + hyy, det = hxx * hyy - hxy * hxy;
  const double tr2 = tr * tr - 2.0 * det + hoop * hoop;
  const double tr3 = tr * tr * tr - 3.0 * det * tr + hoop * hoop * hoop;
  const double degenerate = tr2 > 0.0 ? tr3 / tr2 : 0.0;
  return lap - (quad + eps2 * degenerate) / (g2 + eps2);
}

inline double operator_3d(const double* v, std::size_t k, std::size_t sx, std::size_t sy,
                          double inv_h, double inv_h2, double eps2) {
  const double c = v[k];
  const double g[3] = {0.5 * (v[k + sx] - v[k - sx]) * inv_h,
                       0.5 * (v[k + sy] - v[k - sy]) * inv_h,
                       0.5 * (v[k + 1] - v[k - 1]) * inv_h};
  auto cross = [&](std::size_t a, std::size_t b) {
    return 0.25 * (v[k + a + b] - v[k + a - b] - v[k - a + b] + v[k - a - b]) * inv_h2;
  };
  Eigen::Matrix3d hm;
  hm(0, 0) = (v[k + sx] - 2.0 * c + v[k - sx]) * inv_h2;
  hm(1, 1) = (v[k + sy] - 2.0 * c + v[k - sy]) * inv_h2;
  hm(2, 2) = (v[k + 1] - 2.0 * c + v[k - 1]) * inv_h2;
  hm(0, 1) = hm(1, 0) = cross(sx, sy);
  hm(0, 2) = hm(2, 0) = cross(sx, 1);
  hm(1, 2) = hm(2, 1) = cross(sy, 1);
  const Eigen::Vector3d gv(g[0], g[1], g[2]);
  const double quad = gv.dot(hm * gv);
  const Eigen::Matrix3d h2 = hm * hm;
  const double tr2 = h2.trace();
  const double degenerate = tr2 > 0.0 ? (h2 * hm).trace() / tr2 : 0.0;
  return hm.trace() - (quad + eps2 * degenerate) / (gv.squaredNorm() + eps2);
}

inline void copy_boundary(std::vector<double>& v,
                          const std::vector<std::pair<std::size_t, std::size_t>>& bmap) {
  for (const auto& [dst, src] : bmap) v[dst] = v[src];
}

}  // namespace detail

//! One explicit Euler step of the regularized level-set equation writing into
//! `out` (resized as needed). Returns positivity and range statistics of the
//! new field.
inline StepStats step_into(const ScalarField& in, ScalarField& out, double dt,
                           const EvolveParams& params,
                           const std::vector<std::pair<std::size_t, std::size_t>>* bmap = nullptr) {
  const auto& s = in.spec;
  if (in.label != FieldLabel::levelset) {
    throw Error(ErrorKind::invalid_parameter, "step expects a level-set field");
  }
  const double limit = stable_dt(s, params);
  if (!(dt > 0.0) || dt > limit * (1.0 + 1e-12)) {
    throw Error(ErrorKind::stability, "dt exceeds the stable explicit step");
  }
  const double eps = params.epsilon_for(s);
  if (!(eps > 0.0)) throw Error(ErrorKind::invalid_parameter, "epsilon must be positive");
  const double eps2 = eps * eps;
  const double inv_h = 1.0 / s.h, inv_h2 = inv_h * inv_h;

  out.spec = s;
  out.label = in.label;
  out.values.resize(in.values.size());
  const double* v = in.values.data();
  double* w = out.values.data();

  std::size_t bad = std::numeric_limits<std::size_t>::max();
  if (s.dim == 2) {
    const int nx = s.counts[0], ny = s.counts[1];
    const int j0 = s.axisymmetric ? 0 : 1;
#pragma omp parallel for schedule(static) reduction(min : bad)
    for (int i = 1; i < nx - 1; ++i) {
      const double* rm = v + static_cast<std::size_t>(i - 1) * ny;
      const double* r0 = v + static_cast<std::size_t>(i) * ny;
      const double* rp = v + static_cast<std::size_t>(i + 1) * ny;
      for (int j = j0; j < ny - 1; ++j) {
        const bool on_axis = s.axisymmetric && j == 0;
        const int jm = on_axis ? 1 : j - 1;
        const double hoop = s.axisymmetric && !on_axis ? 1.0 / (j * s.h) : 0.0;
        const double rhs =
            detail::operator_2d(rm, r0, rp, j, jm, j + 1, inv_h, inv_h2, eps2, hoop,
                                s.axisymmetric, on_axis);
        const double nv = r0[j] + dt * rhs;
        const std::size_t k = static_cast<std::size_t>(i) * ny + j;
        w[k] = nv;
        if (!std::isfinite(nv) && k < bad) bad = k;
      }
    }
  } else {
    const auto st = s.strides();
    const int nx = s.counts[0], ny = s.counts[1], nz = s.counts[2];
#pragma omp parallel for schedule(static) reduction(min : bad)
    for (int i = 1; i < nx - 1; ++i) {
      for (int j = 1; j < ny - 1; ++j) {
        for (int l = 1; l < nz - 1; ++l) {
          const std::size_t k = i * st[0] + j * st[1] + l;
          const double nv = v[k] + dt * detail::operator_3d(v, k, st[0], st[1], inv_h, inv_h2, eps2);
          w[k] = nv;
          if (!std::isfinite(nv) && k < bad) bad = k;
        }
      }
    }
  }
  if (bad != std::numeric_limits<std::size_t>::max()) {
    throw Error(ErrorKind::numerical_blowup,
                "non-finite value at node " + to_string(s.unflatten(bad), s.dim));
  }
  if (bmap) {
    detail::copy_boundary(out.values, *bmap);
  } else {
    detail::copy_boundary(out.values, detail::boundary_map(s));
  }

  StepStats stats;
  for (double x : out.values) {
    stats.positive_nodes += x > 0.0;
    stats.max_v = std::max(stats.max_v, x);
    stats.min_v = std::min(stats.min_v, x);
  }
  return stats;
}

inline ScalarField step(const ScalarField& field, double dt, const EvolveParams& params) {
  ScalarField out;
  step_into(field, out, dt, params);
  return out;
}

//! Pseudo-time iterations of v_tau = sign(v) (1 - |grad v|) with Godunov
//! upwinding. Pulls |grad v| toward 1 near the front.
inline void reinitialize(ScalarField& field, int iterations = 5) {
  const auto& s = field.spec;
  const double h = s.h;
  const double dtau = 0.3 * h;
  const auto bmap = detail::boundary_map(s);
  const auto init = field.values;
  std::vector<double> next = field.values;
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t k = 0; k < s.size(); ++k) {
      const Index idx = s.unflatten(k);
      if (!has_stencil(s, idx)) continue;
      const double c = field.values[k];
      const double sgn = init[k] / std::sqrt(init[k] * init[k] + h * h);
      double g2 = 0.0;
      for (int a = 0; a < s.dim; ++a) {
        Index lo = idx, hi = idx;
        lo[a] -= 1;
        hi[a] += 1;
        const double dm = (c - field.values[*s.resolve(lo)]) / h;
        const double dp = (field.values[*s.resolve(hi)] - c) / h;
        if (sgn > 0.0) {
          g2 += std::max(std::pow(std::max(dm, 0.0), 2), std::pow(std::min(dp, 0.0), 2));
        } else {
          g2 += std::max(std::pow(std::min(dm, 0.0), 2), std::pow(std::max(dp, 0.0), 2));
        }
      }
      next[k] = c - dtau * sgn * (std::sqrt(g2) - 1.0);
    }
    detail::copy_boundary(next, bmap);
    field.values = next;
  }
}

//! Per-node first zero crossing of an advancing front. A node records at most
//! one crossing; later sign changes are ignored.
class CrossingRecorder {
 public:
  explicit CrossingRecorder(const ScalarField& v0)
      : spec_(v0.spec),
        state_(v0.values.size(), State::never),
        last_v_(v0.values.size(), 0.0),
        last_t_(v0.values.size(), 0.0),
        crossing_(v0.values.size(), std::numeric_limits<double>::quiet_NaN()) {
    for (std::size_t k = 0; k < v0.values.size(); ++k) {
      const double x = v0.values[k];
      if (x > 0.0) {
        state_[k] = State::live;
        last_v_[k] = x;
        live_.push_back(k);
      } else if (x == 0.0) {
        state_[k] = State::crossed;
        crossing_[k] = 0.0;
        ++recorded_;
      }
    }
  }

  void update(const ScalarField& v, double t) {
    std::size_t keep = 0;
    for (std::size_t i = 0; i < live_.size(); ++i) {
      const std::size_t k = live_[i];
      const double x = v.values[k];
      if (x <= 0.0) {
        crossing_[k] = crossing_time(last_v_[k], x, last_t_[k], t);
        state_[k] = State::crossed;
        ++recorded_;
      } else {
        last_v_[k] = x;
        last_t_[k] = t;
        live_[keep++] = k;
      }
    }
    live_.resize(keep);
  }

  std::size_t live_count() const { return live_.size(); }
  std::size_t recorded_count() const { return recorded_; }

  std::optional<double> crossing(std::size_t k) const {
    if (state_[k] != State::crossed) return std::nullopt;
    return crossing_[k];
  }

  ArrivalField to_arrival(bool partial) const {
    ArrivalField a(spec_);
    for (std::size_t k = 0; k < state_.size(); ++k) {
      if (state_[k] == State::crossed) a.set(k, crossing_[k]);
    }
    a.partial = partial;
    return a;
  }

 private:
  enum class State : unsigned char { never, live, crossed };
  GridSpec spec_;
  std::vector<State> state_;
  std::vector<double> last_v_;
  std::vector<double> last_t_;
  std::vector<double> crossing_;
  std::vector<std::size_t> live_;
  std::size_t recorded_ = 0;
};

struct DiagnosticsRow {
  std::size_t step = 0;
  double t = 0.0;
  std::size_t positive_nodes = 0;
  double max_v = 0.0;
  double min_v = 0.0;
};

struct DiagnosticsLog {
  std::vector<DiagnosticsRow> rows;
  // Largest one-step increase of the positive node count over the whole run.
  std::size_t max_positive_increase = 0;
  std::size_t steps = 0;
  double dt = 0.0;

  void write_csv(std::ostream& os) const {
    os << "step,t,positive_nodes,max_v,min_v\n";
    os.precision(17);
    for (const auto& r : rows) {
      os << r.step << ',' << r.t << ',' << r.positive_nodes << ',' << r.max_v << ','
         << r.min_v << '\n';
    }
  }
};

struct EvolveResult {
  ArrivalField arrival;
  DiagnosticsLog log;
};

class IncompleteSweepError : public Error {
 public:
  explicit IncompleteSweepError(std::shared_ptr<EvolveResult> r)
      : Error(ErrorKind::incomplete_sweep, "t_max reached with unswept nodes"),
        result_(std::move(r)) {}

  const EvolveResult& result() const { return *result_; }

 private:
  std::shared_ptr<EvolveResult> result_;
};

using SnapshotObserver = std::function<void(const ScalarField&, std::size_t step, double t)>;

//! Marches the level-set equation until the positive region is gone and
//! converts per-node crossing times into an arrival field. Throws
//! IncompleteSweepError (carrying the partial result) when t_max is hit first.
inline EvolveResult evolve(const ScalarField& v0, const EvolveParams& params,
                           const SnapshotObserver& observer = {}) {
  params.validate();
  if (v0.label != FieldLabel::levelset) {
    throw Error(ErrorKind::invalid_parameter, "evolve expects a level-set field");
  }
  const auto& s = v0.spec;
  const double dt = stable_dt(s, params);
  const auto bmap = detail::boundary_map(s);

  CrossingRecorder recorder(v0);
  if (recorder.live_count() == 0) {
    throw Error(ErrorKind::invalid_parameter, "initial field has no positive region");
  }

  DiagnosticsLog log;
  log.dt = dt;
  StepStats stats;
  for (double x : v0.values) {
    stats.positive_nodes += x > 0.0;
    stats.max_v = std::max(stats.max_v, x);
    stats.min_v = std::min(stats.min_v, x);
  }
  log.rows.push_back({0, 0.0, stats.positive_nodes, stats.max_v, stats.min_v});
  if (observer) observer(v0, 0, 0.0);

  ScalarField cur = v0, next;
  std::size_t steps = 0;
  double t = 0.0;
  std::size_t prev_positive = stats.positive_nodes;
  while (recorder.live_count() > 0 && t < params.t_max) {
    stats = step_into(cur, next, dt, params, &bmap);
    std::swap(cur, next);
    ++steps;
    t = static_cast<double>(steps) * dt;
    if (params.reinit_stride > 0 && steps % static_cast<std::size_t>(params.reinit_stride) == 0) {
      reinitialize(cur);
    }
    recorder.update(cur, t);
    if (stats.positive_nodes > prev_positive) {
      log.max_positive_increase =
          std::max(log.max_positive_increase, stats.positive_nodes - prev_positive);
    }
    prev_positive = stats.positive_nodes;
    const bool last = recorder.live_count() == 0 || t >= params.t_max;
    if (steps % static_cast<std::size_t>(params.record_stride) == 0 || last) {
      log.rows.push_back({steps, t, stats.positive_nodes, stats.max_v, stats.min_v});
      if (observer) observer(cur, steps, t);
    }
  }
  log.steps = steps;

  const bool partial = recorder.live_count() > 0;
  auto result = std::make_shared<EvolveResult>(EvolveResult{recorder.to_arrival(partial), log});
  if (partial) throw IncompleteSweepError(result);
  return std::move(*result);
}

}  // namespace mcflow

#endif  // MCFLOW_EVOLVER_HPP_
