#include <gtest/gtest.h>

#include <cmath>

#include "mcflow/evolver.hpp"
#include "mcflow/scenarios.hpp"

using namespace mcflow;

namespace {

EvolveParams params(double cfl) {
  EvolveParams p;
  p.cfl = cfl;
  return p;
}

// Front radius along the positive x axis by linear interpolation of v.
double front_radius(const ScalarField& v) {
  const auto& s = v.spec;
  const int mid = s.axisymmetric ? 0 : s.counts[1] / 2;
  const int i0 = (s.counts[0] - 1) / 2;
  for (int i = i0; i + 1 < s.counts[0]; ++i) {
    const double a = v.at({i, mid, 0}), b = v.at({i + 1, mid, 0});
    if (a > 0.0 && b <= 0.0) {
      const double xa = s.position({i, mid, 0})(0);
      return xa + s.h * a / (a - b);
    }
  }
  return 0.0;
}

}  // namespace

TEST(StableDt, Arithmetic) {
  GridSpec s = GridSpec::cube(2, 101, 0.0, 1.0);
  EXPECT_NEAR(stable_dt(s, params(0.5)), 1.25e-5, 1e-18);
  s = GridSpec::half_plane(101, 0.0, 1.0, 0.5);
  EXPECT_NEAR(stable_dt(s, params(0.5)), 0.5e-4 / 6.0, 1e-18);
  s = GridSpec::cube(3, 11, 0.0, 1.0);
  EXPECT_NEAR(stable_dt(s, params(1.0)), 0.01 / 6.0, 1e-15);
}

TEST(EvolveParamsTest, Validation) {
  EvolveParams p;
  p.cfl = 0.0;
  EXPECT_THROW(p.validate(), Error);
  p.cfl = 1.5;
  EXPECT_THROW(p.validate(), Error);
  p = EvolveParams{};
  p.t_max = 0.0;
  EXPECT_THROW(p.validate(), Error);
  p = EvolveParams{};
  p.record_stride = 0;
  EXPECT_THROW(p.validate(), Error);
}

TEST(Step, RejectsUnstableDt) {
  const auto s = GridSpec::cube(2, 16, -1.0, 1.0);
  const ScalarField f(s);
  const EvolveParams p;
  try {
    step(f, 2.0 * stable_dt(s, p), p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::stability);
  }
}

TEST(Step, NanIsBlowup) {
  const auto s = GridSpec::cube(2, 16, -1.0, 1.0);
  ScalarField f(s);
  f.values[s.flat({5, 5, 0})] = std::numeric_limits<double>::quiet_NaN();
  const EvolveParams p;
  try {
    step(f, stable_dt(s, p), p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numerical_blowup);
  }
}

TEST(Step, AffineUnchangedInInterior) {
  const auto s = GridSpec::cube(2, 16, -1.0, 1.0);
  ScalarField f(s);
  for (std::size_t k = 0; k < s.size(); ++k) {
    const Vec x = s.position(s.unflatten(k));
    f[k] = 0.4 * x(0) - 0.2 * x(1);
  }
  const EvolveParams p;
  const auto g = step(f, stable_dt(s, p), p);
  for (int i = 1; i < 15; ++i) {
    for (int j = 1; j < 15; ++j) EXPECT_NEAR(g.at({i, j, 0}), f.at({i, j, 0}), 1e-12);
  }
  EXPECT_EQ(g.at({0, 4, 0}), g.at({1, 4, 0}));
}

TEST(Step, MaximumPrinciple) {
  const auto shape = make_circle(1.0);
  const auto s = shape.grid(64);
  ScalarField v = sample_implicit(shape, s);
  const EvolveParams p;
  const double dt = stable_dt(s, p);
  double hi = *std::max_element(v.values.begin(), v.values.end());
  double lo = *std::min_element(v.values.begin(), v.values.end());
  for (int n = 0; n < 50; ++n) {
    v = step(v, dt, p);
    const double nhi = *std::max_element(v.values.begin(), v.values.end());
    const double nlo = *std::min_element(v.values.begin(), v.values.end());
    EXPECT_LE(nhi, hi + 1e-12);
    EXPECT_GE(nlo, lo - 1e-12);
    hi = nhi;
    lo = nlo;
  }
}

TEST(Evolve, ShrinkingCircleRadius) {
  const auto shape = make_circle(1.0);
  const auto s = shape.grid(128);
  const EvolveParams p;
  const double dt = stable_dt(s, p);
  ScalarField v = sample_implicit(shape, s);
  double t = 0.0;
  for (double target : {0.1, 0.2, 0.3, 0.4}) {
    while (t + 0.5 * dt < target) {
      v = step(v, dt, p);
      t += dt;
    }
    EXPECT_NEAR(front_radius(v), std::sqrt(1.0 - 2.0 * t), 3.0 * s.h) << "t=" << t;
  }
}

TEST(Evolve, ShrinkingSphereRadius) {
  const auto shape = make_sphere(1.0);
  const auto s = shape.grid(128);
  const EvolveParams p;
  const double dt = stable_dt(s, p);
  ScalarField v = sample_implicit(shape, s);
  double t = 0.0;
  for (double target : {0.05, 0.1, 0.2}) {
    while (t + 0.5 * dt < target) {
      v = step(v, dt, p);
      t += dt;
    }
    EXPECT_NEAR(front_radius(v), std::sqrt(1.0 - 4.0 * t), 3.0 * s.h) << "t=" << t;
  }
}

TEST(Evolve, CircleArrivalAndMonotoneSweep) {
  const auto shape = make_circle(1.0);
  const auto s = shape.grid(96);
  const auto v0 = sample_implicit(shape, s);
  const auto r = evolve(v0, EvolveParams{});
  EXPECT_FALSE(r.arrival.partial);
  EXPECT_EQ(r.log.max_positive_increase, 0u);
  std::size_t positive = 0;
  for (double x : v0.values) positive += x > 0.0;
  EXPECT_EQ(r.arrival.masked_count(), positive);
  double T = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    EXPECT_EQ(r.arrival.masked(k), v0[k] > 0.0);
    if (r.arrival.masked(k)) T = std::max(T, r.arrival.u[k]);
  }
  EXPECT_NEAR(T, 0.5, 0.01);
  for (std::size_t i = 1; i < r.log.rows.size(); ++i) {
    EXPECT_LE(r.log.rows[i].positive_nodes, r.log.rows[i - 1].positive_nodes);
    EXPECT_GT(r.log.rows[i].step, r.log.rows[i - 1].step);
  }
  EXPECT_EQ(r.log.rows.back().positive_nodes, 0u);
}

TEST(Evolve, EpsilonRobustness) {
  const auto shape = make_circle(1.0);
  const auto s = shape.grid(96);
  const auto v0 = sample_implicit(shape, s);
  EvolveParams a, b;
  a.epsilon = 0.5 * s.h;
  b.epsilon = 0.25 * s.h;
  auto T = [](const EvolveResult& r) { return extinction_time(r.arrival).first; };
  const double Ta = T(evolve(v0, a)), Tb = T(evolve(v0, b));
  EXPECT_LE(std::abs(Ta - Tb), 0.01 * Ta);
}

TEST(Evolve, EarlyStopIsIncompleteSweep) {
  const auto shape = make_circle(1.0);
  const auto s = shape.grid(64);
  EvolveParams p;
  p.t_max = 0.01;
  try {
    evolve(sample_implicit(shape, s), p);
    FAIL();
  } catch (const IncompleteSweepError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::incomplete_sweep);
    const auto& a = e.result().arrival;
    EXPECT_TRUE(a.partial);
    EXPECT_GT(a.masked_count(), 0u);
    const auto centre = s.flat({32, 32, 0});
    EXPECT_FALSE(a.masked(centre));
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (!a.masked(k)) continue;
      EXPECT_LE(a.u[k], 0.01 + 1e-12);
    }
  }
}

TEST(Evolve, SnapshotsFollowStride) {
  const auto shape = make_circle(1.0);
  const auto s = shape.grid(32);
  EvolveParams p;
  p.record_stride = 50;
  std::vector<std::size_t> steps;
  const auto r = evolve(sample_implicit(shape, s), p,
                        [&](const ScalarField&, std::size_t step, double) { steps.push_back(step); });
  ASSERT_GE(steps.size(), 2u);
  EXPECT_EQ(steps.front(), 0u);
  for (std::size_t i = 1; i + 1 < steps.size(); ++i) EXPECT_EQ(steps[i] % 50, 0u);
  EXPECT_EQ(steps.back(), r.log.steps);
}

TEST(Diagnostics, CsvHeader) {
  DiagnosticsLog log;
  log.rows.push_back({0, 0.0, 10, 1.0, -1.0});
  std::ostringstream os;
  log.write_csv(os);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "step,t,positive_nodes,max_v,min_v");
}

TEST(Reinitialize, KeepsSignPattern) {
  const auto shape = make_circle(1.0);
  const auto s = shape.grid(64);
  ScalarField v = sample_implicit(shape, s);
  for (auto& x : v.values) x *= 3.0;
  ScalarField w = v;
  reinitialize(w);
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (std::abs(v[k]) <= 2 * s.h) continue;
    EXPECT_EQ(v[k] > 0.0, w[k] > 0.0);
  }
}
