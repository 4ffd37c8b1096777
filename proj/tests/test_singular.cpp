#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "mcflow/scenarios.hpp"
#include "mcflow/singular.hpp"

using namespace mcflow;
using mcflow::testing::cylinder_hessian;
using mcflow::testing::synthetic_point;
using mcflow::testing::synthetic_ring;

TEST(ClassifyStratum, SpherePoint) {
  const auto f = classify_stratum(SymmetricMatrix::diagonal({-0.5, -0.5, -0.5}), 2, 0.1);
  ASSERT_TRUE(f.k);
  EXPECT_EQ(*f.k, 0);
  EXPECT_NEAR(f.residual, 0.0, 1e-14);
  EXPECT_EQ(f.kernel.cols(), 0);
  EXPECT_NEAR((f.complement_projector - Mat::Identity(3, 3)).norm(), 0.0, 1e-14);
}

TEST(ClassifyStratum, NeckCylinder) {
  const auto f = classify_stratum(SymmetricMatrix::diagonal({-1.0, -1.0, 0.0}), 2, 0.1);
  ASSERT_TRUE(f.k);
  EXPECT_EQ(*f.k, 1);
  EXPECT_NEAR(f.residual, 0.0, 1e-14);
  EXPECT_NEAR(std::abs(f.kernel(2, 0)), 1.0, 1e-12);
}

TEST(ClassifyStratum, ZeroMatrixUnclassified) {
  const auto f = classify_stratum(SymmetricMatrix(3), 2, 0.1);
  EXPECT_FALSE(f.k.has_value());
  EXPECT_GT(f.residual, 0.1);
}

TEST(ClassifyStratum, PlanarCircle) {
  const auto f = classify_stratum(SymmetricMatrix::diagonal({-1.0, -1.0}), 1, 0.1);
  ASSERT_TRUE(f.k);
  EXPECT_EQ(*f.k, 0);
}

TEST(ClassifyStratum, RotatedCylinderKernel) {
  const Vec t = make_vec({1.0, 2.0, 2.0}) / 3.0;
  const auto f = classify_stratum(SymmetricMatrix::from_upper(cylinder_hessian(t)), 2, 0.1);
  ASSERT_TRUE(f.k);
  EXPECT_EQ(*f.k, 1);
  EXPECT_NEAR((f.axis_projector - t * t.transpose()).norm(), 0.0, 1e-12);
}

TEST(ClassifyStratum, ToleranceBounds) {
  const auto h = SymmetricMatrix::diagonal({-0.5, -0.5, -0.5});
  EXPECT_THROW(classify_stratum(h, 2, 0.0), Error);
  EXPECT_THROW(classify_stratum(h, 2, 0.25), Error);
  EXPECT_THROW(classify_stratum(h, 1, 0.1), Error);
}

TEST(ClassifyStratum, ProjectorAlgebraProperty) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> N(0.0, 0.03);
  for (int trial = 0; trial < 200; ++trial) {
    Mat a = (trial % 2 ? cylinder_hessian(make_vec({0.0, 0.6, 0.8})) : Mat(-0.5 * Mat::Identity(3, 3)));
    for (int i = 0; i < 3; ++i) {
      for (int j = i; j < 3; ++j) {
        const double e = N(rng);
        a(i, j) += e;
        if (i != j) a(j, i) += e;
      }
    }
    const auto f = classify_stratum(SymmetricMatrix::from_upper(a), 2, 0.1);
    const Mat& A = f.axis_projector;
    const Mat& P = f.complement_projector;
    EXPECT_LE((A + P - Mat::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((P * A).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((P * P - P).cwiseAbs().maxCoeff(), 1e-10);
    if (f.k) {
      EXPECT_NEAR(A.trace(), *f.k, 1e-10);
      const int n = 2;
      const Mat model = a + P / (n - *f.k);
      EXPECT_LE(model.jacobiSvd().singularValues()(0), 0.1 + 1e-12);
    }
  }
}

TEST(ClusterTimes, Examples) {
  auto pts = [](std::vector<double> t) {
    std::vector<CriticalPoint> p;
    for (double x : t) p.push_back(synthetic_point(make_vec({0, 0, 0}), x, -0.5 * Mat::Identity(3, 3)));
    return p;
  };
  EXPECT_EQ(cluster_singular_times(pts({0.500, 0.501, 0.499}), 0.01).size(), 1u);
  const auto two = cluster_singular_times(pts({0.12, 0.011, 0.121, 0.012}), 0.02);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_LT(two[0].time, two[1].time);
  EXPECT_EQ(two[0].members.size(), 2u);
  EXPECT_EQ(cluster_singular_times(pts({0.1, 0.2, 0.3}), 0.15).size(), 1u);
  try {
    cluster_singular_times({}, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::insufficient_data);
  }
}

TEST(FitManifold, SyntheticRingClosed) {
  const double R = 1.0;
  const int m = 64;
  const double h = 2.0 * M_PI * R / m / 2.0;  // neighbours at 2h
  const auto pts = synthetic_ring(m, R);
  const auto comps = fit_singular_manifold(pts, h);
  ASSERT_EQ(comps.size(), 1u);
  EXPECT_EQ(comps[0].k, 1);
  EXPECT_TRUE(comps[0].closed);
  EXPECT_TRUE(comps[0].fitted);
  EXPECT_LE(comps[0].max_tangency, 1e-6);
  EXPECT_EQ(comps[0].u_spread, 0.0);
}

TEST(FitManifold, TwoArcsAreOpenComponents) {
  const double h = 2.0 * M_PI / 64 / 2.0;
  auto ring = synthetic_ring(64, 1.0);
  std::vector<CriticalPoint> arcs;
  for (int i = 0; i < 64; ++i) {
    // drop two gaps of five points, about 10h wide each
    if ((i >= 0 && i < 5) || (i >= 32 && i < 37)) continue;
    arcs.push_back(ring[i]);
  }
  const auto comps = fit_singular_manifold(arcs, h);
  ASSERT_EQ(comps.size(), 2u);
  for (const auto& c : comps) EXPECT_FALSE(c.closed);
}

TEST(FitManifold, MixedStratumThrows) {
  auto pts = synthetic_ring(16, 0.2);
  pts.push_back(synthetic_point(pts[0].position + make_vec({0.01, 0, 0}), 0.5, -0.5 * Mat::Identity(3, 3)));
  try {
    fit_singular_manifold(pts, 0.05);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::mixed_stratum);
  }
}

TEST(FitManifold, PointsAreDimensionZero) {
  std::vector<CriticalPoint> pts{
      synthetic_point(make_vec({0.5, 0, 0}), 0.1, -0.5 * Mat::Identity(3, 3)),
      synthetic_point(make_vec({-0.5, 0, 0}), 0.1, -0.5 * Mat::Identity(3, 3))};
  const auto comps = fit_singular_manifold(pts, 0.01);
  ASSERT_EQ(comps.size(), 2u);
  for (const auto& c : comps) {
    EXPECT_EQ(c.k, 0);
    EXPECT_TRUE(c.closed);
  }
}

TEST(Verdict, SyntheticRingIsC2) {
  const auto r = c2_verdict(synthetic_ring(64, 1.0), 2.0 * M_PI / 128, 0.005);
  EXPECT_EQ(r.verdict, Verdict::C2);
  EXPECT_EQ(r.time_clusters.size(), 1u);
  EXPECT_EQ(r.manifolds.size(), 1u);
}

TEST(Verdict, TwoTimesIsNotC2WithWitness) {
  std::vector<CriticalPoint> pts{
      synthetic_point(make_vec({0.0, 0, 0}), 0.016, cylinder_hessian(make_vec({1, 0, 0}))),
      synthetic_point(make_vec({0.7, 0, 0}), 0.066, -0.5 * Mat::Identity(3, 3)),
      synthetic_point(make_vec({-0.7, 0, 0}), 0.066, -0.5 * Mat::Identity(3, 3))};
  const auto r = c2_verdict(pts, 0.01, 0.0007);
  EXPECT_EQ(r.verdict, Verdict::notC2);
  bool named = false;
  for (const auto& v : r.verdict_reasons) {
    named = named || (!v.passed && v.detail.find("multiple singular times") != std::string::npos);
  }
  EXPECT_TRUE(named);
}

TEST(Verdict, ManyUnclassifiedIsInconclusive) {
  std::vector<CriticalPoint> pts{synthetic_point(make_vec({0, 0, 0}), 0.25, -0.5 * Mat::Identity(3, 3)),
                                 synthetic_point(make_vec({0.5, 0, 0}), 0.25, Mat::Zero(3, 3))};
  const auto r = c2_verdict(pts, 0.01, 0.0025);
  EXPECT_EQ(r.verdict, Verdict::inconclusive);
  EXPECT_EQ(r.unclassified, 1u);
}

TEST(Verdict, TangencyToleranceOnlyGivesInconclusive) {
  // ring whose Hessian kernels are tilted 10 degrees out of the tangent
  const int m = 64;
  std::vector<CriticalPoint> pts;
  const double tilt = 10.0 * M_PI / 180.0;
  for (int i = 0; i < m; ++i) {
    const double a = 2.0 * M_PI * i / m;
    const Vec x = make_vec({0.0, std::cos(a), std::sin(a)});
    const Vec t = make_vec({0.0, -std::sin(a), std::cos(a)});
    const Vec e = make_vec({1.0, 0.0, 0.0});
    pts.push_back(synthetic_point(x, 0.03, cylinder_hessian(std::cos(tilt) * t + std::sin(tilt) * e)));
  }
  const auto r = c2_verdict(pts, 2.0 * M_PI / m / 2.0, 0.0003);
  EXPECT_EQ(r.verdict, Verdict::inconclusive);
  ASSERT_EQ(r.manifolds.size(), 1u);
  EXPECT_NEAR(r.manifolds[0].max_tangency, tilt, 0.02);
}

TEST(Lipschitz, SyntheticRingBoundedBySqrt2) {
  const auto pts = synthetic_ring(64, 1.0);
  const auto comps = fit_singular_manifold(pts, 2.0 * M_PI / 128);
  ASSERT_EQ(comps.size(), 1u);
  const auto l = hessian_tangent_lipschitz(pts, comps[0]);
  ASSERT_TRUE(l.max_ratio.has_value());
  EXPECT_LE(*l.max_ratio, std::sqrt(2.0) + 1e-6);
  EXPECT_GT(l.pairs, 0u);
}

TEST(Lipschitz, CollinearHasNoVariation) {
  std::vector<CriticalPoint> pts;
  for (int i = 0; i < 12; ++i) {
    pts.push_back(synthetic_point(make_vec({0.01 * i, 0, 0}), 0.01, cylinder_hessian(make_vec({1, 0, 0}))));
  }
  const auto comps = fit_singular_manifold(pts, 0.01);
  ASSERT_EQ(comps.size(), 1u);
  const auto l = hessian_tangent_lipschitz(pts, comps[0]);
  EXPECT_TRUE(l.no_variation);
  EXPECT_FALSE(l.max_ratio.has_value());
}

TEST(Lipschitz, TooFewPoints) {
  const auto pts = synthetic_ring(6, 0.03);
  const auto comps = fit_singular_manifold(pts, 0.02);
  ASSERT_EQ(comps.size(), 1u);
  if (comps[0].fitted) {
    try {
      hessian_tangent_lipschitz(pts, comps[0]);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::insufficient_data);
    }
  }
}

TEST(FindCriticalPoints, ExactSphereCollapsesToOrigin) {
  const auto spec = GridSpec::half_plane(101, -1.5, 1.5, 1.5);
  const auto u = ArrivalField::from_function(spec, [](const Vec& x) -> std::optional<double> {
    if (x.norm() > 1.0) return std::nullopt;
    return exact_arrival_sphere(1.0, 2, x);
  });
  const auto pts = find_critical_points(u, 0.5 * spec.h);
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_LE(pts[0].position.norm(), 1e-10);
  EXPECT_NEAR(pts[0].u_value, 0.25, 1e-12);
  ASSERT_TRUE(pts[0].stratum_k);
  EXPECT_EQ(*pts[0].stratum_k, 0);
}

TEST(FindCriticalPoints, ExactPlanarCircle) {
  const auto spec = GridSpec::cube(2, 101, -1.5, 1.5);
  const auto u = ArrivalField::from_function(spec, [](const Vec& x) -> std::optional<double> {
    if (x.norm() > 1.0) return std::nullopt;
    return exact_arrival_sphere(1.0, 1, x);
  });
  const auto pts = find_critical_points(u, spec.h);
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_LE(pts[0].position.norm(), 1e-10);
}

TEST(FindCriticalPoints, PartialFieldRejected) {
  auto u = ArrivalField(GridSpec::cube(2, 16, -1, 1));
  u.partial = true;
  try {
    find_critical_points(u, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::partial_field);
  }
}
