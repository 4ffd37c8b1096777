#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "mcflow/analysis.hpp"
#include "mcflow/evolver.hpp"
#include "mcflow/profiles.hpp"
#include "mcflow/scenarios.hpp"

using namespace mcflow;
using mcflow::testing::synthetic_point;

namespace {

ArrivalField exact_sphere_field(int n) {
  return ArrivalField::from_function(GridSpec::half_plane(n, -1.5, 1.5, 1.5),
                                     [](const Vec& x) -> std::optional<double> {
                                       if (x.norm() > 1.0) return std::nullopt;
                                       return exact_arrival_sphere(1.0, 2, x);
                                     });
}

// (1 - rho^2) / 2 about the x axis.
ArrivalField exact_cylinder_field(int n) {
  return ArrivalField::from_function(GridSpec::half_plane(n, -1.5, 1.5, 1.5),
                                     [](const Vec& x) -> std::optional<double> {
                                       if (x(1) > 1.0) return std::nullopt;
                                       return exact_arrival_cylinder(1.0, 2, 1, x(1));
                                     });
}

CriticalPoint cylinder_apex(double x = 0.0) {
  return synthetic_point(make_vec({x, 0.0, 0.0}), 0.5, mcflow::testing::cylinder_hessian(make_vec({1, 0, 0})));
}

Index node_at(const GridSpec& s, double x, double y) {
  return {static_cast<int>(std::lround((x - s.origin[0]) / s.h)),
          static_cast<int>(std::lround((y - s.origin[1]) / s.h)), 0};
}

}  // namespace

TEST(SphereDirections, UnitDeterministicSeeded) {
  for (int dim : {2, 3}) {
    const auto a = sphere_directions(dim, 100, 5);
    const auto b = sphere_directions(dim, 100, 5);
    const auto c = sphere_directions(dim, 100, 6);
    ASSERT_EQ(a.size(), 100u);
    Vec mean = Vec::Zero(dim);
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_NEAR(a[i].norm(), 1.0, 1e-12);
      EXPECT_EQ(a[i], b[i]);
      mean += a[i];
    }
    EXPECT_LE(mean.norm() / 100.0, 0.05);
    EXPECT_NE(a[0], c[0]);
  }
}

TEST(ConeSpecTest, Validation) {
  ConeSpec c;
  c.radii = {0.2, 0.1, 0.05};
  EXPECT_NO_THROW(c.validate());
  c.radii = {0.1, 0.1};
  EXPECT_THROW(c.validate(), Error);
  c.radii = {0.1, -0.05};
  EXPECT_THROW(c.validate(), Error);
  c.radii = {0.2, 0.1};
  c.aperture = 0.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(ConeProfile, ExactSphereIsFlat) {
  const auto u = exact_sphere_field(121);
  const auto pts = find_critical_points(u, u.spec.h);
  ASSERT_EQ(pts.size(), 1u);
  ConeSpec c;
  c.radii = {0.2, 0.1, 0.05};
  const auto rows = cone_continuity_profile(ArrivalSampler(u), pts[0], c);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) {
    EXPECT_LE(r.value, 1e-9);
    EXPECT_GT(r.kept, 0u);
  }
}

TEST(ConeProfile, EmptyShell) {
  const auto u = exact_sphere_field(61);
  const auto pts = find_critical_points(u, u.spec.h);
  ASSERT_FALSE(pts.empty());
  ConeSpec c;
  c.radii = {1.4, 0.1};
  try {
    cone_continuity_profile(ArrivalSampler(u), pts[0], c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::empty_shell);
  }
}

TEST(NormalAlignment, ExactCylinderIsZero) {
  const auto u = exact_cylinder_field(121);
  const auto rows = normal_alignment_profile(ArrivalSampler(u), cylinder_apex(), {0.2, 0.1, 0.05});
  for (const auto& r : rows) EXPECT_LE(r.value, 1e-9);
}

TEST(NormalAlignment, NeedsKAtLeastOne) {
  const auto u = exact_sphere_field(61);
  const auto pts = find_critical_points(u, u.spec.h);
  ASSERT_FALSE(pts.empty());
  EXPECT_THROW(normal_alignment_profile(ArrivalSampler(u), pts[0], {0.1}), Error);
}

TEST(TransverseMax, ExactCylinderLandsOnAxis) {
  const auto u = exact_cylinder_field(121);
  const ArrivalSampler s(u);
  const auto q = transverse_max_point(s, cylinder_apex(), make_vec({3 * u.spec.h, 0.0, 0.0}));
  EXPECT_NEAR(q.position(0), 3 * u.spec.h, 1e-12);
  EXPECT_LE(std::hypot(q.position(1), q.position(2)), u.spec.h / 32);
  EXPECT_LE(q.transverse_gradient, 0.05);
}

TEST(TransverseMax, OffsetOutsideMask) {
  const auto u = exact_cylinder_field(61);
  try {
    transverse_max_point(ArrivalSampler(u), cylinder_apex(), make_vec({2.0, 0.0, 0.0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::no_interior_max);
  }
}

TEST(LocalStructure, StrictMaximum) {
  const auto spec = GridSpec::cube(2, 41, -1.0, 1.0);
  const auto u = ArrivalField::from_function(spec, [](const Vec& x) -> std::optional<double> {
    return -x.squaredNorm();
  });
  const auto p = synthetic_point(make_vec({0.0, 0.0}), 0.0, -2.0 * Mat::Identity(2, 2));
  const auto r = local_structure_checks(u, p, 0.2, 1e-3);
  EXPECT_TRUE(r.local_max);
  EXPECT_TRUE(r.separation);
  EXPECT_THROW(local_structure_checks(u, p, spec.h, 1e-3), Error);
}

TEST(LocalStructure, SphereCentre) {
  const auto u = exact_sphere_field(121);
  const auto pts = find_critical_points(u, u.spec.h);
  ASSERT_EQ(pts.size(), 1u);
  const auto r = local_structure_checks(u, pts[0], 0.2, 0.0025);
  EXPECT_TRUE(r.local_max);
  EXPECT_TRUE(r.separation);
}

TEST(GeometryProbeTest, ExactCircle) {
  const auto spec = GridSpec::cube(2, 121, -1.5, 1.5);
  const auto u = ArrivalField::from_function(spec, [](const Vec& x) -> std::optional<double> {
    if (x.norm() > 1.0) return std::nullopt;
    return exact_arrival_sphere(1.0, 1, x);
  });
  const ArrivalSampler s(u);
  const auto g = geometry_probe(s, node_at(spec, 0.5, 0.0));
  EXPECT_NEAR(g.normal.norm(), 1.0, 1e-12);
  EXPECT_NEAR(g.normal(0), -1.0, 1e-12);
  EXPECT_NEAR(g.H, 2.0, 1e-10);
  EXPECT_NEAR(g.A_over_H(0, 0), -1.0, 1e-8);
  EXPECT_LE(g.check_tangential, 1e-8);
  EXPECT_LE(g.check_normal, 1e-8);
  EXPECT_LE(g.check_mixed, 1e-8);
}

TEST(GeometryProbeTest, ExactCylinder) {
  const auto u = exact_cylinder_field(121);
  const ArrivalSampler s(u);
  const auto g = geometry_probe(s, node_at(u.spec, 0.0, 0.5));
  const auto ev = g.A_over_H.eigen().values;
  EXPECT_NEAR(ev(0), -1.0, 1e-8);
  EXPECT_NEAR(ev(1), 0.0, 1e-8);
  EXPECT_LE(g.check_tangential, 1e-8);
  EXPECT_GT(g.H, 0.0);
}

TEST(GeometryProbeTest, AffineRejected) {
  const auto spec = GridSpec::cube(2, 41, -1.0, 1.0);
  const auto u = ArrivalField::from_function(spec, [](const Vec& x) -> std::optional<double> {
    return 1.0 + 0.5 * x(0);
  });
  try {
    geometry_probe(ArrivalSampler(u), {20, 20, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::near_critical);
  }
}

TEST(Rescaled, ExactCylinderRows) {
  const auto u = exact_cylinder_field(121);
  const auto rows = rescaled_profile(ArrivalSampler(u), cylinder_apex(), {0.2, 0.1, 0.05});
  for (const auto& r : rows) {
    EXPECT_NEAR(r.normal_radial, 1.0, 1e-9);
    EXPECT_NEAR(r.speed_ratio, 1.0, 1e-9);
    EXPECT_NEAR(r.spectrum(0), 0.0, 1e-9);
    EXPECT_NEAR(r.spectrum(1), 1.0, 1e-9);
    EXPECT_LE(r.curvature_drift, 1e-9);
  }
}

TEST(Rescaled, SpherePointRejected) {
  const auto u = exact_sphere_field(61);
  const auto pts = find_critical_points(u, u.spec.h);
  ASSERT_FALSE(pts.empty());
  try {
    rescaled_profile(ArrivalSampler(u), pts[0], {0.1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_parameter);
  }
}

// Evolved torus at moderate resolution.
class TorusRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const auto shape = make_torus(1.0, 0.25);
    u_ = new ArrivalField(evolve(sample_implicit(shape, shape.grid(160)), EvolveParams{}).arrival);
    a_ = new Analysis(analyze_field(*u_, AnalysisSettings{}));
  }
  static void TearDownTestSuite() {
    delete a_;
    delete u_;
  }
  static ArrivalField* u_;
  static Analysis* a_;
};
ArrivalField* TorusRun::u_ = nullptr;
Analysis* TorusRun::a_ = nullptr;

TEST_F(TorusRun, RingOfCriticalPoints) {
  const auto& pts = a_->report.points;
  ASSERT_GE(pts.size(), 24u);
  double lo = 1e9, hi = 0.0;
  for (const auto& p : pts) {
    const double r = std::hypot(p.position(1), p.position(2));
    lo = std::min(lo, r);
    hi = std::max(hi, r);
    EXPECT_LE(std::abs(p.position(0)), 2 * u_->spec.h);
  }
  EXPECT_LE(hi - lo, 2 * u_->spec.h);
  EXPECT_GT(lo, 0.5);
  const auto node = u_->spec.position(a_->extinction_node);
  EXPECT_GT(node(1), 0.5);
}

TEST_F(TorusRun, VerdictAndComponent) {
  EXPECT_EQ(a_->report.verdict, Verdict::C2);
  ASSERT_EQ(a_->report.manifolds.size(), 1u);
  EXPECT_EQ(a_->report.manifolds[0].k, 1);
  EXPECT_TRUE(a_->report.manifolds[0].closed);
}

TEST_F(TorusRun, ProjectorAlgebraOnEveryPoint) {
  for (const auto& p : a_->report.points) {
    if (!p.classified()) continue;
    const Mat I = Mat::Identity(3, 3);
    EXPECT_LE((p.axis_projector + p.complement_projector - I).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((p.complement_projector * p.axis_projector).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((p.complement_projector * p.complement_projector - p.complement_projector).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(p.axis_projector.trace(), *p.stratum_k, 1e-10);
    EXPECT_LE(p.cylinder_residual, kDefaultClassifyTol);
  }
}

TEST_F(TorusRun, TransverseMaxNearRing) {
  ASSERT_FALSE(a_->components.empty());
  const auto& t = a_->components[0].transverse;
  ASSERT_TRUE(t.value.has_value()) << t.error;
  EXPECT_LE(t.value->transverse_gradient, 0.05);
  const auto& p = a_->report.points[a_->components[0].representative];
  const double ring = std::hypot(p.position(1), p.position(2));
  EXPECT_NEAR(std::hypot(t.value->position(1), t.value->position(2)), ring, 2 * u_->spec.h);
}

TEST_F(TorusRun, ConeProfileNonIncreasing) {
  for (const auto& c : a_->components) {
    ASSERT_TRUE(c.cone.value.has_value()) << c.cone.error;
    const auto& rows = *c.cone.value;
    for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LE(rows[i].value, rows[i - 1].value + 0.02);
  }
}

TEST_F(TorusRun, RescaledApproachesCylinder) {
  const auto& r = a_->components[0].rescaled;
  ASSERT_TRUE(r.value.has_value()) << r.error;
  const auto& last = r.value->back();
  EXPECT_GE(last.normal_radial, 0.95);
  EXPECT_NEAR(last.speed_ratio, 1.0, 0.1);
}

TEST_F(TorusRun, HessianTangentLipschitz) {
  const auto& l = a_->components[0].lipschitz;
  ASSERT_TRUE(l.value.has_value()) << l.error;
  ASSERT_TRUE(l.value->max_ratio.has_value());
  EXPECT_LE(*l.value->max_ratio, 5.0);
}

TEST_F(TorusRun, LocalStructureHolds) {
  EXPECT_TRUE(a_->components[0].local.local_max);
  EXPECT_TRUE(a_->components[0].local.separation);
}
