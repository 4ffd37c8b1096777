#ifndef MCFLOW_TESTS_HELPERS_HPP_
#define MCFLOW_TESTS_HELPERS_HPP_

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "mcflow/singular.hpp"

namespace mcflow::testing {

//! Critical point with a given Hessian, classified at the default tolerance.
inline CriticalPoint synthetic_point(const Vec& x, double u, const Mat& hess) {
  CriticalPoint p;
  p.position = x;
  p.u_value = u;
  p.hess = SymmetricMatrix::from_upper(hess);
  detail::apply_fit(p, kDefaultClassifyTol);
  return p;
}

//! Exact cylinder Hessian -Pi/(n-k) with axis t (n = 2, k = 1 in R^3).
inline Mat cylinder_hessian(const Vec& t) {
  return -(Mat::Identity(3, 3) - t * t.transpose());
}

//! m points on the circle of radius R in the plane x = 0 of R^3, with the
//! circle tangent as kernel.
inline std::vector<CriticalPoint> synthetic_ring(int m, double R, double u = 0.5) {
  std::vector<CriticalPoint> pts;
  for (int i = 0; i < m; ++i) {
    const double a = 2.0 * M_PI * i / m;
    const Vec x = make_vec({0.0, R * std::cos(a), R * std::sin(a)});
    const Vec t = make_vec({0.0, -std::sin(a), std::cos(a)});
    pts.push_back(synthetic_point(x, u, cylinder_hessian(t)));
  }
  return pts;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("mcflow_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace mcflow::testing

#endif  // MCFLOW_TESTS_HELPERS_HPP_
