#ifndef MCFLOW_LINALG_HPP_
#define MCFLOW_LINALG_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <initializer_list>
#include <vector>

#include "mcflow/errors.hpp"

namespace mcflow {

// Small vectors and matrices of runtime order 1..3 with inline storage.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;

inline Vec make_vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

struct EigenDecomposition {
  Vec values;   // ascending
  Mat vectors;  // column j pairs with values(j)
};

//! Symmetric matrix of order 2 or 3. Storage is a full matrix kept exactly
//! symmetric; construction from arbitrary input mirrors the upper triangle.
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;

  explicit SymmetricMatrix(int order) : m_(Mat::Zero(order, order)) {
    check_order(order);
  }

  //! Builds from a full matrix by reading its upper triangle.
  static SymmetricMatrix from_upper(const Mat& a) {
    if (a.rows() != a.cols()) {
      throw Error(ErrorKind::invalid_parameter, "matrix is not square");
    }
    SymmetricMatrix s(static_cast<int>(a.rows()));
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index j = i; j < a.cols(); ++j) s.set(i, j, a(i, j));
    }
    return s;
  }

  static SymmetricMatrix diagonal(std::initializer_list<double> d) {
    SymmetricMatrix s(static_cast<int>(d.size()));
    Eigen::Index i = 0;
    for (double x : d) {
      s.m_(i, i) = x;
      ++i;
    }
    return s;
  }

  static SymmetricMatrix identity(int order) {
    SymmetricMatrix s(order);
    s.m_.setIdentity();
    return s;
  }

  int order() const { return static_cast<int>(m_.rows()); }

  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

  void set(Eigen::Index i, Eigen::Index j, double value) {
    m_(i, j) = value;
    m_(j, i) = value;
  }

  const Mat& matrix() const { return m_; }

  double quadratic_form(const Vec& a, const Vec& b) const {
    return a.dot(m_ * b);
  }

  double frobenius_distance(const SymmetricMatrix& other) const {
    return (m_ - other.m_).norm();
  }

  double trace() const { return m_.trace(); }

  EigenDecomposition eigen() const {
    Eigen::SelfAdjointEigenSolver<Mat> solver(m_);
    if (solver.info() != Eigen::Success) {
      throw Error(ErrorKind::numerical_blowup, "eigen-decomposition failed");
    }
    return {solver.eigenvalues(), solver.eigenvectors()};
  }

  //! Q^T A Q for an orthonormal column basis Q (restriction to a subspace).
  SymmetricMatrix restricted(const Mat& basis) const {
    Mat r = basis.transpose() * m_ * basis;
    return from_upper(r);
  }

  //! R A R^T; used to carry a Hessian into a rotated frame.
  SymmetricMatrix rotated(const Mat& rotation) const {
    return from_upper(rotation * m_ * rotation.transpose());
  }

 private:
  static void check_order(int order) {
    if (order < 1 || order > 3) {
      throw Error(ErrorKind::invalid_parameter, "matrix order must be 1..3");
    }
  }

  Mat m_;
};

//! Orthogonal projector onto the span of the given orthonormal columns.
inline Mat projector(const Mat& basis, int order) {
  if (basis.cols() == 0) return Mat::Zero(order, order);
  return basis * basis.transpose();
}

//! Orthonormal basis of the orthogonal complement of unit vector n.
inline Mat complement_basis(const Vec& n) {
  const auto m = n.size();
  Mat basis(m, m - 1);
  if (m == 1) return basis;
  // Gram-Schmidt against the coordinate axes, skipping the most aligned one.
  Eigen::Index skip = 0;
  n.cwiseAbs().maxCoeff(&skip);
  Eigen::Index col = 0;
  for (Eigen::Index axis = 0; axis < m && col < m - 1; ++axis) {
    if (axis == skip) continue;
    Vec e = Vec::Zero(m);
    e(axis) = 1.0;
    e -= e.dot(n) * n;
    for (Eigen::Index c = 0; c < col; ++c) {
      e -= e.dot(basis.col(c)) * basis.col(c);
    }
    basis.col(col++) = e.normalized();
  }
  return basis;
}

//! Largest principal angle (radians) between the column spans of two
//! orthonormal bases of equal width.
inline double principal_angle(const Mat& a, const Mat& b) {
  if (a.cols() == 0) return 0.0;
  Mat c = a.transpose() * b;
  Eigen::JacobiSVD<Mat> svd(c);
  double smin = svd.singularValues().minCoeff();
  if (smin > 1.0) smin = 1.0;
  return std::acos(smin);
}

//! Operator 2-norm of a symmetric matrix difference.
inline double operator_norm(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> solver(a);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace mcflow

#endif  // MCFLOW_LINALG_HPP_
