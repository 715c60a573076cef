#pragma once

// Small dense linear-algebra helpers shared by the design, estimator and
// allocation code. Everything here works on symmetric positive semidefinite
// Gram matrices of dimension d <= a few dozen, so we favour robustness over
// speed: eigen-decompositions for pseudo-inverses, Cholesky with jitter for
// Mahalanobis norms.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace e4 {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Library-wide error type. Invalid inputs and contract violations throw it.
class BanditError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace linalg {

/// Relative cutoff below which singular values (eigenvalues of a PSD
/// matrix) are treated as zero.
inline constexpr double kRankTolerance = 1e-10;

/// Numerical rank of a (possibly rectangular) matrix: number of singular
/// values above kRankTolerance times the largest one.
inline int rank(const Matrix& a) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(a);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) <= 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > kRankTolerance * s(0)) ++r;
  return r;
}

/// Orthonormal basis (as columns) of the row span of `rows`.
inline Matrix row_span_basis(const Matrix& rows) {
  Eigen::JacobiSVD<Matrix> svd(rows, Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(0) > 0.0 && s(i) > kRankTolerance * s(0)) ++r;
  return svd.matrixV().leftCols(r);
}

/// Eigen-decomposition of a symmetric PSD matrix with pseudo-inverse
/// semantics: eigenvalues at or below the relative cutoff count as zero.
class PsdSystem {
 public:
  explicit PsdSystem(const Matrix& h) : solver_(h) {
    const auto& ev = solver_.eigenvalues();
    const double top = ev.size() ? std::max(ev.maxCoeff(), 0.0) : 0.0;
    cutoff_ = kRankTolerance * top;
  }

  double min_eigenvalue() const { return solver_.eigenvalues().minCoeff(); }

  /// Minimum-norm solution of H x = b.
  Vector pinv_solve(const Vector& b) const {
    const Matrix& u = solver_.eigenvectors();
    const Vector& ev = solver_.eigenvalues();
    Vector coeffs = u.transpose() * b;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
      coeffs(i) = ev(i) > cutoff_ && ev(i) > 0.0 ? coeffs(i) / ev(i) : 0.0;
    return u * coeffs;
  }

  /// ||v||^2_{H^-1}; +infinity when v has a component outside range(H).
  double inverse_norm_sq(const Vector& v) const {
    const Matrix& u = solver_.eigenvectors();
    const Vector& ev = solver_.eigenvalues();
    const Vector coeffs = u.transpose() * v;
    const double scale = std::max(v.norm(), 1.0);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      if (ev(i) > cutoff_ && ev(i) > 0.0) {
        acc += coeffs(i) * coeffs(i) / ev(i);
      } else if (std::abs(coeffs(i)) > 1e-9 * scale) {
        return std::numeric_limits<double>::infinity();
      }
    }
    return acc;
  }

 private:
  Eigen::SelfAdjointEigenSolver<Matrix> solver_;
  double cutoff_ = 0.0;
};

/// Cholesky factorization of an SPD matrix for repeated Mahalanobis norms.
/// Adds jitter 1e-12 * trace/d to the diagonal when the plain factorization
/// fails.
class CholeskySystem {
 public:
  explicit CholeskySystem(const Matrix& h) : llt_(h) {
    if (llt_.info() != Eigen::Success) {
      const double jitter =
          1e-12 * h.trace() / static_cast<double>(std::max<Eigen::Index>(h.rows(), 1));
      Matrix hj = h;
      hj.diagonal().array() += jitter;
      llt_.compute(hj);
      if (llt_.info() != Eigen::Success)
        throw BanditError("Cholesky factorization failed: matrix is not positive definite");
    }
  }

  double inverse_norm_sq(const Vector& v) const {
    const Vector y = llt_.matrixL().solve(v);
    return y.squaredNorm();
  }

  Matrix solve(const Matrix& b) const { return llt_.solve(b); }

  double log_det() const {
    const auto& l = llt_.matrixLLT();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) acc += std::log(l(i, i));
    return 2.0 * acc;
  }

 private:
  Eigen::LLT<Matrix> llt_;
};

/// sum_i w_i a_i a_i^T over the rows a_i of `rows`.
inline Matrix weighted_gram(const Matrix& rows, const Vector& weights) {
  return rows.transpose() * weights.asDiagonal() * rows;
}

}  // namespace linalg
}  // namespace e4
