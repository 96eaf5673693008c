#pragma once

// Dense linear-algebra helpers shared by the streaming estimators and by the
// exact reference oracle the experiments validate against.

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "eigstream/types.hpp"

namespace eigstream {

// (A^T A) z for a row matrix A, without forming the Gram matrix.
template <typename DerivedA, typename DerivedZ>
VectorT<typename DerivedA::Scalar> gram_apply(
    const Eigen::MatrixBase<DerivedA>& rows,
    const Eigen::MatrixBase<DerivedZ>& z) {
  if (rows.cols() != z.rows())
    throw std::invalid_argument("gram_apply: dimension mismatch");
  return rows.transpose() * (rows * z).eval();
}

// Squared inner product of two unit vectors; the alignment measure used for
// every success threshold in the experiments.
template <typename DerivedU, typename DerivedV>
double correlation(const Eigen::MatrixBase<DerivedU>& u,
                   const Eigen::MatrixBase<DerivedV>& v) {
  if (u.rows() != v.rows())
    throw std::invalid_argument("correlation: dimension mismatch");
  const double nu = u.template cast<double>().norm();
  const double nv = v.template cast<double>().norm();
  if (std::abs(nu - 1.0) > 1e-9 || std::abs(nv - 1.0) > 1e-9)
    throw std::invalid_argument("correlation: inputs must be unit vectors");
  const double ip = u.template cast<double>().dot(v.template cast<double>());
  return ip * ip;
}

// Flips v so that its largest-magnitude coordinate is positive (ties broken
// by the lowest index among maximal |coordinates|).  Fixes the sign ambiguity
// of eigenvectors so stored expectations are well defined.
template <typename Scalar>
VectorT<Scalar> canonical_sign(VectorT<Scalar> v) {
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  if (v.size() > 0 && v[best] < Scalar(0)) v = -v;
  return v;
}

// Exact top-two eigenvalues of A^T A plus the top eigenvector, computed on
// the smaller Gram side: when n < d we decompose A A^T (n x n) and map the
// top left singular vector u1 back through v1 = A^T u1 / |A^T u1|.
inline SpectralSummary exact_top_eigens(const Matrix& rows) {
  const Index n = rows.rows();
  const Index d = rows.cols();
  if (n == 0 || d == 0)
    throw std::invalid_argument("exact_top_eigens: empty matrix");
  if (!rows.allFinite())
    throw std::invalid_argument("exact_top_eigens: non-finite entries");

  SpectralSummary out;
  if (n >= d) {
    Matrix gram = rows.transpose() * rows;
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    if (es.info() != Eigen::Success)
      throw std::runtime_error("exact_top_eigens: eigendecomposition failed");
    const auto& vals = es.eigenvalues();  // ascending
    out.sigma1_sq = vals[d - 1];
    out.sigma2_sq = d >= 2 ? vals[d - 2] : 0.0;
    out.v1 = canonical_sign<double>(es.eigenvectors().col(d - 1));
  } else {
    Matrix gram = rows * rows.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    if (es.info() != Eigen::Success)
      throw std::runtime_error("exact_top_eigens: eigendecomposition failed");
    const auto& vals = es.eigenvalues();
    out.sigma1_sq = vals[n - 1];
    out.sigma2_sq = n >= 2 ? vals[n - 2] : 0.0;
    Vector u1 = es.eigenvectors().col(n - 1);
    Vector v1 = rows.transpose() * u1;
    const double nv = v1.norm();
    if (!(nv > 0.0))
      throw std::runtime_error("exact_top_eigens: degenerate top vector");
    out.v1 = canonical_sign<double>(Vector(v1 / nv));
  }
  // Eigenvalues of a Gram matrix are nonnegative up to roundoff.
  if (out.sigma1_sq < 0.0 && out.sigma1_sq > -1e-12) out.sigma1_sq = 0.0;
  if (out.sigma2_sq < 0.0 && out.sigma2_sq > -1e-12) out.sigma2_sq = 0.0;
  return out;
}

// Largest eigenvalue of a symmetric matrix.
inline double spectral_norm_sym(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("spectral_norm_sym: eigendecomposition failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Operator norm |A|_2 (largest singular value) of a row matrix.
inline double op_norm(const Matrix& rows) {
  return std::sqrt(exact_top_eigens(rows).sigma1_sq);
}

}  // namespace eigstream
