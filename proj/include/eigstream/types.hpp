#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace eigstream {

using Index = Eigen::Index;

template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vector = VectorT<double>;
using Matrix = MatrixT<double>;

// Thrown when an estimation routine ends with no valid candidate to return
// (every lane aborted or was invalidated).
struct NoCandidateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exact spectral facts about the Gram matrix A^T A of a row matrix A:
// its two largest eigenvalues and the unit eigenvector of the largest.
struct SpectralSummary {
  double sigma1_sq = 0.0;  // largest eigenvalue of A^T A
  double sigma2_sq = 0.0;  // second-largest eigenvalue of A^T A
  Vector v1;               // unit top eigenvector, canonical sign

  // Eigenvalue ratio sigma1_sq / sigma2_sq; +inf when the second eigenvalue
  // vanishes (rank-one spectrum).
  double gap_R() const {
    if (sigma2_sq <= 0.0) return std::numeric_limits<double>::infinity();
    return sigma1_sq / sigma2_sq;
  }
};

}  // namespace eigstream
