// Exact eigen-oracle: analytic cases, agreement between the n-side and d-side
// code paths, sign canonicalization, and the correlation measure.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "eigstream/linalg.hpp"
#include "eigstream/rng.hpp"
#include "eigstream/types.hpp"

using namespace eigstream;

TEST_CASE("axis-aligned rows give analytic eigenvalues and eigenvector") {
  Matrix rows = Matrix::Zero(3, 4);
  rows(0, 0) = 2.0;   // contributes 4 to coordinate 0
  rows(1, 2) = -3.0;  // contributes 9 to coordinate 2
  rows(2, 1) = 1.0;   // contributes 1 to coordinate 1
  const SpectralSummary s = exact_top_eigens(rows);
  CHECK(s.sigma1_sq == doctest::Approx(9.0).epsilon(1e-14));
  CHECK(s.sigma2_sq == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(s.gap_R() == doctest::Approx(2.25).epsilon(1e-14));
  // canonical sign: positive at the largest-magnitude coordinate
  CHECK(s.v1[2] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(correlation(s.v1, Vector::Unit(4, 2)) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("wide case (n < d) agrees with a direct dense eigensolve") {
  Rng rng(derive_key(11, tags::kGenerator));
  Matrix rows(5, 12);
  for (Index i = 0; i < 5; ++i) rows.row(i) = rng.gaussian_vector(12).transpose();
  const SpectralSummary s = exact_top_eigens(rows);

  // independent oracle route: full d x d Gram eigendecomposition
  const Matrix gram = rows.transpose() * rows;
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  const double l1 = es.eigenvalues()(11);
  const double l2 = es.eigenvalues()(10);
  CHECK(s.sigma1_sq == doctest::Approx(l1).epsilon(1e-12));
  CHECK(s.sigma2_sq == doctest::Approx(l2).epsilon(1e-12));
  CHECK(correlation(s.v1, es.eigenvectors().col(11)) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(s.v1.norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("tall case (n >= d) agrees with a direct dense eigensolve") {
  Rng rng(derive_key(12, tags::kGenerator));
  Matrix rows(40, 7);
  for (Index i = 0; i < 40; ++i) rows.row(i) = rng.gaussian_vector(7).transpose();
  const SpectralSummary s = exact_top_eigens(rows);
  Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(rows.transpose() * rows));
  CHECK(s.sigma1_sq == doctest::Approx(es.eigenvalues()(6)).epsilon(1e-12));
  CHECK(s.sigma2_sq == doctest::Approx(es.eigenvalues()(5)).epsilon(1e-12));
  CHECK(correlation(s.v1, es.eigenvectors().col(6)) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("canonical sign is stable under input negation") {
  Rng rng(derive_key(13, tags::kGenerator));
  const Vector v = rng.gaussian_vector(9);
  const Vector a = canonical_sign<double>(v);
  const Vector b = canonical_sign<double>(Vector(-v));
  CHECK((a - b).norm() == 0.0);
}

TEST_CASE("correlation: definition and invariances") {
  const Vector e0 = Vector::Unit(5, 0);
  const Vector e1 = Vector::Unit(5, 1);
  CHECK(correlation(e0, e0) == doctest::Approx(1.0));
  CHECK(correlation(e0, e1) == doctest::Approx(0.0));
  CHECK(correlation(e0, Vector(-e0)) == doctest::Approx(1.0));  // squared => sign free
  Vector mix(5);
  mix << 1, 1, 0, 0, 0;
  mix /= std::sqrt(2.0);
  CHECK(correlation(e0, mix) == doctest::Approx(0.5).epsilon(1e-14));
  // the contract demands unit vectors; scaling is the caller's bug
  CHECK_THROWS_AS(correlation(e0, Vector(-3.0 * e0)), std::invalid_argument);
  CHECK_THROWS_AS(correlation(e0, Vector::Unit(4, 0)), std::invalid_argument);
}

TEST_CASE("operator norms are consistent with each other") {
  Rng rng(derive_key(14, tags::kGenerator));
  Matrix rows(20, 6);
  for (Index i = 0; i < 20; ++i) rows.row(i) = rng.gaussian_vector(6).transpose();
  const double op = op_norm(rows);
  const double sym = spectral_norm_sym(Matrix(rows.transpose() * rows));
  CHECK(op * op == doctest::Approx(sym).epsilon(1e-10));
}

TEST_CASE("gap is infinite when the second eigenvalue vanishes") {
  Matrix rows = Matrix::Zero(2, 3);
  rows(0, 1) = 5.0;
  rows(1, 1) = -5.0;  // rank one
  const SpectralSummary s = exact_top_eigens(rows);
  CHECK(s.sigma1_sq == doctest::Approx(50.0).epsilon(1e-13));
  CHECK(std::isinf(s.gap_R()));
}

TEST_CASE("tiny negative eigenvalues from roundoff are clamped to zero") {
  // rank-deficient input whose trailing eigenvalues are numerically ~ -1e-16
  Matrix rows(4, 3);
  rows << 1, 2, 3, 2, 4, 6, 3, 6, 9, 1, 2, 3;  // all multiples of (1,2,3)
  const SpectralSummary s = exact_top_eigens(rows);
  CHECK(s.sigma2_sq >= 0.0);
}
