#pragma once

// Streaming Gaussian sketch G*A maintained as GA += g_i * a_i^T with a fresh
// Gaussian g_i ~ N(0, I_m)/sqrt(m) per row.  The 1/sqrt(m) scaling makes
// score(z) = ||GA z|| an estimate of ||A z|| directly, so candidates can be
// compared by score without any further normalization.  Gaussians are keyed
// by the row's stream position, making the sketch order-deterministic for a
// fixed shuffled order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "eigstream/rng.hpp"
#include "eigstream/types.hpp"

namespace eigstream {

struct SketchParams {
  Index m = 1;          // sketch rows
  double eps_jl = 0.1;  // per-candidate multiplicative accuracy target

  // eps_jl = 1/ln^2(d) clamped to [0.05, 0.5]; m sized for ln d plus a
  // union-bound slack of ln(candidate count), capped at 512 rows to keep
  // desk-scale runs cheap.  The cap trades accuracy for time at large d.
  static SketchParams for_dim(Index d, Index n_candidates = 1) {
    if (d < 2) throw std::invalid_argument("SketchParams: d must be at least 2");
    const double log_d = std::log(static_cast<double>(d));
    const double eps = std::clamp(1.0 / (log_d * log_d), 0.05, 0.5);
    const double slack = std::log(static_cast<double>(std::max<Index>(n_candidates, 1)));
    const double raw = std::ceil((log_d + slack) / (eps * eps));
    SketchParams p;
    p.eps_jl = eps;
    p.m = std::min<Index>(512, static_cast<Index>(std::max(raw, 1.0)));
    return p;
  }
};

class GaussianSketch {
 public:
  GaussianSketch(Index m, Index d, std::uint64_t seed) : ga_(m, d), seed_(seed) {
    if (m < 1 || d < 1) throw std::invalid_argument("GaussianSketch: m and d must be positive");
    ga_.setZero();
  }

  GaussianSketch(const SketchParams& params, Index d, std::uint64_t seed)
      : GaussianSketch(params.m, d, seed) {}

  Index m() const { return ga_.rows(); }
  Index d() const { return ga_.cols(); }

  // GA += g * row^T where g is the Gaussian draw for this stream position.
  void absorb(Index stream_position, const Vector& row) {
    if (row.size() != ga_.cols()) {
      throw std::invalid_argument("GaussianSketch::absorb: row dimension mismatch");
    }
    Rng rng = keyed_rng(seed_, tags::kSketch, static_cast<std::uint64_t>(stream_position));
    const double scale = 1.0 / std::sqrt(static_cast<double>(ga_.rows()));
    Vector g = rng.gaussian_vector(ga_.rows()) * scale;
    ga_.noalias() += g * row.transpose();
  }

  // ||GA z|| for unit z; estimates ||A z||.
  double score(const Vector& z) const {
    if (z.size() != ga_.cols()) {
      throw std::invalid_argument("GaussianSketch::score: dimension mismatch");
    }
    if (std::abs(z.norm() - 1.0) > 1e-9) {
      throw std::invalid_argument("GaussianSketch::score: z must be a unit vector");
    }
    return (ga_ * z).norm();
  }

  const Matrix& accumulated() const { return ga_; }

 private:
  Matrix ga_;
  std::uint64_t seed_;
};

}  // namespace eigstream
