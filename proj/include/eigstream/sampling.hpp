#pragma once

// Row-norm sampling: keep row a_i with probability
//   p_i = min(1, C * ||a_i||^2 * ln d / (eps^2 * opnorm_sq_guess))
// and rescale survivors by 1/sqrt(p_i).  Keep decisions use a dedicated
// counter-mode RNG per (seed, ..., row) key so outcomes are independent of
// evaluation order and of which other lanes happen to be materialized.

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "eigstream/rng.hpp"
#include "eigstream/stream.hpp"
#include "eigstream/types.hpp"

namespace eigstream {

struct SamplerConfig {
  double eps = 0.1;               // accuracy parameter, in (0, 1)
  double C_sample = 8.0;          // Bernstein constant, >= 6*(1 + eps/3)
  double opnorm_sq_guess = 1.0;   // hypothesized squared spectral norm
  Index d = 2;                    // ambient dimension

  void validate() const {
    if (!(eps > 0.0) || !(eps < 1.0)) {
      throw std::invalid_argument("SamplerConfig: eps must lie in (0, 1)");
    }
    if (!(C_sample >= 6.0 * (1.0 + eps / 3.0))) {
      throw std::invalid_argument("SamplerConfig: C_sample must be >= 6*(1 + eps/3)");
    }
    if (!(opnorm_sq_guess > 0.0)) {
      throw std::invalid_argument("SamplerConfig: opnorm_sq_guess must be positive");
    }
    if (d < 2) throw std::invalid_argument("SamplerConfig: d must be at least 2");
  }
};

// Formula core, parameterized on ln(d) so callers control the dimension term.
inline double sample_probability_log(double row_norm_sq, double C_sample, double eps,
                                     double opnorm_sq_guess, double log_d) {
  if (!(row_norm_sq >= 0.0)) {
    throw std::invalid_argument("sample_probability: row_norm_sq must be >= 0");
  }
  if (!(opnorm_sq_guess > 0.0)) {
    throw std::invalid_argument("sample_probability: opnorm_sq_guess must be positive");
  }
  const double p = C_sample * row_norm_sq * log_d / (eps * eps * opnorm_sq_guess);
  return p < 1.0 ? p : 1.0;
}

inline double sample_probability(double row_norm_sq, const SamplerConfig& cfg) {
  return sample_probability_log(row_norm_sq, cfg.C_sample, cfg.eps, cfg.opnorm_sq_guess,
                                std::log(static_cast<double>(cfg.d)));
}

// Norm^2 shared by every sampled-and-rescaled row whose keep probability was
// strictly below 1: ||a_i / sqrt(p_i)||^2 = eps^2 * guess / (C * ln d).
inline double common_rescaled_norm_sq(const SamplerConfig& cfg) {
  return cfg.eps * cfg.eps * cfg.opnorm_sq_guess /
         (cfg.C_sample * std::log(static_cast<double>(cfg.d)));
}

// Keep probabilities below this are treated as exact zeros (no coin drawn);
// at or above 1 the row is kept without a coin.  Lane dedup relies on both
// short-circuits to reproduce a dense per-lane enumeration bitwise.
inline constexpr double kCoinSkipProbability = 0x1p-40;

template <typename... Keys>
inline bool keep_row(double p, std::uint64_t seed, std::uint64_t head, Keys... keys) {
  if (p >= 1.0) return true;
  if (p < kCoinSkipProbability) return false;
  Rng rng(derive_key(seed, head, static_cast<std::uint64_t>(keys)...));
  return rng.uniform01() < p;
}

// One-pass transformer yielding surviving rows rescaled by 1/sqrt(p_i).
// Survivor order matches input order; decisions are keyed by the row's
// position in the underlying stream.
class SampledRowStream {
 public:
  SampledRowStream(RowStream& inner, const SamplerConfig& cfg, std::uint64_t seed)
      : inner_(&inner), cfg_(cfg), seed_(seed) {
    cfg_.validate();
    if (inner.d() != cfg_.d) {
      throw std::invalid_argument("SampledRowStream: config dimension differs from stream");
    }
  }

  Index d() const { return cfg_.d; }

  // Next surviving rescaled row, or nullptr once the input is exhausted.
  const Vector* next() {
    const double log_d = std::log(static_cast<double>(cfg_.d));
    while (const Vector* row = inner_->next()) {
      const double p = sample_probability_log(row->squaredNorm(), cfg_.C_sample, cfg_.eps,
                                              cfg_.opnorm_sq_guess, log_d);
      sum_p_ += p;
      if (!keep_row(p, seed_, tags::kSample,
                    static_cast<std::uint64_t>(inner_->position()))) {
        continue;
      }
      ++survivors_;
      if (p >= 1.0) {
        buf_ = *row;
      } else {
        buf_ = *row / std::sqrt(p);
      }
      return &buf_;
    }
    return nullptr;
  }

  Index survivors() const { return survivors_; }
  double sum_p() const { return sum_p_; }

 private:
  RowStream* inner_;
  SamplerConfig cfg_;
  std::uint64_t seed_;
  Vector buf_;
  Index survivors_ = 0;
  double sum_p_ = 0.0;
};

}  // namespace eigstream
