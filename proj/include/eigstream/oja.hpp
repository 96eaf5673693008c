#pragma once

// Oja's algorithm baseline: z_i = z_{i-1} + eta * <z_{i-1}, a_i> a_i over a
// grid of learning rates, plus the largest-norm-row fallback.  The iterate is
// stored as a (unit direction, log magnitude) pair so growth like
// (1 + eta/R)^R never overflows; log ||z_n|| is what the rate-selection rule
// needs.  A subsample-then-Oja wrapper row-norm samples the stream at
// eps = 1/(2 R_hint) first and scores all resulting candidates with a
// Gaussian sketch over the full stream.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "eigstream/rng.hpp"
#include "eigstream/sampling.hpp"
#include "eigstream/sketch.hpp"
#include "eigstream/stream.hpp"
#include "eigstream/types.hpp"

namespace eigstream {

struct OjaOptions {
  std::vector<double> eta_grid;          // empty -> powers of 2 from 2^-10 to 2^20
  double growth_threshold_log = std::log(1000.0);  // rate-selection knob

  static std::vector<double> default_eta_grid(int low_exp = -10, int high_exp = 20) {
    std::vector<double> g;
    for (int k = low_exp; k <= high_exp; ++k) g.push_back(std::ldexp(1.0, k));
    return g;
  }
};

struct OjaLaneResult {
  double eta = 0.0;
  Vector dir;              // unit final direction
  double log_norm = 0.0;   // log ||z_n||
  double log_growth = 0.0; // log ||z_n|| - log ||z_0||
};

struct OjaPassResult {
  std::vector<OjaLaneResult> lanes;
  Vector fallback_dir;          // largest-norm row, unit; zero vector if no rows
  double fallback_norm_sq = 0.0;
  double z0_log_norm = 0.0;
  Index rows_seen = 0;

  // Smallest learning rate whose log growth meets the threshold; -1 means
  // none qualified and the caller should use the fallback direction.
  Index select_by_growth(double threshold_log) const {
    Index best = -1;
    for (std::size_t k = 0; k < lanes.size(); ++k) {
      if (lanes[k].log_growth >= threshold_log) {
        if (best < 0 || lanes[k].eta < lanes[static_cast<std::size_t>(best)].eta) {
          best = static_cast<Index>(k);
        }
      }
    }
    return best;
  }
};

// All learning-rate lanes plus the fallback tracker, fed one row at a time.
// The same Gaussian z0 (keyed on the seed alone) starts every lane.
class OjaLaneSet {
 public:
  OjaLaneSet(Index d, const OjaOptions& options, std::uint64_t seed) : d_(d) {
    if (d < 1) throw std::invalid_argument("OjaLaneSet: d must be positive");
    etas_ = options.eta_grid.empty() ? OjaOptions::default_eta_grid() : options.eta_grid;
    for (double eta : etas_) {
      if (!(eta >= 0.0)) throw std::invalid_argument("OjaLaneSet: learning rates must be >= 0");
    }
    Rng rng = keyed_rng(seed, tags::kOjaInit);
    Vector z0 = rng.gaussian_vector(d);
    const double norm = z0.norm();
    if (!(norm > 0.0)) throw std::logic_error("OjaLaneSet: degenerate Gaussian start");
    z0_log_norm_ = std::log(norm);
    dirs_.assign(etas_.size(), z0 / norm);
    log_norms_.assign(etas_.size(), z0_log_norm_);
    fallback_dir_ = Vector::Zero(d);
  }

  void update(const Vector& row) {
    if (row.size() != d_) throw std::invalid_argument("OjaLaneSet: row dimension mismatch");
    ++rows_seen_;
    const double row_norm_sq = row.squaredNorm();
    if (row_norm_sq > fallback_norm_sq_) {
      fallback_norm_sq_ = row_norm_sq;
      fallback_dir_ = row / std::sqrt(row_norm_sq);
    }
    for (std::size_t k = 0; k < etas_.size(); ++k) {
      const double inner = dirs_[k].dot(row);
      Vector v = dirs_[k] + (etas_[k] * inner) * row;
      const double norm = v.norm();
      if (norm > 0.0) {
        dirs_[k] = v / norm;
        log_norms_[k] += std::log(norm);
      }
      // v = 0 (measure-zero exact cancellation): keep direction, magnitude
      // unchanged rather than collapse the lane.
    }
  }

  OjaPassResult finalize() const {
    OjaPassResult out;
    out.lanes.reserve(etas_.size());
    for (std::size_t k = 0; k < etas_.size(); ++k) {
      OjaLaneResult lane;
      lane.eta = etas_[k];
      lane.dir = dirs_[k];
      lane.log_norm = log_norms_[k];
      lane.log_growth = log_norms_[k] - z0_log_norm_;
      out.lanes.push_back(std::move(lane));
    }
    out.fallback_dir = fallback_dir_;
    out.fallback_norm_sq = fallback_norm_sq_;
    out.z0_log_norm = z0_log_norm_;
    out.rows_seen = rows_seen_;
    return out;
  }

  Index d() const { return d_; }
  const std::vector<double>& etas() const { return etas_; }

 private:
  Index d_;
  std::vector<double> etas_;
  std::vector<Vector> dirs_;
  std::vector<double> log_norms_;
  Vector fallback_dir_;
  double fallback_norm_sq_ = 0.0;
  double z0_log_norm_ = 0.0;
  Index rows_seen_ = 0;
};

// One shared pass over any row producer exposing `const Vector* next()`.
template <typename StreamLike>
OjaPassResult oja_pass(StreamLike& stream, const OjaOptions& options, std::uint64_t seed) {
  OjaLaneSet lanes(stream.d(), options, seed);
  while (const Vector* row = stream.next()) lanes.update(*row);
  return lanes.finalize();
}

struct SubsampleOjaResult {
  OjaPassResult oja;        // over the sampled-and-rescaled substream
  Index winner_lane = -1;   // index into oja.lanes; -1 means fallback won
  Vector estimate;          // unit winner by sketch score
  double winner_score = 0.0;
  Index survivors = 0;
  double sum_p = 0.0;
  double sampler_eps = 0.0;
};

// Row-norm sample at eps = 1/(2 R_hint), run the Oja grid on survivors, and
// pick the best of {eta directions, fallback} by sketch score over all rows.
inline SubsampleOjaResult subsample_then_oja(RowStream& stream, double R_hint,
                                             double opnorm_sq_guess, const OjaOptions& options,
                                             std::uint64_t seed) {
  if (!(R_hint >= 2.0)) {
    throw std::invalid_argument("subsample_then_oja: R_hint must be >= 2");
  }
  SamplerConfig cfg;
  cfg.eps = 1.0 / (2.0 * R_hint);
  cfg.opnorm_sq_guess = opnorm_sq_guess;
  cfg.d = stream.d();
  cfg.validate();

  OjaLaneSet lanes(stream.d(), options, seed);
  const std::size_t n_candidates = lanes.etas().size() + 1;
  GaussianSketch sketch(SketchParams::for_dim(stream.d(), static_cast<Index>(n_candidates)),
                        stream.d(), seed);

  SubsampleOjaResult out;
  out.sampler_eps = cfg.eps;
  const double log_d = std::log(static_cast<double>(cfg.d));
  while (const Vector* row = stream.next()) {
    sketch.absorb(stream.position(), *row);
    const double p = sample_probability_log(row->squaredNorm(), cfg.C_sample, cfg.eps,
                                            cfg.opnorm_sq_guess, log_d);
    out.sum_p += p;
    if (!keep_row(p, seed, tags::kSample, static_cast<std::uint64_t>(stream.position()))) {
      continue;
    }
    ++out.survivors;
    if (p >= 1.0) {
      lanes.update(*row);
    } else {
      lanes.update(*row / std::sqrt(p));
    }
  }
  out.oja = lanes.finalize();

  // Sketch argmax over eta directions, then the fallback; ties keep the
  // earlier candidate.
  out.winner_lane = -1;
  bool have_winner = false;
  for (std::size_t k = 0; k < out.oja.lanes.size(); ++k) {
    const double s = sketch.score(out.oja.lanes[k].dir);
    if (!have_winner || s > out.winner_score) {
      have_winner = true;
      out.winner_score = s;
      out.winner_lane = static_cast<Index>(k);
      out.estimate = out.oja.lanes[k].dir;
    }
  }
  if (out.oja.fallback_norm_sq > 0.0) {
    const double s = sketch.score(out.oja.fallback_dir);
    if (!have_winner || s > out.winner_score) {
      have_winner = true;
      out.winner_score = s;
      out.winner_lane = -1;
      out.estimate = out.oja.fallback_dir;
    }
  }
  if (!have_winner) {
    throw NoCandidateError("subsample_then_oja: no candidates (empty grid and no rows)");
  }
  return out;
}

}  // namespace eigstream
