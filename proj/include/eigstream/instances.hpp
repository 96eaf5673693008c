#pragma once

// Synthetic instance generators with exact ground truth:
//   planted_gap  — Gaussian bulk plus a planted spike hitting a requested
//                  eigenvalue ratio; truth re-measured by the oracle.
//   oja_hard     — the three-direction multiset on which every fixed Oja
//                  learning rate fails; analytic spectrum {1, 1/(R-eps), 1/R}.
//   lower_bound  — Rademacher rows plus near-duplicates of a planted row
//                  sharing the first (1-gamma)d coordinates.
//   heavy_mixed  — one dominant heavy row orthogonal to a light bulk; shows
//                  why heavy rows must be stored exactly.
//   heavy_bulk   — h orthogonal planted heavy rows over a unit-norm bulk;
//                  exercises per-lane heavy-store memory accounting.
// Generators are pure functions of (parameters, seed).

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "eigstream/io.hpp"
#include "eigstream/linalg.hpp"
#include "eigstream/rng.hpp"
#include "eigstream/types.hpp"

namespace eigstream {

enum class Family { planted_gap, oja_hard, lower_bound, heavy_mixed, heavy_bulk };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::planted_gap: return "planted_gap";
    case Family::oja_hard: return "oja_hard";
    case Family::lower_bound: return "lower_bound";
    case Family::heavy_mixed: return "heavy_mixed";
    case Family::heavy_bulk: return "heavy_bulk";
  }
  throw std::logic_error("family_name: unknown family");
}

inline Family family_from_string(const std::string& s) {
  if (s == "planted_gap") return Family::planted_gap;
  if (s == "oja_hard") return Family::oja_hard;
  if (s == "lower_bound") return Family::lower_bound;
  if (s == "heavy_mixed") return Family::heavy_mixed;
  if (s == "heavy_bulk") return Family::heavy_bulk;
  throw std::invalid_argument("unknown instance family: " + s);
}

struct GeneratedInstance {
  Matrix rows;
  InstanceTruth truth;
};

namespace detail {

inline double rademacher(Rng& rng) { return (rng.next_u64() & 1u) ? 1.0 : -1.0; }

}  // namespace detail

// Gaussian bulk at scale 1/sqrt(d) per coordinate plus a Gaussian spike along
// a random unit direction u sized so E[A^T A] has eigenvalue ratio R.  The
// stored truth always comes from the oracle, never from the request.
inline GeneratedInstance gen_planted_gap(Index d, Index n, double R, std::uint64_t seed,
                                         bool normalize_rows = false) {
  if (d < 2) throw std::invalid_argument("gen_planted_gap: d must be at least 2");
  if (n < d) throw std::invalid_argument("gen_planted_gap: need n >= d");
  if (!(R > 1.0)) throw std::invalid_argument("gen_planted_gap: R must exceed 1 (no gap otherwise)");

  Rng rng = keyed_rng(seed, tags::kGenerator);
  Vector u = rng.gaussian_vector(d);
  u.normalize();

  const double sigma_b = 1.0 / std::sqrt(static_cast<double>(d));
  const double sigma_u = sigma_b * std::sqrt(R - 1.0);
  Matrix rows(n, d);
  for (Index i = 0; i < n; ++i) {
    Vector g = rng.gaussian_vector(d);
    const double t = rng.normal();
    rows.row(i) = (sigma_b * g + (sigma_u * t) * u).transpose();
    if (normalize_rows) {
      const double norm = rows.row(i).norm();
      if (norm > 0.0) rows.row(i) /= norm;
    }
  }

  GeneratedInstance out;
  out.rows = std::move(rows);
  out.truth.family = family_name(Family::planted_gap);
  out.truth.params = {{"d", d}, {"n", n}, {"R_requested", R}, {"normalize_rows", normalize_rows}};
  out.truth.seed = seed;
  out.truth.n = n;
  out.truth.d = d;
  out.truth.spectrum = exact_top_eigens(out.rows);
  out.truth.extras = {
      {"planted_u", std::vector<double>(u.data(), u.data() + d)},
      {"planted_correlation", correlation(out.truth.spectrum.v1, u)},
  };
  return out;
}

// Deterministic hard multiset for Oja's algorithm: R copies of (1/sqrt(R))e1,
// one copy of (1/sqrt(R-eps_gap))e2, and alpha = 2M copies of
// (1/sqrt(alpha R))e3.  Nonzero eigenvalues of A^T A are exactly
// {1, 1/(R-eps_gap), 1/R}; v1 = e1; the largest-norm row is the e2 row.
inline GeneratedInstance gen_oja_hard(Index d, Index R, double eps_gap, Index M) {
  if (d < 3) throw std::invalid_argument("gen_oja_hard: d must be at least 3");
  if (R < 2) throw std::invalid_argument("gen_oja_hard: R must be at least 2");
  if (!(eps_gap > 0.0) || !(eps_gap < static_cast<double>(R) - 1.0)) {
    throw std::invalid_argument("gen_oja_hard: need 0 < eps_gap < R - 1");
  }
  if (M < 1) throw std::invalid_argument("gen_oja_hard: M must be at least 1");

  const Index alpha = 2 * M;
  const Index n = R + 1 + alpha;
  const double r = static_cast<double>(R);
  Matrix rows = Matrix::Zero(n, d);
  for (Index i = 0; i < R; ++i) rows(i, 0) = 1.0 / std::sqrt(r);
  rows(R, 1) = 1.0 / std::sqrt(r - eps_gap);
  for (Index i = 0; i < alpha; ++i) {
    rows(R + 1 + i, 2) = 1.0 / std::sqrt(static_cast<double>(alpha) * r);
  }

  GeneratedInstance out;
  out.rows = std::move(rows);
  out.truth.family = family_name(Family::oja_hard);
  out.truth.params = {{"d", d}, {"R", R}, {"eps_gap", eps_gap}, {"M", M}};
  out.truth.seed = 0;
  out.truth.n = n;
  out.truth.d = d;
  out.truth.spectrum.sigma1_sq = 1.0;
  out.truth.spectrum.sigma2_sq = 1.0 / (r - eps_gap);
  out.truth.spectrum.v1 = Vector::Zero(d);
  out.truth.spectrum.v1[0] = 1.0;
  out.truth.extras = {{"alpha", alpha}, {"third_eigenvalue", 1.0 / r}, {"largest_norm_row_index", R}};
  return out;
}

// h Rademacher rows, a uniformly chosen planted index i, and k rows equal to
// x_i on the first (1-gamma)d coordinates with fresh Rademacher tails.
inline GeneratedInstance gen_lower_bound(Index d, Index h, Index k, double gamma,
                                         std::uint64_t seed) {
  if (d < 1) throw std::invalid_argument("gen_lower_bound: d must be positive");
  if (h < 1 || k < 1) throw std::invalid_argument("gen_lower_bound: h and k must be >= 1");
  if (!(gamma >= 0.0) || !(gamma <= 1.0)) {
    throw std::invalid_argument("gen_lower_bound: gamma must lie in [0, 1]");
  }
  const double gd = gamma * static_cast<double>(d);
  if (std::abs(gd - std::round(gd)) > 1e-9) {
    throw std::invalid_argument("gen_lower_bound: gamma*d must be an integer");
  }
  const Index tail = static_cast<Index>(std::llround(gd));
  const Index shared = d - tail;

  Rng rng = keyed_rng(seed, tags::kGenerator);
  Matrix rows(h + k, d);
  for (Index i = 0; i < h; ++i) {
    for (Index j = 0; j < d; ++j) rows(i, j) = detail::rademacher(rng);
  }
  const Index planted = static_cast<Index>(rng.uniform_below(static_cast<std::uint64_t>(h)));
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j < shared; ++j) rows(h + i, j) = rows(planted, j);
    for (Index j = shared; j < d; ++j) rows(h + i, j) = detail::rademacher(rng);
  }

  GeneratedInstance out;
  out.rows = std::move(rows);
  out.truth.family = family_name(Family::lower_bound);
  out.truth.params = {{"d", d}, {"h", h}, {"k", k}, {"gamma", gamma}};
  out.truth.seed = seed;
  out.truth.n = h + k;
  out.truth.d = d;
  out.truth.spectrum = exact_top_eigens(out.rows);
  out.truth.extras = {{"planted_index", planted}};
  return out;
}

// One heavy row sqrt(8)*e1 over a light bulk spanning e2..ed with bulk
// covariance diag(0, 2, 1, ..., 1): sigma1^2 = 8 exactly along e1 (the bulk
// has no e1 component), bulk top eigenvalue ~= 2, so R ~= 4.  Every bulk row
// has squared norm around (d-1+1)/n_bulk, far below any sensible heavy
// threshold, while the planted row is heavy at the correct Frobenius guess.
inline GeneratedInstance gen_heavy_mixed(Index d, Index n_bulk, std::uint64_t seed) {
  if (d < 3) throw std::invalid_argument("gen_heavy_mixed: d must be at least 3");
  if (n_bulk < d) throw std::invalid_argument("gen_heavy_mixed: need n_bulk >= d");

  Rng rng = keyed_rng(seed, tags::kGenerator);
  Matrix rows = Matrix::Zero(n_bulk + 1, d);
  rows(0, 0) = std::sqrt(8.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n_bulk));
  for (Index i = 0; i < n_bulk; ++i) {
    Vector g = rng.gaussian_vector(d - 1);
    g[0] *= std::sqrt(2.0);  // e2 carries bulk eigenvalue 2, the rest 1
    rows.row(i + 1).tail(d - 1) = (scale * g).transpose();
  }

  GeneratedInstance out;
  out.rows = std::move(rows);
  out.truth.family = family_name(Family::heavy_mixed);
  out.truth.params = {{"d", d}, {"n_bulk", n_bulk}};
  out.truth.seed = seed;
  out.truth.n = n_bulk + 1;
  out.truth.d = d;
  out.truth.spectrum = exact_top_eigens(out.rows);
  out.truth.extras = {{"heavy_row_index", 0}, {"heavy_norm_sq", 8.0}};
  return out;
}

// h orthogonal heavy rows 16*e_j (squared norm 256) over n_bulk exactly
// unit-norm bulk rows spanning the remaining d-h coordinates.  Stored heavy
// counts should scale linearly in h across Frobenius-guess lanes.
inline GeneratedInstance gen_heavy_bulk(Index d, Index h, Index n_bulk, std::uint64_t seed) {
  if (h < 1) throw std::invalid_argument("gen_heavy_bulk: h must be >= 1");
  if (d <= h) throw std::invalid_argument("gen_heavy_bulk: need d > h for a bulk subspace");
  if (n_bulk < d - h) throw std::invalid_argument("gen_heavy_bulk: need n_bulk >= d - h");

  Rng rng = keyed_rng(seed, tags::kGenerator);
  Matrix rows = Matrix::Zero(n_bulk + h, d);
  for (Index j = 0; j < h; ++j) rows(j, j) = 16.0;
  for (Index i = 0; i < n_bulk; ++i) {
    Vector g = rng.gaussian_vector(d - h);
    const double norm = g.norm();
    if (!(norm > 0.0)) throw std::logic_error("gen_heavy_bulk: degenerate Gaussian draw");
    rows.row(h + i).tail(d - h) = (g / norm).transpose();
  }

  GeneratedInstance out;
  out.rows = std::move(rows);
  out.truth.family = family_name(Family::heavy_bulk);
  out.truth.params = {{"d", d}, {"h", h}, {"n_bulk", n_bulk}};
  out.truth.seed = seed;
  out.truth.n = n_bulk + h;
  out.truth.d = d;
  out.truth.spectrum = exact_top_eigens(out.rows);
  out.truth.extras = {{"heavy_count", h}, {"heavy_norm_sq", 256.0}};
  return out;
}

}  // namespace eigstream
