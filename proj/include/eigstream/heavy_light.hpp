#pragma once

// Heavy/light streaming eigenvector estimation, the full single-pass
// algorithm.  Per Frobenius-norm guess F_g, rows with ||a||^2 >= F_g/denom
// (denom = max(1, d * (ln d)^polylog_exponent)) are heavy and stored exactly;
// the rest form that lane's light substream, which is row-norm sampled to a
// common norm (per light-opnorm guess) and fed to block-power lanes over a
// stable-rank grid.  A Gaussian sketch over ALL rows scores the union of
// candidates (exact eigenvectors of stored heavy rows; block-power iterates)
// and the argmax wins, ties to the lexicographically smallest lane.
//
// Lanes are deduplicated without changing any outcome:
//   * Frobenius lanes sharing an identical light-row history form one class;
//     a row that is heavy for part of a class splits it (the lower lanes keep
//     the state, the upper lanes get a clone plus the row).
//   * Light-guess lanes small enough that every row so far had keep
//     probability 1 share one merged state; a lane leaving saturation copies
//     the merged state before applying the new row with its own coin.
//   * Keep coins are keyed by (seed, alpha index, light-guess index, stream
//     position), so materializing a lane late reproduces exactly the
//     decisions a dense enumeration would have made; probabilities >= 1 and
//     below 2^-40 never consume a coin.
//   * Heavy rows are stored once in a norm-ordered multimap; each lane's
//     heavy set is a suffix of it, and lanes are invalidated bottom-up on
//     budget overflow (their stored rows are evicted when orphaned).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <list>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "eigstream/block_power.hpp"
#include "eigstream/ladder.hpp"
#include "eigstream/linalg.hpp"
#include "eigstream/rng.hpp"
#include "eigstream/sampling.hpp"
#include "eigstream/sketch.hpp"
#include "eigstream/stream.hpp"
#include "eigstream/types.hpp"

namespace eigstream {

struct HeavyLightOptions {
  std::optional<double> R_hint;    // gap hint; sets alpha = beta = 1/sqrt(R_hint)
  double polylog_exponent = 4.0;   // heavy threshold denominator d*(ln d)^e
  bool heavy_enabled = true;       // ablation flag: false treats every row as light
  double C_sample = 8.0;           // row-norm sampling constant
  double C1 = 3.0;                 // block power iteration constant
  double C2 = 8.0;                 // block power sampling constant
  std::optional<Index> budget_override;       // heavy rows per lane; default ceil(denom)
  std::optional<GuessLadder> frob_ladder;     // default ladder over [1/(nd)^4, (nd)^4]
  std::optional<GuessLadder> light_opnorm_ladder;
  std::vector<Index> rho_grid;                // empty -> {1, 2, 4, ..., <= d}
  std::vector<double> alpha_grid;             // empty -> from R_hint (or ladder)
  std::optional<Index> sketch_rows;           // override sketch m
  std::optional<double> sketch_eps;           // override sketch accuracy target

  // alpha = 1/sqrt(R_hint); without a hint, a small ladder of hints.
  std::vector<double> resolved_alphas(Index d) const {
    std::vector<double> alphas;
    if (!alpha_grid.empty()) {
      alphas = alpha_grid;
    } else if (R_hint) {
      alphas.push_back(1.0 / std::sqrt(*R_hint));
    } else {
      const double log_d = std::log(static_cast<double>(d));
      for (double hint : {2.0, 4.0, 16.0, 64.0, log_d * log_d}) {
        if (hint > 1.0) alphas.push_back(1.0 / std::sqrt(hint));
      }
    }
    std::vector<double> out;
    for (double a : alphas) {
      if (!(a > 0.0) || !(a < 1.0)) {
        throw std::invalid_argument("heavy_light: alpha values must lie in (0, 1)");
      }
      if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
    }
    return out;
  }
};

struct FrobLaneStatus {
  double frob_guess = 0.0;
  double threshold_sq = 0.0;
  bool overflowed = false;
  Index heavy_seen = 0;    // rows at/above the lane threshold seen in the stream
  Index stored_final = 0;  // heavy rows the lane still holds after the pass
};

// Identity of the winning (or any) candidate lane.
struct LaneId {
  Index f_idx = -1;      // Frobenius-guess lane (class representative for light)
  bool heavy = false;    // heavy branch vs light (block power) branch
  Index alpha_idx = -1;  // light branch only
  Index ell_idx = -1;    // light-opnorm guess index (representative)
  Index rho_idx = -1;    // index into the rho grid
};

struct HeavyLightReport {
  Vector estimate;  // unit winner
  LaneId winner;
  double winner_score = 0.0;
  double winner_alpha = 0.0;   // light winner only
  double winner_rho = 0.0;     // light winner only
  Index winner_boundaries = -1;
  bool winner_truncated = false;
  bool winner_degenerate = false;

  Index n = 0;
  Index d = 0;
  double frob_sq_stream = 0.0;
  Index candidate_count = 0;
  Index class_count_final = 0;
  Index heavy_candidates = 0;
  Index light_candidates = 0;

  std::vector<FrobLaneStatus> f_lanes;
  Index first_alive_f = 0;
  Index rows_stored_peak = 0;  // physical peak of the shared heavy store
  Index store_final_size = 0;
  Index budget = 0;
  double threshold_denom = 0.0;

  bool eta_violated = false;   // some light lane saw unequal accepted norms
  double observed_eta = 1.0;   // worst per-lane max/min accepted squared norm

  Index sketch_rows = 0;
  double sketch_eps = 0.0;
  std::vector<double> alphas;
  std::vector<Index> rho_grid;
  double beta = 0.0;  // analysis-only split parameter, = smallest alpha

  std::optional<double> correlation_vs_truth;  // filled by callers with ground truth
};

// Full post-pass lane state for differential testing against a dense
// per-lane reference implementation.  Materializes a candidate vector for
// every (Frobenius guess, alpha, light guess, rho) combination, so it is
// memory-hungry under default-size ladders; intended for fixtures with small
// explicit ladders.
struct HeavyLightTrace {
  struct LightLaneState {
    bool virgin = true;  // nothing accepted: candidates fall back to the shared z0
    double min_eff = std::numeric_limits<double>::infinity();
    double max_eff = 0.0;
    std::vector<Vector> z;          // one entry per valid rho, grid order
    std::vector<Index> boundaries;  // parallel to z
    std::vector<char> truncated;    // parallel to z
    std::vector<char> degenerate;   // parallel to z
  };
  Index first_alive = 0;
  std::vector<std::vector<Index>> valid_rhos;  // per alpha: surviving rho-grid indices
  std::vector<Matrix> stored_rows;             // per Frobenius lane, ascending row norm
  // light[f][a][l]: the state lane (f, alpha a, light rung l) would show in a
  // dense per-lane enumeration; filled for every f, alive or dead.
  std::vector<std::vector<std::vector<LightLaneState>>> light;
};

namespace detail {

// Block lanes plus accepted-norm bounds for one (class, alpha, light-guess)
// unit of state.  Empty lanes mean "virgin": nothing accepted yet, candidates
// fall back to the shared z0.
struct LightState {
  std::vector<BlockLane> lanes;  // parallel to the valid-rho list; empty = virgin
  double min_eff = std::numeric_limits<double>::infinity();
  double max_eff = 0.0;

  bool materialized() const { return !lanes.empty(); }
  void note_accept(double eff_norm_sq) {
    min_eff = std::min(min_eff, eff_norm_sq);
    max_eff = std::max(max_eff, eff_norm_sq);
  }
  double eta_ratio() const {
    if (!(max_eff > 0.0)) return 1.0;
    return max_eff / min_eff;
  }
};

struct AlphaClassState {
  Index saturated_hi = 0;  // light-guess rungs [0, saturated_hi) share `merged`
  LightState merged;
  std::map<Index, LightState> individual;  // rung -> state, only once touched
};

struct ClassState {
  Index begin_f = 0;  // Frobenius lanes [begin_f, end_f) share this history
  Index end_f = 0;
  Index light_rows = 0;
  std::vector<AlphaClassState> per_alpha;
};

}  // namespace detail

inline double heavy_threshold_denom(Index d, double polylog_exponent) {
  const double log_d = std::log(static_cast<double>(d));
  return std::max(1.0, static_cast<double>(d) * std::pow(log_d, polylog_exponent));
}

// Heavy iff ||row||^2 >= frob_sq_guess / max(1, d (ln d)^e).
inline bool classify_row_heavy(double row_norm_sq, double frob_sq_guess, Index d,
                               double polylog_exponent) {
  if (!(frob_sq_guess > 0.0)) {
    throw std::invalid_argument("classify_row_heavy: frob_sq_guess must be positive");
  }
  return row_norm_sq >= frob_sq_guess / heavy_threshold_denom(d, polylog_exponent);
}

// Exact top eigenvector of stored heavy rows.
inline Vector heavy_branch_vector(const Matrix& stored_rows) {
  if (stored_rows.rows() == 0) throw NoCandidateError("heavy branch: empty store");
  return exact_top_eigens(stored_rows).v1;
}

inline HeavyLightReport run_heavy_light(RowStream& stream, const HeavyLightOptions& opt,
                                        std::uint64_t seed,
                                        HeavyLightTrace* trace = nullptr) {
  const Index n = stream.n();
  const Index d = stream.d();
  if (d < 3) throw std::invalid_argument("run_heavy_light: d must be at least 3");
  if (n < 1) throw std::invalid_argument("run_heavy_light: empty stream");
  if (opt.R_hint && !(*opt.R_hint > 1.0)) {
    throw std::invalid_argument("run_heavy_light: R_hint must exceed 1");
  }
  const double log_d = std::log(static_cast<double>(d));
  const double log25_d = std::pow(log_d, 2.5);

  const GuessLadder frob = opt.frob_ladder ? *opt.frob_ladder : default_ladder(n, d);
  const GuessLadder light = opt.light_opnorm_ladder ? *opt.light_opnorm_ladder
                                                    : default_ladder(n, d);
  const Index G = static_cast<Index>(frob.size());
  const Index L = static_cast<Index>(light.size());

  const std::vector<double> alphas = opt.resolved_alphas(d);
  const Index A = static_cast<Index>(alphas.size());
  std::vector<double> eps_s(alphas.size());
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    eps_s[a] = alphas[a] * alphas[a] / log25_d;
    if (!(eps_s[a] > 0.0) || !(eps_s[a] < 1.0)) {
      throw std::invalid_argument("run_heavy_light: light sampling accuracy out of (0,1)");
    }
  }

  const std::vector<Index> rho_grid =
      opt.rho_grid.empty() ? BlockPowerParams::default_rho_grid(d) : opt.rho_grid;
  const Index R = static_cast<Index>(rho_grid.size());
  if (R == 0) throw std::invalid_argument("run_heavy_light: empty rho grid");

  const double denom = heavy_threshold_denom(d, opt.polylog_exponent);
  const Index budget =
      opt.budget_override ? *opt.budget_override : static_cast<Index>(std::ceil(denom));
  if (budget < 1) throw std::invalid_argument("run_heavy_light: budget must be >= 1");

  const Index t = std::max<Index>(1, static_cast<Index>(std::ceil(opt.C1 * log_d)));
  const double p_block = 1.0 / (5.0 * static_cast<double>(t));

  // Shared plans and start vectors, keyed by (alpha, rho) only: the virtual
  // light-substream length C eps_s^-2 rho ln d is independent of the
  // Frobenius lane and light guess, which is what makes lane merging exact.
  std::vector<std::vector<BlockPlan>> plans(static_cast<std::size_t>(A));
  std::vector<std::vector<Vector>> z0(static_cast<std::size_t>(A));
  std::vector<std::vector<Index>> valid_rhos(static_cast<std::size_t>(A));
  for (Index a = 0; a < A; ++a) {
    plans[a].reserve(static_cast<std::size_t>(R));
    z0[a].reserve(static_cast<std::size_t>(R));
    for (Index r = 0; r < R; ++r) {
      const double n_hat_real = opt.C_sample / (eps_s[a] * eps_s[a]) *
                                static_cast<double>(rho_grid[r]) * log_d;
      if (!(n_hat_real >= 1.0) || n_hat_real > 1e17) {
        throw std::invalid_argument("run_heavy_light: virtual substream length out of range");
      }
      const Index n_hat = static_cast<Index>(std::ceil(n_hat_real));
      plans[a].push_back(plan_blocks(n_hat, t, p_block,
                                     derive_key(seed, tags::kBlockPlan,
                                                static_cast<std::uint64_t>(a),
                                                static_cast<std::uint64_t>(r))));
      Rng rng = keyed_rng(seed, tags::kInitVector, static_cast<std::uint64_t>(a),
                          static_cast<std::uint64_t>(r));
      Vector v = rng.gaussian_vector(d);
      v.normalize();
      z0[a].push_back(std::move(v));
      if (!plans[a][static_cast<std::size_t>(r)].aborted &&
          !plans[a][static_cast<std::size_t>(r)].infeasible) {
        valid_rhos[a].push_back(r);
      }
    }
  }

  // Sketch over all rows; size with a slack for the candidate population.
  SketchParams sp = SketchParams::for_dim(d, G + A * R * 8);
  if (opt.sketch_eps) {
    if (!(*opt.sketch_eps > 0.0) || !(*opt.sketch_eps < 1.0)) {
      throw std::invalid_argument("run_heavy_light: sketch_eps must lie in (0, 1)");
    }
    sp.eps_jl = *opt.sketch_eps;
    const double slack = std::log(static_cast<double>(G + A * R * 8));
    sp.m = std::min<Index>(
        512, static_cast<Index>(std::max(1.0, std::ceil((log_d + slack) /
                                                        (sp.eps_jl * sp.eps_jl)))));
  }
  if (opt.sketch_rows) sp.m = *opt.sketch_rows;
  GaussianSketch sketch(sp, d, seed);

  // Heavy machinery: ascending thresholds, shared norm-ordered store.
  std::vector<double> thr(static_cast<std::size_t>(G));
  for (Index g = 0; g < G; ++g) thr[g] = frob[g] / denom;
  std::multimap<double, Vector> store;
  std::vector<Index> seen(static_cast<std::size_t>(G), 0);
  Index first_alive = 0;
  Index store_peak = 0;

  // Light machinery: classes of Frobenius lanes with identical light history.
  std::list<detail::ClassState> classes;
  {
    detail::ClassState c0;
    c0.begin_f = 0;
    c0.end_f = G;
    c0.per_alpha.assign(static_cast<std::size_t>(A), detail::AlphaClassState{});
    for (auto& s : c0.per_alpha) s.saturated_hi = L;
    classes.push_back(std::move(c0));
  }

  const auto materialize = [&](detail::LightState& st, Index a) {
    st.lanes.reserve(valid_rhos[a].size());
    for (Index r : valid_rhos[a]) {
      st.lanes.emplace_back(plans[a][static_cast<std::size_t>(r)],
                            z0[a][static_cast<std::size_t>(r)]);
    }
  };

  const auto feed_all = [](detail::LightState& st, const Vector& row) {
    for (auto& lane : st.lanes) lane.feed(row);
  };

  // First light-ladder index whose guess value exceeds x.
  const auto ladder_above = [&](double x) {
    return static_cast<Index>(
        std::upper_bound(light.guesses.begin(), light.guesses.end(), x) -
        light.guesses.begin());
  };

  const auto process_light_row = [&](detail::ClassState& cls, const Vector& row, double q,
                                     Index pos) {
    ++cls.light_rows;
    for (Index a = 0; a < A; ++a) {
      detail::AlphaClassState& S = cls.per_alpha[static_cast<std::size_t>(a)];
      const double eps_sq = eps_s[a] * eps_s[a];
      // Guess values <= bound_val give keep probability >= 1 for this row.
      const double bound_val = opt.C_sample * q * log_d / eps_sq;
      const Index bnd = ladder_above(bound_val);
      const Index new_sat = std::min(S.saturated_hi, bnd);
      // Lanes leaving saturation copy the merged state before this row.
      for (Index l = new_sat; l < S.saturated_hi; ++l) {
        S.individual.emplace(l, S.merged);
      }
      S.saturated_hi = new_sat;
      if (S.saturated_hi > 0) {
        if (!S.merged.materialized()) materialize(S.merged, a);
        feed_all(S.merged, row);
        S.merged.note_accept(q);
      }
      // Individual rungs with a coin-worthy probability for this row.
      const Index c40 = ladder_above(bound_val / kCoinSkipProbability);
      for (Index l = S.saturated_hi; l < c40; ++l) {
        const double p =
            sample_probability_log(q, opt.C_sample, eps_s[a], light[l], log_d);
        if (!keep_row(p, seed, tags::kSample, static_cast<std::uint64_t>(a),
                      static_cast<std::uint64_t>(l), static_cast<std::uint64_t>(pos))) {
          continue;
        }
        detail::LightState& st = S.individual[l];
        if (!st.materialized()) materialize(st, a);
        if (p >= 1.0) {
          feed_all(st, row);
          st.note_accept(q);
        } else {
          const Vector scaled = row / std::sqrt(p);
          feed_all(st, scaled);
          st.note_accept(q / p);
        }
      }
    }
  };

  // ------------------------------------------------------------------ pass
  while (const Vector* row = stream.next()) {
    const Index pos = stream.position();
    const double q = row->squaredNorm();
    sketch.absorb(pos, *row);

    Index cut = 0;  // lanes [0, cut) see this row as heavy
    if (opt.heavy_enabled) {
      cut = static_cast<Index>(std::upper_bound(thr.begin(), thr.end(), q) - thr.begin());
      if (cut > first_alive) {
        for (Index g = first_alive; g < cut; ++g) ++seen[static_cast<std::size_t>(g)];
        store.emplace(q, *row);
        store_peak = std::max(store_peak, static_cast<Index>(store.size()));
        while (first_alive < G && seen[static_cast<std::size_t>(first_alive)] > budget) {
          ++first_alive;
          if (first_alive < G) {
            store.erase(store.begin(), store.lower_bound(thr[static_cast<std::size_t>(
                                           first_alive)]));
          } else {
            store.clear();
          }
        }
      }
    }

    for (auto it = classes.begin(); it != classes.end(); ++it) {
      detail::ClassState& cls = *it;
      if (cut >= cls.end_f) continue;  // heavy for the whole class
      if (cut > cls.begin_f) {
        // Straddle: lanes [begin, cut) keep the pre-row state, lanes
        // [cut, end) get a clone plus this row.
        detail::ClassState lower = cls;  // deep copy
        lower.end_f = cut;
        cls.begin_f = cut;
        classes.insert(it, std::move(lower));
      }
      process_light_row(cls, *row, q, pos);
    }
  }

  // -------------------------------------------------------------- finalize
  for (auto& cls : classes) {
    for (auto& S : cls.per_alpha) {
      for (auto& lane : S.merged.lanes) lane.finish();
      for (auto& kv : S.individual) {
        for (auto& lane : kv.second.lanes) lane.finish();
      }
    }
  }

  HeavyLightReport rep;
  rep.n = n;
  rep.d = d;
  rep.frob_sq_stream = stream.stats().frob_sq;
  rep.alphas = alphas;
  rep.rho_grid = rho_grid;
  rep.beta = *std::min_element(alphas.begin(), alphas.end());
  rep.budget = budget;
  rep.threshold_denom = denom;
  rep.first_alive_f = first_alive;
  rep.rows_stored_peak = store_peak;
  rep.store_final_size = static_cast<Index>(store.size());
  rep.sketch_rows = sp.m;
  rep.sketch_eps = sp.eps_jl;
  rep.class_count_final = static_cast<Index>(classes.size());

  rep.f_lanes.resize(static_cast<std::size_t>(G));
  for (Index g = 0; g < G; ++g) {
    FrobLaneStatus& st = rep.f_lanes[static_cast<std::size_t>(g)];
    st.frob_guess = frob[g];
    st.threshold_sq = thr[static_cast<std::size_t>(g)];
    st.overflowed = opt.heavy_enabled && g < first_alive;
    st.heavy_seen = seen[static_cast<std::size_t>(g)];
    if (opt.heavy_enabled && g >= first_alive) {
      st.stored_final = static_cast<Index>(std::distance(
          store.lower_bound(thr[static_cast<std::size_t>(g)]), store.end()));
    }
  }

  // Per-lane eta audit over accepted effective norms.
  for (const auto& cls : classes) {
    if (cls.end_f <= first_alive) continue;
    for (const auto& S : cls.per_alpha) {
      double ratio = S.merged.eta_ratio();
      rep.observed_eta = std::max(rep.observed_eta, ratio);
      for (const auto& kv : S.individual) {
        rep.observed_eta = std::max(rep.observed_eta, kv.second.eta_ratio());
      }
    }
  }
  rep.eta_violated = rep.observed_eta > 1.0 + 1e-9;

  if (trace != nullptr) {
    trace->first_alive = first_alive;
    trace->valid_rhos = valid_rhos;
    trace->stored_rows.assign(static_cast<std::size_t>(G), Matrix(0, d));
    if (opt.heavy_enabled) {
      for (Index g = first_alive; g < G; ++g) {
        const Index cnt = rep.f_lanes[static_cast<std::size_t>(g)].stored_final;
        Matrix rows(cnt, d);
        Index i = 0;
        for (auto it = store.lower_bound(thr[static_cast<std::size_t>(g)]);
             it != store.end(); ++it) {
          rows.row(i++) = it->second.transpose();
        }
        trace->stored_rows[static_cast<std::size_t>(g)] = std::move(rows);
      }
    }
    trace->light.assign(
        static_cast<std::size_t>(G),
        std::vector<std::vector<HeavyLightTrace::LightLaneState>>(
            static_cast<std::size_t>(A),
            std::vector<HeavyLightTrace::LightLaneState>(static_cast<std::size_t>(L))));
    for (const auto& cls : classes) {
      for (Index a = 0; a < A; ++a) {
        const detail::AlphaClassState& S = cls.per_alpha[static_cast<std::size_t>(a)];
        for (Index l = 0; l < L; ++l) {
          const detail::LightState* st = nullptr;
          if (l < S.saturated_hi) {
            st = &S.merged;
          } else if (auto it = S.individual.find(l); it != S.individual.end()) {
            st = &it->second;
          }
          HeavyLightTrace::LightLaneState out;
          if (st == nullptr || !st->materialized()) {
            // Virgin (possibly a saturation-leaver copy of a virgin merged
            // state): candidates are the shared start vectors, untouched.
            for (Index r : valid_rhos[static_cast<std::size_t>(a)]) {
              out.z.push_back(z0[static_cast<std::size_t>(a)][static_cast<std::size_t>(r)]);
              out.boundaries.push_back(0);
              out.truncated.push_back(1);
              out.degenerate.push_back(
                  plans[static_cast<std::size_t>(a)][static_cast<std::size_t>(r)]
                          .degenerate_empty
                      ? 1
                      : 0);
            }
          } else {
            out.virgin = false;
            out.min_eff = st->min_eff;
            out.max_eff = st->max_eff;
            for (const BlockLane& lane : st->lanes) {
              out.z.push_back(lane.z());
              out.boundaries.push_back(lane.boundaries_applied());
              out.truncated.push_back(lane.truncated() ? 1 : 0);
              out.degenerate.push_back(lane.degenerate_step() ? 1 : 0);
            }
          }
          for (Index f = cls.begin_f; f < cls.end_f; ++f) {
            trace->light[static_cast<std::size_t>(f)][static_cast<std::size_t>(a)]
                        [static_cast<std::size_t>(l)] = out;
          }
        }
      }
    }
  }

  // Candidate enumeration in canonical lane order:
  // (f, heavy-before-light, alpha, light-guess, rho).
  struct Candidate {
    LaneId id;
    const Vector* z;
    bool truncated = false;
    bool degenerate = false;
    Index boundaries = -1;
  };
  std::vector<Candidate> candidates;
  std::list<Vector> heavy_vecs;                 // stable storage for heavy eigenvectors
  std::map<Index, const Vector*> heavy_by_cnt;  // dedup identical store suffixes

  const auto emit_class_candidates = [&](const detail::ClassState& cls, Index f_rep) {
    for (Index a = 0; a < A; ++a) {
      const detail::AlphaClassState& S = cls.per_alpha[static_cast<std::size_t>(a)];
      // (representative rung, state or nullptr-for-virgin) in rung order.
      std::vector<std::pair<Index, const detail::LightState*>> entries;
      if (S.saturated_hi > 0 && S.merged.materialized()) entries.emplace_back(0, &S.merged);
      for (const auto& kv : S.individual) entries.emplace_back(kv.first, &kv.second);
      // One virgin representative: the smallest rung with no materialized
      // state (covers every untouched lane in this class, all sharing z0).
      Index virgin_rep = -1;
      if (S.saturated_hi > 0 && !S.merged.materialized()) {
        virgin_rep = 0;
      } else {
        for (Index l = S.saturated_hi; l < L; ++l) {
          auto it = S.individual.find(l);
          if (it == S.individual.end() || !it->second.materialized()) {
            virgin_rep = l;
            break;
          }
        }
      }
      if (virgin_rep >= 0) entries.emplace_back(virgin_rep, nullptr);
      std::sort(entries.begin(), entries.end(),
                [](const auto& x, const auto& y) { return x.first < y.first; });

      for (const auto& [l_rep, state] : entries) {
        if (state != nullptr && !state->materialized()) {
          continue;  // virgin leaver copy; covered by the virgin representative
        }
        const bool is_virgin = (state == nullptr);
        for (std::size_t i = 0; i < valid_rhos[a].size(); ++i) {
          const Index r = valid_rhos[a][i];
          Candidate c;
          c.id.f_idx = f_rep;
          c.id.heavy = false;
          c.id.alpha_idx = a;
          c.id.ell_idx = l_rep;
          c.id.rho_idx = r;
          if (is_virgin) {
            c.z = &z0[a][static_cast<std::size_t>(r)];
            c.truncated = true;
            c.boundaries = 0;
            c.degenerate = plans[a][static_cast<std::size_t>(r)].degenerate_empty;
          } else {
            const BlockLane& lane = state->lanes[i];
            c.z = &lane.z();
            c.truncated = lane.truncated();
            c.degenerate = lane.degenerate_step();
            c.boundaries = lane.boundaries_applied();
          }
          candidates.push_back(c);
        }
      }
    }
  };

  auto cls_it = classes.begin();
  for (Index g = first_alive; g < G; ++g) {
    if (opt.heavy_enabled) {
      const Index cnt = rep.f_lanes[static_cast<std::size_t>(g)].stored_final;
      if (cnt >= 1) {
        auto found = heavy_by_cnt.find(cnt);
        const Vector* v = nullptr;
        if (found != heavy_by_cnt.end()) {
          v = found->second;
        } else {
          Matrix rows(cnt, d);
          Index i = 0;
          for (auto it = store.lower_bound(thr[static_cast<std::size_t>(g)]);
               it != store.end(); ++it) {
            rows.row(i++) = it->second.transpose();
          }
          heavy_vecs.push_back(heavy_branch_vector(rows));
          v = &heavy_vecs.back();
          heavy_by_cnt.emplace(cnt, v);
          Candidate c;
          c.id.f_idx = g;
          c.id.heavy = true;
          c.z = v;
          candidates.push_back(c);
        }
      }
    }
    while (cls_it != classes.end() && cls_it->end_f <= g) ++cls_it;
    if (cls_it != classes.end() && std::max(cls_it->begin_f, first_alive) == g) {
      emit_class_candidates(*cls_it, g);
    }
  }

  if (candidates.empty()) {
    throw NoCandidateError("heavy_light: every lane was invalidated");
  }
  rep.candidate_count = static_cast<Index>(candidates.size());

  // Score each distinct vector once (shared z0 pointers repeat across
  // classes); strict argmax keeps the first — lexicographically smallest —
  // lane on ties.
  std::unordered_map<const double*, double> score_cache;
  Index best = -1;
  double best_score = -1.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Vector& z = *candidates[i].z;
    auto [it, inserted] = score_cache.try_emplace(z.data(), 0.0);
    if (inserted) it->second = sketch.score(z);
    const double s = it->second;
    if (candidates[i].id.heavy) ++rep.heavy_candidates; else ++rep.light_candidates;
    if (best < 0 || s > best_score) {
      best = static_cast<Index>(i);
      best_score = s;
    }
  }

  const Candidate& win = candidates[static_cast<std::size_t>(best)];
  rep.estimate = *win.z;
  rep.winner = win.id;
  rep.winner_score = best_score;
  rep.winner_truncated = win.truncated;
  rep.winner_degenerate = win.degenerate;
  rep.winner_boundaries = win.boundaries;
  if (!win.id.heavy) {
    rep.winner_alpha = alphas[static_cast<std::size_t>(win.id.alpha_idx)];
    rep.winner_rho = static_cast<double>(rho_grid[static_cast<std::size_t>(win.id.rho_idx)]);
  }
  return rep;
}

}  // namespace eigstream
