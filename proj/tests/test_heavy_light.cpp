// Tests for the single-pass heavy/light estimator.
//
// The centerpiece is a differential fixture: the production run (with its
// Frobenius-lane classes, saturated-rung merging, lazy materialization, and
// shared heavy store) is compared bitwise against a dense reference that
// maintains every (Frobenius guess, alpha, light guess) lane independently
// using the same keyed primitives.  Any divergence in lane sharing, coin
// keying, eviction, or candidate enumeration shows up as a bit mismatch.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <vector>

#include "eigstream/heavy_light.hpp"
#include "eigstream/linalg.hpp"
#include "eigstream/stream.hpp"

using namespace eigstream;

namespace {

bool bits_equal(const Vector& x, const Vector& y) {
  return x.size() == y.size() && (x.array() == y.array()).all();
}

bool bits_equal(const Matrix& x, const Matrix& y) {
  return x.rows() == y.rows() && x.cols() == y.cols() &&
         (x.rows() == 0 || (x.array() == y.array()).all());
}

// ---------------------------------------------------------------------------
// Dense reference: one independent lane per (f, alpha, light guess), fed by
// re-deriving every keyed decision from scratch.  No class merging, no shared
// store, no saturation shortcut; lanes are materialized lazily (first
// accepted row) so never-fed lanes expose the raw shared start vector exactly
// like the production virgin-candidate path.
// ---------------------------------------------------------------------------

struct NaiveLaneSet {
  bool touched = false;
  double min_eff = std::numeric_limits<double>::infinity();
  double max_eff = 0.0;
  std::vector<BlockLane> lanes;  // parallel to valid_rhos[a]
};

struct NaiveCandidate {
  LaneId id;
  Vector z;
  Index boundaries = -1;
  bool truncated = false;
  bool degenerate = false;
};

struct NaiveResult {
  Index first_alive = 0;
  std::vector<Index> seen;
  std::vector<Matrix> stored;  // per f lane, ascending norm, ties by arrival
  std::vector<std::vector<std::vector<NaiveLaneSet>>> light;  // [f][a][l]
  std::vector<std::vector<Index>> valid_rhos;                 // per alpha
  std::vector<std::vector<Vector>> z0;                        // [a][r], raw
  std::vector<std::vector<BlockPlan>> plans;                  // [a][r]
  std::vector<char> boundary;  // boundary[g]: some row split lanes g-1 | g
  Index class_count = 1;
  double observed_eta = 1.0;
  std::vector<NaiveCandidate> candidates;
  Index heavy_candidates = 0;
};

NaiveResult dense_reference(const Matrix& m, std::uint64_t order_seed,
                            const HeavyLightOptions& opt, std::uint64_t seed) {
  const Index n = m.rows();
  const Index d = m.cols();
  const double log_d = std::log(static_cast<double>(d));
  const double log25_d = std::pow(log_d, 2.5);
  const GuessLadder& frob = *opt.frob_ladder;
  const GuessLadder& light_ladder = *opt.light_opnorm_ladder;
  const Index G = static_cast<Index>(frob.size());
  const Index L = static_cast<Index>(light_ladder.size());
  const std::vector<double>& alphas = opt.alpha_grid;
  const Index A = static_cast<Index>(alphas.size());
  const std::vector<Index>& rho_grid = opt.rho_grid;
  const Index R = static_cast<Index>(rho_grid.size());
  const Index budget = *opt.budget_override;
  const Index t = std::max<Index>(
      1, static_cast<Index>(std::ceil(opt.C1 * log_d)));
  const double p_block = 1.0 / (5.0 * static_cast<double>(t));

  std::vector<double> eps_s(static_cast<std::size_t>(A));
  for (Index a = 0; a < A; ++a) {
    eps_s[static_cast<std::size_t>(a)] =
        alphas[static_cast<std::size_t>(a)] * alphas[static_cast<std::size_t>(a)] / log25_d;
  }

  NaiveResult out;
  out.plans.resize(static_cast<std::size_t>(A));
  out.z0.resize(static_cast<std::size_t>(A));
  out.valid_rhos.resize(static_cast<std::size_t>(A));
  for (Index a = 0; a < A; ++a) {
    for (Index r = 0; r < R; ++r) {
      const double n_hat_real = opt.C_sample / (eps_s[static_cast<std::size_t>(a)] *
                                                eps_s[static_cast<std::size_t>(a)]) *
                                static_cast<double>(rho_grid[static_cast<std::size_t>(r)]) *
                                log_d;
      const Index n_hat = static_cast<Index>(std::ceil(n_hat_real));
      out.plans[static_cast<std::size_t>(a)].push_back(
          plan_blocks(n_hat, t, p_block,
                      derive_key(seed, tags::kBlockPlan, static_cast<std::uint64_t>(a),
                                 static_cast<std::uint64_t>(r))));
      Rng rng = keyed_rng(seed, tags::kInitVector, static_cast<std::uint64_t>(a),
                          static_cast<std::uint64_t>(r));
      Vector v = rng.gaussian_vector(d);
      v.normalize();
      out.z0[static_cast<std::size_t>(a)].push_back(std::move(v));
      const BlockPlan& plan = out.plans[static_cast<std::size_t>(a)].back();
      if (!plan.aborted && !plan.infeasible) {
        out.valid_rhos[static_cast<std::size_t>(a)].push_back(r);
      }
    }
  }

  out.seen.assign(static_cast<std::size_t>(G), 0);
  std::vector<char> alive(static_cast<std::size_t>(G), 1);
  struct StoredRow {
    double q;
    Vector row;
  };
  std::vector<std::vector<StoredRow>> stores(static_cast<std::size_t>(G));
  out.light.assign(static_cast<std::size_t>(G),
                   std::vector<std::vector<NaiveLaneSet>>(
                       static_cast<std::size_t>(A),
                       std::vector<NaiveLaneSet>(static_cast<std::size_t>(L))));
  out.boundary.assign(static_cast<std::size_t>(G), 0);
  // Saturation watermark per (f, alpha): rungs below it kept every light row
  // of lane f at probability >= 1.
  std::vector<std::vector<Index>> sat_final(
      static_cast<std::size_t>(G), std::vector<Index>(static_cast<std::size_t>(A), L));
  std::vector<Index> light_rows(static_cast<std::size_t>(G), 0);

  const std::vector<Index> order = shuffled_order(n, order_seed);
  for (Index k = 0; k < n; ++k) {
    const Vector row = m.row(order[static_cast<std::size_t>(k)]);
    const double q = row.squaredNorm();

    std::vector<char> heavy(static_cast<std::size_t>(G), 0);
    if (opt.heavy_enabled) {
      for (Index g = 0; g < G; ++g) {
        heavy[static_cast<std::size_t>(g)] =
            classify_row_heavy(q, frob[static_cast<std::size_t>(g)], d,
                               opt.polylog_exponent)
                ? 1
                : 0;
      }
    }
    for (Index g = 1; g < G; ++g) {
      if (heavy[static_cast<std::size_t>(g - 1)] && !heavy[static_cast<std::size_t>(g)]) {
        out.boundary[static_cast<std::size_t>(g)] = 1;
      }
    }
    for (Index g = 0; g < G; ++g) {
      if (!heavy[static_cast<std::size_t>(g)] || !alive[static_cast<std::size_t>(g)]) continue;
      ++out.seen[static_cast<std::size_t>(g)];
      stores[static_cast<std::size_t>(g)].push_back({q, row});
      if (out.seen[static_cast<std::size_t>(g)] > budget) {
        alive[static_cast<std::size_t>(g)] = 0;
        stores[static_cast<std::size_t>(g)].clear();
      }
    }

    // Keep decisions and scaled rows depend on (alpha, rung, position) only,
    // never the Frobenius lane; evaluate once and fan out.
    for (Index a = 0; a < A; ++a) {
      const double eps = eps_s[static_cast<std::size_t>(a)];
      Index bnd = 0;
      while (bnd < L &&
             sample_probability_log(q, opt.C_sample, eps,
                                    light_ladder[static_cast<std::size_t>(bnd)],
                                    log_d) >= 1.0) {
        ++bnd;
      }
      for (Index g = 0; g < G; ++g) {
        if (!heavy[static_cast<std::size_t>(g)]) {
          sat_final[static_cast<std::size_t>(g)][static_cast<std::size_t>(a)] = std::min(
              sat_final[static_cast<std::size_t>(g)][static_cast<std::size_t>(a)], bnd);
        }
      }
      for (Index l = 0; l < L; ++l) {
        const double p = sample_probability_log(
            q, opt.C_sample, eps, light_ladder[static_cast<std::size_t>(l)], log_d);
        if (!keep_row(p, seed, tags::kSample, static_cast<std::uint64_t>(a),
                      static_cast<std::uint64_t>(l), static_cast<std::uint64_t>(k))) {
          continue;
        }
        Vector fed;
        double eff = 0.0;
        if (p >= 1.0) {
          fed = row;
          eff = q;
        } else {
          fed = row / std::sqrt(p);
          eff = q / p;
        }
        for (Index g = 0; g < G; ++g) {
          if (heavy[static_cast<std::size_t>(g)]) continue;
          NaiveLaneSet& st = out.light[static_cast<std::size_t>(g)]
                                      [static_cast<std::size_t>(a)]
                                      [static_cast<std::size_t>(l)];
          if (!st.touched) {
            st.touched = true;
            for (Index r : out.valid_rhos[static_cast<std::size_t>(a)]) {
              st.lanes.emplace_back(
                  out.plans[static_cast<std::size_t>(a)][static_cast<std::size_t>(r)],
                  out.z0[static_cast<std::size_t>(a)][static_cast<std::size_t>(r)]);
            }
          }
          for (BlockLane& lane : st.lanes) lane.feed(fed);
          st.min_eff = std::min(st.min_eff, eff);
          st.max_eff = std::max(st.max_eff, eff);
        }
      }
    }
    for (Index g = 0; g < G; ++g) {
      if (!heavy[static_cast<std::size_t>(g)]) ++light_rows[static_cast<std::size_t>(g)];
    }
  }

  for (auto& per_f : out.light) {
    for (auto& per_a : per_f) {
      for (NaiveLaneSet& st : per_a) {
        for (BlockLane& lane : st.lanes) lane.finish();
      }
    }
  }

  Index fa = 0;
  while (fa < G && !alive[static_cast<std::size_t>(fa)]) ++fa;
  out.first_alive = fa;
  for (Index g = fa; g < G; ++g) REQUIRE(alive[static_cast<std::size_t>(g)] == 1);

  out.stored.assign(static_cast<std::size_t>(G), Matrix(0, d));
  for (Index g = fa; g < G; ++g) {
    auto& rows = stores[static_cast<std::size_t>(g)];
    std::stable_sort(rows.begin(), rows.end(),
                     [](const StoredRow& x, const StoredRow& y) { return x.q < y.q; });
    Matrix sm(static_cast<Index>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      sm.row(static_cast<Index>(i)) = rows[i].row.transpose();
    }
    out.stored[static_cast<std::size_t>(g)] = std::move(sm);
  }

  for (Index g = 1; g < G; ++g) {
    out.class_count += out.boundary[static_cast<std::size_t>(g)] ? 1 : 0;
  }

  for (Index g = fa; g < G; ++g) {
    for (Index a = 0; a < A; ++a) {
      for (Index l = 0; l < L; ++l) {
        const NaiveLaneSet& st = out.light[static_cast<std::size_t>(g)]
                                          [static_cast<std::size_t>(a)]
                                          [static_cast<std::size_t>(l)];
        const double ratio = st.max_eff > 0.0 ? st.max_eff / st.min_eff : 1.0;
        out.observed_eta = std::max(out.observed_eta, ratio);
      }
    }
  }

  // Candidate enumeration in canonical order: ascending f; per f a heavy
  // candidate for each new distinct store size, then (when f is the first
  // lane of its light-history class) the light candidates in rung order with
  // saturated rungs collapsed to rung 0 and all virgin rungs represented by
  // the smallest one.
  std::set<Index> counted;
  for (Index g = fa; g < G; ++g) {
    if (opt.heavy_enabled) {
      const Index cnt = out.stored[static_cast<std::size_t>(g)].rows();
      if (cnt >= 1 && counted.insert(cnt).second) {
        NaiveCandidate c;
        c.id.f_idx = g;
        c.id.heavy = true;
        c.z = exact_top_eigens(out.stored[static_cast<std::size_t>(g)]).v1;
        out.candidates.push_back(std::move(c));
        ++out.heavy_candidates;
      }
    }
    const bool is_rep = (g == fa) || out.boundary[static_cast<std::size_t>(g)];
    if (!is_rep) continue;
    for (Index a = 0; a < A; ++a) {
      const Index sat = sat_final[static_cast<std::size_t>(g)][static_cast<std::size_t>(a)];
      std::vector<std::pair<Index, const NaiveLaneSet*>> entries;
      if (light_rows[static_cast<std::size_t>(g)] == 0) {
        entries.emplace_back(0, nullptr);
      } else {
        if (sat > 0) {
          entries.emplace_back(
              0, &out.light[static_cast<std::size_t>(g)][static_cast<std::size_t>(a)][0]);
        }
        Index virgin_rep = -1;
        for (Index l = sat; l < L; ++l) {
          const NaiveLaneSet& st = out.light[static_cast<std::size_t>(g)]
                                            [static_cast<std::size_t>(a)]
                                            [static_cast<std::size_t>(l)];
          if (st.touched) {
            entries.emplace_back(l, &st);
          } else if (virgin_rep < 0) {
            virgin_rep = l;
          }
        }
        if (virgin_rep >= 0) entries.emplace_back(virgin_rep, nullptr);
        std::sort(entries.begin(), entries.end(),
                  [](const auto& x, const auto& y) { return x.first < y.first; });
      }
      for (const auto& [l_rep, st] : entries) {
        const auto& valid = out.valid_rhos[static_cast<std::size_t>(a)];
        for (std::size_t i = 0; i < valid.size(); ++i) {
          const Index r = valid[i];
          NaiveCandidate c;
          c.id.f_idx = g;
          c.id.heavy = false;
          c.id.alpha_idx = a;
          c.id.ell_idx = l_rep;
          c.id.rho_idx = r;
          if (st == nullptr) {
            c.z = out.z0[static_cast<std::size_t>(a)][static_cast<std::size_t>(r)];
            c.truncated = true;
            c.boundaries = 0;
            c.degenerate = out.plans[static_cast<std::size_t>(a)][static_cast<std::size_t>(r)]
                               .degenerate_empty;
          } else {
            const BlockLane& lane = st->lanes[i];
            c.z = lane.z();
            c.truncated = lane.truncated();
            c.degenerate = lane.degenerate_step();
            c.boundaries = lane.boundaries_applied();
          }
          out.candidates.push_back(std::move(c));
        }
      }
    }
  }
  return out;
}

// Runs production and reference on the same inputs and checks every exposed
// piece of state bitwise.
void check_against_dense_reference(const Matrix& m, std::uint64_t order_seed,
                                   const HeavyLightOptions& opt, std::uint64_t seed) {
  MatrixSource src(m);
  RowStream stream(src, order_seed);
  HeavyLightTrace trace;
  const HeavyLightReport rep = run_heavy_light(stream, opt, seed, &trace);
  const NaiveResult nv = dense_reference(m, order_seed, opt, seed);

  const Index G = static_cast<Index>(opt.frob_ladder->size());
  const Index L = static_cast<Index>(opt.light_opnorm_ladder->size());
  const Index A = static_cast<Index>(opt.alpha_grid.size());
  const Index d = m.cols();

  CHECK(trace.first_alive == nv.first_alive);
  CHECK(rep.first_alive_f == nv.first_alive);
  CHECK(rep.class_count_final == nv.class_count);
  CHECK(rep.observed_eta == nv.observed_eta);

  REQUIRE(rep.f_lanes.size() == static_cast<std::size_t>(G));
  REQUIRE(trace.stored_rows.size() == static_cast<std::size_t>(G));
  for (Index g = 0; g < G; ++g) {
    const FrobLaneStatus& st = rep.f_lanes[static_cast<std::size_t>(g)];
    CHECK(st.heavy_seen == nv.seen[static_cast<std::size_t>(g)]);
    CHECK(st.overflowed == (opt.heavy_enabled && g < nv.first_alive));
    CHECK(st.stored_final == nv.stored[static_cast<std::size_t>(g)].rows());
    CHECK(bits_equal(trace.stored_rows[static_cast<std::size_t>(g)],
                     nv.stored[static_cast<std::size_t>(g)]));
  }

  REQUIRE(trace.valid_rhos.size() == static_cast<std::size_t>(A));
  for (Index a = 0; a < A; ++a) {
    CHECK(trace.valid_rhos[static_cast<std::size_t>(a)] ==
          nv.valid_rhos[static_cast<std::size_t>(a)]);
  }

  REQUIRE(trace.light.size() == static_cast<std::size_t>(G));
  for (Index g = 0; g < G; ++g) {
    for (Index a = 0; a < A; ++a) {
      const auto& valid = nv.valid_rhos[static_cast<std::size_t>(a)];
      for (Index l = 0; l < L; ++l) {
        const HeavyLightTrace::LightLaneState& tl =
            trace.light[static_cast<std::size_t>(g)][static_cast<std::size_t>(a)]
                       [static_cast<std::size_t>(l)];
        const NaiveLaneSet& nl = nv.light[static_cast<std::size_t>(g)]
                                         [static_cast<std::size_t>(a)]
                                         [static_cast<std::size_t>(l)];
        REQUIRE(tl.z.size() == valid.size());
        CHECK(tl.virgin == !nl.touched);
        if (nl.touched) {
          CHECK(tl.min_eff == nl.min_eff);
          CHECK(tl.max_eff == nl.max_eff);
          for (std::size_t i = 0; i < valid.size(); ++i) {
            CHECK(bits_equal(tl.z[i], nl.lanes[i].z()));
            CHECK(tl.boundaries[i] == nl.lanes[i].boundaries_applied());
            CHECK(tl.truncated[i] == (nl.lanes[i].truncated() ? 1 : 0));
            CHECK(tl.degenerate[i] == (nl.lanes[i].degenerate_step() ? 1 : 0));
          }
        } else {
          for (std::size_t i = 0; i < valid.size(); ++i) {
            const Index r = valid[i];
            CHECK(bits_equal(
                tl.z[i],
                nv.z0[static_cast<std::size_t>(a)][static_cast<std::size_t>(r)]));
            CHECK(tl.boundaries[i] == 0);
            CHECK(tl.truncated[i] == 1);
            CHECK(tl.degenerate[i] ==
                  (nv.plans[static_cast<std::size_t>(a)][static_cast<std::size_t>(r)]
                           .degenerate_empty
                       ? 1
                       : 0));
          }
        }
      }
    }
  }

  // Candidate population and winner, re-scored with an independently built
  // sketch over the same keyed Gaussians.
  CHECK(rep.candidate_count == static_cast<Index>(nv.candidates.size()));
  CHECK(rep.heavy_candidates == nv.heavy_candidates);
  CHECK(rep.light_candidates ==
        static_cast<Index>(nv.candidates.size()) - nv.heavy_candidates);

  GaussianSketch sketch(rep.sketch_rows, d, seed);
  const std::vector<Index> order = shuffled_order(m.rows(), order_seed);
  for (Index k = 0; k < m.rows(); ++k) {
    const Vector row = m.row(order[static_cast<std::size_t>(k)]);
    sketch.absorb(k, row);
  }
  Index best = -1;
  double best_score = -1.0;
  for (std::size_t i = 0; i < nv.candidates.size(); ++i) {
    const double s = sketch.score(nv.candidates[i].z);
    if (best < 0 || s > best_score) {
      best = static_cast<Index>(i);
      best_score = s;
    }
  }
  REQUIRE(best >= 0);
  const NaiveCandidate& w = nv.candidates[static_cast<std::size_t>(best)];
  CHECK(rep.winner.f_idx == w.id.f_idx);
  CHECK(rep.winner.heavy == w.id.heavy);
  CHECK(rep.winner.alpha_idx == w.id.alpha_idx);
  CHECK(rep.winner.ell_idx == w.id.ell_idx);
  CHECK(rep.winner.rho_idx == w.id.rho_idx);
  CHECK(rep.winner_score == best_score);
  CHECK(bits_equal(rep.estimate, w.z));
  CHECK(rep.winner_boundaries == w.boundaries);
  CHECK(rep.winner_truncated == w.truncated);
  CHECK(rep.winner_degenerate == w.degenerate);
  if (!w.id.heavy) {
    CHECK(rep.winner_alpha ==
          opt.alpha_grid[static_cast<std::size_t>(w.id.alpha_idx)]);
    CHECK(rep.winner_rho ==
          static_cast<double>(opt.rho_grid[static_cast<std::size_t>(w.id.rho_idx)]));
  }
}

// Fixture: 8-dim stream of 294 standard Gaussian rows plus six planted rows
// with exact squared norms {400, 250, 100, 100, 60, 28}, shuffled.  Under
// frob ladder ladder_for(30, 25000) and budget 5 this kills every rung up to
// thr ~ 25.7 deterministically (six planted rows exceed the budget), leaves
// rungs with thr ~ {51.3, 102.7, 205.4} alive, makes the top two alive rungs
// share one store suffix (nothing lands in [102.7, 205.4)) and one light
// class, and splits the class below them (q = 60 and 100 land in
// [51.3, 102.7)).
Matrix differential_fixture() {
  const Index n = 300;
  const Index d = 8;
  Matrix m(n, d);
  m.setZero();
  m(0, 0) = 20.0;                                    // q = 400
  m(1, 1) = 15.0; m(1, 2) = 5.0;                     // q = 250
  m(2, 2) = 10.0;                                    // q = 100
  m(3, 3) = 6.0; m(3, 4) = 8.0;                      // q = 100 (exact tie)
  m(4, 4) = 6.0; m(4, 5) = 4.0; m(4, 6) = 2.0; m(4, 7) = 2.0;  // q = 60
  m(5, 0) = 5.0; m(5, 5) = 1.0; m(5, 6) = 1.0; m(5, 7) = 1.0;  // q = 28
  Rng gen = keyed_rng(999, tags::kGenerator);
  for (Index i = 6; i < n; ++i) m.row(i) = gen.gaussian_vector(d).transpose();
  return m;
}

HeavyLightOptions differential_options() {
  HeavyLightOptions opt;
  opt.alpha_grid = {0.99, 0.6};
  opt.rho_grid = {1, 2, 4};
  opt.frob_ladder = ladder_for(30.0, 25000.0);
  opt.light_opnorm_ladder = ladder_for(1.0, 1e18);
  opt.budget_override = 5;
  return opt;
}

}  // namespace

TEST_CASE("heavy threshold denominator and row classification") {
  CHECK(heavy_threshold_denom(8, 4.0) == doctest::Approx(149.58114388183802).epsilon(1e-14));
  CHECK(heavy_threshold_denom(128, 2.0) == doctest::Approx(3013.401303294959).epsilon(1e-14));
  CHECK(heavy_threshold_denom(8, 2.0) == doctest::Approx(34.592617002110494).epsilon(1e-14));
  // d (ln d)^e below one engages the floor exactly.
  CHECK(heavy_threshold_denom(2, 4.0) == 1.0);

  // With denominator exactly 1 the classification is q >= guess, inclusive.
  CHECK(classify_row_heavy(5.0, 5.0, 2, 4.0));
  CHECK_FALSE(classify_row_heavy(std::nextafter(5.0, 0.0), 5.0, 2, 4.0));
  CHECK(classify_row_heavy(5.1, 5.0, 2, 4.0));
  CHECK_THROWS_AS(classify_row_heavy(1.0, 0.0, 8, 4.0), std::invalid_argument);
  CHECK_THROWS_AS(classify_row_heavy(1.0, -2.0, 8, 4.0), std::invalid_argument);
}

TEST_CASE("alpha resolution from hints, explicit grids, and defaults") {
  HeavyLightOptions opt;

  opt.R_hint = 16.0;
  CHECK(opt.resolved_alphas(8) == std::vector<double>{0.25});

  opt.R_hint.reset();
  const std::vector<double> defaults = opt.resolved_alphas(1024);
  REQUIRE(defaults.size() == 5);
  CHECK(defaults[0] == 0.7071067811865475);  // 1/sqrt(2)
  CHECK(defaults[1] == 0.5);
  CHECK(defaults[2] == 0.25);
  CHECK(defaults[3] == 0.125);
  CHECK(defaults[4] == 0.14426950408889633);  // 1/sqrt(ln^2 d)

  // At d = 2 the ln^2 d hint is below 1 and is skipped.
  CHECK(opt.resolved_alphas(2).size() == 4);

  opt.alpha_grid = {0.5, 0.25, 0.5};
  CHECK(opt.resolved_alphas(8) == std::vector<double>{0.5, 0.25});

  opt.alpha_grid = {1.0};
  CHECK_THROWS_AS(opt.resolved_alphas(8), std::invalid_argument);
  opt.alpha_grid = {-0.1};
  CHECK_THROWS_AS(opt.resolved_alphas(8), std::invalid_argument);
  opt.alpha_grid.clear();
  opt.R_hint = 1.0;  // alpha = 1, outside (0, 1)
  CHECK_THROWS_AS(opt.resolved_alphas(8), std::invalid_argument);
}

TEST_CASE("default heavy budget is the rounded-up threshold denominator") {
  const Index n = 20;
  const Index d = 8;
  Matrix m(n, d);
  Rng gen = keyed_rng(31, tags::kGenerator);
  for (Index i = 0; i < n; ++i) m.row(i) = gen.gaussian_vector(d).transpose();
  MatrixSource src(m);
  RowStream stream(src, 5);
  HeavyLightOptions opt;
  opt.R_hint = 4.0;
  const HeavyLightReport rep = run_heavy_light(stream, opt, 11);
  CHECK(rep.threshold_denom == doctest::Approx(149.58114388183802).epsilon(1e-14));
  CHECK(rep.budget == 150);
  CHECK(rep.first_alive_f == 0);  // 20 rows cannot overflow a budget of 150
  CHECK(rep.estimate.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.alphas == std::vector<double>{0.5});
  CHECK(rep.beta == 0.5);
}

TEST_CASE("every Frobenius lane overflowing leaves no candidate") {
  const Index d = 8;
  Matrix m(5, d);
  m.setZero();
  for (Index i = 0; i < 5; ++i) m(i, i) = 1.0;  // unit rows, all heavy everywhere
  MatrixSource src(m);
  RowStream stream(src, std::nullopt);
  HeavyLightOptions opt;
  opt.alpha_grid = {0.5};
  opt.rho_grid = {1};
  opt.frob_ladder = ladder_for(0.001, 0.002);
  opt.light_opnorm_ladder = ladder_for(1.0, 2.0);
  opt.budget_override = 1;
  CHECK_THROWS_AS(run_heavy_light(stream, opt, 7), NoCandidateError);
}

TEST_CASE("uniform row norms report an accepted-norm ratio of exactly one") {
  const Index d = 8;
  const Index n = 40;
  Matrix m(n, d);
  m.setZero();
  for (Index i = 0; i < n; ++i) m(i, i % d) = 1.0;
  MatrixSource src(m);
  RowStream stream(src, 21);
  HeavyLightOptions opt;
  opt.heavy_enabled = false;
  opt.alpha_grid = {0.6};
  opt.rho_grid = {1};
  opt.frob_ladder = ladder_for(1.0, 2.0);
  opt.light_opnorm_ladder = ladder_for(1.0, 1e6);
  opt.budget_override = 1;
  const HeavyLightReport rep = run_heavy_light(stream, opt, 3);
  CHECK(rep.observed_eta == 1.0);
  CHECK_FALSE(rep.eta_violated);
  CHECK(rep.heavy_candidates == 0);
  CHECK(rep.class_count_final == 1);
}

TEST_CASE("heavy/light matches a dense per-lane reference bitwise (heavy on)") {
  const Matrix m = differential_fixture();
  const HeavyLightOptions opt = differential_options();

  MatrixSource src(m);
  RowStream stream(src, 777);
  HeavyLightTrace trace;
  const HeavyLightReport rep = run_heavy_light(stream, opt, 4242, &trace);

  // Fixture shape: the six planted rows overflow budget 5 for every rung
  // with threshold <= 25.7, the two top rungs share one store suffix, and
  // the class below them is split off by the q = 60 and q = 100 rows.
  CHECK(rep.first_alive_f == 8);
  CHECK(rep.f_lanes[8].stored_final == 5);
  CHECK(rep.f_lanes[9].stored_final == 2);
  CHECK(rep.f_lanes[10].stored_final == 2);
  CHECK(rep.heavy_candidates == 2);  // store-suffix dedup collapsed rungs 9 and 10
  CHECK(rep.eta_violated);
  CHECK(rep.winner.heavy);

  Vector e0 = Vector::Zero(8);
  e0(0) = 1.0;
  CHECK(correlation(rep.estimate, e0) > 0.99);

  check_against_dense_reference(m, 777, opt, 4242);
}

TEST_CASE("heavy/light matches a dense per-lane reference bitwise (heavy off)") {
  const Matrix m = differential_fixture();
  HeavyLightOptions opt = differential_options();
  opt.heavy_enabled = false;

  MatrixSource src(m);
  RowStream stream(src, 777);
  const HeavyLightReport rep = run_heavy_light(stream, opt, 4242);
  CHECK(rep.first_alive_f == 0);
  CHECK(rep.heavy_candidates == 0);
  CHECK(rep.class_count_final == 1);
  CHECK_FALSE(rep.winner.heavy);

  check_against_dense_reference(m, 777, opt, 4242);
}
