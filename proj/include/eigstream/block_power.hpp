#pragma once

// Block power method over a randomly ordered stream with bounded row-norm
// ratio eta.  The stream is carved into t groups of fixed window W = 2np; in
// group j the first y_j rows (y_j ~ Binomial(n, p), drawn up front) form block
// B_j, and at each group boundary the iterate advances z <- B_j^T B_j z,
// normalized.  One lane per stable-rank guess rho; lanes share the single
// pass, and a Gaussian sketch picks the winner among surviving lanes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "eigstream/rng.hpp"
#include "eigstream/sketch.hpp"
#include "eigstream/stream.hpp"
#include "eigstream/types.hpp"

namespace eigstream {

struct BlockPowerParams {
  Index d = 0;                  // ambient dimension
  Index n = 0;                  // stream length the plans are built for
  double C1 = 3.0;              // iteration constant: t = ceil(C1 * ln d)
  double C2 = 8.0;              // block sampling constant
  double eta = 1.0;             // assumed max/min squared-row-norm ratio
  std::optional<double> eps;    // accuracy; absent -> per-lane max-accuracy value
  std::vector<Index> rho_grid;  // empty -> {1, 2, 4, ..., <= d}

  static std::vector<Index> default_rho_grid(Index d) {
    std::vector<Index> g;
    for (Index r = 1; r <= d; r *= 2) g.push_back(r);
    return g;
  }

  void validate() const {
    if (d < 2) throw std::invalid_argument("BlockPowerParams: d must be at least 2");
    if (n < 1) throw std::invalid_argument("BlockPowerParams: n must be positive");
    if (!(C1 > 0.0) || !(C2 > 0.0)) {
      throw std::invalid_argument("BlockPowerParams: C1 and C2 must be positive");
    }
    if (!(eta >= 1.0)) throw std::invalid_argument("BlockPowerParams: eta must be >= 1");
    if (eps && !(*eps > 0.0)) throw std::invalid_argument("BlockPowerParams: eps must be > 0");
  }

  Index t() const {
    return std::max<Index>(1, static_cast<Index>(
                                  std::ceil(C1 * std::log(static_cast<double>(d)))));
  }

  // Accuracy for one rho lane: the explicit eps if provided, otherwise the
  // most accurate value that keeps the per-row probability at its feasibility
  // ceiling p = 1/(5t).
  double lane_eps(Index rho) const {
    if (eps) return *eps;
    const double log_d = std::log(static_cast<double>(d));
    return std::sqrt(5.0 * static_cast<double>(t()) * C2 * eta *
                     static_cast<double>(rho) * log_d / static_cast<double>(n));
  }

  // Per-row block membership probability p = C2 * eta * rho * ln d / (n eps^2).
  double lane_p(Index rho) const {
    const double e = lane_eps(rho);
    const double log_d = std::log(static_cast<double>(d));
    return C2 * eta * static_cast<double>(rho) * log_d /
           (static_cast<double>(n) * e * e);
  }

  // Accuracy reported on the alpha scale via eps = alpha^2 / ln^2 d.
  double lane_alpha(Index rho) const {
    return std::sqrt(lane_eps(rho)) * std::log(static_cast<double>(d));
  }
};

// Up-front plan for one lane: Binomial block lengths inside fixed windows.
struct BlockPlan {
  Index t = 0;       // number of groups
  Index window = 0;  // group width W = max(1, floor(2 n p))
  double p = 0.0;    // per-row probability used for the draws
  std::vector<Index> block_len;
  bool aborted = false;           // some y_j exceeded the window -> lane invalid
  bool infeasible = false;        // p > 1/(5t) or t*W > n -> lane invalid
  bool degenerate_empty = false;  // every block empty (e.g. p = 0)
};

inline BlockPlan plan_blocks(Index n, Index t, double p, std::uint64_t plan_key) {
  if (n < 1 || t < 1) throw std::invalid_argument("plan_blocks: n and t must be positive");
  if (!(p >= 0.0) || std::isnan(p)) throw std::invalid_argument("plan_blocks: p must be >= 0");
  BlockPlan plan;
  plan.t = t;
  plan.p = p;
  const double p_draw = std::min(p, 1.0);
  plan.window = std::max<Index>(
      1, static_cast<Index>(std::floor(2.0 * static_cast<double>(n) * p_draw)));
  plan.infeasible = (p > 1.0 / (5.0 * static_cast<double>(t))) ||
                    (static_cast<double>(t) * static_cast<double>(plan.window) >
                     static_cast<double>(n));
  Rng rng(plan_key);
  plan.block_len.resize(static_cast<std::size_t>(t));
  bool all_empty = true;
  for (Index j = 0; j < t; ++j) {
    const Index y = rng.binomial(n, p_draw);
    plan.block_len[static_cast<std::size_t>(j)] = y;
    if (y > plan.window) plan.aborted = true;
    if (y > 0) all_empty = false;
  }
  plan.degenerate_empty = all_empty;
  return plan;
}

// One lane's state machine.  feed() consumes rows in order; positions are
// implicit and contiguous.  A group closes when its full window has been
// consumed; a stream that ends mid-group leaves the iterate at the last group
// boundary and marks the lane truncated.
class BlockLane {
 public:
  BlockLane(const BlockPlan& plan, Vector z0) : plan_(&plan), z_(std::move(z0)) {
    const double norm = z_.norm();
    if (!(norm > 0.0)) throw std::invalid_argument("BlockLane: z0 must be nonzero");
    z_ /= norm;
    acc_ = Vector::Zero(z_.size());
  }

  // True while the lane can still use rows (plan valid and groups remain).
  bool wants_more() const {
    return !plan_->aborted && !closed_ && !finished_ && pos_ < total_span();
  }

  void feed(const Vector& row) {
    if (closed_) throw std::logic_error("BlockLane: feed after finish");
    if (!wants_more()) {
      return;  // plan invalid or all t groups already consumed; ignore the row
    }
    const Index g = pos_ / plan_->window;
    const Index offset = pos_ % plan_->window;
    if (offset < plan_->block_len[static_cast<std::size_t>(g)]) {
      acc_.noalias() += row.dot(z_) * row;
    }
    ++pos_;
    if (pos_ % plan_->window == 0) close_group();
  }

  // Ends the pass: discards any partially windowed group.
  void finish() {
    if (closed_) return;
    closed_ = true;
    if (!finished_) {
      finished_ = true;
      truncated_ = boundaries_ < plan_->t;
    }
    acc_.setZero();
  }

  const Vector& z() const { return z_; }
  Index boundaries_applied() const { return boundaries_; }
  bool degenerate_step() const { return degenerate_step_; }
  bool truncated() const { return truncated_; }
  bool finished() const { return finished_; }
  const BlockPlan& plan() const { return *plan_; }

 private:
  Index total_span() const { return plan_->t * plan_->window; }

  void close_group() {
    const double norm = acc_.norm();
    if (norm > 0.0) {
      z_ = acc_ / norm;
    } else {
      degenerate_step_ = true;  // empty or orthogonal block: identity step
    }
    acc_.setZero();
    ++boundaries_;
    if (boundaries_ == plan_->t) finished_ = true;
  }

  const BlockPlan* plan_;
  Vector z_;
  Vector acc_;
  Index pos_ = 0;
  Index boundaries_ = 0;
  bool degenerate_step_ = false;
  bool truncated_ = false;
  bool finished_ = false;  // all t groups consumed
  bool closed_ = false;    // finish() called: the pass has ended
};

struct BlockLaneResult {
  Index rho = 0;
  double eps_used = 0.0;
  double alpha = 0.0;
  double p = 0.0;
  bool infeasible = false;
  bool aborted = false;
  bool truncated = false;
  bool degenerate_step = false;
  bool degenerate_empty = false;
  Index boundaries = 0;
  Vector z;
  double sketch_score = -1.0;  // only scored for valid lanes

  // A lane competes in the final argmax unless its plan was invalid.
  bool valid() const { return !infeasible && !aborted; }
};

struct BlockPowerResult {
  std::vector<BlockLaneResult> lanes;
  Index winner = -1;  // index into lanes, -1 when no lane survived
  bool eta_violated = false;
  double observed_eta = 1.0;

  const Vector& winning_z() const {
    if (winner < 0) throw NoCandidateError("block power: every lane aborted or infeasible");
    return lanes[static_cast<std::size_t>(winner)].z;
  }
};

// Full single-pass run: lanes for every rho in the grid, a sketch over all
// rows, winner by sketch score (ties to the lowest lane index).
inline BlockPowerResult run_bounded_norm(RowStream& stream, const BlockPowerParams& params,
                                         GaussianSketch& sketch, std::uint64_t seed) {
  params.validate();
  if (stream.d() != params.d) {
    throw std::invalid_argument("run_bounded_norm: stream dimension differs from params.d");
  }
  if (stream.n() != params.n) {
    throw std::invalid_argument("run_bounded_norm: stream length differs from params.n");
  }
  std::vector<Index> grid =
      params.rho_grid.empty() ? BlockPowerParams::default_rho_grid(params.d) : params.rho_grid;
  if (grid.empty()) throw std::invalid_argument("run_bounded_norm: empty rho grid");

  const Index t = params.t();
  std::vector<BlockPlan> plans;
  std::vector<BlockLane> lanes;
  plans.reserve(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    plans.push_back(plan_blocks(params.n, t, params.lane_p(grid[k]),
                                derive_key(seed, tags::kBlockPlan,
                                           static_cast<std::uint64_t>(k))));
  }
  lanes.reserve(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    Rng z0_rng = keyed_rng(seed, tags::kInitVector, static_cast<std::uint64_t>(k));
    lanes.emplace_back(plans[k], z0_rng.gaussian_vector(params.d));
  }

  while (const Vector* row = stream.next()) {
    sketch.absorb(stream.position(), *row);
    for (auto& lane : lanes) {
      if (lane.wants_more()) lane.feed(*row);
    }
  }
  for (auto& lane : lanes) lane.finish();

  BlockPowerResult result;
  const StreamStats& stats = stream.stats();
  if (stats.rows_seen > 0 && stats.min_row_norm_sq > 0.0) {
    result.observed_eta = stats.max_row_norm_sq / stats.min_row_norm_sq;
  } else if (stats.rows_seen > 0) {
    result.observed_eta = std::numeric_limits<double>::infinity();
  }
  result.eta_violated = result.observed_eta > params.eta * (1.0 + 1e-12);

  result.lanes.reserve(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    BlockLaneResult lr;
    lr.rho = grid[k];
    lr.eps_used = params.lane_eps(grid[k]);
    lr.alpha = params.lane_alpha(grid[k]);
    lr.p = plans[k].p;
    lr.infeasible = plans[k].infeasible;
    lr.aborted = plans[k].aborted;
    lr.degenerate_empty = plans[k].degenerate_empty;
    lr.truncated = lanes[k].truncated();
    lr.degenerate_step = lanes[k].degenerate_step();
    lr.boundaries = lanes[k].boundaries_applied();
    lr.z = lanes[k].z();
    if (lr.valid()) {
      lr.sketch_score = sketch.score(lr.z);
      if (result.winner < 0 ||
          lr.sketch_score > result.lanes[static_cast<std::size_t>(result.winner)].sketch_score) {
        result.winner = static_cast<Index>(k);
      }
    }
    result.lanes.push_back(std::move(lr));
  }
  return result;
}

}  // namespace eigstream
