#pragma once

// Row streams: the algorithms' only view of the input matrix.  A RowStream
// yields each row exactly once, in file order or in a seeded uniform random
// order, and enforces the single-pass discipline at runtime.

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "eigstream/rng.hpp"
#include "eigstream/types.hpp"

namespace eigstream {

// Abstract random-access source of rows; streams impose ordering on top.
class RowSource {
 public:
  virtual ~RowSource() = default;
  virtual Index rows() const = 0;
  virtual Index cols() const = 0;
  virtual void load_row(Index i, Vector& out) const = 0;
};

class MatrixSource final : public RowSource {
 public:
  explicit MatrixSource(Matrix m) : m_(std::move(m)) {}
  Index rows() const override { return m_.rows(); }
  Index cols() const override { return m_.cols(); }
  void load_row(Index i, Vector& out) const override { out = m_.row(i); }
  const Matrix& matrix() const { return m_; }

 private:
  Matrix m_;
};

struct StreamStats {
  double frob_sq = 0.0;  // sum of squared row norms, compensated summation
  double max_row_norm_sq = 0.0;
  double min_row_norm_sq = std::numeric_limits<double>::infinity();
  Index rows_seen = 0;

 private:
  double kahan_c_ = 0.0;
  friend class RowStream;
  void add_row(double norm_sq) {
    const double y = norm_sq - kahan_c_;
    const double t = frob_sq + y;
    kahan_c_ = (t - frob_sq) - y;
    frob_sq = t;
    if (norm_sq > max_row_norm_sq) max_row_norm_sq = norm_sq;
    if (norm_sq < min_row_norm_sq) min_row_norm_sq = norm_sq;
    ++rows_seen;
  }
};

// Uniform permutation of {0..n-1} by seeded Fisher-Yates.
inline std::vector<Index> shuffled_order(Index n, std::uint64_t seed) {
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng = keyed_rng(seed, tags::kShuffle);
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(
        rng.uniform_below(static_cast<std::uint64_t>(i) + 1));
    std::swap(order[static_cast<std::size_t>(i)],
              order[static_cast<std::size_t>(j)]);
  }
  return order;
}

// One pass over a source.  `next()` returns a pointer to an internal buffer
// (one live row at any time) or nullptr once at end-of-stream; any further
// call is a single-pass contract violation and throws.  There is no rewind.
class RowStream {
 public:
  RowStream(const RowSource& src, std::optional<std::uint64_t> order_seed)
      : src_(&src) {
    init(order_seed);
  }
  RowStream(std::unique_ptr<RowSource> owned,
            std::optional<std::uint64_t> order_seed)
      : owned_(std::move(owned)), src_(owned_.get()) {
    init(order_seed);
  }

  Index n() const { return src_->rows(); }
  Index d() const { return src_->cols(); }

  const Vector* next() {
    if (cursor_ < n()) {
      const Index src_index =
          order_.empty() ? cursor_ : order_[static_cast<std::size_t>(cursor_)];
      src_->load_row(src_index, buf_);
      ++cursor_;
      stats_.add_row(buf_.squaredNorm());
      return &buf_;
    }
    if (!end_signaled_) {
      end_signaled_ = true;
      return nullptr;  // explicit end-of-stream signal
    }
    throw std::logic_error(
        "RowStream: single-pass discipline violated (read after "
        "end-of-stream)");
  }

  // 0-based stream position of the row most recently returned by next().
  Index position() const { return cursor_ - 1; }
  bool exhausted() const { return cursor_ >= n(); }
  const StreamStats& stats() const { return stats_; }

 private:
  void init(std::optional<std::uint64_t> order_seed) {
    if (order_seed) order_ = shuffled_order(src_->rows(), *order_seed);
    buf_.resize(src_->cols());
  }

  std::unique_ptr<RowSource> owned_;
  const RowSource* src_;
  std::vector<Index> order_;
  Index cursor_ = 0;
  bool end_signaled_ = false;
  Vector buf_;
  StreamStats stats_;
};

using RowConsumer = std::function<void(Index /*pos*/, const Vector& /*row*/)>;

// Delivers every row to all consumers before reading the next row; the only
// extra memory is the stream's single row buffer.
inline void tee(RowStream& stream, std::span<const RowConsumer> consumers) {
  if (consumers.empty())
    throw std::invalid_argument("tee: need at least one consumer");
  while (const Vector* row = stream.next()) {
    const Index pos = stream.position();
    for (const auto& consumer : consumers) consumer(pos, *row);
  }
}

inline void tee(RowStream& stream,
                std::initializer_list<RowConsumer> consumers) {
  std::vector<RowConsumer> v(consumers);
  tee(stream, std::span<const RowConsumer>(v));
}

}  // namespace eigstream
