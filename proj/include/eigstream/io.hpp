#pragma once

// Matrix file I/O: a compact binary row-major format ("EIGS1"), a plain CSV
// format, and a JSON "truth" sidecar carrying the exact spectral summary of a
// generated instance.  Readers validate eagerly (dimensions, row lengths,
// finiteness) so downstream streaming code never sees malformed data.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "eigstream/stream.hpp"
#include "eigstream/types.hpp"

namespace eigstream {

inline constexpr char kEigsMagic[5] = {'E', 'I', 'G', 'S', '1'};
inline constexpr std::size_t kEigsHeaderBytes = 5 + 8 + 8;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void put_u64_le(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64_le(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw IoError("truncated header: expected 8-byte little-endian integer");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void put_f64_le(std::ostream& os, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, 8);
  put_u64_le(os, bits);
}

inline double bits_to_f64(std::uint64_t bits) {
  double x;
  std::memcpy(&x, &bits, 8);
  return x;
}

inline void check_finite_row(const Vector& row, Index i) {
  if (!row.allFinite()) {
    throw IoError("row " + std::to_string(i) + " contains a non-finite value");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Writers
// ---------------------------------------------------------------------------

inline void write_eigs1(const std::string& path, const Matrix& rows) {
  for (Index i = 0; i < rows.rows(); ++i) detail::check_finite_row(rows.row(i).transpose(), i);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.write(kEigsMagic, 5);
  detail::put_u64_le(os, static_cast<std::uint64_t>(rows.rows()));
  detail::put_u64_le(os, static_cast<std::uint64_t>(rows.cols()));
  std::vector<unsigned char> buf(static_cast<std::size_t>(rows.cols()) * 8);
  for (Index i = 0; i < rows.rows(); ++i) {
    for (Index j = 0; j < rows.cols(); ++j) {
      std::uint64_t bits;
      const double x = rows(i, j);
      std::memcpy(&bits, &x, 8);
      for (int k = 0; k < 8; ++k) {
        buf[static_cast<std::size_t>(j) * 8 + k] =
            static_cast<unsigned char>((bits >> (8 * k)) & 0xFF);
      }
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
  if (!os) throw IoError("write failed: " + path);
}

inline void write_csv(const std::string& path, const Matrix& rows) {
  for (Index i = 0; i < rows.rows(); ++i) detail::check_finite_row(rows.row(i).transpose(), i);
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << rows.rows() << "," << rows.cols() << "\n";
  std::ostringstream line;
  line.precision(17);
  for (Index i = 0; i < rows.rows(); ++i) {
    line.str("");
    for (Index j = 0; j < rows.cols(); ++j) {
      if (j) line << ",";
      line << rows(i, j);
    }
    os << line.str() << "\n";
  }
  if (!os) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Sources
// ---------------------------------------------------------------------------

// Lazily seeks into an EIGS1 file; only one row is resident at a time.
class BinaryFileSource final : public RowSource {
 public:
  explicit BinaryFileSource(const std::string& path) : path_(path), is_(path, std::ios::binary) {
    if (!is_) throw IoError("cannot open: " + path);
    char magic[5];
    is_.read(magic, 5);
    if (!is_ || std::memcmp(magic, kEigsMagic, 5) != 0) {
      throw IoError("bad magic: not an EIGS1 file: " + path);
    }
    const std::uint64_t n = detail::get_u64_le(is_);
    const std::uint64_t d = detail::get_u64_le(is_);
    if (n == 0 || d == 0) throw IoError("empty matrix (n=0 or d=0): " + path);
    const std::uint64_t max_index = std::numeric_limits<std::uint64_t>::max() / 8 / d;
    if (n > max_index) throw IoError("dimensions overflow: " + path);
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    const std::uint64_t expect = kEigsHeaderBytes + n * d * 8;
    if (ec || size != expect) {
      throw IoError("file size mismatch: expected " + std::to_string(expect) + " bytes: " + path);
    }
    n_ = static_cast<Index>(n);
    d_ = static_cast<Index>(d);
    // Eager finiteness scan so malformed payloads fail at open time.
    Vector probe(d_);
    for (Index i = 0; i < n_; ++i) {
      load_row(i, probe);
      detail::check_finite_row(probe, i);
    }
  }

  Index rows() const override { return n_; }
  Index cols() const override { return d_; }

  void load_row(Index i, Vector& out) const override {
    is_.clear();
    is_.seekg(static_cast<std::streamoff>(kEigsHeaderBytes +
                                          static_cast<std::uint64_t>(i) *
                                              static_cast<std::uint64_t>(d_) * 8));
    raw_.resize(static_cast<std::size_t>(d_) * 8);
    is_.read(reinterpret_cast<char*>(raw_.data()), static_cast<std::streamsize>(raw_.size()));
    if (!is_) throw IoError("read failed at row " + std::to_string(i) + ": " + path_);
    out.resize(d_);
    for (Index j = 0; j < d_; ++j) {
      std::uint64_t bits = 0;
      for (int k = 0; k < 8; ++k) {
        bits |= static_cast<std::uint64_t>(raw_[static_cast<std::size_t>(j) * 8 + k]) << (8 * k);
      }
      out[j] = detail::bits_to_f64(bits);
    }
  }

 private:
  std::string path_;
  mutable std::ifstream is_;
  mutable std::vector<unsigned char> raw_;
  Index n_ = 0;
  Index d_ = 0;
};

namespace detail {

inline Matrix read_csv_matrix(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(is, line)) throw IoError("empty file: " + path);
  long long n = -1, d = -1;
  {
    std::istringstream hs(line);
    char comma = 0;
    if (!(hs >> n >> comma >> d) || comma != ',' || n <= 0 || d <= 0) {
      throw IoError("bad CSV header (expected \"n,d\"): " + path);
    }
    std::string rest;
    if (hs >> rest) throw IoError("bad CSV header (trailing content): " + path);
  }
  Matrix m(n, d);
  for (long long i = 0; i < n; ++i) {
    if (!std::getline(is, line)) {
      throw IoError("row " + std::to_string(i) + ": unexpected end of file: " + path);
    }
    std::istringstream ls(line);
    std::string cell;
    long long j = 0;
    while (std::getline(ls, cell, ',')) {
      if (j >= d) break;
      try {
        std::size_t used = 0;
        const double x = std::stod(cell, &used);
        while (used < cell.size() &&
               (cell[used] == ' ' || cell[used] == '\t' || cell[used] == '\r')) {
          ++used;
        }
        if (used != cell.size()) throw std::invalid_argument("trailing junk");
        m(i, j) = x;
      } catch (const std::exception&) {
        throw IoError("row " + std::to_string(i) + ": cannot parse value \"" + cell + "\"");
      }
      ++j;
    }
    if (j != d || std::getline(ls, cell, ',')) {
      throw IoError("row " + std::to_string(i) + ": expected " + std::to_string(d) + " values");
    }
    check_finite_row(m.row(i).transpose(), i);
  }
  return m;
}

}  // namespace detail

// Auto-detects EIGS1 vs CSV by the magic bytes.
inline std::unique_ptr<RowSource> open_source(const std::string& path) {
  {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IoError("cannot open: " + path);
    char magic[5] = {};
    probe.read(magic, 5);
    if (probe.gcount() == 5 && std::memcmp(magic, kEigsMagic, 5) == 0) {
      return std::make_unique<BinaryFileSource>(path);
    }
  }
  return std::make_unique<MatrixSource>(detail::read_csv_matrix(path));
}

inline RowStream open_stream(const std::string& path,
                             std::optional<std::uint64_t> order_seed = std::nullopt) {
  return RowStream(open_source(path), order_seed);
}

// ---------------------------------------------------------------------------
// Truth sidecar: exact spectral facts about a generated instance, stored next
// to the matrix file so experiments can score candidates against ground truth.
// ---------------------------------------------------------------------------

inline constexpr const char* kTruthSchema = "eigstream-truth-v1";

struct InstanceTruth {
  std::string family;
  nlohmann::json params;  // generator parameters, family-specific
  std::uint64_t seed = 0;
  Index n = 0;
  Index d = 0;
  SpectralSummary spectrum;
  nlohmann::json extras;  // e.g. planted coordinate index
};

inline std::string truth_path_for(const std::string& matrix_path) {
  return matrix_path + ".truth.json";
}

inline void write_truth(const std::string& path, const InstanceTruth& t) {
  nlohmann::json j;
  j["schema"] = kTruthSchema;
  j["family"] = t.family;
  j["params"] = t.params.is_null() ? nlohmann::json::object() : t.params;
  j["seed"] = t.seed;
  j["n"] = t.n;
  j["d"] = t.d;
  j["sigma1_sq"] = t.spectrum.sigma1_sq;
  j["sigma2_sq"] = t.spectrum.sigma2_sq;
  j["gap_R"] = t.spectrum.gap_R();
  j["v1"] = std::vector<double>(t.spectrum.v1.data(), t.spectrum.v1.data() + t.spectrum.v1.size());
  j["extras"] = t.extras.is_null() ? nlohmann::json::object() : t.extras;
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << j.dump(2) << "\n";
  if (!os) throw IoError("write failed: " + path);
}

inline InstanceTruth read_truth(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad truth JSON: " + path + ": " + e.what());
  }
  if (!j.contains("schema") || j["schema"] != kTruthSchema) {
    throw IoError("unexpected truth schema in " + path);
  }
  InstanceTruth t;
  t.family = j.at("family").get<std::string>();
  t.params = j.value("params", nlohmann::json::object());
  t.seed = j.at("seed").get<std::uint64_t>();
  t.n = j.at("n").get<Index>();
  t.d = j.at("d").get<Index>();
  t.spectrum.sigma1_sq = j.at("sigma1_sq").get<double>();
  t.spectrum.sigma2_sq = j.at("sigma2_sq").get<double>();
  const auto v = j.at("v1").get<std::vector<double>>();
  t.spectrum.v1 = Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
  t.extras = j.value("extras", nlohmann::json::object());
  return t;
}

}  // namespace eigstream
