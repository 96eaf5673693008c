#pragma once

// Experiment configuration: strict JSON parsing (unknown keys rejected at
// every level), constant overrides, and a stable FNV-1a hash of the canonical
// serialization so every emitted record can name the exact config it ran
// under.

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <iomanip>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "eigstream/instances.hpp"
#include "eigstream/types.hpp"

namespace eigstream {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Algorithm { heavy_light, block_power, oja, subsample_oja };

inline const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::heavy_light: return "heavy_light";
    case Algorithm::block_power: return "block_power";
    case Algorithm::oja: return "oja";
    case Algorithm::subsample_oja: return "subsample_oja";
  }
  throw std::logic_error("algorithm_name: bad enum");
}

inline Algorithm algorithm_from_string(const std::string& s) {
  for (Algorithm a : {Algorithm::heavy_light, Algorithm::block_power, Algorithm::oja,
                      Algorithm::subsample_oja}) {
    if (s == algorithm_name(a)) return a;
  }
  throw ConfigError("unknown algorithm: \"" + s + "\"");
}

// FNV-1a 64-bit over bytes; stable, documented, dependency-free.
inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string config_hash_hex(const nlohmann::json& canonical) {
  // nlohmann::json::dump() sorts object keys, so the hash is format-canonical.
  std::ostringstream os;
  os << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0')
     << fnv1a64(canonical.dump());
  return os.str();
}

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const char* where,
                                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) {
    throw ConfigError(std::string(where) + ": expected a JSON object");
  }
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw ConfigError(std::string(where) + ": unknown key \"" + item.key() + "\"");
    }
  }
}

template <typename T>
std::optional<T> opt_get(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) return std::nullopt;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config key \"") + key + "\" has the wrong type");
  }
}

template <typename T>
T require_get(const nlohmann::json& obj, const char* key, const char* where) {
  auto v = opt_get<T>(obj, key);
  if (!v) throw ConfigError(std::string(where) + ": missing required key \"" + key + "\"");
  return *v;
}

inline void require_positive(const std::optional<double>& v, const char* key) {
  if (v && !(*v > 0.0)) {
    throw ConfigError(std::string("config key \"") + key + "\" must be positive");
  }
}

}  // namespace detail

// Algorithm-constant overrides; absent fields keep library defaults.
struct ConstantOverrides {
  std::optional<double> C1, C2, C_sample, polylog_exponent, eps_jl;
  std::optional<double> eps;              // sampling / block power accuracy
  std::optional<double> opnorm_sq_guess;  // sampling guess (subsample_oja)
  std::optional<double> R_hint;
  std::optional<double> eta;  // block power norm-equalization bound
  std::optional<double> growth_threshold_log;
  std::optional<bool> heavy_enabled;
  std::optional<Index> budget;
  std::optional<Index> sketch_rows;
  std::vector<double> eta_grid;    // empty = default
  std::vector<double> alpha_grid;  // empty = default
  std::vector<Index> rho_grid;     // empty = default

  static ConstantOverrides parse(const nlohmann::json& j) {
    detail::reject_unknown_keys(
        j, "overrides",
        {"C1", "C2", "C_sample", "polylog_exponent", "eps_jl", "eps", "opnorm_sq_guess",
         "R_hint", "eta", "growth_threshold_log", "heavy_enabled", "budget", "sketch_rows",
         "eta_grid", "alpha_grid", "rho_grid"});
    ConstantOverrides o;
    o.C1 = detail::opt_get<double>(j, "C1");
    o.C2 = detail::opt_get<double>(j, "C2");
    o.C_sample = detail::opt_get<double>(j, "C_sample");
    o.polylog_exponent = detail::opt_get<double>(j, "polylog_exponent");
    o.eps_jl = detail::opt_get<double>(j, "eps_jl");
    o.eps = detail::opt_get<double>(j, "eps");
    o.opnorm_sq_guess = detail::opt_get<double>(j, "opnorm_sq_guess");
    o.R_hint = detail::opt_get<double>(j, "R_hint");
    o.eta = detail::opt_get<double>(j, "eta");
    o.growth_threshold_log = detail::opt_get<double>(j, "growth_threshold_log");
    o.heavy_enabled = detail::opt_get<bool>(j, "heavy_enabled");
    o.budget = detail::opt_get<Index>(j, "budget");
    o.sketch_rows = detail::opt_get<Index>(j, "sketch_rows");
    if (auto g = detail::opt_get<std::vector<double>>(j, "eta_grid")) o.eta_grid = *g;
    if (auto g = detail::opt_get<std::vector<double>>(j, "alpha_grid")) o.alpha_grid = *g;
    if (auto g = detail::opt_get<std::vector<Index>>(j, "rho_grid")) o.rho_grid = *g;

    for (const char* k : {"C1", "C2", "C_sample", "polylog_exponent", "eps_jl", "eps",
                          "opnorm_sq_guess", "R_hint", "eta"}) {
      detail::require_positive(detail::opt_get<double>(j, k), k);
    }
    if (o.budget && *o.budget < 1) throw ConfigError("config key \"budget\" must be >= 1");
    if (o.sketch_rows && *o.sketch_rows < 1) {
      throw ConfigError("config key \"sketch_rows\" must be >= 1");
    }
    for (double e : o.eta_grid) {
      if (!(e > 0.0)) throw ConfigError("eta_grid entries must be positive");
    }
    for (double a : o.alpha_grid) {
      if (!(a > 0.0)) throw ConfigError("alpha_grid entries must be positive");
    }
    for (Index r : o.rho_grid) {
      if (r < 1) throw ConfigError("rho_grid entries must be >= 1");
    }
    return o;
  }
};

// Either a file path or a generator spec (family + params).
struct InstanceSpec {
  std::optional<std::string> path;
  std::optional<Family> family;
  nlohmann::json params;  // family-specific, validated at generation time

  static InstanceSpec parse(const nlohmann::json& j) {
    detail::reject_unknown_keys(j, "instance", {"path", "family", "params"});
    InstanceSpec s;
    s.path = detail::opt_get<std::string>(j, "path");
    if (auto fam = detail::opt_get<std::string>(j, "family")) {
      s.family = family_from_string(*fam);
    }
    s.params = j.value("params", nlohmann::json::object());
    if (s.path.has_value() == s.family.has_value()) {
      throw ConfigError("instance: exactly one of \"path\" or \"family\" is required");
    }
    if (s.path && !s.params.empty()) {
      throw ConfigError("instance: \"params\" only applies to generated instances");
    }
    return s;
  }
};

struct SweepSpec {
  std::vector<double> R_values;
  std::vector<Algorithm> algorithms;

  static SweepSpec parse(const nlohmann::json& j) {
    detail::reject_unknown_keys(j, "sweep", {"R_values", "algorithms"});
    SweepSpec s;
    s.R_values = detail::require_get<std::vector<double>>(j, "R_values", "sweep");
    for (const auto& name :
         detail::require_get<std::vector<std::string>>(j, "algorithms", "sweep")) {
      s.algorithms.push_back(algorithm_from_string(name));
    }
    if (s.R_values.empty() || s.algorithms.empty()) {
      throw ConfigError("sweep: R_values and algorithms must be nonempty");
    }
    for (double r : s.R_values) {
      if (!(r > 1.0)) throw ConfigError("sweep: R values must exceed 1");
    }
    return s;
  }
};

struct ExperimentConfig {
  InstanceSpec instance;
  Algorithm algorithm = Algorithm::heavy_light;
  std::vector<std::uint64_t> seeds;
  std::optional<std::string> output;
  ConstantOverrides overrides;
  std::optional<SweepSpec> sweep;
  nlohmann::json raw;    // canonical source of truth for hashing
  std::string hash;      // fnv1a64 of raw.dump()

  static ExperimentConfig parse(const nlohmann::json& j) {
    detail::reject_unknown_keys(
        j, "config", {"instance", "algorithm", "seeds", "output", "overrides", "sweep"});
    ExperimentConfig c;
    c.raw = j;
    c.hash = config_hash_hex(j);
    c.instance = InstanceSpec::parse(
        detail::require_get<nlohmann::json>(j, "instance", "config"));
    if (auto algo = detail::opt_get<std::string>(j, "algorithm")) {
      c.algorithm = algorithm_from_string(*algo);
    }
    c.seeds = detail::require_get<std::vector<std::uint64_t>>(j, "seeds", "config");
    if (c.seeds.empty()) throw ConfigError("config: seeds must be nonempty");
    c.output = detail::opt_get<std::string>(j, "output");
    if (j.contains("overrides")) c.overrides = ConstantOverrides::parse(j.at("overrides"));
    if (j.contains("sweep")) c.sweep = SweepSpec::parse(j.at("sweep"));
    return c;
  }
};

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("malformed JSON in " + path + ": " + e.what());
  }
}

inline ExperimentConfig load_config_file(const std::string& path) {
  return ExperimentConfig::parse(load_json_file(path));
}

// Generator dispatch with per-family strict parameter validation.
inline GeneratedInstance generate_instance(Family family, const nlohmann::json& params,
                                           std::uint64_t seed) {
  using detail::opt_get;
  using detail::reject_unknown_keys;
  using detail::require_get;
  try {
    switch (family) {
      case Family::planted_gap: {
        reject_unknown_keys(params, "planted_gap params", {"d", "n", "R", "normalize_rows"});
        return gen_planted_gap(require_get<Index>(params, "d", "planted_gap"),
                               require_get<Index>(params, "n", "planted_gap"),
                               require_get<double>(params, "R", "planted_gap"), seed,
                               opt_get<bool>(params, "normalize_rows").value_or(false));
      }
      case Family::oja_hard: {
        reject_unknown_keys(params, "oja_hard params", {"d", "R", "eps_gap", "M"});
        return gen_oja_hard(require_get<Index>(params, "d", "oja_hard"),
                            require_get<double>(params, "R", "oja_hard"),
                            require_get<double>(params, "eps_gap", "oja_hard"),
                            require_get<Index>(params, "M", "oja_hard"));
      }
      case Family::lower_bound: {
        reject_unknown_keys(params, "lower_bound params", {"d", "h", "k", "gamma"});
        return gen_lower_bound(require_get<Index>(params, "d", "lower_bound"),
                               require_get<Index>(params, "h", "lower_bound"),
                               require_get<Index>(params, "k", "lower_bound"),
                               require_get<double>(params, "gamma", "lower_bound"), seed);
      }
      case Family::heavy_mixed: {
        reject_unknown_keys(params, "heavy_mixed params", {"d", "n_bulk"});
        return gen_heavy_mixed(require_get<Index>(params, "d", "heavy_mixed"),
                               require_get<Index>(params, "n_bulk", "heavy_mixed"), seed);
      }
      case Family::heavy_bulk: {
        reject_unknown_keys(params, "heavy_bulk params", {"d", "h", "n_bulk"});
        return gen_heavy_bulk(require_get<Index>(params, "d", "heavy_bulk"),
                              require_get<Index>(params, "h", "heavy_bulk"),
                              require_get<Index>(params, "n_bulk", "heavy_bulk"), seed);
      }
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("instance params: ") + e.what());
  }
  throw std::logic_error("generate_instance: bad family enum");
}

}  // namespace eigstream
