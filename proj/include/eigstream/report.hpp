#pragma once

// Result persistence.  RunReport JSON ("eigstream-run-v1") carries every
// scientific output; timestamps, hostnames, and wall times live in a
// quarantined "metadata" block so two runs with the same config and seed
// diff clean on scientific content.  Sweep output is a versioned CSV of
// aggregates plus a JSON with one record per (instance, algorithm, seed)
// cell, each carrying the config hash.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "eigstream/block_power.hpp"
#include "eigstream/config.hpp"
#include "eigstream/heavy_light.hpp"
#include "eigstream/io.hpp"
#include "eigstream/oja.hpp"
#include "eigstream/types.hpp"

#ifdef __unix__
#include <unistd.h>
#endif

namespace eigstream {

inline constexpr const char* kRunSchema = "eigstream-run-v1";
inline constexpr const char* kSweepSchema = "eigstream-sweep-v1";
inline constexpr const char* kSweepCsvHeader =
    "csv_version,family,R,algorithm,seeds,mean_correlation,floor_kind,floor_value,"
    "success_rate";
inline constexpr int kSweepCsvVersion = 1;

inline nlohmann::json vector_to_json(const Vector& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline nlohmann::json run_metadata_json(double wall_time_s) {
  nlohmann::json m;
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  m["timestamp"] = buf;
  char host[256] = "unknown";
#ifdef __unix__
  if (gethostname(host, sizeof(host) - 1) != 0) std::snprintf(host, sizeof(host), "unknown");
#endif
  m["hostname"] = host;
  m["wall_time_s"] = wall_time_s;
  return m;
}

// ------------------------------------------------------- result sub-blocks

inline nlohmann::json lane_id_json(const LaneId& id) {
  nlohmann::json j;
  j["f_idx"] = id.f_idx;
  j["branch"] = id.heavy ? "heavy" : "light";
  j["alpha_idx"] = id.alpha_idx;
  j["ell_idx"] = id.ell_idx;
  j["rho_idx"] = id.rho_idx;
  return j;
}

inline nlohmann::json heavy_light_result_json(const HeavyLightReport& r) {
  nlohmann::json j;
  j["estimate"] = vector_to_json(r.estimate);
  j["winner"] = lane_id_json(r.winner);
  j["winner_score"] = r.winner_score;
  j["winner_alpha"] = r.winner_alpha;
  j["winner_rho"] = r.winner_rho;
  j["winner_boundaries"] = r.winner_boundaries;
  j["winner_truncated"] = r.winner_truncated;
  j["winner_degenerate"] = r.winner_degenerate;
  j["candidate_count"] = r.candidate_count;
  j["heavy_candidates"] = r.heavy_candidates;
  j["light_candidates"] = r.light_candidates;
  j["class_count_final"] = r.class_count_final;
  j["first_alive_f"] = r.first_alive_f;
  j["rows_stored_peak"] = r.rows_stored_peak;
  j["store_final_size"] = r.store_final_size;
  j["budget"] = r.budget;
  j["threshold_denom"] = r.threshold_denom;
  j["eta_violated"] = r.eta_violated;
  j["observed_eta"] = r.observed_eta;
  j["sketch_rows"] = r.sketch_rows;
  j["sketch_eps"] = r.sketch_eps;
  j["alphas"] = r.alphas;
  j["beta"] = r.beta;
  j["frob_sq_stream"] = r.frob_sq_stream;
  nlohmann::json lanes = nlohmann::json::array();
  for (const auto& f : r.f_lanes) {
    lanes.push_back({{"frob_guess", f.frob_guess},
                     {"threshold_sq", f.threshold_sq},
                     {"overflowed", f.overflowed},
                     {"heavy_seen", f.heavy_seen},
                     {"stored_final", f.stored_final}});
  }
  j["f_lanes"] = std::move(lanes);
  if (r.correlation_vs_truth) j["correlation_vs_truth"] = *r.correlation_vs_truth;
  return j;
}

inline nlohmann::json block_power_result_json(const BlockPowerResult& r) {
  nlohmann::json j;
  j["winner_lane"] = r.winner;
  j["eta_violated"] = r.eta_violated;
  j["observed_eta"] = r.observed_eta;
  nlohmann::json lanes = nlohmann::json::array();
  for (const auto& lane : r.lanes) {
    lanes.push_back({{"rho", lane.rho},
                     {"eps_used", lane.eps_used},
                     {"alpha", lane.alpha},
                     {"p", lane.p},
                     {"infeasible", lane.infeasible},
                     {"aborted", lane.aborted},
                     {"truncated", lane.truncated},
                     {"degenerate_step", lane.degenerate_step},
                     {"degenerate_empty", lane.degenerate_empty},
                     {"boundaries", lane.boundaries},
                     {"sketch_score", lane.sketch_score}});
  }
  j["lanes"] = std::move(lanes);
  if (r.winner >= 0) {
    j["estimate"] = vector_to_json(r.lanes[static_cast<std::size_t>(r.winner)].z);
  }
  return j;
}

inline nlohmann::json oja_result_json(const OjaPassResult& r, Index chosen,
                                      const Vector& estimate) {
  nlohmann::json j;
  j["estimate"] = vector_to_json(estimate);
  j["chosen_lane"] = chosen;  // -1 = largest-norm-row fallback
  j["rows_seen"] = r.rows_seen;
  j["fallback_norm_sq"] = r.fallback_norm_sq;
  j["z0_log_norm"] = r.z0_log_norm;
  nlohmann::json lanes = nlohmann::json::array();
  for (const auto& lane : r.lanes) {
    lanes.push_back({{"eta", lane.eta},
                     {"log_norm", lane.log_norm},
                     {"log_growth", lane.log_growth}});
  }
  j["lanes"] = std::move(lanes);
  return j;
}

inline nlohmann::json subsample_oja_result_json(const SubsampleOjaResult& r) {
  nlohmann::json j;
  j["estimate"] = vector_to_json(r.estimate);
  j["winner_lane"] = r.winner_lane;  // -1 = fallback
  j["winner_score"] = r.winner_score;
  j["survivors"] = r.survivors;
  j["sum_p"] = r.sum_p;
  j["sampler_eps"] = r.sampler_eps;
  nlohmann::json lanes = nlohmann::json::array();
  for (const auto& lane : r.oja.lanes) {
    lanes.push_back({{"eta", lane.eta},
                     {"log_norm", lane.log_norm},
                     {"log_growth", lane.log_growth}});
  }
  j["lanes"] = std::move(lanes);
  return j;
}

// --------------------------------------------------------------- RunReport

inline nlohmann::json make_run_report(const std::string& config_hash, Algorithm algorithm,
                                      std::uint64_t seed, nlohmann::json instance_info,
                                      nlohmann::json result, double wall_time_s) {
  nlohmann::json j;
  j["schema"] = kRunSchema;
  j["config_hash"] = config_hash;
  j["algorithm"] = algorithm_name(algorithm);
  j["seed"] = seed;
  j["instance"] = std::move(instance_info);
  j["result"] = std::move(result);
  j["metadata"] = run_metadata_json(wall_time_s);
  return j;
}

// Scientific content = the report minus the quarantined metadata block.
inline nlohmann::json scientific_content(nlohmann::json report) {
  report.erase("metadata");
  return report;
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

// ------------------------------------------------------------------ sweeps

// Theorem floor applicable to an algorithm at nominal gap R (C = 1 where the
// source leaves the constant unpinned).
inline std::pair<std::string, double> floor_for(Algorithm a, double R, Index d) {
  switch (a) {
    case Algorithm::heavy_light:
      return {"one_minus_8_over_sqrtR", 1.0 - 8.0 / std::sqrt(R)};
    case Algorithm::block_power:
    case Algorithm::subsample_oja:
      // alpha = 1/sqrt(R) when the gap hint equals the nominal gap.
      return {"one_minus_3alpha", 1.0 - 3.0 / std::sqrt(R)};
    case Algorithm::oja:
      return {"one_minus_logd_over_R", 1.0 - std::log(static_cast<double>(d)) / R};
  }
  throw std::logic_error("floor_for: bad enum");
}

struct SweepCell {
  std::string family;
  double R = 0.0;
  Algorithm algorithm = Algorithm::heavy_light;
  std::uint64_t seed = 0;
  double correlation = 0.0;
  nlohmann::json winner;  // algorithm-specific lane identity
  Index rows_stored_peak = 0;
  double wall_time_s = 0.0;
  bool no_candidate = false;
};

struct SweepAggregate {
  std::string family;
  double R = 0.0;
  Algorithm algorithm = Algorithm::heavy_light;
  Index seeds = 0;
  double mean_correlation = 0.0;
  std::string floor_kind;
  double floor_value = 0.0;
  double success_rate = 0.0;  // fraction of seeds with correlation >= floor
};

inline void write_sweep_csv(const std::string& path,
                            const std::vector<SweepAggregate>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << kSweepCsvHeader << "\n";
  out.precision(17);
  for (const auto& r : rows) {
    out << kSweepCsvVersion << ',' << r.family << ',' << r.R << ','
        << algorithm_name(r.algorithm) << ',' << r.seeds << ',' << r.mean_correlation
        << ',' << r.floor_kind << ',' << r.floor_value << ',' << r.success_rate << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

inline nlohmann::json sweep_json(const std::string& config_hash,
                                 const std::vector<SweepCell>& cells,
                                 const std::vector<SweepAggregate>& aggregates,
                                 double wall_time_s) {
  nlohmann::json j;
  j["schema"] = kSweepSchema;
  j["config_hash"] = config_hash;
  nlohmann::json cj = nlohmann::json::array();
  for (const auto& c : cells) {
    cj.push_back({{"config_hash", config_hash},
                  {"family", c.family},
                  {"R", c.R},
                  {"algorithm", algorithm_name(c.algorithm)},
                  {"seed", c.seed},
                  {"correlation_vs_truth", c.correlation},
                  {"winner", c.winner},
                  {"rows_stored_peak", c.rows_stored_peak},
                  {"wall_time_s", c.wall_time_s},
                  {"no_candidate", c.no_candidate}});
  }
  j["cells"] = std::move(cj);
  nlohmann::json aj = nlohmann::json::array();
  for (const auto& a : aggregates) {
    aj.push_back({{"family", a.family},
                  {"R", a.R},
                  {"algorithm", algorithm_name(a.algorithm)},
                  {"seeds", a.seeds},
                  {"mean_correlation", a.mean_correlation},
                  {"floor_kind", a.floor_kind},
                  {"floor_value", a.floor_value},
                  {"success_rate", a.success_rate}});
  }
  j["aggregates"] = std::move(aj);
  j["metadata"] = run_metadata_json(wall_time_s);
  return j;
}

}  // namespace eigstream
