// eigstream CLI: generate benchmark instances, run one streaming algorithm on
// one instance with one seed, sweep a (gap x algorithm x seed) grid into
// plot-ready CSV, and verify estimates against ground-truth sidecars.
//
// Exit codes: 0 success; 2 malformed configuration / invocation / input;
// 3 the selected algorithm ended with no valid candidate.

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "eigstream/block_power.hpp"
#include "eigstream/config.hpp"
#include "eigstream/heavy_light.hpp"
#include "eigstream/io.hpp"
#include "eigstream/linalg.hpp"
#include "eigstream/oja.hpp"
#include "eigstream/report.hpp"
#include "eigstream/stream.hpp"
#include "eigstream/types.hpp"

namespace {

using namespace eigstream;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> algo;
  int threads = 1;
};

std::optional<std::uint64_t> env_seed() {
  const char* raw = std::getenv("EIGSTREAM_SEED");
  if (raw == nullptr) return std::nullopt;
  const std::string s(raw);
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError("EIGSTREAM_SEED is not an unsigned integer: \"" + s + "\"");
  }
  return value;
}

// Precedence: --seed flag, then EIGSTREAM_SEED, then the config list.
std::uint64_t resolve_seed(const ExperimentConfig& cfg, const CommonFlags& flags) {
  if (flags.seed) return *flags.seed;
  if (auto e = env_seed()) return *e;
  return cfg.seeds.front();
}

std::vector<std::uint64_t> resolve_seed_list(const ExperimentConfig& cfg,
                                             const CommonFlags& flags) {
  if (flags.seed) return {*flags.seed};
  if (auto e = env_seed()) return {*e};
  return cfg.seeds;
}

Algorithm resolve_algorithm(const ExperimentConfig& cfg, const CommonFlags& flags) {
  return flags.algo ? algorithm_from_string(*flags.algo) : cfg.algorithm;
}

struct LoadedInstance {
  RowStream stream;
  std::optional<InstanceTruth> truth;
  nlohmann::json info;
};

// Generated instances draw fresh randomness from the run seed; the shuffle
// order is keyed separately so file-backed and generated runs share it.
LoadedInstance load_instance(const InstanceSpec& spec, std::uint64_t seed) {
  const std::uint64_t order_seed = derive_key(seed, tags::kShuffle);
  if (spec.path) {
    auto source = open_source(*spec.path);
    nlohmann::json info;
    info["source"] = "file";
    info["path"] = *spec.path;
    info["n"] = source->rows();
    info["d"] = source->cols();
    std::optional<InstanceTruth> truth;
    const std::string tp = truth_path_for(*spec.path);
    if (std::filesystem::exists(tp)) {
      truth = read_truth(tp);
      info["sigma1_sq"] = truth->spectrum.sigma1_sq;
      info["sigma2_sq"] = truth->spectrum.sigma2_sq;
      info["gap_R"] = truth->spectrum.gap_R();
    }
    return LoadedInstance{RowStream(std::move(source), order_seed), std::move(truth),
                          std::move(info)};
  }
  GeneratedInstance gi = generate_instance(*spec.family, spec.params, seed);
  nlohmann::json info;
  info["source"] = "generated";
  info["family"] = family_name(*spec.family);
  info["params"] = spec.params;
  info["generator_seed"] = seed;
  info["n"] = gi.rows.rows();
  info["d"] = gi.rows.cols();
  info["sigma1_sq"] = gi.truth.spectrum.sigma1_sq;
  info["sigma2_sq"] = gi.truth.spectrum.sigma2_sq;
  info["gap_R"] = gi.truth.spectrum.gap_R();
  auto source = std::make_unique<MatrixSource>(std::move(gi.rows));
  return LoadedInstance{RowStream(std::move(source), order_seed),
                        std::move(gi.truth), std::move(info)};
}

HeavyLightOptions heavy_light_options(const ConstantOverrides& ov) {
  HeavyLightOptions o;
  if (ov.R_hint) o.R_hint = ov.R_hint;
  if (ov.polylog_exponent) o.polylog_exponent = *ov.polylog_exponent;
  if (ov.heavy_enabled) o.heavy_enabled = *ov.heavy_enabled;
  if (ov.C_sample) o.C_sample = *ov.C_sample;
  if (ov.C1) o.C1 = *ov.C1;
  if (ov.C2) o.C2 = *ov.C2;
  if (ov.budget) o.budget_override = ov.budget;
  if (!ov.rho_grid.empty()) o.rho_grid = ov.rho_grid;
  if (!ov.alpha_grid.empty()) o.alpha_grid = ov.alpha_grid;
  if (ov.sketch_rows) o.sketch_rows = ov.sketch_rows;
  if (ov.eps_jl) o.sketch_eps = ov.eps_jl;
  return o;
}

OjaOptions oja_options(const ConstantOverrides& ov) {
  OjaOptions o;
  if (!ov.eta_grid.empty()) o.eta_grid = ov.eta_grid;
  if (ov.growth_threshold_log) o.growth_threshold_log = *ov.growth_threshold_log;
  return o;
}

struct AlgoOutcome {
  nlohmann::json result;
  Vector estimate;
  nlohmann::json winner_summary;
  Index rows_stored_peak = 0;
};

AlgoOutcome run_algorithm(Algorithm algo, RowStream& stream, const ConstantOverrides& ov,
                          std::uint64_t seed) {
  const Index d = stream.d();
  const Index n = stream.n();
  switch (algo) {
    case Algorithm::heavy_light: {
      HeavyLightReport rep = run_heavy_light(stream, heavy_light_options(ov), seed);
      AlgoOutcome out;
      out.estimate = rep.estimate;
      out.rows_stored_peak = rep.rows_stored_peak;
      out.winner_summary = lane_id_json(rep.winner);
      out.winner_summary["score"] = rep.winner_score;
      out.result = heavy_light_result_json(rep);
      return out;
    }
    case Algorithm::block_power: {
      BlockPowerParams params;
      params.d = d;
      params.n = n;
      if (ov.C1) params.C1 = *ov.C1;
      if (ov.C2) params.C2 = *ov.C2;
      if (ov.eta) params.eta = *ov.eta;
      if (ov.eps) params.eps = ov.eps;
      params.rho_grid =
          ov.rho_grid.empty() ? BlockPowerParams::default_rho_grid(d) : ov.rho_grid;
      SketchParams sp =
          SketchParams::for_dim(d, static_cast<Index>(params.rho_grid.size()));
      if (ov.eps_jl) {
        sp.eps_jl = *ov.eps_jl;
        sp.m = std::min<Index>(
            512, static_cast<Index>(std::max(
                     1.0, std::ceil((std::log(static_cast<double>(d)) +
                                     std::log(static_cast<double>(
                                         params.rho_grid.size()))) /
                                    (sp.eps_jl * sp.eps_jl)))));
      }
      if (ov.sketch_rows) sp.m = *ov.sketch_rows;
      GaussianSketch sketch(sp, d, seed);
      BlockPowerResult res = run_bounded_norm(stream, params, sketch, seed);
      AlgoOutcome out;
      out.estimate = res.winning_z();  // throws NoCandidateError when all invalid
      out.winner_summary = {{"winner_lane", res.winner}};
      out.result = block_power_result_json(res);
      return out;
    }
    case Algorithm::oja: {
      const OjaOptions options = oja_options(ov);
      OjaPassResult res = oja_pass(stream, options, seed);
      const Index chosen = res.select_by_growth(options.growth_threshold_log);
      Vector estimate;
      if (chosen >= 0) {
        estimate = res.lanes[static_cast<std::size_t>(chosen)].dir;
      } else if (res.fallback_norm_sq > 0.0) {
        estimate = res.fallback_dir;
      } else {
        throw NoCandidateError("oja: no growth-qualified lane and no fallback row");
      }
      AlgoOutcome out;
      out.estimate = estimate;
      out.winner_summary = {{"chosen_lane", chosen}};
      out.result = oja_result_json(res, chosen, estimate);
      return out;
    }
    case Algorithm::subsample_oja: {
      if (!ov.R_hint) {
        throw ConfigError("subsample_oja requires overrides.R_hint");
      }
      if (!ov.opnorm_sq_guess) {
        throw ConfigError("subsample_oja requires overrides.opnorm_sq_guess");
      }
      SubsampleOjaResult res = subsample_then_oja(stream, *ov.R_hint,
                                                  *ov.opnorm_sq_guess,
                                                  oja_options(ov), seed);
      AlgoOutcome out;
      out.estimate = res.estimate;
      out.winner_summary = {{"winner_lane", res.winner_lane}};
      out.result = subsample_oja_result_json(res);
      return out;
    }
  }
  throw std::logic_error("run_algorithm: bad enum");
}

int cmd_gen(const CommonFlags& flags) {
  const ExperimentConfig cfg = load_config_file(flags.config_path);
  if (!cfg.instance.family) {
    throw ConfigError("gen: config instance must specify a generator family");
  }
  const std::uint64_t seed = resolve_seed(cfg, flags);
  std::string out;
  if (flags.out) {
    out = *flags.out;
  } else if (cfg.output) {
    out = *cfg.output;
  } else {
    throw ConfigError("gen: no output path (--out or config output)");
  }
  GeneratedInstance gi = generate_instance(*cfg.instance.family, cfg.instance.params, seed);
  if (out.size() >= 4 && out.substr(out.size() - 4) == ".csv") {
    write_csv(out, gi.rows);
  } else {
    write_eigs1(out, gi.rows);
  }
  write_truth(truth_path_for(out), gi.truth);
  std::cout << "wrote " << out << " (" << gi.rows.rows() << "x" << gi.rows.cols()
            << ") and " << truth_path_for(out) << "\n";
  return 0;
}

int cmd_run(const CommonFlags& flags) {
  const ExperimentConfig cfg = load_config_file(flags.config_path);
  const std::uint64_t seed = resolve_seed(cfg, flags);
  const Algorithm algo = resolve_algorithm(cfg, flags);
  LoadedInstance inst = load_instance(cfg.instance, seed);

  const auto t0 = std::chrono::steady_clock::now();
  AlgoOutcome outcome = run_algorithm(algo, inst.stream, cfg.overrides, seed);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (inst.truth) {
    outcome.result["correlation_vs_truth"] =
        correlation(outcome.estimate, inst.truth->spectrum.v1);
  }
  const nlohmann::json report = make_run_report(cfg.hash, algo, seed, inst.info,
                                                outcome.result, wall);
  std::optional<std::string> out = flags.out ? flags.out : cfg.output;
  if (out) {
    write_json_file(*out, report);
    std::cout << "algorithm=" << algorithm_name(algo) << " seed=" << seed;
    if (inst.truth) {
      std::cout << " correlation=" << outcome.result["correlation_vs_truth"].get<double>();
    }
    std::cout << " report=" << *out << "\n";
  } else {
    std::cout << report.dump(2) << "\n";
  }
  return 0;
}

int cmd_sweep(const CommonFlags& flags) {
  const ExperimentConfig cfg = load_config_file(flags.config_path);
  if (!cfg.sweep) throw ConfigError("sweep: config has no \"sweep\" section");
  if (!cfg.instance.family) {
    throw ConfigError("sweep: config instance must specify a generator family");
  }
  const Family family = *cfg.instance.family;
  if (family != Family::planted_gap && family != Family::oja_hard) {
    throw ConfigError("sweep: only planted_gap and oja_hard expose a gap parameter R");
  }
  const std::vector<std::uint64_t> seeds = resolve_seed_list(cfg, flags);
  if (!cfg.instance.params.contains("d")) {
    throw ConfigError("sweep: instance params must include \"d\"");
  }
  const Index d = cfg.instance.params.at("d").get<Index>();

  struct CellSpec {
    double R;
    Algorithm algo;
    std::uint64_t seed;
  };
  std::vector<CellSpec> specs;
  for (double R : cfg.sweep->R_values) {
    for (Algorithm a : cfg.sweep->algorithms) {
      for (std::uint64_t s : seeds) specs.push_back({R, a, s});
    }
  }

  std::vector<SweepCell> cells(specs.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= specs.size()) return;
      const CellSpec& sp = specs[i];
      nlohmann::json params = cfg.instance.params;
      params["R"] = sp.R;
      SweepCell cell;
      cell.family = family_name(family);
      cell.R = sp.R;
      cell.algorithm = sp.algo;
      cell.seed = sp.seed;
      const auto c0 = std::chrono::steady_clock::now();
      try {
        GeneratedInstance gi = generate_instance(family, params, sp.seed);
        const Vector v1 = gi.truth.spectrum.v1;
        RowStream stream(std::make_unique<MatrixSource>(std::move(gi.rows)),
                         derive_key(sp.seed, tags::kShuffle));
        AlgoOutcome outcome = run_algorithm(sp.algo, stream, cfg.overrides, sp.seed);
        cell.correlation = correlation(outcome.estimate, v1);
        cell.winner = outcome.winner_summary;
        cell.rows_stored_peak = outcome.rows_stored_peak;
      } catch (const NoCandidateError&) {
        cell.no_candidate = true;
        cell.correlation = 0.0;
        cell.winner = nlohmann::json::object();
      }
      cell.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - c0).count();
      cells[i] = std::move(cell);
    }
  };

  const auto t0 = std::chrono::steady_clock::now();
  const int threads = std::max(1, flags.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::vector<SweepAggregate> aggregates;
  for (double R : cfg.sweep->R_values) {
    for (Algorithm a : cfg.sweep->algorithms) {
      SweepAggregate agg;
      agg.family = family_name(family);
      agg.R = R;
      agg.algorithm = a;
      const auto [kind, floor_value] = floor_for(a, R, d);
      agg.floor_kind = kind;
      agg.floor_value = floor_value;
      double sum = 0.0;
      Index hits = 0;
      Index count = 0;
      for (const SweepCell& c : cells) {
        if (c.R != R || c.algorithm != a) continue;
        ++count;
        sum += c.correlation;
        if (c.correlation >= floor_value) ++hits;
      }
      agg.seeds = count;
      agg.mean_correlation = count > 0 ? sum / static_cast<double>(count) : 0.0;
      agg.success_rate =
          count > 0 ? static_cast<double>(hits) / static_cast<double>(count) : 0.0;
      aggregates.push_back(std::move(agg));
    }
  }

  std::string base = flags.out ? *flags.out : cfg.output.value_or("sweep");
  write_sweep_csv(base + ".csv", aggregates);
  write_json_file(base + ".json", sweep_json(cfg.hash, cells, aggregates, wall));
  std::cout << kSweepCsvHeader << "\n";
  for (const auto& a : aggregates) {
    std::cout << kSweepCsvVersion << ',' << a.family << ',' << a.R << ','
              << algorithm_name(a.algorithm) << ',' << a.seeds << ','
              << a.mean_correlation << ',' << a.floor_kind << ',' << a.floor_value << ','
              << a.success_rate << "\n";
  }
  std::cout << "wrote " << base << ".csv and " << base << ".json\n";
  return 0;
}

int cmd_verify(const std::string& instance_path, const std::optional<std::string>& report,
               bool self) {
  if (report.has_value() == self) {
    throw ConfigError("verify: pass exactly one of --report or --self");
  }
  const std::string tp = truth_path_for(instance_path);
  if (!std::filesystem::exists(tp)) {
    throw ConfigError("verify: no ground-truth sidecar at " + tp);
  }
  const InstanceTruth truth = read_truth(tp);
  Vector estimate;
  if (self) {
    estimate = truth.spectrum.v1;
  } else {
    const nlohmann::json rep = load_json_file(*report);
    if (!rep.contains("result") || !rep.at("result").contains("estimate")) {
      throw ConfigError("verify: report has no result.estimate field");
    }
    const auto vals = rep.at("result").at("estimate").get<std::vector<double>>();
    if (static_cast<Index>(vals.size()) != truth.d) {
      throw ConfigError("verify: estimate dimension differs from instance");
    }
    estimate = Eigen::Map<const Vector>(vals.data(), static_cast<Index>(vals.size()));
  }
  std::cout.precision(17);
  std::cout << "correlation " << correlation(estimate, truth.spectrum.v1) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-pass streaming top-eigenvector experiments"};
  app.require_subcommand(1);

  CommonFlags gen_flags, run_flags, sweep_flags;
  std::string verify_instance;
  std::optional<std::string> verify_report;
  bool verify_self = false;

  CLI::App* gen = app.add_subcommand("gen", "Generate an instance + truth sidecar");
  gen->add_option("--config", gen_flags.config_path, "Config JSON path")->required();
  gen->add_option("--seed", gen_flags.seed, "Generator seed override");
  gen->add_option("--out", gen_flags.out, "Output instance path (.eigs binary or .csv)");

  CLI::App* run = app.add_subcommand("run", "Run one algorithm / instance / seed");
  run->add_option("--config", run_flags.config_path, "Config JSON path")->required();
  run->add_option("--seed", run_flags.seed, "Seed override");
  run->add_option("--out", run_flags.out, "RunReport JSON output path");
  run->add_option("--algo", run_flags.algo,
                  "heavy_light | block_power | oja | subsample_oja");

  CLI::App* sweep = app.add_subcommand("sweep", "Grid over R values x algorithms x seeds");
  sweep->add_option("--config", sweep_flags.config_path, "Config JSON path")->required();
  sweep->add_option("--seed", sweep_flags.seed, "Restrict to a single seed");
  sweep->add_option("--out", sweep_flags.out, "Output base path (writes .csv and .json)");
  sweep->add_option("--threads", sweep_flags.threads, "Worker threads (cells independent)");

  CLI::App* verify = app.add_subcommand("verify", "Correlation of an estimate vs truth");
  verify->add_option("--instance", verify_instance, "Instance path (sidecar required)")
      ->required();
  verify->add_option("--report", verify_report, "RunReport JSON with result.estimate");
  verify->add_flag("--self", verify_self, "Score the sidecar's own v1 (sanity: 1.0)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_flags);
    if (run->parsed()) return cmd_run(run_flags);
    if (sweep->parsed()) return cmd_sweep(sweep_flags);
    if (verify->parsed()) return cmd_verify(verify_instance, verify_report, verify_self);
    throw ConfigError("no subcommand given");
  } catch (const NoCandidateError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
