#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "rdx/config.hpp"
#include "rdx/csv.hpp"
#include "rdx/decomp.hpp"
#include "rdx/induced.hpp"
#include "rdx/metrics.hpp"
#include "rdx/serialize.hpp"
#include "rdx/trainer.hpp"
#include "rdx/viz.hpp"

namespace rdx {

namespace detail {

inline constexpr std::uint64_t kStateDependenceSeed = 9001;
inline constexpr int kStateDependenceSteps = 10000;

// RDX_OUTPUT_ROOT prefixes relative output directories
inline std::filesystem::path resolve_output_dir(const std::string& configured) {
  std::filesystem::path dir(configured);
  if (dir.is_absolute()) return dir;
  if (const char* root = std::getenv("RDX_OUTPUT_ROOT"); root != nullptr && *root != '\0')
    return std::filesystem::path(root) / dir;
  return dir;
}

// RDX_WORKERS caps the seed worker pool (default: one worker)
inline int worker_count(int n_jobs) {
  int workers = 1;
  if (const char* env = std::getenv("RDX_WORKERS"); env != nullptr && *env != '\0') {
    try {
      workers = std::stoi(env);
    } catch (const std::exception&) {
      throw ConfigError("RDX_WORKERS: expected an integer, got '" + std::string(env) + "'");
    }
    if (workers < 1) throw ConfigError("RDX_WORKERS: must be at least 1");
  }
  return std::min(workers, std::max(1, n_jobs));
}

template <typename Fn>
inline void parallel_for(int n_jobs, Fn&& fn) {
  const int workers = worker_count(n_jobs);
  if (workers <= 1) {
    for (int k = 0; k < n_jobs; ++k) fn(k);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_lock;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int k = next.fetch_add(1); k < n_jobs; k = next.fetch_add(1)) {
        try {
          fn(k);
        } catch (...) {
          const std::scoped_lock hold(failure_lock);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed on '" + path.string() + "'");
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_run_log(const std::filesystem::path& path, const TrainResult& result) {
  const int n = result.params.n_factors();
  CsvWriter csv(path.string());
  std::vector<std::string> cells = {"step", "j_disentangled", "j_nontrivial", "j_independent"};
  for (int i = 0; i < n; ++i) cells.push_back("own_value_" + std::to_string(i));
  cells.push_back("avg_saturation");
  for (int i = 0; i < n; ++i) cells.push_back("trivial_" + std::to_string(i));
  csv.row(cells);
  for (const LogEntry& entry : result.history) {
    cells = {std::to_string(entry.step), format_double(entry.report.j_disentangled),
             format_double(entry.report.j_nontrivial), format_double(entry.report.j_independent)};
    for (int i = 0; i < n; ++i) cells.push_back(format_double(entry.report.value_matrix(i, i)));
    cells.push_back(format_double(entry.avg_saturation));
    for (int i = 0; i < n; ++i) cells.push_back(entry.trivial[i] ? "1" : "0");
    csv.row(cells);
  }
}

inline void write_theorem1_csv(const std::filesystem::path& path,
                               const std::vector<TheoremOneRecord>& records) {
  CsvWriter csv(path.string());
  csv.row({"factor_i", "factor_j", "state", "gap", "r_max", "bound", "actual_tv", "holds"});
  for (const TheoremOneRecord& rec : records) {
    csv.row({std::to_string(rec.factor_i), std::to_string(rec.factor_j), std::to_string(rec.state),
             format_double(rec.gap), format_double(rec.r_max), format_double(rec.bound),
             format_double(rec.actual_tv), rec.holds ? "1" : "0"});
  }
}

inline void write_metrics_files(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                                const TabularMdp& mdp, const TrainResult& best) {
  std::filesystem::create_directories(dir);
  const auto policies = optimal_factor_policies(mdp, best.params, cfg.trainer.vi_tol);

  CsvWriter csv((dir / "metrics.csv").string());
  csv.row({"metric", "value"});
  csv.row({"j_disentangled", format_double(best.final_report.j_disentangled)});
  csv.row({"j_nontrivial", format_double(best.final_report.j_nontrivial)});
  csv.row({"j_independent", format_double(best.final_report.j_independent)});
  csv.row({"total_value",
           format_double(total_value(mdp, policies, mdp.start_distribution))});
  if (cfg.metrics_saturation)
    csv.row({"avg_saturation", format_double(average_saturation(mdp, best.params))});
  if (cfg.metrics_lemma1) {
    const auto uniform_report =
        evaluate_objective(mdp, best.params, AlphaScheme::uniform(1.0), policies);
    csv.row({"lemma1_residual_c1",
             format_double(lemma1_residual(uniform_report, 1.0,
                                           total_value(mdp, policies, mdp.start_distribution)))});
  }
  if (cfg.metrics_state_dependence) {
    for (int i = 0; i < best.params.n_factors(); ++i) {
      Rng rng(kStateDependenceSeed + static_cast<std::uint64_t>(i));
      const double score = state_dependence_sampled(
          mdp, policies[static_cast<std::size_t>(i)].as_matrix(mdp.n_actions),
          kStateDependenceSteps, rng);
      csv.row({"state_dependence_" + std::to_string(i), format_double(score)});
    }
  }
  if (cfg.metrics_theorem1)
    write_theorem1_csv(dir / "theorem1.csv", theorem1_sweep(mdp, best.params, policies));
}

inline void write_induced_files(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                                const TabularMdp& mdp, const TrainResult& best) {
  std::filesystem::create_directories(dir);
  const auto policies = optimal_factor_policies(mdp, best.params, cfg.trainer.vi_tol);
  const auto region = named_grid_region(cfg.grid, cfg.induced_region);
  std::vector<GeneralizationResult> results(cfg.induced_seeds.size());
  parallel_for(static_cast<int>(cfg.induced_seeds.size()), [&](int k) {
    results[k] =
        generalization_experiment(mdp, region, policies, cfg.control, cfg.induced_seeds[k]);
  });
  double induced_mean = 0.0, baseline_mean = 0.0;
  CsvWriter summary((dir / "summary.csv").string());
  summary.row({"seed", "induced_first_half_mean", "baseline_first_half_mean"});
  for (std::size_t k = 0; k < cfg.induced_seeds.size(); ++k) {
    const GeneralizationResult& res = results[k];
    CsvWriter curve((dir / ("curve_seed_" + std::to_string(cfg.induced_seeds[k]) + ".csv")).string());
    curve.row({"step", "induced_value", "baseline_value"});
    for (std::size_t p = 0; p < res.induced_curve.size(); ++p) {
      curve.row({std::to_string(res.induced_curve[p].step),
                 format_double(res.induced_curve[p].value),
                 format_double(res.baseline_curve[p].value)});
    }
    const double ind = first_half_mean(res.induced_curve);
    const double base = first_half_mean(res.baseline_curve);
    induced_mean += ind;
    baseline_mean += base;
    summary.row({std::to_string(cfg.induced_seeds[k]), format_double(ind), format_double(base)});
  }
  induced_mean /= static_cast<double>(cfg.induced_seeds.size());
  baseline_mean /= static_cast<double>(cfg.induced_seeds.size());
  summary.row({"mean", format_double(induced_mean), format_double(baseline_mean)});
}

inline void write_viz_files(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                            const TabularMdp& mdp, const TrainResult& best) {
  emit_heatmaps(best.params, mdp, cfg.grid, dir);
  emit_policy_maps(optimal_factor_policies(mdp, best.params, cfg.trainer.vi_tol), cfg.grid, dir);
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct LoadedRun {
  ExperimentConfig config;
  TabularMdp mdp;
  TrainResult best;
  std::filesystem::path dir;
};

inline LoadedRun load_run(const std::string& run_dir) {
  LoadedRun run;
  run.dir = run_dir;
  const auto config_path = run.dir / "config.ini";
  if (!std::filesystem::exists(config_path))
    throw ConfigError("'" + run_dir + "' has no config.ini — not a run directory");
  if (std::filesystem::exists(run.dir / "INCOMPLETE"))
    throw std::runtime_error("'" + run_dir + "' is marked INCOMPLETE; re-run training first");
  run.config = ExperimentConfig::load(config_path.string());
  run.mdp = build_gridworld(run.config.grid, run.config.trainer.gamma);
  const Json best_info = read_json_file((run.dir / "best.json").string());
  const auto seed = best_info.at("best_seed").get<std::uint64_t>();
  run.best = result_from_json(
      read_json_file((run.dir / ("seed_" + std::to_string(seed)) / "result.json").string()));
  return run;
}

}  // namespace detail

struct RunOutcome {
  std::filesystem::path dir;
  std::uint64_t best_seed = 0;
  double best_j_disentangled = 0.0;
};

// Trains every configured seed (worker pool, RDX_WORKERS), then writes the
// run directory: per-seed logs and serialized results, the best-run summary,
// enabled metric reports, visualization grids, and the induced-control
// comparison when enabled. An INCOMPLETE marker guards half-written runs and
// only the final meta.json carries a timestamp.
inline RunOutcome run(const std::string& config_path) {
  const ExperimentConfig cfg = ExperimentConfig::load(config_path);
  const auto dir = detail::resolve_output_dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  detail::write_text_file(dir / "INCOMPLETE", "run in progress\n");
  detail::write_text_file(dir / "config.ini", detail::read_text_file(config_path));

  const TabularMdp mdp = build_gridworld(cfg.grid, cfg.trainer.gamma);
  std::vector<TrainResult> results(cfg.seeds.size());
  // each worker writes only into its own seed subdirectory
  detail::parallel_for(static_cast<int>(cfg.seeds.size()), [&](int k) {
    results[k] = train(mdp, cfg.trainer, cfg.seeds[k]);
    const auto seed_dir = dir / ("seed_" + std::to_string(results[k].seed));
    std::filesystem::create_directories(seed_dir);
    detail::write_run_log(seed_dir / "log.csv", results[k]);
    write_json_file((seed_dir / "result.json").string(), result_to_json(results[k]));
  });

  const TrainResult& best = select_best_run(results);
  {
    CsvWriter summary((dir / "summary.csv").string());
    std::vector<std::string> header = {"seed", "final_j_disentangled", "n_trivial", "selected"};
    summary.row(header);
    for (const TrainResult& result : results) {
      int n_trivial = 0;
      for (const bool flag : result.trivial_flags) n_trivial += flag ? 1 : 0;
      summary.row({std::to_string(result.seed), format_double(result.final_j_disentangled),
                   std::to_string(n_trivial), result.seed == best.seed ? "1" : "0"});
    }
  }
  Json best_info;
  best_info["best_seed"] = best.seed;
  best_info["final_j_disentangled"] = best.final_j_disentangled;
  write_json_file((dir / "best.json").string(), best_info);

  detail::write_metrics_files(dir / "metrics", cfg, mdp, best);
  detail::write_viz_files(dir / "viz", cfg, mdp, best);
  if (cfg.induced_enabled) detail::write_induced_files(dir / "induced", cfg, mdp, best);

  Json meta;
  meta["created_utc"] = detail::utc_timestamp();
  meta["workers"] = detail::worker_count(static_cast<int>(cfg.seeds.size()));
  meta["notes"] = {
      {"objective_state_distribution",
       cfg.trainer.mode == TrainMode::kExact ? "start_distribution" : "replay_minibatch"},
      {"state_dependence_sample",
       std::to_string(detail::kStateDependenceSteps) + " on-policy steps, fixed seed"},
  };
  write_json_file((dir / "meta.json").string(), meta);
  std::filesystem::remove(dir / "INCOMPLETE");
  return {dir, best.seed, best.final_j_disentangled};
}

// Re-evaluates a finished run's best decomposition from scratch and checks it
// against the serialized report; prints both. Disagreement is a hard error.
inline void run_eval(const std::string& run_dir, std::ostream& out = std::cout) {
  const auto loaded = detail::load_run(run_dir);
  const ObjectiveReport fresh =
      evaluate_objective(loaded.mdp, loaded.best.params, loaded.config.trainer.alpha,
                         loaded.config.trainer.vi_tol);
  out << "stored     j_disentangled=" << format_double(loaded.best.final_report.j_disentangled)
      << " j_nontrivial=" << format_double(loaded.best.final_report.j_nontrivial)
      << " j_independent=" << format_double(loaded.best.final_report.j_independent) << "\n";
  out << "recomputed j_disentangled=" << format_double(fresh.j_disentangled)
      << " j_nontrivial=" << format_double(fresh.j_nontrivial)
      << " j_independent=" << format_double(fresh.j_independent) << "\n";
  const double drift = std::abs(fresh.j_disentangled - loaded.best.final_report.j_disentangled);
  if (!(drift <= 1e-9))
    throw std::runtime_error("stored objective drifts from re-evaluation by " +
                             format_double(drift));
  out << "re-evaluation agrees within 1e-9\n";
}

inline void run_metrics(const std::string& run_dir) {
  const auto loaded = detail::load_run(run_dir);
  detail::write_metrics_files(loaded.dir / "metrics", loaded.config, loaded.mdp, loaded.best);
}

inline void run_viz(const std::string& run_dir) {
  const auto loaded = detail::load_run(run_dir);
  detail::write_viz_files(loaded.dir / "viz", loaded.config, loaded.mdp, loaded.best);
}

// Induced-control comparison for a config; trains first when the run
// directory does not exist yet.
inline RunOutcome run_induced(const std::string& config_path) {
  ExperimentConfig cfg = ExperimentConfig::load(config_path);
  if (!cfg.induced_enabled)
    throw ConfigError(config_path + ": [induced] enabled must be true for the induced command");
  const auto dir = detail::resolve_output_dir(cfg.output_dir);
  if (!std::filesystem::exists(dir / "best.json") ||
      std::filesystem::exists(dir / "INCOMPLETE"))
    return run(config_path);
  const auto loaded = detail::load_run(dir.string());
  detail::write_induced_files(dir / "induced", loaded.config, loaded.mdp, loaded.best);
  return {dir, loaded.best.seed, loaded.best.final_j_disentangled};
}

}  // namespace rdx
