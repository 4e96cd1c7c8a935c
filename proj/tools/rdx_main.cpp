// Command-line front end: train, eval, metrics, induced, viz.
//
// Exit codes: 0 success, 1 configuration/usage error, 2 runtime failure.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rdx/config.hpp"
#include "rdx/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"reward decomposition workbench"};
  app.require_subcommand(1);

  std::string train_config, eval_dir, metrics_dir, induced_config, viz_dir;

  CLI::App* train_cmd = app.add_subcommand("train", "train a decomposition from a config file");
  train_cmd->add_option("config", train_config, "path to an INI config")->required();

  CLI::App* eval_cmd =
      app.add_subcommand("eval", "re-evaluate a finished run and verify the stored objective");
  eval_cmd->add_option("run_dir", eval_dir, "run directory produced by train")->required();

  CLI::App* metrics_cmd =
      app.add_subcommand("metrics", "recompute metric reports for a finished run");
  metrics_cmd->add_option("run_dir", metrics_dir, "run directory produced by train")->required();

  CLI::App* induced_cmd = app.add_subcommand(
      "induced", "run the induced-control comparison (trains first if needed)");
  induced_cmd->add_option("config", induced_config, "path to an INI config")->required();

  CLI::App* viz_cmd = app.add_subcommand("viz", "recompute heatmaps and policy maps for a run");
  viz_cmd->add_option("run_dir", viz_dir, "run directory produced by train")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (train_cmd->parsed()) {
      const rdx::RunOutcome outcome = rdx::run(train_config);
      std::cout << "run written to " << outcome.dir.string() << "\n"
                << "best seed " << outcome.best_seed << " with objective "
                << rdx::format_double(outcome.best_j_disentangled) << "\n";
    } else if (eval_cmd->parsed()) {
      rdx::run_eval(eval_dir);
    } else if (metrics_cmd->parsed()) {
      rdx::run_metrics(metrics_dir);
      std::cout << "metrics written under " << metrics_dir << "/metrics\n";
    } else if (induced_cmd->parsed()) {
      const rdx::RunOutcome outcome = rdx::run_induced(induced_config);
      std::cout << "induced comparison written under " << outcome.dir.string() << "/induced\n";
    } else if (viz_cmd->parsed()) {
      rdx::run_viz(viz_dir);
      std::cout << "maps written under " << viz_dir << "/viz\n";
    }
  } catch (const rdx::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
