// Experiment runner for the two-agent market laboratory. Subcommands:
//
//   kyle-lab run <config>        alternating training run, artifacts on disk
//   kyle-lab sweep <config>      one training run per sweep value + sweep.csv
//   kyle-lab oracle <config>     quadrature/closed-form reference curves
//   kyle-lab gradcheck           finite-difference check of both loss gradients
//
// Exit codes: 0 success, 2 config error, 3 training divergence.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "kyle/experiment.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string output_dir;
  std::uint64_t seed = 0;
  bool has_seed = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool wants_config) {
  if (wants_config) {
    cmd->add_option("config", opts.config_path, "Experiment config file")
        ->required()
        ->check(CLI::ExistingFile);
  }
  cmd->add_option("--output-dir", opts.output_dir, "Override output_dir");
  cmd->add_option("--seed", opts.seed, "Override the config seed")
      ->each([&opts](const std::string&) { opts.has_seed = true; });
}

int run_with_kind_check(const CommonOpts& opts, kyle::ExperimentKind expected) {
  try {
    const kyle::ExperimentConfig config =
        kyle::load_config(opts.config_path);
    if (config.kind != expected) {
      std::fprintf(stderr, "config error: key 'kind': expected '%s', got '%s'\n",
                   kyle::experiment_kind_name(expected).c_str(),
                   kyle::experiment_kind_name(config.kind).c_str());
      return 2;
    }
  } catch (const kyle::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }
  return kyle::run_experiment_file(opts.config_path, opts.output_dir, opts.seed,
                                   opts.has_seed);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for the single-period insider-trading game"};
  app.require_subcommand(1);

  CommonOpts run_opts, sweep_opts, oracle_opts, grad_opts;

  CLI::App* run_cmd = app.add_subcommand("run", "Alternating training run");
  add_common(run_cmd, run_opts, true);

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Parameter sweep of training runs");
  add_common(sweep_cmd, sweep_opts, true);

  CLI::App* oracle_cmd = app.add_subcommand("oracle", "Reference curves and constants");
  add_common(oracle_cmd, oracle_opts, true);

  CLI::App* grad_cmd =
      app.add_subcommand("gradcheck", "Finite-difference gradient check");
  add_common(grad_cmd, grad_opts, false);
  int grad_draws = 50;
  grad_cmd->add_option("--draws", grad_draws, "Random draws per activation");

  CLI11_PARSE(app, argc, argv);

  if (run_cmd->parsed()) return run_with_kind_check(run_opts, kyle::ExperimentKind::kTrain);
  if (sweep_cmd->parsed()) return run_with_kind_check(sweep_opts, kyle::ExperimentKind::kSweep);
  if (oracle_cmd->parsed()) return run_with_kind_check(oracle_opts, kyle::ExperimentKind::kOracle);

  // gradcheck works without a config file.
  try {
    const kyle::GradCheckReport report =
        kyle::run_grad_check(grad_opts.has_seed ? grad_opts.seed : 1, grad_draws);
    std::printf("gradcheck: max relative error tanh=%.3g relu=%.3g (draws=%d)\n",
                report.max_rel_error_tanh, report.max_rel_error_relu, report.draws);
    const bool ok =
        report.max_rel_error_tanh < 1e-5 && report.max_rel_error_relu < 1e-4;
    return ok ? 0 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
