#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "kyle/analysis.hpp"
#include "kyle/distributions.hpp"
#include "kyle/training.hpp"

namespace kyle {

// Invalid or unknown configuration input; the message names the offending key.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind { kTrain, kOracle, kGradCheck, kSweep };

std::string experiment_kind_name(ExperimentKind kind);

// Flat key-value config with dotted section names, e.g. "market.mu_z = 0.5".
// Lines starting with '#' (or anything after '#') are comments.
using KeyValueMap = std::map<std::string, std::string>;

KeyValueMap read_key_value_file(const std::string& path);
KeyValueMap read_key_value_text(const std::string& text);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kTrain;
  std::string output_dir = "out";
  MarketConfig market;
  TrainingConfig training;
  std::string sweep_parameter;
  std::vector<double> sweep_values;
  int gradcheck_draws = 50;
  KeyValueMap raw;  // source key-values, kept for sweeps and metadata
};

// Resolves raw key-values into a validated config. Unknown keys, malformed
// numbers and inconsistent distribution parameters raise ConfigError naming
// the key. Distribution families given without explicit parameters are
// moment-matched to (mu_z, sigma_z^2) resp. (0, sigma_y^2); shifted_gamma is
// the fixed centered construction and forces mu_z/sigma_z (or sigma_y) to its
// analytic moments.
ExperimentConfig resolve_config(const KeyValueMap& raw);
ExperimentConfig load_config(const std::string& path);

// Seed for the index-th sweep value, derived deterministically from the base.
std::uint64_t sweep_value_seed(std::uint64_t base_seed, std::size_t index);

struct RunArtifacts {
  EquilibriumEstimate estimate;
  PlateauEstimate plateau;
  double insider_profit = 0.0;
  double mm_profit = 0.0;
  LoopTrace trace;
};

// Executes a training run and writes meta.json, trace.csv, predictions.csv,
// summary.json and the two network checkpoints into config.output_dir.
// Identical configs reproduce identical files byte for byte.
RunArtifacts run_training_experiment(const ExperimentConfig& config);

// Oracle-only artifact set: theorem1/fixed-point constants, the quadrature
// pricing curve, the numerical insider best response and the plateau
// prediction, written to the same artifact schema.
void run_oracle_experiment(const ExperimentConfig& config);

struct GradCheckReport {
  double max_rel_error_tanh = 0.0;
  double max_rel_error_relu = 0.0;
  int draws = 0;
};

// Compares analytic gradients of both losses against central finite
// differences on random networks (ReLU draws are resampled away from kinks).
GradCheckReport run_grad_check(std::uint64_t seed, int draws);
void run_gradcheck_experiment(const ExperimentConfig& config);

// Runs every sweep value with a derived seed, one artifact directory per
// value plus a combined sweep.csv. Per-value failures are recorded in the
// csv and do not stop the remaining values. Returns the number of failures.
int run_sweep_experiment(const ExperimentConfig& config);

// File-level entry point used by the command-line tool and tests.
// Exit codes: 0 success, 2 config error, 3 training divergence.
int run_experiment_file(const std::string& config_path,
                        const std::string& output_dir_override = "",
                        std::uint64_t seed_override = 0,
                        bool has_seed_override = false);

}  // namespace kyle
