#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "kyle/analysis.hpp"
#include "kyle/distributions.hpp"
#include "kyle/equilibrium.hpp"
#include "kyle/mlp.hpp"

namespace kyle {

enum class InsiderInit { kGaussianNoise, kEquilibriumLinear, kApproxLinear };

std::string insider_init_name(InsiderInit init);
InsiderInit insider_init_from_name(const std::string& name);

struct TrainingConfig {
  std::size_t n_samples = 5000;   // per agent per loop
  int epochs_per_loop = 3;
  int n_loops = 20;
  InsiderInit insider_init = InsiderInit::kGaussianNoise;
  std::uint64_t seed = 1;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-7;
  Activation activation = Activation::kRelu;
  std::vector<int> insider_layers{1, 10, 1};
  std::vector<int> mm_layers{1, 10, 10, 1};

  void validate() const;
};

// Raised when a loss or parameter turns non-finite; loop is the 1-based
// training loop index, or 0 when the divergence happened outside a loop.
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& what, int loop_index = 0)
      : std::runtime_error(what), loop(loop_index) {}
  int loop;
};

// Per-loop diagnostics.
struct LoopRecord {
  int loop = 0;
  double mm_mean_loss = 0.0;
  double insider_mean_loss = 0.0;
  LineFit insider_fit;
  LineFit mm_fit;
  double insider_max_dev = 0.0;  // vs theorem1 insider line, fit-region grid
  double mm_max_dev = 0.0;       // vs theorem1 pricing line
};

using LoopTrace = std::vector<LoopRecord>;

// Network plus its persistent optimizer accumulators.
struct Agent {
  Mlp net;
  AdamState opt;
};

// First-loop insider order function. GaussianNoise draws a fresh N(0,
// sigma_y^2) value per query and ignores z entirely; EquilibriumLinear is the
// theorem1 line; ApproxLinear adds a small smooth perturbation
// 0.1 sigma_y sin(z) to it.
ScalarFn initial_insider(InsiderInit mode, const MarketConfig& config,
                         RngStream rng);

// One training phase for the market maker against a frozen order function:
// fresh (z, y) draws, total orders formed once, then epochs_per_loop passes
// with one optimizer update per sample. Returns the final epoch's mean loss.
double train_market_maker(Agent& mm, const ScalarFn& insider_fn,
                          const MarketConfig& config, const TrainingConfig& tc,
                          RngStream& rng);

// Same regime for the insider against the frozen market maker network, using
// the transaction-cost-penalized loss with epsilon from the market config.
double train_insider(Agent& insider, const Mlp& mm_frozen,
                     const MarketConfig& config, const TrainingConfig& tc,
                     RngStream& rng);

struct AlternatingResult {
  Mlp insider;
  Mlp mm;
  LoopTrace trace;
};

// The alternating protocol: n_loops of { market maker update, insider update },
// with the initial insider function standing in for the insider during loop 1's
// market-maker phase. Fully deterministic given the configs (incl. seed).
AlternatingResult run_alternating(const MarketConfig& config,
                                  const TrainingConfig& tc);

}  // namespace kyle
