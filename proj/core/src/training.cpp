#include "kyle/training.hpp"

#include <cmath>
#include <memory>
#include <utility>

namespace kyle {

namespace {

// Substream tags. Loop phases use kMmPhaseBase + loop / kInsiderPhaseBase +
// loop so every loop sees fresh, independent draws.
constexpr std::uint64_t kInsiderNetInit = 1;
constexpr std::uint64_t kMmNetInit = 2;
constexpr std::uint64_t kInitFnNoise = 3;
constexpr std::uint64_t kMmPhaseBase = 1000;
constexpr std::uint64_t kInsiderPhaseBase = 2000;
constexpr std::uint64_t kZDraws = 1;
constexpr std::uint64_t kYDraws = 2;

bool all_finite(const Mlp& mlp) {
  for (const Layer& layer : mlp.layers) {
    for (double w : layer.w) {
      if (!std::isfinite(w)) return false;
    }
    for (double b : layer.b) {
      if (!std::isfinite(b)) return false;
    }
  }
  return true;
}

void check_health(const Agent& agent, double loss, const char* who) {
  if (!std::isfinite(loss) || !all_finite(agent.net)) {
    throw DivergenceError(std::string(who) + " training diverged (non-finite values)");
  }
}

}  // namespace

std::string insider_init_name(InsiderInit init) {
  switch (init) {
    case InsiderInit::kGaussianNoise: return "gaussian_noise";
    case InsiderInit::kEquilibriumLinear: return "equilibrium_linear";
    case InsiderInit::kApproxLinear: return "approx_linear";
  }
  throw std::invalid_argument("unknown insider init");
}

InsiderInit insider_init_from_name(const std::string& name) {
  if (name == "gaussian_noise") return InsiderInit::kGaussianNoise;
  if (name == "equilibrium_linear") return InsiderInit::kEquilibriumLinear;
  if (name == "approx_linear") return InsiderInit::kApproxLinear;
  throw std::invalid_argument("unknown insider init: " + name);
}

void TrainingConfig::validate() const {
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  if (epochs_per_loop < 1) throw std::invalid_argument("epochs_per_loop must be >= 1");
  if (n_loops < 1) throw std::invalid_argument("n_loops must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("adam betas must lie in [0, 1)");
  }
  if (!(eps_hat > 0.0)) throw std::invalid_argument("eps_hat must be > 0");
}

ScalarFn initial_insider(InsiderInit mode, const MarketConfig& config,
                         RngStream rng) {
  switch (mode) {
    case InsiderInit::kGaussianNoise: {
      // X(.) ~ Y: one fresh draw per query, no information about z.
      auto noise = std::make_shared<RngStream>(rng);
      const double sigma_y = config.sigma_y;
      return [noise, sigma_y](double) { return noise->normal(0.0, sigma_y); };
    }
    case InsiderInit::kEquilibriumLinear: {
      const LinearEquilibrium eq = theorem1(config);
      return [eq](double z) { return eq.insider(z); };
    }
    case InsiderInit::kApproxLinear: {
      const LinearEquilibrium eq = theorem1(config);
      const double amp = 0.1 * config.sigma_y;
      return [eq, amp](double z) { return eq.insider(z) + amp * std::sin(z); };
    }
  }
  throw std::invalid_argument("unknown insider init");
}

double train_market_maker(Agent& mm, const ScalarFn& insider_fn,
                          const MarketConfig& config, const TrainingConfig& tc,
                          RngStream& rng) {
  tc.validate();
  RngStream z_rng = rng.derive(kZDraws);
  RngStream y_rng = rng.derive(kYDraws);
  const std::vector<double> zs = sample(config.z_dist, tc.n_samples, z_rng);
  const std::vector<double> ys = sample(config.y_dist, tc.n_samples, y_rng);
  std::vector<double> orders(tc.n_samples);
  for (std::size_t i = 0; i < tc.n_samples; ++i) orders[i] = insider_fn(zs[i]) + ys[i];

  ForwardCache cache;
  Gradient grad = Gradient::zeros_like(mm.net);
  double epoch_loss = 0.0;
  for (int epoch = 0; epoch < tc.epochs_per_loop; ++epoch) {
    double acc = 0.0;
    for (std::size_t i = 0; i < tc.n_samples; ++i) {
      acc += mm_loss_grad(mm.net, zs[i], orders[i], cache, grad);
      adam_step(mm.net, grad, mm.opt);
    }
    epoch_loss = acc / static_cast<double>(tc.n_samples);
  }
  check_health(mm, epoch_loss, "market maker");
  return epoch_loss;
}

double train_insider(Agent& insider, const Mlp& mm_frozen,
                     const MarketConfig& config, const TrainingConfig& tc,
                     RngStream& rng) {
  tc.validate();
  RngStream z_rng = rng.derive(kZDraws);
  RngStream y_rng = rng.derive(kYDraws);
  const std::vector<double> zs = sample(config.z_dist, tc.n_samples, z_rng);
  const std::vector<double> ys = sample(config.y_dist, tc.n_samples, y_rng);

  ForwardCache cache;
  Gradient grad = Gradient::zeros_like(insider.net);
  double epoch_loss = 0.0;
  for (int epoch = 0; epoch < tc.epochs_per_loop; ++epoch) {
    double acc = 0.0;
    for (std::size_t i = 0; i < tc.n_samples; ++i) {
      acc += insider_loss_grad(insider.net, mm_frozen, zs[i], ys[i],
                               config.epsilon, cache, grad);
      adam_step(insider.net, grad, insider.opt);
    }
    epoch_loss = acc / static_cast<double>(tc.n_samples);
  }
  check_health(insider, epoch_loss, "insider");
  return epoch_loss;
}

AlternatingResult run_alternating(const MarketConfig& config,
                                  const TrainingConfig& tc) {
  config.validate();
  tc.validate();
  const RngStream base(tc.seed);

  RngStream insider_init_rng = base.derive(kInsiderNetInit);
  RngStream mm_init_rng = base.derive(kMmNetInit);
  Agent insider{init_mlp(tc.insider_layers, tc.activation, insider_init_rng),
                AdamState{}};
  Agent mm{init_mlp(tc.mm_layers, tc.activation, mm_init_rng), AdamState{}};
  insider.opt = AdamState::for_network(insider.net, tc.learning_rate, tc.beta1,
                                       tc.beta2, tc.eps_hat);
  mm.opt = AdamState::for_network(mm.net, tc.learning_rate, tc.beta1, tc.beta2,
                                  tc.eps_hat);

  const ScalarFn init_fn =
      initial_insider(tc.insider_init, config, base.derive(kInitFnNoise));
  const ScalarFn insider_net_fn = [&insider](double z) {
    return forward(insider.net, z);
  };

  AlternatingResult result;
  result.trace.reserve(tc.n_loops);
  for (int loop = 1; loop <= tc.n_loops; ++loop) {
    try {
      RngStream mm_rng = base.derive(kMmPhaseBase + loop);
      const ScalarFn& order_fn = (loop == 1) ? init_fn : insider_net_fn;
      const double mm_loss = train_market_maker(mm, order_fn, config, tc, mm_rng);

      RngStream insider_rng = base.derive(kInsiderPhaseBase + loop);
      const double ins_loss =
          train_insider(insider, mm.net, config, tc, insider_rng);

      const EquilibriumEstimate est =
          estimate_equilibrium(insider.net, mm.net, config);
      LoopRecord rec;
      rec.loop = loop;
      rec.mm_mean_loss = mm_loss;
      rec.insider_mean_loss = ins_loss;
      rec.insider_fit = est.insider_fit;
      rec.mm_fit = est.mm_fit;
      rec.insider_max_dev = est.max_abs_deviation_insider;
      rec.mm_max_dev = est.max_abs_deviation_mm;
      result.trace.push_back(rec);
    } catch (const DivergenceError& e) {
      throw DivergenceError(e.what(), loop);
    }
  }
  result.insider = std::move(insider.net);
  result.mm = std::move(mm.net);
  return result;
}

}  // namespace kyle
