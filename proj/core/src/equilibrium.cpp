#include "kyle/equilibrium.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "kyle/quadrature.hpp"

namespace kyle {

namespace {

constexpr double kGoldenRatio = 0.6180339887498949;  // (sqrt(5)-1)/2

void check_sigmas(const MarketConfig& config) {
  if (!(config.sigma_z > 0.0) || !(config.sigma_y > 0.0)) {
    throw std::invalid_argument("equilibrium: sigmas must be > 0");
  }
}

}  // namespace

LinearEquilibrium theorem1(const MarketConfig& config) {
  check_sigmas(config);
  LinearEquilibrium eq;
  eq.beta = config.sigma_y / config.sigma_z;
  eq.alpha = -eq.beta * config.mu_z;
  eq.mu = config.mu_z;
  eq.lambda = config.sigma_z / (2.0 * config.sigma_y);
  return eq;
}

LinearEquilibrium fixed_point(const MarketConfig& config, double tol) {
  check_sigmas(config);
  if (!(tol > 0.0)) throw std::invalid_argument("fixed_point: tol must be > 0");
  const double var_z = config.sigma_z * config.sigma_z;
  const double var_y = config.sigma_y * config.sigma_y;
  double lambda = 1.0;
  double beta = 1.0 / (2.0 * lambda);
  for (int iter = 0; iter < 500; ++iter) {
    const double beta_next = 1.0 / (2.0 * lambda);
    const double lambda_next =
        beta_next * var_z / (beta_next * beta_next * var_z + var_y);
    const double change =
        std::max(std::abs(beta_next - beta), std::abs(lambda_next - lambda));
    beta = beta_next;
    lambda = lambda_next;
    if (change < tol) {
      LinearEquilibrium eq;
      eq.beta = beta;
      eq.lambda = lambda;
      eq.alpha = -beta * config.mu_z;
      eq.mu = config.mu_z;
      return eq;
    }
  }
  throw std::runtime_error("fixed_point: best-response iteration did not converge");
}

double numerical_pricing(const ScalarFn& order_fn, const DistributionSpec& z_dist,
                         const DistributionSpec& y_dist, double v) {
  const QuadratureRule rule = density_rule(z_dist);
  double numerator = 0.0;
  double denominator = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double z = rule.nodes[i];
    const double mass = rule.weights[i] * pdf(z_dist, z) * pdf(y_dist, v - order_fn(z));
    numerator += z * mass;
    denominator += mass;
  }
  if (denominator < 1e-300) {
    throw std::domain_error("numerical_pricing: order flow level is unreachable");
  }
  return numerator / denominator;
}

double insider_best_response(const ScalarFn& pricing_fn, double z,
                             const DistributionSpec& y_dist, double epsilon) {
  const double sigma_y = dist_stddev(y_dist);
  const QuadratureRule y_rule = [&] {
    const double mean = dist_mean(y_dist);
    return composite_rule(mean - 12.0 * sigma_y, mean + 12.0 * sigma_y, 40, 10);
  }();

  auto payoff = [&](double x) {
    double expected_price = 0.0;
    for (std::size_t i = 0; i < y_rule.size(); ++i) {
      const double y = y_rule.nodes[i];
      expected_price += y_rule.weights[i] * pdf(y_dist, y) * pricing_fn(x + y);
    }
    return (z - expected_price) * x - epsilon * std::abs(x);
  };

  const double half_span = 20.0 * sigma_y;
  const int grid_points = 4001;
  const double step = 2.0 * half_span / (grid_points - 1);
  double best_x = 0.0;
  double best_payoff = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid_points; ++i) {
    const double x = -half_span + i * step;
    const double p = payoff(x);
    const bool better = p > best_payoff + 1e-12;
    const bool tie_smaller = std::abs(p - best_payoff) <= 1e-12 &&
                             std::abs(x) < std::abs(best_x);
    if (better || tie_smaller) {
      best_payoff = p;
      best_x = x;
    }
  }

  // Golden-section refinement inside one grid cell on each side.
  double lo = best_x - step;
  double hi = best_x + step;
  double x1 = hi - kGoldenRatio * (hi - lo);
  double x2 = lo + kGoldenRatio * (hi - lo);
  double f1 = payoff(x1);
  double f2 = payoff(x2);
  for (int iter = 0; iter < 120 && (hi - lo) > 1e-11; ++iter) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kGoldenRatio * (hi - lo);
      f2 = payoff(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kGoldenRatio * (hi - lo);
      f1 = payoff(x1);
    }
  }
  const double refined = 0.5 * (lo + hi);
  const double refined_payoff = payoff(refined);
  if (refined_payoff <= 1e-12) return 0.0;  // trading cannot beat staying out
  return refined;
}

PlateauPrediction plateau_prediction(const MarketConfig& config) {
  check_sigmas(config);
  if (!(config.epsilon >= 0.0)) {
    throw std::invalid_argument("plateau_prediction: epsilon must be >= 0");
  }
  PlateauPrediction p;
  p.lower = config.mu_z - config.epsilon;
  p.upper = config.mu_z + config.epsilon;
  p.outside_slope = 2.0 * config.sigma_y / config.sigma_z;
  return p;
}

}  // namespace kyle
