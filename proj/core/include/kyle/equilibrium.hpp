#pragma once

#include <functional>

#include "kyle/distributions.hpp"

namespace kyle {

// Constants of the unique linear equilibrium: insider order X(z) = alpha +
// beta z, pricing rule P(v) = mu + lambda v. For sigmas (sigma_z, sigma_y):
// beta = sigma_y/sigma_z, alpha = -beta mu_z, mu = mu_z and lambda =
// sigma_z/(2 sigma_y). lambda is pinned by requiring both best responses to
// hold at once: beta = 1/(2 lambda) together with the least-squares
// projection lambda = beta sigma_z^2 / (beta^2 sigma_z^2 + sigma_y^2).
struct LinearEquilibrium {
  double alpha = 0.0;
  double beta = 0.0;
  double mu = 0.0;
  double lambda = 0.0;

  double insider(double z) const { return alpha + beta * z; }
  double price(double v) const { return mu + lambda * v; }
};

LinearEquilibrium theorem1(const MarketConfig& config);

// Alternating best responses beta <- 1/(2 lambda),
// lambda <- beta sigma_z^2/(beta^2 sigma_z^2 + sigma_y^2) from lambda_0 = 1
// until successive change < tol. Agrees with theorem1 to within tol; throws
// std::runtime_error if the iteration cap is hit.
LinearEquilibrium fixed_point(const MarketConfig& config, double tol = 1e-12);

using ScalarFn = std::function<double(double)>;

// Conditional-expectation price E[Z | X(Z) + Y = v] for an arbitrary order
// function, by fixed-node quadrature over the z domain:
//   integral of z f_Z(z) f_Y(v - X(z)) dz / integral of f_Z(z) f_Y(v - X(z)) dz.
// Throws std::domain_error when the denominator underflows (v unreachable).
double numerical_pricing(const ScalarFn& order_fn, const DistributionSpec& z_dist,
                         const DistributionSpec& y_dist, double v);

// argmax over x of (z - E[pricing_fn(x+Y)]) x - epsilon |x|, found by a coarse
// grid scan over [-20 sigma_y, 20 sigma_y] followed by golden-section
// refinement. Ties break toward smaller |x|; when the best payoff is within
// 1e-12 of zero the insider does not trade and 0 is returned.
double insider_best_response(const ScalarFn& pricing_fn, double z,
                             const DistributionSpec& y_dist, double epsilon);

// No-trade window under a proportional transaction cost, assuming the market
// maker keeps the equilibrium pricing rule: [mu_z - epsilon, mu_z + epsilon].
// outside_slope is the slope 2 sigma_y/sigma_z of the zero-expected-payoff
// line x(z) = (2 sigma_y/sigma_z)(z - (mu_z +/- epsilon)).
struct PlateauPrediction {
  double lower = 0.0;
  double upper = 0.0;
  double outside_slope = 0.0;
};

PlateauPrediction plateau_prediction(const MarketConfig& config);

}  // namespace kyle
