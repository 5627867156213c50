#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "kyle/rng.hpp"

namespace kyle {

enum class DistFamily { kNormal, kLaplace, kGumbel, kShiftedGamma, kBimodal };

std::string family_name(DistFamily family);
DistFamily family_from_name(const std::string& name);

struct NormalParams {
  double location = 0.0;
  double scale = 1.0;
};

struct LaplaceParams {
  double location = 0.0;
  double scale = 1.0;
};

// Max-Gumbel (right skew).
struct GumbelParams {
  double location = 0.0;
  double scale = 1.0;
};

// Gamma(shape, scale) translated by `shift`; support is (shift, +inf).
struct ShiftedGammaParams {
  double shape = 1.0;
  double scale = 1.0;
  double shift = 0.0;
};

// Two normal components with a common standard deviation.
struct BimodalParams {
  double mean_low = 0.0;
  double mean_high = 0.0;
  double component_sigma = 1.0;
  double weight_low = 0.5;
};

// One sampling family for the asset value Z or the noise order Y, with
// density evaluation. Invariants are checked by validate().
struct DistributionSpec {
  std::variant<NormalParams, LaplaceParams, GumbelParams, ShiftedGammaParams,
               BimodalParams>
      params = NormalParams{};

  DistFamily family() const { return static_cast<DistFamily>(params.index()); }
};

// Throws std::invalid_argument when a scale/shape is non-positive or the
// mixture weight leaves (0, 1).
void validate(const DistributionSpec& spec);

// Analytic first two moments and support.
double dist_mean(const DistributionSpec& spec);
double dist_variance(const DistributionSpec& spec);
double dist_stddev(const DistributionSpec& spec);
std::pair<double, double> dist_support(const DistributionSpec& spec);

// Spec with analytic mean/variance equal to the targets. Supports Normal,
// Laplace and Gumbel; the other families have dedicated constructors below.
DistributionSpec moment_match(DistFamily family, double target_mean,
                              double target_variance);

// Gamma(shape 0.5, scale 2) shifted by -1: mean 0, variance 2, heavy right skew.
DistributionSpec shifted_gamma_spec();

// Equal-weight mixture of N(m-d, s^2) and N(m+d, s^2) with d = s, matched to
// the target mean/variance (mean m, variance d^2 + s^2).
DistributionSpec bimodal_spec(double target_mean, double target_variance);

double pdf(const DistributionSpec& spec, double x);

double sample_one(const DistributionSpec& spec, RngStream& rng);
std::vector<double> sample(const DistributionSpec& spec, std::size_t n,
                           RngStream& rng);

// Model parameters for one market: prior of the liquidation value Z, noise
// order scale, proportional transaction cost, and the sampling families.
struct MarketConfig {
  double mu_z = 0.5;
  double sigma_z = 2.0;
  double sigma_y = 1.0;
  double epsilon = 0.0;
  DistributionSpec z_dist;
  DistributionSpec y_dist;

  MarketConfig();
  MarketConfig(double mu_z, double sigma_z, double sigma_y, double epsilon = 0.0);

  // Gaussian Z and Y matched to (mu_z, sigma_z^2) and (0, sigma_y^2).
  static MarketConfig gaussian(double mu_z, double sigma_z, double sigma_y,
                               double epsilon = 0.0);

  // Throws std::invalid_argument on non-positive sigmas, negative epsilon,
  // invalid distribution specs, or distributions whose analytic moments
  // disagree with (mu_z, sigma_z) / (0, sigma_y).
  void validate() const;
};

}  // namespace kyle
