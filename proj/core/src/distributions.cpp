#include "kyle/distributions.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace kyle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEulerGamma = std::numbers::egamma;
constexpr double kPi = std::numbers::pi;

double normal_pdf(double x, double mean, double sigma) {
  const double t = (x - mean) / sigma;
  return std::exp(-0.5 * t * t) / (sigma * std::sqrt(2.0 * kPi));
}

// Marsaglia-Tsang, with the usual boost for shape < 1.
double gamma_std(double shape, RngStream& rng) {
  if (shape < 1.0) {
    const double u = rng.uniform_open();
    return gamma_std(shape + 1.0, rng) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0.0;
    double v = 0.0;
    do {
      x = rng.normal_std();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform_open();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

}  // namespace

std::string family_name(DistFamily family) {
  switch (family) {
    case DistFamily::kNormal: return "normal";
    case DistFamily::kLaplace: return "laplace";
    case DistFamily::kGumbel: return "gumbel";
    case DistFamily::kShiftedGamma: return "shifted_gamma";
    case DistFamily::kBimodal: return "bimodal";
  }
  throw std::invalid_argument("unknown distribution family");
}

DistFamily family_from_name(const std::string& name) {
  if (name == "normal") return DistFamily::kNormal;
  if (name == "laplace") return DistFamily::kLaplace;
  if (name == "gumbel") return DistFamily::kGumbel;
  if (name == "shifted_gamma") return DistFamily::kShiftedGamma;
  if (name == "bimodal") return DistFamily::kBimodal;
  throw std::invalid_argument("unknown distribution family: " + name);
}

void validate(const DistributionSpec& spec) {
  std::visit(
      [](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, NormalParams> ||
                      std::is_same_v<T, LaplaceParams> ||
                      std::is_same_v<T, GumbelParams>) {
          if (!(p.scale > 0.0)) throw std::invalid_argument("scale must be > 0");
        } else if constexpr (std::is_same_v<T, ShiftedGammaParams>) {
          if (!(p.shape > 0.0)) throw std::invalid_argument("gamma shape must be > 0");
          if (!(p.scale > 0.0)) throw std::invalid_argument("gamma scale must be > 0");
          if (!std::isfinite(p.shift)) throw std::invalid_argument("gamma shift must be finite");
        } else if constexpr (std::is_same_v<T, BimodalParams>) {
          if (!(p.component_sigma > 0.0))
            throw std::invalid_argument("bimodal component sigma must be > 0");
          if (!(p.weight_low > 0.0 && p.weight_low < 1.0))
            throw std::invalid_argument("bimodal weight must lie in (0, 1)");
        }
      },
      spec.params);
}

double dist_mean(const DistributionSpec& spec) {
  return std::visit(
      [](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, NormalParams> ||
                      std::is_same_v<T, LaplaceParams>) {
          return p.location;
        } else if constexpr (std::is_same_v<T, GumbelParams>) {
          return p.location + p.scale * kEulerGamma;
        } else if constexpr (std::is_same_v<T, ShiftedGammaParams>) {
          return p.shape * p.scale + p.shift;
        } else {
          return p.weight_low * p.mean_low + (1.0 - p.weight_low) * p.mean_high;
        }
      },
      spec.params);
}

double dist_variance(const DistributionSpec& spec) {
  return std::visit(
      [&spec](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, NormalParams>) {
          return p.scale * p.scale;
        } else if constexpr (std::is_same_v<T, LaplaceParams>) {
          return 2.0 * p.scale * p.scale;
        } else if constexpr (std::is_same_v<T, GumbelParams>) {
          return kPi * kPi / 6.0 * p.scale * p.scale;
        } else if constexpr (std::is_same_v<T, ShiftedGammaParams>) {
          return p.shape * p.scale * p.scale;
        } else {
          const double m = dist_mean(spec);
          const double s2 = p.component_sigma * p.component_sigma;
          return p.weight_low * (s2 + p.mean_low * p.mean_low) +
                 (1.0 - p.weight_low) * (s2 + p.mean_high * p.mean_high) - m * m;
        }
      },
      spec.params);
}

double dist_stddev(const DistributionSpec& spec) {
  return std::sqrt(dist_variance(spec));
}

std::pair<double, double> dist_support(const DistributionSpec& spec) {
  if (const auto* g = std::get_if<ShiftedGammaParams>(&spec.params)) {
    return {g->shift, kInf};
  }
  return {-kInf, kInf};
}

DistributionSpec moment_match(DistFamily family, double target_mean,
                              double target_variance) {
  if (!(target_variance > 0.0)) {
    throw std::invalid_argument("moment_match: target variance must be > 0");
  }
  DistributionSpec spec;
  switch (family) {
    case DistFamily::kNormal:
      spec.params = NormalParams{target_mean, std::sqrt(target_variance)};
      break;
    case DistFamily::kLaplace:
      spec.params = LaplaceParams{target_mean, std::sqrt(target_variance / 2.0)};
      break;
    case DistFamily::kGumbel: {
      const double scale = std::sqrt(6.0 * target_variance) / kPi;
      spec.params = GumbelParams{target_mean - scale * kEulerGamma, scale};
      break;
    }
    default:
      throw std::invalid_argument(
          "moment_match supports normal, laplace and gumbel; use the dedicated "
          "constructor for " + family_name(family));
  }
  return spec;
}

DistributionSpec shifted_gamma_spec() {
  DistributionSpec spec;
  spec.params = ShiftedGammaParams{0.5, 2.0, -1.0};
  return spec;
}

DistributionSpec bimodal_spec(double target_mean, double target_variance) {
  if (!(target_variance > 0.0)) {
    throw std::invalid_argument("bimodal_spec: target variance must be > 0");
  }
  const double d = std::sqrt(target_variance / 2.0);
  DistributionSpec spec;
  spec.params = BimodalParams{target_mean - d, target_mean + d, d, 0.5};
  return spec;
}

double pdf(const DistributionSpec& spec, double x) {
  return std::visit(
      [x](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, NormalParams>) {
          return normal_pdf(x, p.location, p.scale);
        } else if constexpr (std::is_same_v<T, LaplaceParams>) {
          return std::exp(-std::abs(x - p.location) / p.scale) / (2.0 * p.scale);
        } else if constexpr (std::is_same_v<T, GumbelParams>) {
          const double t = (x - p.location) / p.scale;
          return std::exp(-t - std::exp(-t)) / p.scale;
        } else if constexpr (std::is_same_v<T, ShiftedGammaParams>) {
          const double u = x - p.shift;
          if (u <= 0.0) return 0.0;
          return std::exp((p.shape - 1.0) * std::log(u) - u / p.scale -
                          std::lgamma(p.shape) - p.shape * std::log(p.scale));
        } else {
          return p.weight_low * normal_pdf(x, p.mean_low, p.component_sigma) +
                 (1.0 - p.weight_low) * normal_pdf(x, p.mean_high, p.component_sigma);
        }
      },
      spec.params);
}

double sample_one(const DistributionSpec& spec, RngStream& rng) {
  return std::visit(
      [&rng](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, NormalParams>) {
          return rng.normal(p.location, p.scale);
        } else if constexpr (std::is_same_v<T, LaplaceParams>) {
          const double u = rng.uniform_open();
          return u < 0.5 ? p.location + p.scale * std::log(2.0 * u)
                         : p.location - p.scale * std::log(2.0 * (1.0 - u));
        } else if constexpr (std::is_same_v<T, GumbelParams>) {
          return p.location - p.scale * std::log(-std::log(rng.uniform_open()));
        } else if constexpr (std::is_same_v<T, ShiftedGammaParams>) {
          return p.scale * gamma_std(p.shape, rng) + p.shift;
        } else {
          const double mean = rng.uniform01() < p.weight_low ? p.mean_low : p.mean_high;
          return rng.normal(mean, p.component_sigma);
        }
      },
      spec.params);
}

std::vector<double> sample(const DistributionSpec& spec, std::size_t n,
                           RngStream& rng) {
  if (n == 0) throw std::invalid_argument("sample: n must be >= 1");
  std::vector<double> draws(n);
  for (auto& d : draws) d = sample_one(spec, rng);
  return draws;
}

MarketConfig::MarketConfig() : MarketConfig(0.5, 2.0, 1.0, 0.0) {}

MarketConfig::MarketConfig(double mu_z_, double sigma_z_, double sigma_y_,
                           double epsilon_)
    : mu_z(mu_z_),
      sigma_z(sigma_z_),
      sigma_y(sigma_y_),
      epsilon(epsilon_),
      z_dist(moment_match(DistFamily::kNormal, mu_z_, sigma_z_ * sigma_z_)),
      y_dist(moment_match(DistFamily::kNormal, 0.0, sigma_y_ * sigma_y_)) {}

MarketConfig MarketConfig::gaussian(double mu_z, double sigma_z, double sigma_y,
                                    double epsilon) {
  return MarketConfig(mu_z, sigma_z, sigma_y, epsilon);
}

void MarketConfig::validate() const {
  if (!(sigma_z > 0.0)) throw std::invalid_argument("sigma_z must be > 0");
  if (!(sigma_y > 0.0)) throw std::invalid_argument("sigma_y must be > 0");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be >= 0");
  kyle::validate(z_dist);
  kyle::validate(y_dist);
  const double tol = 1e-9;
  if (std::abs(dist_mean(z_dist) - mu_z) > tol ||
      std::abs(dist_variance(z_dist) - sigma_z * sigma_z) > tol * sigma_z * sigma_z) {
    throw std::invalid_argument("z_dist moments disagree with (mu_z, sigma_z)");
  }
  if (std::abs(dist_mean(y_dist)) > tol ||
      std::abs(dist_variance(y_dist) - sigma_y * sigma_y) > tol * sigma_y * sigma_y) {
    throw std::invalid_argument("y_dist moments disagree with (0, sigma_y)");
  }
}

}  // namespace kyle
