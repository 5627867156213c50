#include "kyle/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace kyle {

namespace {

LineFit ols(const std::vector<double>& xs, const std::vector<double>& ys,
            std::size_t begin, std::size_t end) {
  const std::size_t n = end - begin;
  double mean_x = 0.0;
  double mean_y = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    mean_x += xs[i];
    mean_y += ys[i];
  }
  mean_x /= static_cast<double>(n);
  mean_y /= static_cast<double>(n);
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    const double dx = xs[i] - mean_x;
    sxx += dx * dx;
    sxy += dx * (ys[i] - mean_y);
  }
  LineFit fit;
  fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  fit.intercept = mean_y - fit.slope * mean_x;
  double sse = 0.0;
  double sst = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    const double resid = ys[i] - (fit.intercept + fit.slope * xs[i]);
    const double dev = ys[i] - mean_y;
    sse += resid * resid;
    sst += dev * dev;
  }
  fit.r2 = sst > 0.0 ? 1.0 - sse / sst : 1.0;
  return fit;
}

std::pair<std::vector<double>, std::vector<double>> sample_grid(const ScalarFn& fn,
                                                                double lo, double hi,
                                                                int n_grid) {
  std::vector<double> xs(n_grid);
  std::vector<double> ys(n_grid);
  const double step = (hi - lo) / (n_grid - 1);
  for (int i = 0; i < n_grid; ++i) {
    xs[i] = lo + i * step;
    ys[i] = fn(xs[i]);
  }
  return {std::move(xs), std::move(ys)};
}

}  // namespace

LineFit fit_linear(const ScalarFn& fn, double lo, double hi, int n_grid) {
  if (n_grid < 3) throw std::invalid_argument("fit_linear: n_grid must be >= 3");
  if (!(hi > lo)) throw std::invalid_argument("fit_linear: need hi > lo");
  const auto [xs, ys] = sample_grid(fn, lo, hi, n_grid);
  return ols(xs, ys, 0, xs.size());
}

TwoSegmentFit fit_two_segment(const ScalarFn& fn, double lo, double hi, int n_grid,
                              double min_side_fraction) {
  if (n_grid < 7) throw std::invalid_argument("fit_two_segment: n_grid must be >= 7");
  const auto [xs, ys] = sample_grid(fn, lo, hi, n_grid);
  const auto n = static_cast<std::size_t>(n_grid);
  const auto min_side = std::max<std::size_t>(
      3, static_cast<std::size_t>(min_side_fraction * n_grid));

  auto sse_of = [&](std::size_t begin, std::size_t end) {
    const LineFit f = ols(xs, ys, begin, end);
    double sse = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const double r = ys[i] - (f.intercept + f.slope * xs[i]);
      sse += r * r;
    }
    return sse;
  };

  std::size_t best_break = min_side;
  double best_sse = std::numeric_limits<double>::infinity();
  for (std::size_t k = min_side; k + min_side <= n; ++k) {
    const double total = sse_of(0, k) + sse_of(k, n);
    if (total < best_sse) {
      best_sse = total;
      best_break = k;
    }
  }
  TwoSegmentFit fit;
  fit.break_x = xs[best_break - 1];
  fit.left = ols(xs, ys, 0, best_break);
  fit.right = ols(xs, ys, best_break, n);
  return fit;
}

EquilibriumEstimate estimate_equilibrium(const Mlp& insider, const Mlp& mm,
                                         const MarketConfig& config, int n_grid) {
  const LinearEquilibrium eq = theorem1(config);
  const double s_v = std::sqrt(eq.beta * eq.beta * config.sigma_z * config.sigma_z +
                               config.sigma_y * config.sigma_y);
  EquilibriumEstimate est;
  est.z_lo = config.mu_z - 2.0 * config.sigma_z;
  est.z_hi = config.mu_z + 2.0 * config.sigma_z;
  est.v_lo = -2.0 * s_v;
  est.v_hi = 2.0 * s_v;

  auto insider_fn = [&](double z) { return forward(insider, z); };
  auto mm_fn = [&](double v) { return forward(mm, v); };
  est.insider_fit = fit_linear(insider_fn, est.z_lo, est.z_hi, n_grid);
  est.mm_fit = fit_linear(mm_fn, est.v_lo, est.v_hi, n_grid);

  const double z_step = (est.z_hi - est.z_lo) / (n_grid - 1);
  const double v_step = (est.v_hi - est.v_lo) / (n_grid - 1);
  for (int i = 0; i < n_grid; ++i) {
    const double z = est.z_lo + i * z_step;
    const double v = est.v_lo + i * v_step;
    est.max_abs_deviation_insider = std::max(
        est.max_abs_deviation_insider, std::abs(insider_fn(z) - eq.insider(z)));
    est.max_abs_deviation_mm =
        std::max(est.max_abs_deviation_mm, std::abs(mm_fn(v) - eq.price(v)));
  }
  return est;
}

PlateauEstimate detect_plateau(const ScalarFn& order_fn, const MarketConfig& config,
                               double threshold) {
  const LinearEquilibrium eq = theorem1(config);
  PlateauEstimate est;
  est.threshold_used =
      threshold > 0.0 ? threshold : 0.05 * eq.beta * config.sigma_z;

  const int n_grid = 801;
  const double lo = config.mu_z - 3.0 * config.sigma_z;
  const double hi = config.mu_z + 3.0 * config.sigma_z;
  const double step = (hi - lo) / (n_grid - 1);
  std::vector<double> values(n_grid);
  for (int i = 0; i < n_grid; ++i) values[i] = order_fn(lo + i * step);

  const int center = static_cast<int>(std::lround((config.mu_z - lo) / step));
  est.raw_lower = est.raw_upper = config.mu_z;
  est.lower = est.upper = config.mu_z;
  if (std::abs(values[center]) >= est.threshold_used) {
    return est;  // no sub-threshold run at the prior mean
  }
  int run_lo = center;
  int run_hi = center;
  while (run_lo > 0 && std::abs(values[run_lo - 1]) < est.threshold_used) --run_lo;
  while (run_hi + 1 < n_grid && std::abs(values[run_hi + 1]) < est.threshold_used)
    ++run_hi;
  est.raw_lower = lo + run_lo * step;
  est.raw_upper = lo + run_hi * step;

  // A zero crossing at slope beta spends threshold/beta under the threshold
  // on each side; shrink by that margin so a plain line yields an empty
  // window while a genuine flat region keeps its true edges.
  const double margin = est.threshold_used / eq.beta;
  const double corrected_lower = est.raw_lower + margin;
  const double corrected_upper = est.raw_upper - margin;
  est.detected = (run_hi - run_lo + 1 >= 3) && (corrected_upper > corrected_lower);
  if (est.detected) {
    est.lower = corrected_lower;
    est.upper = corrected_upper;
  } else {
    est.lower = est.upper = 0.5 * (corrected_lower + corrected_upper);
  }
  return est;
}

double expected_insider_profit(const Mlp& insider, const Mlp& mm,
                               const MarketConfig& config, std::size_t n_mc,
                               RngStream& rng) {
  if (n_mc == 0) throw std::invalid_argument("expected_insider_profit: n_mc >= 1");
  RngStream z_rng = rng.derive(1);
  RngStream y_rng = rng.derive(2);
  double acc = 0.0;
  for (std::size_t i = 0; i < n_mc; ++i) {
    const double z = sample_one(config.z_dist, z_rng);
    const double y = sample_one(config.y_dist, y_rng);
    const double x = forward(insider, z);
    const double p = forward(mm, x + y);
    acc += (z - p) * x - config.epsilon * std::abs(x);
  }
  return acc / static_cast<double>(n_mc);
}

double expected_market_maker_profit(const Mlp& insider, const Mlp& mm,
                                    const MarketConfig& config, std::size_t n_mc,
                                    RngStream& rng) {
  if (n_mc == 0) throw std::invalid_argument("expected_market_maker_profit: n_mc >= 1");
  RngStream z_rng = rng.derive(1);
  RngStream y_rng = rng.derive(2);
  double acc = 0.0;
  for (std::size_t i = 0; i < n_mc; ++i) {
    const double z = sample_one(config.z_dist, z_rng);
    const double y = sample_one(config.y_dist, y_rng);
    const double v = forward(insider, z) + y;
    acc += -(z - forward(mm, v)) * v;
  }
  return acc / static_cast<double>(n_mc);
}

}  // namespace kyle
