#pragma once

#include <cstddef>
#include <functional>

#include "kyle/distributions.hpp"
#include "kyle/equilibrium.hpp"
#include "kyle/mlp.hpp"

namespace kyle {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 1.0;
};

// Ordinary least squares over an even grid on [lo, hi]. A constant function
// is fit exactly, so its r2 is reported as 1.
LineFit fit_linear(const ScalarFn& fn, double lo, double hi, int n_grid);

// Two-segment piecewise-linear fit: the breakpoint minimizing total squared
// error is scanned over the grid, keeping at least min_side_fraction of the
// points on each side.
struct TwoSegmentFit {
  double break_x = 0.0;
  LineFit left;
  LineFit right;
};

TwoSegmentFit fit_two_segment(const ScalarFn& fn, double lo, double hi,
                              int n_grid, double min_side_fraction = 0.1);

// Linear fits of both trained agents against the theorem1 lines, over the
// regions covered well by training: z in mu_z +/- 2 sigma_z for the insider
// and v in +/- 2 s_v for the market maker, where s_v^2 = beta^2 sigma_z^2 +
// sigma_y^2 is the total-order-flow variance at equilibrium.
struct EquilibriumEstimate {
  LineFit insider_fit;
  LineFit mm_fit;
  double z_lo = 0.0, z_hi = 0.0;
  double v_lo = 0.0, v_hi = 0.0;
  double max_abs_deviation_insider = 0.0;
  double max_abs_deviation_mm = 0.0;
};

EquilibriumEstimate estimate_equilibrium(const Mlp& insider, const Mlp& mm,
                                         const MarketConfig& config,
                                         int n_grid = 201);

// No-trade window of an order function. The scan runs over mu_z +/- 3 sigma_z
// on 801 points; the plateau is the maximal contiguous sub-threshold run
// containing the grid point nearest mu_z. Because any function crossing zero
// with slope ~beta spends 2*threshold/beta under the threshold, the reported
// endpoints shrink each side by threshold/beta; a straight line therefore
// collapses to an empty window and is not detected.
struct PlateauEstimate {
  double lower = 0.0;
  double upper = 0.0;
  bool detected = false;
  double threshold_used = 0.0;
  double raw_lower = 0.0;  // uncorrected sub-threshold run
  double raw_upper = 0.0;
};

// Default threshold (threshold <= 0): 5% of the typical order magnitude
// beta * sigma_z = sigma_y.
PlateauEstimate detect_plateau(const ScalarFn& order_fn, const MarketConfig& config,
                               double threshold = 0.0);

// Monte Carlo estimate of E[(Z - M(I(Z)+Y)) I(Z) - epsilon |I(Z)|].
double expected_insider_profit(const Mlp& insider, const Mlp& mm,
                               const MarketConfig& config, std::size_t n_mc,
                               RngStream& rng);

// Monte Carlo estimate of -E[(Z - M(V)) V]; zero at equilibrium.
double expected_market_maker_profit(const Mlp& insider, const Mlp& mm,
                                    const MarketConfig& config, std::size_t n_mc,
                                    RngStream& rng);

}  // namespace kyle
