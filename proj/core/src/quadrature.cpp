#include "kyle/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <variant>

namespace kyle {

namespace {

// Newton iteration on the Legendre recurrence; roots are symmetric so only
// half of them are solved for.
QuadratureRule compute_gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = 1.0;
      double p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-15) break;
    }
    rule.nodes[i] = -z;
    rule.nodes[n - 1 - i] = z;
    rule.weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    rule.weights[n - 1 - i] = rule.weights[i];
  }
  return rule;
}

void append_panel(QuadratureRule& out, const QuadratureRule& ref, double lo,
                  double hi) {
  const double mid = 0.5 * (lo + hi);
  const double halfw = 0.5 * (hi - lo);
  for (std::size_t i = 0; i < ref.nodes.size(); ++i) {
    out.nodes.push_back(mid + halfw * ref.nodes[i]);
    out.weights.push_back(halfw * ref.weights[i]);
  }
}

}  // namespace

const QuadratureRule& gauss_legendre_reference(int n) {
  static std::mutex mutex;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) {
    it = cache.emplace(n, compute_gauss_legendre(n)).first;
  }
  return it->second;
}

QuadratureRule composite_rule(double a, double b, int panels,
                              int nodes_per_panel) {
  if (!(b > a)) throw std::invalid_argument("composite_rule: need b > a");
  if (panels < 1) throw std::invalid_argument("composite_rule: panels >= 1");
  const QuadratureRule& ref = gauss_legendre_reference(nodes_per_panel);
  QuadratureRule rule;
  rule.nodes.reserve(static_cast<std::size_t>(panels) * nodes_per_panel);
  rule.weights.reserve(static_cast<std::size_t>(panels) * nodes_per_panel);
  const double width = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    append_panel(rule, ref, a + p * width, a + (p + 1) * width);
  }
  return rule;
}

QuadratureRule graded_left_rule(double a, double b, int levels, int bulk_panels,
                                int nodes_per_panel) {
  if (!(b > a)) throw std::invalid_argument("graded_left_rule: need b > a");
  const QuadratureRule& ref = gauss_legendre_reference(nodes_per_panel);
  QuadratureRule rule;
  // Graded zone covers the first unit of the interval (or all of it when the
  // interval is shorter), split as [a + w/2^{k+1}, a + w/2^k].
  const double graded_width = std::min(1.0, 0.5 * (b - a));
  for (int k = levels - 1; k >= 0; --k) {
    const double hi = a + graded_width * std::pow(0.5, k);
    const double lo = (k == levels - 1) ? a : a + graded_width * std::pow(0.5, k + 1);
    append_panel(rule, ref, lo, hi);
  }
  const double bulk_lo = a + graded_width;
  const double width = (b - bulk_lo) / bulk_panels;
  for (int p = 0; p < bulk_panels; ++p) {
    append_panel(rule, ref, bulk_lo + p * width, bulk_lo + (p + 1) * width);
  }
  return rule;
}

QuadratureRule density_rule(const DistributionSpec& spec) {
  const double mean = dist_mean(spec);
  const double sd = dist_stddev(spec);
  const auto [support_lo, support_hi] = dist_support(spec);
  double lo = mean - 12.0 * sd;
  double hi = mean + 12.0 * sd;
  if (hi > support_hi) hi = support_hi;
  if (lo < support_lo) lo = support_lo;

  bool singular_left = false;
  if (const auto* g = std::get_if<ShiftedGammaParams>(&spec.params)) {
    // shape < 1 densities blow up at the support edge; grade toward it.
    // The gamma tail is also heavier than 12 normal sigmas, so stretch.
    hi = mean + 24.0 * sd;
    if (g->shape < 1.0 && lo <= g->shift) {
      lo = g->shift;
      singular_left = true;
    }
  }
  if (singular_left) {
    return graded_left_rule(lo, hi, 60, 140, 10);
  }
  return composite_rule(lo, hi, 200, 10);
}

}  // namespace kyle
