#pragma once

#include <cstddef>
#include <vector>

#include "kyle/distributions.hpp"

namespace kyle {

// Nodes and weights for integrating over some interval(s). Weights include
// the interval scaling, so integrate() is a plain dot product with f(nodes).
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

// Gauss-Legendre abscissas/weights on [-1, 1]. Cached per n; thread-safe.
const QuadratureRule& gauss_legendre_reference(int n);

// Uniform composite Gauss-Legendre rule on [a, b].
QuadratureRule composite_rule(double a, double b, int panels, int nodes_per_panel);

// Composite rule on [a, b] with panels geometrically refined toward the left
// endpoint (levels halvings), for integrable endpoint singularities such as
// a gamma density with shape < 1. The bulk of the interval keeps uniform
// panels.
QuadratureRule graded_left_rule(double a, double b, int levels, int bulk_panels,
                                int nodes_per_panel);

template <typename F>
double integrate(const QuadratureRule& rule, F&& f) {
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    acc += rule.weights[i] * f(rule.nodes[i]);
  }
  return acc;
}

// Rule suited to integrals of h(x) * pdf(spec, x): the domain is the spec's
// mean +/- 12 standard deviations clipped to the support, with panels graded
// toward a singular support endpoint when the family needs it. Roughly 2000
// nodes in total.
QuadratureRule density_rule(const DistributionSpec& spec);

}  // namespace kyle
