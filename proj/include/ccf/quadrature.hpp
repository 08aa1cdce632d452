#pragma once

#include <vector>

namespace ccf {

// n-point Gauss-Legendre rule on [-1, 1].
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;
};

GaussLegendre gauss_legendre(int n);

// Composite Gauss-Legendre integral of f over [a, b] with `panels` panels.
template <typename F>
double integrate(F&& f, double a, double b, const GaussLegendre& rule, int panels = 1) {
  const double width = (b - a) / panels;
  double sum = 0.0;
  for (int k = 0; k < panels; ++k) {
    const double mid = a + (k + 0.5) * width;
    double panel = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) panel += rule.weights[i] * f(mid + 0.5 * width * rule.nodes[i]);
    sum += 0.5 * width * panel;
  }
  return sum;
}

}  // namespace ccf
