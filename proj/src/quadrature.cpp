#include "mpet/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mpet {

double legendre(int k, double t) {
  if (k == 0) return 1.0;
  double p0 = 1.0, p1 = t;
  for (int n = 1; n < k; ++n) {
    double p2 = ((2 * n + 1) * t * p1 - n * p0) / (n + 1);
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

double legendre_derivative(int k, double t) {
  // P'_k = sum over j = k-1, k-3, ... of (2j+1) P_j
  double d = 0;
  for (int j = k - 1; j >= 0; j -= 2) d += (2 * j + 1) * legendre(j, t);
  return d;
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double dt = legendre(n, t) / legendre_derivative(n, t);
      t -= dt;
      if (std::abs(dt) < 1e-16) break;
    }
    double dp = legendre_derivative(n, t);
    nodes[n - 1 - i] = t;
    weights[n - 1 - i] = 2.0 / ((1 - t * t) * dp * dp);
  }
}

QuadratureRule segment_rule(int degree) {
  int n = degree / 2 + 1;
  std::vector<double> t, w;
  gauss_legendre(n, t, w);
  QuadratureRule rule;
  rule.degree = degree;
  for (int i = 0; i < n; ++i) {
    rule.points.emplace_back(0.5 * (t[i] + 1), 0.0);
    rule.weights.push_back(0.5 * w[i]);
  }
  return rule;
}

QuadratureRule triangle_rule(int degree) {
  // x = u (1 - v), y = v; the collapse adds one degree in v
  int n = (degree + 1) / 2 + 1;
  std::vector<double> t, w;
  gauss_legendre(n, t, w);
  QuadratureRule rule;
  rule.degree = degree;
  for (int i = 0; i < n; ++i) {
    double u = 0.5 * (t[i] + 1);
    for (int j = 0; j < n; ++j) {
      double v = 0.5 * (t[j] + 1);
      rule.points.emplace_back(u * (1 - v), v);
      rule.weights.push_back(0.25 * w[i] * w[j] * (1 - v));
    }
  }
  return rule;
}

}  // namespace mpet
