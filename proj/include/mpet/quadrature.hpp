#pragma once

#include <vector>

#include <Eigen/Dense>

namespace mpet {

/// Quadrature rule on the reference triangle {(0,0),(1,0),(0,1)} or on [0,1].
///
/// For segment rules only the x coordinate of each point is used.
struct QuadratureRule {
  std::vector<Eigen::Vector2d> points;
  std::vector<double> weights;
  int degree = 0;

  std::size_t size() const { return weights.size(); }
};

/// Gauss-Legendre rule on [0,1], exact for polynomials of the given degree.
QuadratureRule segment_rule(int degree);

/// Collapsed (Duffy) Gauss rule on the reference triangle, exact up to `degree`.
QuadratureRule triangle_rule(int degree);

/// Gauss-Legendre nodes and weights on [-1,1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

/// Legendre polynomial P_k and its derivative at t in [-1,1].
double legendre(int k, double t);
double legendre_derivative(int k, double t);

}  // namespace mpet
