#pragma once

#include <array>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "mpet/assembly.hpp"

namespace mpet {

/// Smooth exact solution of the scaled stationary system with derivatives.
struct ExactSolution {
  int networks = 0;
  std::function<Eigen::Vector2d(const Point&)> u;
  std::function<Eigen::Matrix2d(const Point&)> grad_u;  // row a = grad u_a
  std::function<std::array<Eigen::Matrix2d, 2>(const Point&)> hess_u;
  std::vector<std::function<double(const Point&)>> p;
  std::vector<std::function<Eigen::Vector2d(const Point&)>> grad_p;
  std::vector<std::function<Eigen::Matrix2d(const Point&)>> hess_p;

  static ExactSolution zero(int networks);
  /// u = (phi, phi) with phi = sin(pi x) sin(pi y) on the unit square and
  /// p_1 = x^2(1-x)^2 y^2(1-y)^2 - 1/900, p_2 = sin^2(pi x) sin^2(pi y) - 1/4.
  static ExactSolution trigonometric();

  /// w_i = -R_i grad p_i.
  Eigen::Vector2d flux(int i, const Point& x, const ScaledParameters& scaled) const;
};

/// f and g_i obtained by inserting the exact solution into the strong form.
/// The gradient part of f is returned in divergence form, so the load is only
/// consistent for displacement Dirichlet conditions on the whole boundary.
SourceTerms manufactured_source(const ExactSolution& exact, const ScaledParameters& scaled);

/// How the pressures are closed on the boundary.
enum class PressureClosure {
  Dirichlet,  ///< pressure traces from the exact solution
  MeanZero,   ///< zero flux and zero mean; exact when the fluxes vanish on the boundary
};

/// Displacement Dirichlet data from the exact solution on every boundary tag
/// of the mesh, pressures closed as requested.
BoundaryConditionSet manufactured_boundary_conditions(
    const ExactSolution& exact, const Mesh& mesh,
    PressureClosure closure = PressureClosure::MeanZero);

}  // namespace mpet
