#pragma once

#include <vector>

#include <Eigen/Dense>

namespace mpet {

/// Physical MPET coefficients for n fluid networks.
struct PhysicalParameters {
  int n = 1;
  double mu = 0.5;      // Lame mu
  double lambda = 1.0;  // Lame lambda
  std::vector<double> alpha;  // Biot-Willis constants in (0,1]
  std::vector<double> s;      // storage coefficients
  std::vector<double> K;      // isotropic hydraulic conductivities
  Eigen::MatrixXd xi;         // symmetric transfer coefficients; diagonal ignored
  double tau = 1.0;           // time step

  /// Lame parameters from Young's modulus and Poisson ratio.
  static std::pair<double, double> lame_from_young(double E, double nu);
  void validate() const;
};

/// Dimensionless coefficients of the scaled saddle-point problem.
struct ScaledParameters {
  int n = 1;
  double lambda = 1.0;
  std::vector<double> R;
  std::vector<double> alpha_p;
  Eigen::MatrixXd zeta;  // Lambda_zeta

  double lambda0() const { return std::max(1.0, lambda); }
  double R_min() const;
  /// Lambda = Lambda_zeta + (1/lambda0) * ones(n, n).
  Eigen::MatrixXd Lambda() const;

  /// Scaled-parameter construction; xi populates the off-diagonals of
  /// Lambda_zeta with -xi_ij and the diagonal with alpha_p_i + sum_j xi_ij.
  static ScaledParameters direct(double lambda, std::vector<double> R, std::vector<double> alpha_p,
                                 const Eigen::MatrixXd& xi);
  void validate() const;
};

ScaledParameters scale_parameters(const PhysicalParameters& phys);

struct LambdaMatrices {
  Eigen::MatrixXd zeta;
  Eigen::MatrixXd Lambda;
};
LambdaMatrices lambda_matrices(const ScaledParameters& scaled);

}  // namespace mpet
