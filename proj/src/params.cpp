#include "mpet/params.hpp"

#include <algorithm>
#include <cmath>

#include "mpet/error.hpp"

namespace mpet {

std::pair<double, double> PhysicalParameters::lame_from_young(double E, double nu) {
  if (!(E > 0) || !(nu >= 0 && nu < 0.5)) throw ConfigError("invalid Young's modulus or Poisson ratio");
  const double mu = E / (2 * (1 + nu));
  const double lambda = nu * E / ((1 + nu) * (1 - 2 * nu));
  return {mu, lambda};
}

void PhysicalParameters::validate() const {
  if (n < 1) throw ConfigError("need at least one network");
  auto sized = [this](const std::vector<double>& v) { return static_cast<int>(v.size()) == n; };
  if (!sized(alpha) || !sized(s) || !sized(K)) throw ConfigError("parameter arrays must have n entries");
  if (xi.rows() != n || xi.cols() != n) throw ConfigError("xi must be n x n");
  if (!(mu > 0)) throw ConfigError("mu must be positive");
  if (!(lambda >= 0)) throw ConfigError("lambda must be nonnegative");
  if (!(tau > 0)) throw ConfigError("tau must be positive");
  for (int i = 0; i < n; ++i) {
    if (!(alpha[i] > 0 && alpha[i] <= 1)) throw ConfigError("invalid Biot-Willis constant");
    if (!(s[i] >= 0)) throw ConfigError("storage coefficients must be nonnegative");
    if (!(K[i] > 0)) throw ConfigError("R must be positive (conductivity K_i > 0)");
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (!(xi(i, j) >= 0)) throw ConfigError("transfer coefficients must be nonnegative");
      if (std::abs(xi(i, j) - xi(j, i)) > 1e-14 * std::max(1.0, std::abs(xi(i, j))))
        throw ConfigError("xi must be symmetric");
    }
  }
}

double ScaledParameters::R_min() const { return *std::min_element(R.begin(), R.end()); }

Eigen::MatrixXd ScaledParameters::Lambda() const {
  return zeta + Eigen::MatrixXd::Constant(n, n, 1.0 / lambda0());
}

ScaledParameters ScaledParameters::direct(double lambda, std::vector<double> R,
                                          std::vector<double> alpha_p, const Eigen::MatrixXd& xi) {
  ScaledParameters p;
  p.n = static_cast<int>(R.size());
  p.lambda = lambda;
  p.R = std::move(R);
  p.alpha_p = std::move(alpha_p);
  if (static_cast<int>(p.alpha_p.size()) != p.n || xi.rows() != p.n || xi.cols() != p.n)
    throw ConfigError("scaled parameters: inconsistent network count");
  p.zeta = Eigen::MatrixXd::Zero(p.n, p.n);
  for (int i = 0; i < p.n; ++i) {
    p.zeta(i, i) = p.alpha_p[i];
    for (int j = 0; j < p.n; ++j) {
      if (i == j) continue;
      p.zeta(i, j) = -xi(i, j);
      p.zeta(i, i) += xi(i, j);
    }
  }
  p.validate();
  return p;
}

void ScaledParameters::validate() const {
  if (n < 1) throw ConfigError("need at least one network");
  if (!(lambda >= 0)) throw ConfigError("lambda must be nonnegative");
  for (double r : R)
    if (!(r > 0)) throw ConfigError("R must be positive");
  for (double a : alpha_p)
    if (!(a >= 0)) throw ConfigError("alpha_p must be nonnegative");
  if ((zeta - zeta.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, zeta.cwiseAbs().maxCoeff()))
    throw ConfigError("Lambda_zeta must be symmetric");
}

ScaledParameters scale_parameters(const PhysicalParameters& phys) {
  for (double a : phys.alpha)
    if (!(a > 0)) throw ConfigError("invalid Biot-Willis constant");
  for (double k : phys.K)
    if (!(k > 0)) throw ConfigError("R must be positive");
  phys.validate();

  const int n = phys.n;
  const double two_mu = 2 * phys.mu;
  ScaledParameters p;
  p.n = n;
  p.lambda = phys.lambda / two_mu;
  p.R.resize(n);
  p.alpha_p.resize(n);
  p.zeta = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double a2 = phys.alpha[i] * phys.alpha[i];
    p.R[i] = two_mu * phys.tau * phys.K[i] / a2;
    p.alpha_p[i] = two_mu * phys.s[i] / a2;
    double xi_ii = 0;
    for (int j = 0; j < n; ++j)
      if (j != i) xi_ii += phys.xi(i, j);
    p.zeta(i, i) = p.alpha_p[i] + two_mu * phys.tau * xi_ii / a2;
    for (int j = 0; j < n; ++j)
      if (j != i) p.zeta(i, j) = -two_mu * phys.tau * phys.xi(i, j) / (phys.alpha[i] * phys.alpha[j]);
  }
  p.validate();
  return p;
}

LambdaMatrices lambda_matrices(const ScaledParameters& scaled) {
  return {scaled.zeta, scaled.Lambda()};
}

}  // namespace mpet
