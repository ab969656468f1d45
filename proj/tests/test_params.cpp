#include <doctest.h>

#include <Eigen/Cholesky>

#include "mpet/error.hpp"
#include "mpet/params.hpp"
#include "mpet/timeloop.hpp"

using namespace mpet;

namespace {

PhysicalParameters unit(int n) {
  PhysicalParameters p;
  p.n = n;
  p.mu = 0.5;
  p.lambda = 1.0;
  p.alpha.assign(n, 1.0);
  p.s.assign(n, 0.0);
  p.K.assign(n, 1.0);
  p.xi = Eigen::MatrixXd::Zero(n, n);
  p.tau = 1.0;
  return p;
}

}  // namespace

TEST_CASE("unit scaling leaves the coefficients unchanged") {
  const ScaledParameters s = scale_parameters(unit(2));
  CHECK(s.lambda == 1.0);
  CHECK(s.R == std::vector<double>{1.0, 1.0});
  CHECK(s.zeta.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("transfer coefficients give a zero-row-sum zeta") {
  PhysicalParameters p = unit(2);
  const double q = 0.37;
  p.xi(0, 1) = p.xi(1, 0) = q;
  const ScaledParameters s = scale_parameters(p);
  CHECK(s.zeta(0, 0) == doctest::Approx(q));
  CHECK(s.zeta(1, 1) == doctest::Approx(q));
  CHECK(s.zeta(0, 1) == doctest::Approx(-q));
  CHECK(s.zeta(1, 0) == doctest::Approx(-q));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.zeta);
  CHECK(std::abs(es.eigenvalues()[0]) < 1e-15);
  CHECK(es.eigenvalues()[1] == doctest::Approx(2 * q));
}

TEST_CASE("general scaling formulas") {
  PhysicalParameters p = unit(2);
  p.mu = 3.0;
  p.lambda = 12.0;
  p.alpha = {0.5, 0.25};
  p.s = {0.1, 0.2};
  p.K = {2.0, 4.0};
  p.xi(0, 1) = p.xi(1, 0) = 0.03;
  p.tau = 0.1;
  const ScaledParameters s = scale_parameters(p);
  CHECK(s.lambda == doctest::Approx(2.0));
  CHECK(s.R[0] == doctest::Approx(6 * 0.1 * 2.0 / 0.25));
  CHECK(s.R[1] == doctest::Approx(6 * 0.1 * 4.0 / 0.0625));
  CHECK(s.alpha_p[0] == doctest::Approx(6 * 0.1 / 0.25));
  CHECK(s.zeta(0, 0) == doctest::Approx(6 * 0.1 / 0.25 + 6 * 0.1 * 0.03 / 0.25));
  CHECK(s.zeta(0, 1) == doctest::Approx(-6 * 0.1 * 0.03 / (0.5 * 0.25)));
  CHECK(s.zeta(0, 1) == s.zeta(1, 0));
}

TEST_CASE("invalid physical parameters") {
  PhysicalParameters p = unit(2);
  p.alpha[1] = 0.0;
  CHECK_THROWS_WITH_AS(scale_parameters(p), doctest::Contains("invalid Biot-Willis"), ConfigError);
  p = unit(2);
  p.K[0] = 0.0;
  CHECK_THROWS_WITH_AS(scale_parameters(p), doctest::Contains("R must be positive"), ConfigError);
  p = unit(2);
  p.xi(0, 1) = 1.0;
  CHECK_THROWS_AS(scale_parameters(p), ConfigError);
}

TEST_CASE("Young modulus conversion of the brain analog") {
  const auto [mu, lambda] = PhysicalParameters::lame_from_young(1500.0, 0.4999);
  CHECK(mu == doctest::Approx(500.03).epsilon(1e-5));
  CHECK(lambda == doctest::Approx(2.4997e6).epsilon(1e-4));
  CHECK(lambda / (2 * mu) == doctest::Approx(2499.5).epsilon(1e-4));
  CHECK_THROWS_AS(PhysicalParameters::lame_from_young(1.0, 0.5), ConfigError);
}

TEST_CASE("Lambda matrices") {
  {
    const ScaledParameters s = ScaledParameters::direct(1.0, {1.0}, {0.0}, Eigen::MatrixXd::Zero(1, 1));
    const LambdaMatrices m = lambda_matrices(s);
    CHECK(m.Lambda(0, 0) == 1.0);
  }
  {
    const ScaledParameters s =
        ScaledParameters::direct(1e4, {1.0, 1.0}, {0.0, 0.0}, Eigen::MatrixXd::Zero(2, 2));
    const Eigen::MatrixXd L = lambda_matrices(s).Lambda;
    CHECK((L - 1e-4 * Eigen::MatrixXd::Ones(2, 2)).cwiseAbs().maxCoeff() < 1e-20);
    CHECK(std::abs(L.determinant()) < 1e-20);
    for (double R : {1.0, 1e-4, 1e-8}) {
      Eigen::LLT<Eigen::MatrixXd> llt(L + R * Eigen::MatrixXd::Identity(2, 2));
      CHECK(llt.info() == Eigen::Success);
    }
  }
}

TEST_CASE("brain analog parameters factorize") {
  const Scenario sc = brain_scenario();
  const PhysicalParameters& p = sc.parameters;
  CHECK(p.n == 4);
  CHECK(p.xi(0, 2) == 1e-6);
  CHECK(p.xi(0, 3) == 1e-6);
  CHECK(p.xi(1, 3) == 1e-6);
  CHECK(p.xi(2, 3) == 1e-6);
  CHECK(p.xi(0, 1) == 0.0);
  CHECK(p.xi(1, 2) == 0.0);
  CHECK((p.xi - p.xi.transpose()).cwiseAbs().maxCoeff() == 0.0);
  const ScaledParameters s = scale_parameters(p);
  CHECK(s.lambda == doctest::Approx(2499.5).epsilon(1e-4));
  const Eigen::MatrixXd L = s.Lambda();
  Eigen::LLT<Eigen::MatrixXd> llt(L + s.R_min() * Eigen::MatrixXd::Identity(4, 4));
  CHECK(llt.info() == Eigen::Success);
  // zeta rows of the storage-free part sum to alpha_p
  for (int i = 0; i < 4; ++i) {
    double row = 0;
    for (int j = 0; j < 4; ++j) row += s.zeta(i, j) * p.alpha[j] / p.alpha[i];
    CHECK(row == doctest::Approx(s.alpha_p[i]).epsilon(1e-12));
  }
}
