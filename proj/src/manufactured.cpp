#include "mpet/manufactured.hpp"

#include <cmath>
#include <numbers>

#include "mpet/error.hpp"

namespace mpet {

namespace {
constexpr double kPi = std::numbers::pi;
}

ExactSolution ExactSolution::zero(int networks) {
  ExactSolution e;
  e.networks = networks;
  e.u = [](const Point&) { return Eigen::Vector2d::Zero(); };
  e.grad_u = [](const Point&) { return Eigen::Matrix2d::Zero(); };
  e.hess_u = [](const Point&) {
    return std::array<Eigen::Matrix2d, 2>{Eigen::Matrix2d::Zero(), Eigen::Matrix2d::Zero()};
  };
  for (int i = 0; i < networks; ++i) {
    e.p.push_back([](const Point&) { return 0.0; });
    e.grad_p.push_back([](const Point&) { return Eigen::Vector2d::Zero(); });
    e.hess_p.push_back([](const Point&) { return Eigen::Matrix2d::Zero(); });
  }
  return e;
}

ExactSolution ExactSolution::trigonometric() {
  ExactSolution e;
  e.networks = 2;
  e.u = [](const Point& x) {
    const double phi = std::sin(kPi * x.x()) * std::sin(kPi * x.y());
    return Eigen::Vector2d(phi, phi);
  };
  e.grad_u = [](const Point& x) {
    const Eigen::Vector2d g(kPi * std::cos(kPi * x.x()) * std::sin(kPi * x.y()),
                            kPi * std::sin(kPi * x.x()) * std::cos(kPi * x.y()));
    Eigen::Matrix2d m;
    m.row(0) = g.transpose();
    m.row(1) = g.transpose();
    return m;
  };
  e.hess_u = [](const Point& x) {
    const double phi = std::sin(kPi * x.x()) * std::sin(kPi * x.y());
    const double cc = std::cos(kPi * x.x()) * std::cos(kPi * x.y());
    Eigen::Matrix2d h;
    h << -kPi * kPi * phi, kPi * kPi * cc, kPi * kPi * cc, -kPi * kPi * phi;
    return std::array<Eigen::Matrix2d, 2>{h, h};
  };

  // p_1 = X(x) X(y) - 1/900 with X(t) = t^2 (1-t)^2
  auto X = [](double t) { return t * t * (1 - t) * (1 - t); };
  auto dX = [](double t) { return 2 * t * (1 - t) * (1 - 2 * t); };
  auto ddX = [](double t) { return 2 - 12 * t + 12 * t * t; };
  e.p.push_back([X](const Point& x) { return X(x.x()) * X(x.y()) - 1.0 / 900.0; });
  e.grad_p.push_back([X, dX](const Point& x) {
    return Eigen::Vector2d(dX(x.x()) * X(x.y()), X(x.x()) * dX(x.y()));
  });
  e.hess_p.push_back([X, dX, ddX](const Point& x) {
    Eigen::Matrix2d h;
    h << ddX(x.x()) * X(x.y()), dX(x.x()) * dX(x.y()), dX(x.x()) * dX(x.y()),
        X(x.x()) * ddX(x.y());
    return h;
  });

  // p_2 = S(x) S(y) - 1/4 with S(t) = sin^2(pi t)
  auto S = [](double t) { return std::pow(std::sin(kPi * t), 2); };
  auto dS = [](double t) { return kPi * std::sin(2 * kPi * t); };
  auto ddS = [](double t) { return 2 * kPi * kPi * std::cos(2 * kPi * t); };
  e.p.push_back([S](const Point& x) { return S(x.x()) * S(x.y()) - 0.25; });
  e.grad_p.push_back([S, dS](const Point& x) {
    return Eigen::Vector2d(dS(x.x()) * S(x.y()), S(x.x()) * dS(x.y()));
  });
  e.hess_p.push_back([S, dS, ddS](const Point& x) {
    Eigen::Matrix2d h;
    h << ddS(x.x()) * S(x.y()), dS(x.x()) * dS(x.y()), dS(x.x()) * dS(x.y()),
        S(x.x()) * ddS(x.y());
    return h;
  });
  return e;
}

Eigen::Vector2d ExactSolution::flux(int i, const Point& x, const ScaledParameters& scaled) const {
  return -scaled.R[i] * grad_p[i](x);
}

SourceTerms manufactured_source(const ExactSolution& exact, const ScaledParameters& scaled) {
  if (exact.networks != scaled.n) throw ConfigError("exact solution and parameters differ in networks");
  SourceTerms src;
  // -div eps(u) as a vector force; -lambda grad div u + sum_i grad p_i in
  // divergence form, valid because the tests have zero normal trace on the
  // Dirichlet boundary
  src.f = [exact](const Point& x) {
    const auto H = exact.hess_u(x);
    Eigen::Vector2d f;
    for (int a = 0; a < 2; ++a) {
      const double grad_div = H[0](a, 0) + H[1](a, 1);
      f[a] = -0.5 * (H[a].trace() + grad_div);
    }
    return f;
  };
  src.f_div = [exact, lambda = scaled.lambda](const Point& x) {
    double s = lambda * exact.grad_u(x).trace();
    for (int i = 0; i < exact.networks; ++i) s -= exact.p[i](x);
    return s;
  };
  for (int i = 0; i < scaled.n; ++i) {
    src.g.push_back([exact, i, R = scaled.R[i], zeta = Eigen::VectorXd(scaled.zeta.row(i).transpose())](
                        const Point& x) {
      double g = -exact.grad_u(x).trace() + R * exact.hess_p[i](x).trace();
      for (int j = 0; j < exact.networks; ++j) g -= zeta[j] * exact.p[j](x);
      return g;
    });
  }
  return src;
}

BoundaryConditionSet manufactured_boundary_conditions(const ExactSolution& exact, const Mesh& mesh,
                                                      PressureClosure closure) {
  BoundaryConditionSet bcs;
  for (const auto& f : mesh.facets()) {
    if (!f.is_boundary() || bcs.displacement.count(f.tag)) continue;
    DisplacementBC d;
    d.kind = DisplacementBC::Kind::Dirichlet;
    d.value = [u = exact.u](const Point& x, double) { return u(x); };
    bcs.displacement[f.tag] = d;
    std::vector<PressureBC> p;
    for (int i = 0; i < exact.networks; ++i) {
      if (closure == PressureClosure::MeanZero)
        p.push_back(PressureBC::zero_flux());
      else
        p.push_back(PressureBC::dirichlet([pi = exact.p[i]](const Point& x, double) { return pi(x); }));
    }
    bcs.pressure[f.tag] = p;
  }
  if (closure == PressureClosure::MeanZero) bcs.mean_zero.assign(exact.networks, true);
  return bcs;
}

}  // namespace mpet
