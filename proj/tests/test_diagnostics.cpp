#include <cmath>
#include <sstream>

#include <doctest.h>

#include "mpet/diagnostics.hpp"
#include "mpet/error.hpp"

using namespace mpet;

namespace {

ScaledParameters params(double lambda, double R, double ap, double xi, int n = 2) {
  return ScaledParameters::direct(lambda, std::vector<double>(n, R), std::vector<double>(n, ap),
                                  Eigen::MatrixXd::Constant(n, n, xi));
}

BlockSystem manufactured_system(const SpaceSet& s, const ScaledParameters& sc) {
  const ExactSolution ex = ExactSolution::trigonometric();
  const BlockSystem full = assemble_system(s, sc, 10.0, manufactured_source(ex, sc));
  return apply_boundary_conditions(full, s, sc, manufactured_boundary_conditions(ex, s.mesh()), 0.0);
}

Mesh transformed(const Mesh& m, double angle, const Eigen::Vector2d& shift) {
  Eigen::Matrix2d Q;
  Q << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  std::vector<Point> v;
  for (const auto& p : m.vertices()) v.push_back(Q * p + shift);
  return Mesh::from_elements(v, m.elements(), [](const Point&) { return "boundary"; });
}

}  // namespace

TEST_CASE("norms of the zero state vanish") {
  const Mesh m = generate_unit_square(2);
  const SpaceSet s(m, SpaceOrder(2), 2);
  const NormReport r = evaluate_norms(Vector::Zero(s.size()), s, params(10, 0.1, 1, 1));
  CHECK(r.u_hdg == 0.0);
  CHECK(r.u_bar == 0.0);
  CHECK(r.p_bar == 0.0);
  CHECK(r.w_minus == 0.0);
  CHECK(r.product == 0.0);
  for (double v : r.p_hdg) CHECK(v == 0.0);
}

TEST_CASE("norms are absolutely homogeneous") {
  const Mesh m = generate_unit_square(2);
  const SpaceSet s(m, SpaceOrder(1), 2);
  const ScaledParameters sc = params(100, 0.01, 0.5, 0.2);
  const NormEvaluator ev(s, sc);
  const Vector x = Vector::LinSpaced(s.size(), -1.0, 2.0).array().sin();
  const NormReport a = ev.evaluate(x);
  for (double c : {-3.0, 0.5, 7.0}) {
    const NormReport b = ev.evaluate(c * x);
    CHECK(b.u_hdg == doctest::Approx(std::abs(c) * a.u_hdg).epsilon(1e-12));
    CHECK(b.u_bar == doctest::Approx(std::abs(c) * a.u_bar).epsilon(1e-12));
    CHECK(b.p_bar == doctest::Approx(std::abs(c) * a.p_bar).epsilon(1e-12));
    CHECK(b.w_minus == doctest::Approx(std::abs(c) * a.w_minus).epsilon(1e-12));
    CHECK(b.product == doctest::Approx(std::abs(c) * a.product).epsilon(1e-12));
  }
}

TEST_CASE("rigid translation has zero HDG displacement norm") {
  const Mesh m = generate_unit_square(3);
  const ScaledParameters sc = params(1, 1, 1, 0, 1);
  const SpaceSet s(m, SpaceOrder(2), 1);
  ExactSolution shift = ExactSolution::zero(1);
  shift.u = [](const Point&) { return Eigen::Vector2d(1.0, -0.5); };
  ExactSolution stretch = ExactSolution::zero(1);
  stretch.u = [](const Point& x) { return Eigen::Vector2d(x.x(), 0.0); };
  const NormReport r = evaluate_norms(interpolate(shift, s, sc), s, sc);
  const NormReport ref = evaluate_norms(interpolate(stretch, s, sc), s, sc);
  // a norm is the root of a quadratic form, so rounding enters at sqrt(eps)
  CHECK(r.u_hdg < 1e-6 * ref.u_hdg);
  CHECK(r.u_bar < 1e-6 * ref.u_bar);
}

TEST_CASE("interpolants converge at the approximation orders") {
  const ScaledParameters sc = params(1, 1, 1, 1);
  const ExactSolution ex = ExactSolution::trigonometric();
  for (int l : {1, 2}) {
    std::vector<ErrorReport> e;
    for (int n : {8, 16}) {
      const Mesh m = generate_unit_square(n);
      const SpaceSet s(m, SpaceOrder(l), 2);
      e.push_back(error_norms(interpolate(ex, s, sc), ex, s, sc));
    }
    CAPTURE(l);
    // BDM_l displacement, RT_{l-1} flux and P_{l-1} pressure
    CHECK(std::log2(e[0].u_l2 / e[1].u_l2) > l + 0.8);
    CHECK(std::log2(e[0].w_l2 / e[1].w_l2) > l - 0.2);
    CHECK(std::log2(e[0].p_l2 / e[1].p_l2) > l - 0.2);
  }
  const Mesh m = generate_unit_square(4);
  const SpaceSet s(m, SpaceOrder(1), 2);
  // ||(phi, phi)||_L2 = sqrt(2) * 1/2 on the unit square
  CHECK(error_norms(Vector::Zero(s.size()), ex, s, sc).u_l2 == doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-10));
}

TEST_CASE("inf-sup constants are positive and mesh independent") {
  for (auto kind : {InfSupKind::StokesLike, InfSupKind::DarcyLike}) {
    for (int l : {1, 2}) {
      std::vector<double> beta;
      for (int n : {2, 4, 8}) {
        const Mesh m = generate_unit_square(n);
        beta.push_back(estimate_inf_sup(SpaceSet(m, SpaceOrder(l), 1), kind));
      }
      const double lo = *std::min_element(beta.begin(), beta.end());
      const double hi = *std::max_element(beta.begin(), beta.end());
      CHECK(lo > 0);
      CHECK((hi - lo) / hi < 0.2);
    }
  }
}

TEST_CASE("inf-sup constants are invariant under rigid mesh motions") {
  const Mesh m = generate_unit_square(2);
  const Mesh r = transformed(m, 0.7, {3.0, -1.5});
  for (auto kind : {InfSupKind::StokesLike, InfSupKind::DarcyLike}) {
    const double a = estimate_inf_sup(SpaceSet(m, SpaceOrder(1), 1), kind);
    const double b = estimate_inf_sup(SpaceSet(r, SpaceOrder(1), 1), kind);
    CHECK(std::abs(a - b) <= 1e-10 * a);
  }
}

TEST_CASE("dense diagnostics refuse large meshes") {
  const Mesh m = generate_unit_square(48);
  CHECK_THROWS_WITH(estimate_inf_sup(SpaceSet(m, SpaceOrder(1), 1), InfSupKind::StokesLike),
                    doctest::Contains("smaller mesh"));
}

TEST_CASE("conservation holds after converged solves only") {
  const Mesh m = generate_unit_square(4);
  const ScaledParameters sc = params(1e4, 1e-2, 1e-2, 1e-2);
  const SpaceSet s(m, SpaceOrder(1), 2);
  const BlockSystem sys = manufactured_system(s, sc);
  {
    const Vector x = solve_direct(sys, s);
    CHECK(conservation_residual(sys, s, x, sys.rhs).max_relative <= 1e-8);
  }
  {
    const SystemSolver solver(sys, s, sc);
    SolveReport r;
    const Vector x = solver.solve(r);
    REQUIRE(r.converged);
    CHECK(conservation_residual(sys, s, x, sys.rhs).max_relative <= 1e-8);
  }
  {
    PreconditionerConfig cfg;
    cfg.variant = PreconditionerVariant::FullBlock;
    cfg.local_recovery = false;
    const SystemSolver solver(sys, s, sc, cfg, 1e-1);
    SolveReport r;
    const Vector x = solver.solve(r);
    const ConservationReport c = conservation_residual(sys, s, x, sys.rhs);
    CHECK(c.max_relative > 1e-8);
    CHECK(c.rows.size() == std::size_t(2 * m.num_elements()));
    std::ostringstream os;
    write_conservation_csv(os, c);
    CHECK(os.str().rfind("element,network,residual\n", 0) == 0);
  }
}

TEST_CASE("absolute-value preconditioner gives a spectrum of plus and minus one") {
  const Mesh m = generate_unit_square(1);
  const ScaledParameters sc = params(1, 1, 1, 1);
  const SpaceSet s(m, SpaceOrder(1), 2);
  const ExactSolution ex = ExactSolution::trigonometric();
  const BlockSystem full = assemble_system(s, sc, 10.0);
  const BlockSystem sys =
      apply_boundary_conditions(full, s, sc, manufactured_boundary_conditions(ex, m, PressureClosure::Dirichlet), 0.0);
  const Eigen::MatrixXd K(sys.matrix);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
  const Eigen::MatrixXd absK = es.eigenvectors() * es.eigenvalues().cwiseAbs().asDiagonal() * es.eigenvectors().transpose();
  BlockPreconditioner P;
  P.add_block({0, sys.size()}, absK.sparseView(), "not SPD");
  const SpectrumSummary sp = preconditioned_spectrum(sys.matrix, P);
  CHECK(sp.negative + sp.positive == sys.size());
  CHECK(sp.neg_min == doctest::Approx(-1.0).epsilon(1e-10));
  CHECK(sp.neg_max == doctest::Approx(-1.0).epsilon(1e-10));
  CHECK(sp.pos_min == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(sp.pos_max == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("preconditioned spectra stay away from zero over an R sweep") {
  const Mesh m = generate_unit_square(2);
  const SpaceSet s(m, SpaceOrder(1), 2);
  for (int i : {0, 4, 8}) {
    const double R = std::pow(10.0, -i);
    const ScaledParameters sc = params(1, R, 0, 0);
    const BlockSystem sys = manufactured_system(s, sc);
    const BlockPreconditioner Pf = build_full_block_preconditioner(sys, s, sc);
    const SpectrumSummary f = preconditioned_spectrum(sys.matrix, Pf);
    const CondensedSystem c = condense_velocity(sys);
    const BlockPreconditioner Ps = build_schur_preconditioner(sys, c, s, sc);
    const SpectrumSummary t = preconditioned_spectrum(c.matrix, Ps);
    for (const auto& sp : {f, t}) {
      CHECK(sp.neg_max < -0.1);
      CHECK(sp.pos_min > 0.5);
      CHECK(sp.neg_min > -5);
      CHECK(sp.pos_max < 5);
    }
    const SchurSpectra ss = schur_spectra(sys, s, sc);
    CHECK(ss.norm_ratio.minCoeff() > 0);
    CHECK(ss.against_schur.minCoeff() > 0);
  }
}

TEST_CASE("decoupled networks have coinciding flow spectra") {
  // xi = 0: the Darcy blocks of two identical networks repeat the spectrum of one
  const Mesh m = generate_unit_square(2);
  auto flow_eigs = [&m](int n) {
    const SpaceSet s(m, SpaceOrder(1), n);
    const ScaledParameters sc = params(1, 0.1, 0.3, 0.0, n);
    const FlowBlocks fb = assemble_flow(s, sc);
    const Eigen::MatrixXd K = Eigen::MatrixXd(SparseMatrix(fb.mass + fb.b + SparseMatrix(fb.b.transpose()) - fb.C));
    const int begin = s.offset_w(0);
    Eigen::MatrixXd Kf = K.bottomRightCorner(s.size() - begin, s.size() - begin);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Kf, Eigen::EigenvaluesOnly);
    return Eigen::VectorXd(es.eigenvalues());
  };
  const Eigen::VectorXd one = flow_eigs(1), two = flow_eigs(2);
  REQUIRE(two.size() == 2 * one.size());
  for (int k = 0; k < one.size(); ++k) {
    CHECK(two[2 * k] == doctest::Approx(one[k]).epsilon(1e-10));
    CHECK(two[2 * k + 1] == doctest::Approx(one[k]).epsilon(1e-10));
  }
}

TEST_CASE("inf-sup csv layout") {
  std::ostringstream os;
  write_inf_sup_csv(os, {{2, 0.9}, {4, 0.85}});
  CHECK(os.str() == "mesh_n,beta_h\n2,0.9\n4,0.85\n");
}
