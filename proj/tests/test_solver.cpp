#include <cmath>

#include <doctest.h>

#include "mpet/diagnostics.hpp"
#include "mpet/error.hpp"
#include "mpet/manufactured.hpp"
#include "mpet/solver.hpp"

using namespace mpet;

namespace {

/// Manufactured two-network problem on the unit square, boundary conditions applied.
struct Problem {
  Mesh mesh;
  SpaceSet spaces;
  ScaledParameters scaled;
  BlockSystem system;

  Problem(int n, int order, ScaledParameters sc, PressureClosure closure = PressureClosure::MeanZero,
          double eta = 10.0)
      : mesh(generate_unit_square(n)), spaces(mesh, SpaceOrder(order), sc.n), scaled(std::move(sc)) {
    const ExactSolution ex = ExactSolution::trigonometric();
    const BlockSystem full = assemble_system(spaces, scaled, eta, manufactured_source(ex, scaled));
    system = apply_boundary_conditions(full, spaces, scaled,
                                       manufactured_boundary_conditions(ex, mesh, closure), 0.0);
  }
};

ScaledParameters params(double lambda, double R, double ap, double xi) {
  return ScaledParameters::direct(lambda, {R, R}, {ap, ap}, Eigen::MatrixXd::Constant(2, 2, xi));
}

LinearOperator identity() {
  return [](const Vector& r, Vector& z) { z = r; };
}

/// Norm of x in the product norm of the problem.
double product_norm(const Problem& p, const Vector& x) {
  return evaluate_norms(p.system.expand(x), p.spaces, p.scaled).product;
}

}  // namespace

TEST_CASE("MinRes on tiny systems") {
  {
    SparseMatrix K(2, 2);
    K.insert(0, 0) = 2;
    K.insert(1, 1) = 3;
    Vector x = Vector::Zero(2);
    const SolveReport r = minres(K, identity(), (Vector(2) << 2, 3).finished(), x);
    CHECK(r.converged);
    CHECK(r.iterations <= 2);
    CHECK((x - Vector::Ones(2)).norm() < 1e-12);
  }
  {
    SparseMatrix K(2, 2);
    K.insert(0, 1) = 1;
    K.insert(1, 0) = 1;
    Vector x = Vector::Zero(2);
    const Vector b = (Vector(2) << 1, 0).finished();
    const SolveReport r = minres(K, identity(), b, x);
    CHECK(r.converged);
    CHECK(r.iterations <= 2);
    CHECK((x - (Vector(2) << 0, 1).finished()).norm() < 1e-12);
  }
}

TEST_CASE("MinRes reports non-convergence without throwing") {
  const Problem p(2, 1, params(1, 1e-4, 1e-4, 1e-4));
  const SystemSolver solver(p.system, p.spaces, p.scaled, {}, 1e-12, 1);
  SolveReport r;
  CHECK_NOTHROW(solver.solve(r));
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 1);
}

TEST_CASE("exact preconditioner converges in two iterations") {
  // |K|^{-1} from the spectral decomposition
  const Problem p(1, 1, params(1, 1, 1, 1), PressureClosure::Dirichlet);
  const Eigen::MatrixXd K(p.system.matrix);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
  const Eigen::MatrixXd V = es.eigenvectors();
  const Eigen::MatrixXd P = V * es.eigenvalues().cwiseAbs().cwiseInverse().asDiagonal() * V.transpose();
  Vector x = Vector::Zero(p.system.size());
  const SolveReport r =
      minres(p.system.matrix, [&P](const Vector& v, Vector& z) { z = P * v; }, p.system.rhs, x, 1e-10);
  CHECK(r.converged);
  CHECK(r.iterations <= 2);
  CHECK((K * x - p.system.rhs).norm() < 1e-9 * p.system.rhs.norm());
}

TEST_CASE("residual history is monotone") {
  for (auto variant : {PreconditionerVariant::FullBlock, PreconditionerVariant::SchurReduced}) {
    const Problem p(4, 2, params(1e4, 1e-2, 1e-2, 1e-2));
    PreconditionerConfig cfg;
    cfg.variant = variant;
    const SystemSolver solver(p.system, p.spaces, p.scaled, cfg);
    SolveReport r;
    solver.solve(r);
    REQUIRE(r.converged);
    REQUIRE(r.residuals.size() >= 2);
    for (std::size_t k = 1; k < r.residuals.size(); ++k) CHECK(r.residuals[k] <= r.residuals[k - 1] * (1 + 1e-12));
  }
}

TEST_CASE("static condensation recovers the direct solution") {
  for (int l : {1, 2}) {
    const Problem p(3, l, params(10, 0.1, 0.5, 0.2));
    const Vector direct = solve_direct(p.system, p.spaces);
    const CondensedSystem c = condense_velocity(p.system);
    CHECK(c.matrix.rows() == p.system.size() - p.system.ranges.w.back().end + p.system.ranges.w.front().begin);
    // bordered dense solve of the reduced system
    Eigen::MatrixXd Kr(c.matrix);
    const Vector Fr = c.reduce(p.system.rhs);
    Eigen::MatrixXd L = pressure_modes(p.system, p.spaces, true);
    Eigen::MatrixXd Lr(c.kept.size(), L.cols());
    for (std::size_t i = 0; i < c.kept.size(); ++i) Lr.row(i) = L.row(c.kept[i]);
    const int n = static_cast<int>(Kr.rows()), m = static_cast<int>(Lr.cols());
    Eigen::MatrixXd Bd = Eigen::MatrixXd::Zero(n + m, n + m);
    Bd.topLeftCorner(n, n) = Kr;
    Bd.topRightCorner(n, m) = Lr;
    Bd.bottomLeftCorner(m, n) = Lr.transpose();
    Vector rhs = Vector::Zero(n + m);
    rhs.head(n) = Fr;
    const Vector y = Bd.fullPivLu().solve(rhs).head(n);
    const Vector x = c.recover(y, p.system.rhs);
    CHECK(product_norm(p, x - direct) <= 1e-10 * product_norm(p, direct));
  }
}

TEST_CASE("identical networks give identical reduced blocks") {
  const Problem p(2, 2, params(1, 0.3, 0.0, 0.0));
  const CondensedSystem c = condense_velocity(p.system);
  const Range p0 = p.system.ranges.p[0], p1 = p.system.ranges.p[1];
  const Range base = p.system.ranges.pressure();
  const Eigen::MatrixXd S(c.schur);
  const Eigen::MatrixXd a = S.block(p0.begin - base.begin, p0.begin - base.begin, p0.size(), p0.size());
  const Eigen::MatrixXd b = S.block(p1.begin - base.begin, p1.begin - base.begin, p1.size(), p1.size());
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-14 * a.cwiseAbs().maxCoeff());
}

TEST_CASE("Lambda mass with zero zeta couples the networks through ones") {
  const Problem p(2, 1, params(1, 1, 0, 0));
  const Eigen::MatrixXd M(lambda_pressure_mass(p.system, p.spaces, p.scaled));
  const Range p0 = p.system.ranges.p[0], p1 = p.system.ranges.p[1];
  const Range base = p.system.ranges.pressure();
  const int o0 = p0.begin - base.begin, o1 = p1.begin - base.begin, n = p0.size();
  const Eigen::MatrixXd m00 = M.block(o0, o0, n, n), m01 = M.block(o0, o1, n, n), m11 = M.block(o1, o1, n, n);
  CHECK((m00 - m01).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((m00 - m11).cwiseAbs().maxCoeff() < 1e-15);
  // element mass of P0 is the element area, 1/8 on the 2x2 grid
  CHECK(m00(0, 0) == doctest::Approx(1.0 / 8.0));
}

TEST_CASE("preconditioned solves agree with the direct solve") {
  struct Case {
    double lambda, R, ap, xi;
  };
  for (const Case& k : {Case{1, 1, 1, 1}, Case{1e8, 1e-8, 1e-8, 1e-8}, Case{1e4, 1e-4, 0, 0}, Case{1, 1e-8, 0, 0}}) {
    for (int l : {1, 2}) {
      for (auto variant : {PreconditionerVariant::FullBlock, PreconditionerVariant::SchurReduced}) {
        CAPTURE(k.lambda);
        CAPTURE(k.R);
        CAPTURE(l);
        const Problem p(4, l, params(k.lambda, k.R, k.ap, k.xi));
        const Vector direct = solve_direct(p.system, p.spaces);
        PreconditionerConfig cfg;
        cfg.variant = variant;
        cfg.local_recovery = false;
        const SystemSolver solver(p.system, p.spaces, p.scaled, cfg);
        SolveReport r;
        const Vector x = solver.solve(r);
        REQUIRE(r.converged);
        CHECK(product_norm(p, x - direct) <= 1e-6 * product_norm(p, direct));
      }
    }
  }
}

TEST_CASE("element recovery closes the mass balance") {
  const Problem p(4, 2, params(1e8, 1e-4, 1e-4, 1e-4));
  for (auto variant : {PreconditionerVariant::FullBlock, PreconditionerVariant::SchurReduced}) {
    PreconditionerConfig cfg;
    cfg.variant = variant;
    const SystemSolver solver(p.system, p.spaces, p.scaled, cfg);
    SolveReport r;
    const Vector x = solver.solve(r);
    REQUIRE(r.converged);
    CHECK(r.conservation_residual >= 0);
    CHECK(r.conservation_residual <= 1e-8);
    CHECK(conservation_residual(p.system, p.spaces, x, p.system.rhs).max_relative <= 1e-8);
  }
}

TEST_CASE("both preconditioners factorize without storage and transfer") {
  const Problem p(2, 1, params(1, 1e-8, 0, 0));
  for (auto variant : {PreconditionerVariant::FullBlock, PreconditionerVariant::SchurReduced}) {
    PreconditionerConfig cfg;
    cfg.variant = variant;
    CHECK_NOTHROW(SystemSolver(p.system, p.spaces, p.scaled, cfg));
  }
}

TEST_CASE("tiny penalty is diagnosed") {
  const Problem p(2, 1, params(1, 1, 1, 1), PressureClosure::MeanZero, 1e-3);
  CHECK_THROWS_WITH_AS(SystemSolver(p.system, p.spaces, p.scaled), doctest::Contains("penalty too small"),
                       SolverError);
}

TEST_CASE("initial guess at the solution starts at a tiny residual") {
  const Problem p(3, 1, params(1, 1, 1, 1));
  const SystemSolver solver(p.system, p.spaces, p.scaled);
  SolveReport first, second;
  const Vector x = solver.solve(first);
  const Vector y = solver.solve(p.system.rhs, second, &x);
  // the tolerance is relative to the initial residual, which is already at rounding level
  CHECK(second.converged);
  CHECK(second.residuals.front() <= 1e-7 * first.residuals.front());
  CHECK(product_norm(p, x - y) <= 1e-8 * product_norm(p, x));
}

TEST_CASE("variant names") {
  CHECK(parse_variant("full") == PreconditionerVariant::FullBlock);
  CHECK(parse_variant("schur") == PreconditionerVariant::SchurReduced);
  CHECK(to_string(PreconditionerVariant::FullBlock) == "full");
  CHECK_THROWS_AS(parse_variant("ilu"), ConfigError);
}
