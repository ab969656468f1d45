#include "mpet/solver.hpp"

#include <chrono>
#include <cmath>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "mpet/diagnostics.hpp"
#include "mpet/error.hpp"

namespace mpet {

std::string to_string(PreconditionerVariant v) {
  return v == PreconditionerVariant::FullBlock ? "full" : "schur";
}

PreconditionerVariant parse_variant(const std::string& name) {
  if (name == "full" || name == "FullBlock" || name == "B") return PreconditionerVariant::FullBlock;
  if (name == "schur" || name == "SchurReduced" || name == "Btilde")
    return PreconditionerVariant::SchurReduced;
  throw ConfigError("unknown preconditioner '" + name + "' (expected full or schur)");
}

double SolveReport::relative_residual() const {
  if (residuals.empty() || residuals.front() == 0.0) return 0.0;
  return residuals.back() / residuals.front();
}

// -- MinRes ------------------------------------------------------------------

SolveReport minres(const LinearOperator& op, const LinearOperator& precond, const Vector& b,
                   Vector& x, double tol, int maxit) {
  const auto start = std::chrono::steady_clock::now();
  const int n = static_cast<int>(b.size());
  SolveReport rep;
  if (x.size() != n) x = Vector::Zero(n);

  Vector tmp(n);
  op(x, tmp);
  Vector v = b - tmp;
  Vector z(n);
  precond(v, z);
  const double g0 = v.dot(z);
  if (g0 < -1e-12 * v.norm() * z.norm()) throw SolverError("preconditioner not SPD");
  double gamma = std::sqrt(std::max(g0, 0.0));
  rep.residuals.push_back(gamma);
  const double target = tol * gamma;

  Vector v_old = Vector::Zero(n), w = Vector::Zero(n), w_old = Vector::Zero(n);
  Vector Az(n), v_new(n), z_new(n), w_new(n);
  double gamma_old = 1.0, eta = gamma;
  double c = 1.0, c_old = 1.0, s = 0.0, s_old = 0.0;

  if (gamma == 0.0) rep.converged = true;
  for (int j = 1; j <= maxit && !rep.converged; ++j) {
    z /= gamma;
    op(z, Az);
    const double delta = Az.dot(z);
    v_new = Az - (delta / gamma) * v - (gamma / gamma_old) * v_old;
    precond(v_new, z_new);
    const double g2 = v_new.dot(z_new);
    if (g2 < -1e-12 * v_new.norm() * z_new.norm()) throw SolverError("preconditioner not SPD");
    const double gamma_new = std::sqrt(std::max(g2, 0.0));

    const double a0 = c * delta - c_old * s * gamma;
    const double a1 = std::hypot(a0, gamma_new);
    const double a2 = s * delta + c_old * c * gamma;
    const double a3 = s_old * gamma;
    if (a1 == 0.0) break;  // breakdown: operator singular on the Krylov space
    const double c_new = a0 / a1;
    const double s_new = gamma_new / a1;
    w_new = (z - a3 * w_old - a2 * w) / a1;
    x += (c_new * eta) * w_new;
    eta = -s_new * eta;

    rep.iterations = j;
    rep.residuals.push_back(std::abs(eta));
    if (std::abs(eta) <= target) rep.converged = true;
    if (gamma_new == 0.0) {
      rep.converged = true;
      break;
    }

    std::swap(v_old, v);
    std::swap(v, v_new);
    std::swap(z, z_new);
    std::swap(w_old, w);
    std::swap(w, w_new);
    gamma_old = gamma;
    gamma = gamma_new;
    c_old = c;
    c = c_new;
    s_old = s;
    s = s_new;
  }
  rep.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

SolveReport minres(const SparseMatrix& K, const LinearOperator& precond, const Vector& b, Vector& x,
                   double tol, int maxit) {
  return minres([&K](const Vector& in, Vector& out) { out.noalias() = K * in; }, precond, b, x, tol,
                maxit);
}

// -- BlockPreconditioner -----------------------------------------------------

struct BlockPreconditioner::Block {
  Range range;
  SparseMatrix matrix;
  Eigen::MatrixXd constraints;
  Eigen::SimplicialLLT<SparseMatrix> llt;
  Eigen::SparseLU<SparseMatrix> lu;  // bordered system when augmented
};

void BlockPreconditioner::add_block(Range range, const SparseMatrix& matrix,
                                    const std::string& failure,
                                    const Eigen::MatrixXd& constraints) {
  if (range.begin != size_) throw Error("preconditioner blocks must be contiguous");
  if (matrix.rows() != range.size() || matrix.cols() != range.size())
    throw Error("preconditioner block has wrong size");
  auto b = std::make_shared<Block>();
  b->range = range;
  b->matrix = matrix;
  b->constraints = constraints;
  const int m = static_cast<int>(constraints.cols());
  if (m == 0 || range.size() == 0) {
    b->constraints.resize(range.size(), 0);
    if (range.size() > 0) {
      b->llt.compute(matrix);
      if (b->llt.info() != Eigen::Success) throw SolverError(failure);
    }
  } else {
    // [[X, L], [L^T, 0]] [z; mu] = [r; 0]: X^{-1} restricted to {L^T z = 0}
    const int n = range.size();
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(matrix.nonZeros() + 2 * n * m + m);
    for (int k = 0; k < matrix.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(matrix, k); it; ++it)
        t.emplace_back(it.row(), it.col(), it.value());
    for (int c = 0; c < m; ++c) {
      for (int i = 0; i < n; ++i) {
        if (constraints(i, c) == 0.0) continue;
        t.emplace_back(i, n + c, constraints(i, c));
        t.emplace_back(n + c, i, constraints(i, c));
      }
    }
    SparseMatrix bordered(n + m, n + m);
    bordered.setFromTriplets(t.begin(), t.end());
    b->lu.compute(bordered);
    if (b->lu.info() != Eigen::Success) throw SolverError(failure);
  }
  size_ = range.end;
  blocks_.push_back(std::move(b));
}

void BlockPreconditioner::apply(const Vector& r, Vector& z) const {
  z.resize(size_);
  for (const auto& b : blocks_) {
    const int n = b->range.size();
    if (n == 0) continue;
    const int m = static_cast<int>(b->constraints.cols());
    if (m == 0) {
      z.segment(b->range.begin, n) = b->llt.solve(r.segment(b->range.begin, n));
    } else {
      Vector rb = Vector::Zero(n + m);
      rb.head(n) = r.segment(b->range.begin, n);
      Vector zb = b->lu.solve(rb);
      z.segment(b->range.begin, n) = zb.head(n);
    }
  }
}

LinearOperator BlockPreconditioner::as_operator() const {
  return [this](const Vector& r, Vector& z) { apply(r, z); };
}

Range BlockPreconditioner::block_range(int b) const { return blocks_.at(b)->range; }

const SparseMatrix& BlockPreconditioner::block_matrix(int b) const { return blocks_.at(b)->matrix; }

Eigen::MatrixXd BlockPreconditioner::dense() const {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(size_, size_);
  for (const auto& b : blocks_) {
    const int n = b->range.size();
    D.block(b->range.begin, b->range.begin, n, n) = Eigen::MatrixXd(b->matrix);
  }
  return D;
}

Eigen::MatrixXd BlockPreconditioner::constraints() const {
  int m = 0;
  for (const auto& b : blocks_) m += static_cast<int>(b->constraints.cols());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(size_, m);
  int c = 0;
  for (const auto& b : blocks_) {
    const int k = static_cast<int>(b->constraints.cols());
    L.block(b->range.begin, c, b->range.size(), k) = b->constraints;
    c += k;
  }
  return L;
}

// -- condensation ------------------------------------------------------------

CondensedSystem condense_velocity(const BlockSystem& sys) {
  const Range a = sys.ranges.displacement();
  const Range p = sys.ranges.pressure();
  const Range w{sys.ranges.w.front().begin, sys.ranges.w.back().end};
  if (a.begin != 0 || a.end != w.begin || w.end != p.begin || p.end != sys.size())
    throw Error("condense_velocity: unexpected block layout");
  if (sys.w_block <= 0 || w.size() % sys.w_block != 0)
    throw Error("condense_velocity: flux mass is not element-block-diagonal");

  CondensedSystem c;
  c.source_size = sys.size();
  c.w = w;
  c.pressure = p;
  for (int i = a.begin; i < a.end; ++i) c.kept.push_back(i);
  for (int i = p.begin; i < p.end; ++i) c.kept.push_back(i);

  const SparseMatrix M = sys.matrix.block(w.begin, w.begin, w.size(), w.size());
  const int nb = sys.w_block;
  std::vector<Eigen::Triplet<double>> t;
  for (int e0 = 0; e0 < w.size(); e0 += nb) {
    Eigen::MatrixXd blk = Eigen::MatrixXd(M.block(e0, e0, nb, nb));
    Eigen::LLT<Eigen::MatrixXd> llt(blk);
    if (llt.info() != Eigen::Success) throw SolverError("flux mass not SPD");
    Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(nb, nb));
    inv = 0.5 * (inv + inv.transpose()).eval();
    for (int i = 0; i < nb; ++i)
      for (int j = 0; j < nb; ++j) t.emplace_back(e0 + i, e0 + j, inv(i, j));
  }
  c.Minv.resize(w.size(), w.size());
  c.Minv.setFromTriplets(t.begin(), t.end());
  c.Bw = sys.matrix.block(p.begin, w.begin, p.size(), w.size());
  SparseMatrix BM = c.Bw * c.Minv;
  SparseMatrix S = BM * SparseMatrix(c.Bw.transpose());
  c.schur = 0.5 * (S + SparseMatrix(S.transpose()));

  SparseMatrix K = restrict_matrix(sys.matrix, c.kept, c.kept);
  // subtract the Schur complement from the pressure block
  std::vector<Eigen::Triplet<double>> ts;
  for (int k = 0; k < c.schur.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(c.schur, k); it; ++it)
      ts.emplace_back(a.size() + it.row(), a.size() + it.col(), -it.value());
  SparseMatrix Sr(K.rows(), K.cols());
  Sr.setFromTriplets(ts.begin(), ts.end());
  c.matrix = K + Sr;
  c.matrix.makeCompressed();

  c.ranges.u = sys.ranges.u;
  c.ranges.uhat = sys.ranges.uhat;
  for (int i = 0; i < sys.ranges.networks(); ++i) {
    c.ranges.p.push_back({sys.ranges.p[i].begin - w.size(), sys.ranges.p[i].end - w.size()});
    c.ranges.phat.push_back({sys.ranges.phat[i].begin - w.size(), sys.ranges.phat[i].end - w.size()});
  }
  c.rhs = c.reduce(sys.rhs);
  return c;
}

Vector CondensedSystem::reduce(const Vector& F) const {
  const int na = w.begin;
  Vector r(na + pressure.size());
  r.head(na) = F.head(na);
  r.tail(pressure.size()) =
      F.segment(pressure.begin, pressure.size()) - Bw * (Minv * F.segment(w.begin, w.size()));
  return r;
}

Vector CondensedSystem::recover(const Vector& y, const Vector& F) const {
  const int na = w.begin;
  Vector x(source_size);
  x.head(na) = y.head(na);
  x.segment(pressure.begin, pressure.size()) = y.tail(pressure.size());
  x.segment(w.begin, w.size()) =
      Minv * (F.segment(w.begin, w.size()) - Bw.transpose() * y.tail(pressure.size()));
  return x;
}

// -- preconditioners ---------------------------------------------------------

namespace {

/// Unconstrained indices of the pressure block of `sys`.
std::vector<int> pressure_sources(const BlockSystem& sys) {
  const Range p = sys.ranges.pressure();
  std::vector<int> idx;
  idx.reserve(p.size());
  for (int i = p.begin; i < p.end; ++i) idx.push_back(sys.constrained() ? sys.free_dofs[i] : i);
  return idx;
}

Eigen::MatrixXd pressure_functionals(const BlockSystem& sys, const SpaceSet& spaces) {
  const Range p = sys.ranges.pressure();
  const Eigen::MatrixXd L = pressure_modes(sys, spaces, true);
  if (L.cols() == 0) return Eigen::MatrixXd(p.size(), 0);
  // scale the functionals to the magnitude of the pressure block
  const double area = spaces.mesh().total_area();
  return L.middleRows(p.begin, p.size()) / std::sqrt(area);
}

}  // namespace

SparseMatrix lambda_pressure_mass(const BlockSystem& sys, const SpaceSet& spaces,
                                  const ScaledParameters& scaled) {
  const auto idx = pressure_sources(sys);
  return restrict_matrix(assemble_pressure_mass(spaces, scaled.Lambda()), idx, idx);
}

SparseMatrix pressure_norm_block(const BlockSystem& sys, const SpaceSet& spaces,
                                 const ScaledParameters& scaled) {
  const auto idx = pressure_sources(sys);
  const SparseMatrix X =
      assemble_pressure_hdg_norm(spaces, scaled.R, false) + assemble_pressure_mass(spaces, scaled.Lambda());
  return restrict_matrix(X, idx, idx);
}

BlockPreconditioner build_full_block_preconditioner(const BlockSystem& sys, const SpaceSet& spaces,
                                                    const ScaledParameters& scaled) {
  const Range a = sys.ranges.displacement();
  const Range w{sys.ranges.w.front().begin, sys.ranges.w.back().end};
  const Range p = sys.ranges.pressure();
  BlockPreconditioner P;
  P.add_block(a, sys.matrix.block(a.begin, a.begin, a.size(), a.size()), "penalty too small");
  P.add_block(w, sys.matrix.block(w.begin, w.begin, w.size(), w.size()), "preconditioner not SPD");
  P.add_block(p, pressure_norm_block(sys, spaces, scaled), "preconditioner not SPD",
              pressure_functionals(sys, spaces));
  return P;
}

BlockPreconditioner build_schur_preconditioner(const BlockSystem& sys, const CondensedSystem& c,
                                               const SpaceSet& spaces,
                                               const ScaledParameters& scaled) {
  const Range a = sys.ranges.displacement();
  const Range p{a.size(), a.size() + c.pressure.size()};
  BlockPreconditioner P;
  P.add_block(a, c.matrix.block(a.begin, a.begin, a.size(), a.size()), "penalty too small");
  const SparseMatrix X = c.schur + lambda_pressure_mass(sys, spaces, scaled);
  P.add_block(p, X, "preconditioner not SPD", pressure_functionals(sys, spaces));
  return P;
}

// -- SystemSolver ------------------------------------------------------------

SystemSolver::SystemSolver(const BlockSystem& system, const SpaceSet& spaces,
                           const ScaledParameters& scaled, PreconditionerConfig config, double tol,
                           int maxit)
    : system_(&system), spaces_(&spaces), config_(config), tol_(tol), maxit_(maxit) {
  if (config_.variant == PreconditionerVariant::FullBlock) {
    precond_ = build_full_block_preconditioner(system, spaces, scaled);
  } else {
    condensed_ = std::make_unique<CondensedSystem>(condense_velocity(system));
    precond_ = build_schur_preconditioner(system, *condensed_, spaces, scaled);
  }
  if (config_.local_recovery) {
    const int nw = spaces.networks() * spaces.w_local();
    for (auto& index : element_local_unknowns(system, spaces)) {
      LocalBlock b;
      b.w.assign(index.begin(), index.begin() + nw);
      b.p.assign(index.begin() + nw, index.end());
      const Eigen::MatrixXd M = Eigen::MatrixXd(restrict_matrix(system.matrix, b.w, b.w));
      const Eigen::MatrixXd B = Eigen::MatrixXd(restrict_matrix(system.matrix, b.p, b.w));
      b.lift = M.llt().solve(B.transpose());
      b.lu.compute(B * b.lift);
      local_.push_back(std::move(b));
    }
  }
}

Vector solve_direct(const BlockSystem& sys, const SpaceSet& spaces) {
  const Eigen::MatrixXd L = pressure_modes(sys, spaces, true);
  const Eigen::MatrixXd Z = pressure_modes(sys, spaces, false);
  const int n = sys.size(), m = static_cast<int>(L.cols());
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(sys.matrix.nonZeros() + 2 * n * m);
  for (int k = 0; k < sys.matrix.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(sys.matrix, k); it; ++it)
      t.emplace_back(it.row(), it.col(), it.value());
  for (int c = 0; c < m; ++c)
    for (int i = 0; i < n; ++i) {
      if (L(i, c) == 0.0) continue;
      t.emplace_back(i, n + c, L(i, c));
      t.emplace_back(n + c, i, L(i, c));
    }
  SparseMatrix K(n + m, n + m);
  K.setFromTriplets(t.begin(), t.end());
  Eigen::SparseLU<SparseMatrix> lu(K);
  if (lu.info() != Eigen::Success) throw SolverError("direct factorization failed");
  Vector b = Vector::Zero(n + m);
  b.head(n) = sys.rhs;
  if (m > 0) {
    // compatible sources along the constraint modes, as in the iterative path
    const Vector alpha = (Z.transpose() * L).lu().solve(Z.transpose() * sys.rhs);
    b.head(n) -= L * alpha;
  }
  Vector x = lu.solve(b);
  if (lu.info() != Eigen::Success) throw SolverError("direct solve failed");
  // the system is badly scaled for extreme parameters; refine
  for (int k = 0; k < 3; ++k) x += lu.solve(b - K * x);
  return x.head(n);
}

std::vector<std::vector<int>> element_local_unknowns(const BlockSystem& sys, const SpaceSet& s) {
  std::vector<int> position(sys.constrained() ? sys.full_size : sys.size(), -1);
  if (sys.constrained()) {
    for (std::size_t k = 0; k < sys.free_dofs.size(); ++k) position[sys.free_dofs[k]] = static_cast<int>(k);
  } else {
    for (int k = 0; k < sys.size(); ++k) position[k] = k;
  }
  std::vector<std::vector<int>> out(s.mesh().num_elements());
  for (int e = 0; e < s.mesh().num_elements(); ++e) {
    for (int i = 0; i < s.networks(); ++i)
      for (int m = 0; m < s.w_local(); ++m) out[e].push_back(position[s.w_dof(i, e, m)]);
    for (int i = 0; i < s.networks(); ++i)
      for (int m = 0; m < s.p_local(); ++m) out[e].push_back(position[s.p_dof(i, e, m)]);
    for (int k : out[e])
      if (k < 0) throw Error("element unknowns must not be constrained");
  }
  return out;
}

namespace {

/// Operator and rhs with their components along the constraint functionals
/// removed. The constrained preconditioner ignores these components, and
/// without the projection they grow along the Lanczos recurrence.
struct ProjectedProblem {
  Eigen::MatrixXd L, G;  // functionals and (L^T L)^{-1}

  explicit ProjectedProblem(const Eigen::MatrixXd& functionals) : L(functionals) {
    if (L.cols() > 0) G = (L.transpose() * L).inverse();
  }
  void project(Vector& v) const {
    if (L.cols() > 0) v -= L * (G * (L.transpose() * v));
  }
  SolveReport solve(const SparseMatrix& K, const BlockPreconditioner& P, Vector b, Vector& x,
                    double tol, int maxit) const {
    project(b);
    auto op = [&](const Vector& in, Vector& out) {
      out.noalias() = K * in;
      project(out);
    };
    return minres(op, P.as_operator(), b, x, tol, maxit);
  }
};

}  // namespace

void SystemSolver::recover_local(const Vector& rhs, Vector& x) const {
  if (local_.empty()) return;
  const Vector y = system_->matrix * x;
  for (const auto& b : local_) {
    const int nw = static_cast<int>(b.w.size()), np = static_cast<int>(b.p.size());
    Vector r(np);
    for (int k = 0; k < np; ++k) r[k] = rhs[b.p[k]] - y[b.p[k]];
    const Vector dw = b.lift * b.lu.solve(r);
    for (int k = 0; k < nw; ++k) x[b.w[k]] += dw[k];
  }
}

Vector SystemSolver::solve(const Vector& rhs, SolveReport& report, const Vector* initial) const {
  const auto start = std::chrono::steady_clock::now();
  const ProjectedProblem problem(precond_.constraints());
  Vector x0 = Vector::Zero(rhs.size());
  if (initial) {
    if (initial->size() != rhs.size()) throw Error("initial guess has wrong size");
    x0 = *initial;
    project_pressure_constraints(*system_, *spaces_, x0);
  }
  Vector x;
  if (condensed_) {
    const Vector Fr = condensed_->reduce(rhs);
    Vector y(Fr.size());
    for (int i = 0; i < y.size(); ++i) y[i] = x0[condensed_->kept[i]];
    report = problem.solve(condensed_->matrix, precond_, Fr, y, tol_, maxit_);
    x = condensed_->recover(y, rhs);
  } else {
    x = x0;
    report = problem.solve(system_->matrix, precond_, rhs, x, tol_, maxit_);
  }
  // The constant shift of the mean projection perturbs the element balance
  // when the constants are not in the kernel; a second sweep settles both.
  for (int sweep = 0; sweep < (local_.empty() ? 1 : 2); ++sweep) {
    recover_local(rhs, x);
    project_pressure_constraints(*system_, *spaces_, x);
  }
  report.conservation_residual = conservation_residual(*system_, *spaces_, x, rhs).max_relative;
  report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return x;
}

}  // namespace mpet
