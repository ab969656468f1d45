#include "mpet/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "mpet/error.hpp"

namespace mpet {

namespace {

double quad_form(const SparseMatrix& M, const Vector& x) { return std::max(0.0, x.dot(M * x)); }

void check_dense(int n) {
  if (n > kDenseLimit)
    throw Error("system of size " + std::to_string(n) +
                " too large for dense eigen diagnostics; use a smaller mesh");
}

Eigen::MatrixXd dense_block(const SparseMatrix& m, const std::vector<int>& rows,
                            const std::vector<int>& cols) {
  return Eigen::MatrixXd(restrict_matrix(m, rows, cols));
}

std::vector<int> iota(int begin, int end) {
  std::vector<int> v;
  for (int i = begin; i < end; ++i) v.push_back(i);
  return v;
}

/// Unit coefficients: R = alpha_p = 1, no transfer, lambda = 1.
ScaledParameters unit_parameters(int n) {
  return ScaledParameters::direct(1.0, std::vector<double>(n, 1.0), std::vector<double>(n, 1.0),
                                  Eigen::MatrixXd::Zero(n, n));
}

}  // namespace

// -- norms -------------------------------------------------------------------

NormEvaluator::NormEvaluator(const SpaceSet& spaces, const ScaledParameters& scaled)
    : spaces_(&spaces), scaled_(scaled) {
  hdg_u_ = assemble_displacement_hdg_norm(spaces, true);
  div_ = assemble_divergence_norm(spaces, scaled.lambda);
  lambda_mass_ = assemble_pressure_mass(spaces, scaled.Lambda());
  std::vector<double> inv_r(scaled.n);
  for (int i = 0; i < scaled.n; ++i) inv_r[i] = 1.0 / scaled.R[i];
  flux_ = assemble_flux_mass(spaces, inv_r);
  for (int i = 0; i < scaled.n; ++i) {
    std::vector<double> wts(scaled.n, 0.0);
    wts[i] = 1.0;
    hdg_p_.push_back(assemble_pressure_hdg_norm(spaces, wts, true));
  }
}

NormReport NormEvaluator::evaluate(const Vector& x) const {
  if (x.size() != spaces_->size()) throw Error("evaluate_norms: state has wrong size");
  NormReport r;
  const double u2 = quad_form(hdg_u_, x);
  const double ub2 = u2 + quad_form(div_, x);
  double pb2 = quad_form(lambda_mass_, x);
  for (int i = 0; i < scaled_.n; ++i) {
    const double p2 = quad_form(hdg_p_[i], x);
    r.p_hdg.push_back(std::sqrt(p2));
    pb2 += scaled_.R[i] * p2;
  }
  const double w2 = quad_form(flux_, x);
  r.u_hdg = std::sqrt(u2);
  r.u_bar = std::sqrt(ub2);
  r.p_bar = std::sqrt(pb2);
  r.w_minus = std::sqrt(w2);
  r.product = std::sqrt(ub2 + w2 + pb2);
  return r;
}

SparseMatrix NormEvaluator::product_matrix() const {
  SparseMatrix m = hdg_u_ + div_ + lambda_mass_ + flux_;
  for (int i = 0; i < scaled_.n; ++i) m += scaled_.R[i] * hdg_p_[i];
  return m;
}

NormReport evaluate_norms(const Vector& state, const SpaceSet& spaces,
                          const ScaledParameters& scaled) {
  return NormEvaluator(spaces, scaled).evaluate(state);
}

// -- interpolation -----------------------------------------------------------

Vector interpolate(const ExactSolution& exact, const SpaceSet& s, const ScaledParameters& scaled) {
  const Mesh& mesh = s.mesh();
  const int l = s.order();
  const auto& ref = s.reference();
  const int deg = 2 * l + 6;
  const QuadratureRule seg = segment_rule(deg);
  const QuadratureRule tri = triangle_rule(deg);
  Vector x = Vector::Zero(s.size());

  for (int f = 0; f < mesh.num_facets(); ++f) {
    const Facet& F = mesh.facet(f);
    const Point& a = mesh.vertices()[F.vertices[0]];
    const Point& b = mesh.vertices()[F.vertices[1]];
    for (std::size_t q = 0; q < seg.size(); ++q) {
      const double t = seg.points[q].x();
      const Point pt = a + t * (b - a);
      const Eigen::Vector2d u = exact.u(pt);
      for (int k = 0; k <= l; ++k) {
        const double P = legendre(k, 2 * t - 1);
        x[s.u_facet_dof(f, k)] += seg.weights[q] * F.length * u.dot(F.normal) * P;
        x[s.uhat_dof(f, k)] += seg.weights[q] * (2 * k + 1) * u.dot(F.tangent) * P;
      }
      for (int i = 0; i < s.networks(); ++i) {
        const double p = exact.p[i](pt);
        for (int k = 0; k < l; ++k)
          x[s.phat_dof(i, f, k)] += seg.weights[q] * (2 * k + 1) * p * legendre(k, 2 * t - 1);
      }
    }
  }

  std::vector<int> idx;
  std::vector<double> sgn;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const AffineMap map = build_affine_map(mesh, e);
    auto pull_back = [&](const Eigen::Vector2d& v) -> Eigen::Vector2d {
      return map.det * (map.inverse * v);
    };
    s.u_dofs(e, idx, sgn);
    const auto& bt = ref.bdm_interior_tests();
    for (std::size_t m = 0; m < bt.size(); ++m) {
      double L = 0;
      for (std::size_t q = 0; q < tri.size(); ++q) {
        const Point xh = tri.points[q];
        L += tri.weights[q] * pull_back(exact.u(map.to_physical(xh))).dot(bt[m].value(xh));
      }
      x[idx[3 * s.u_per_facet() + m]] = L;
    }

    for (int i = 0; i < s.networks(); ++i) {
      auto w_at = [&](const Point& xh) {
        return pull_back(exact.flux(i, map.to_physical(xh), scaled));
      };
      int m = 0;
      for (int k = 0; k < 3; ++k) {
        const Eigen::Vector2d n = ReferenceElement::scaled_normal(k);
        for (int j = 0; j < l; ++j, ++m) {
          double L = 0;
          for (std::size_t q = 0; q < seg.size(); ++q) {
            const double t = seg.points[q].x();
            L += seg.weights[q] * w_at(ReferenceElement::edge_point(k, t)).dot(n) *
                 legendre(j, 2 * t - 1);
          }
          x[s.w_dof(i, e, m)] = L;
        }
      }
      for (const auto& test : ref.rt_interior_tests()) {
        double L = 0;
        for (std::size_t q = 0; q < tri.size(); ++q)
          L += tri.weights[q] * w_at(tri.points[q]).dot(test.value(tri.points[q]));
        x[s.w_dof(i, e, m++)] = L;
      }

      const auto& dg = ref.dg();
      const int np = static_cast<int>(dg.size());
      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(np, np);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(np);
      for (std::size_t q = 0; q < tri.size(); ++q) {
        const Point xh = tri.points[q];
        const double p = exact.p[i](map.to_physical(xh));
        for (int r = 0; r < np; ++r) {
          rhs[r] += tri.weights[q] * p * dg[r].value(xh);
          for (int c = 0; c < np; ++c) M(r, c) += tri.weights[q] * dg[r].value(xh) * dg[c].value(xh);
        }
      }
      const Eigen::VectorXd coef = M.llt().solve(rhs);
      for (int r = 0; r < np; ++r) x[s.p_dof(i, e, r)] = coef[r];
    }
  }
  return x;
}

// -- errors ------------------------------------------------------------------

ErrorReport error_norms(const Vector& x, const ExactSolution& exact, const SpaceSet& s,
                        const ScaledParameters& scaled) {
  if (x.size() != s.size()) throw Error("error_norms: state has wrong size");
  const Mesh& mesh = s.mesh();
  ElementKernel kernel(s, 2 * s.order() + 6);
  const int nu = s.u_local(), nw = s.w_local(), np = s.p_local(), nuh = s.uhat_per_facet();
  CellValues cv;
  EdgeValues ev;
  double energy = 0, ul2 = 0, pl2 = 0, wl2 = 0;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    kernel.cell(e, cv);
    const double hT = mesh.element_diameter(e);
    for (int q = 0; q < cv.nq; ++q) {
      Eigen::Vector2d u = Eigen::Vector2d::Zero();
      Eigen::Matrix2d g = Eigen::Matrix2d::Zero();
      std::array<Eigen::Matrix2d, 2> H{Eigen::Matrix2d::Zero(), Eigen::Matrix2d::Zero()};
      for (int j = 0; j < nu; ++j) {
        const double c = x[cv.u_index[j]];
        u += c * cv.u[q * nu + j];
        g += c * cv.u_grad[q * nu + j];
        H[0] += c * cv.u_hess[q * nu + j][0];
        H[1] += c * cv.u_hess[q * nu + j][1];
      }
      const Point& X = cv.x[q];
      const Eigen::Matrix2d dg = g - exact.grad_u(X);
      const Eigen::Matrix2d de = 0.5 * (dg + dg.transpose());
      const auto He = exact.hess_u(X);
      const double h2 = (H[0] - He[0]).squaredNorm() + (H[1] - He[1]).squaredNorm();
      energy += cv.weight[q] * (de.squaredNorm() + hT * hT * h2 +
                                scaled.lambda * std::pow(dg.trace(), 2));
      ul2 += cv.weight[q] * (u - exact.u(X)).squaredNorm();
      for (int i = 0; i < s.networks(); ++i) {
        double p = 0;
        Eigen::Vector2d w = Eigen::Vector2d::Zero();
        for (int r = 0; r < np; ++r) p += x[s.p_dof(i, e, r)] * cv.p[q * np + r];
        for (int m = 0; m < nw; ++m) w += x[s.w_dof(i, e, m)] * cv.w[q * nw + m];
        pl2 += cv.weight[q] * std::pow(p - exact.p[i](X), 2);
        wl2 += cv.weight[q] * (w - exact.flux(i, X, scaled)).squaredNorm();
      }
    }
    for (int k = 0; k < 3; ++k) {
      kernel.edge(e, k, ev);
      for (int q = 0; q < ev.nq; ++q) {
        double jump = 0;
        for (int kk = 0; kk < nuh; ++kk) jump += x[s.uhat_dof(ev.facet, kk)] * ev.uhat[q * nuh + kk];
        for (int j = 0; j < nu; ++j) jump -= x[cv.u_index[j]] * ev.u[q * nu + j].dot(ev.tangent);
        energy += ev.weight[q] / ev.h * jump * jump;
      }
    }
  }
  return {std::sqrt(energy), std::sqrt(ul2), std::sqrt(pl2), std::sqrt(wl2)};
}

// -- conservation ------------------------------------------------------------

ConservationReport conservation_residual(const BlockSystem& sys, const SpaceSet& s, const Vector& x,
                                         const Vector& rhs) {
  const Vector r = sys.matrix * x - rhs;
  const int np = s.p_local();
  double scale = 0;
  for (int i = 0; i < sys.ranges.networks(); ++i) {
    const Range p = sys.ranges.p[i];
    for (int row = p.begin; row < p.end; ++row) {
      scale = std::max(scale, std::abs(rhs[row]));
    }
  }
  // |K| |x| row sums on the mass-balance rows (matrix is symmetric: use columns)
  const Range pr{sys.ranges.p.front().begin, sys.ranges.p.back().end};
  for (int col = pr.begin; col < pr.end; ++col) {
    double a = 0;
    for (SparseMatrix::InnerIterator it(sys.matrix, col); it; ++it)
      a += std::abs(it.value() * x[it.row()]);
    scale = std::max(scale, a);
  }
  if (scale == 0) scale = 1;

  ConservationReport rep;
  for (int i = 0; i < sys.ranges.networks(); ++i) {
    const Range p = sys.ranges.p[i];
    const int ne = p.size() / np;
    for (int e = 0; e < ne; ++e) {
      double m = 0;
      for (int k = 0; k < np; ++k) m = std::max(m, std::abs(r[p.begin + e * np + k]));
      rep.rows.push_back({e, i, m / scale});
      rep.max_relative = std::max(rep.max_relative, m / scale);
    }
  }
  return rep;
}

// -- inf-sup -----------------------------------------------------------------

double estimate_inf_sup(const SpaceSet& s, InfSupKind kind) {
  const Mesh& mesh = s.mesh();
  const ScaledParameters unit = unit_parameters(s.networks());
  if (kind == InfSupKind::StokesLike) {
    std::vector<int> vel;
    for (int f = 0; f < mesh.num_facets(); ++f) {
      if (mesh.facet(f).is_boundary()) continue;
      for (int k = 0; k < s.u_per_facet(); ++k) vel.push_back(s.u_facet_dof(f, k));
    }
    for (int i = mesh.num_facets() * s.u_per_facet(); i < s.num_u(); ++i) vel.push_back(i);
    for (int f = 0; f < mesh.num_facets(); ++f) {
      if (mesh.facet(f).is_boundary()) continue;
      for (int k = 0; k < s.uhat_per_facet(); ++k) vel.push_back(s.uhat_dof(f, k));
    }
    const std::vector<int> pr = iota(s.offset_p(0), s.offset_p(0) + s.num_p_network());
    check_dense(static_cast<int>(vel.size()));
    const Eigen::MatrixXd X = dense_block(assemble_displacement_hdg_norm(s, true), vel, vel);
    const Eigen::MatrixXd B =
        dense_block(assemble_divdiv_and_coupling(s, unit).coupling, pr, vel);
    Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(s.networks(), s.networks());
    coef(0, 0) = 1.0;
    const Eigen::MatrixXd M = dense_block(assemble_pressure_mass(s, coef), pr, pr);
    Eigen::LLT<Eigen::MatrixXd> llt(X);
    if (llt.info() != Eigen::Success) throw SolverError("HDG norm matrix not SPD");
    Eigen::MatrixXd S = B * llt.solve(B.transpose());
    S = 0.5 * (S + S.transpose()).eval();
    const Eigen::VectorXd ev = generalized_eigenvalues(S, M);
    // the constant pressure is in the kernel (zero normal trace)
    const double top = ev.maxCoeff();
    for (int i = 0; i < ev.size(); ++i)
      if (ev[i] > 1e-9 * top) return std::sqrt(ev[i]);
    return 0.0;
  }

  const std::vector<int> w = iota(s.offset_w(0), s.offset_w(0) + s.num_w_network());
  std::vector<int> pq = iota(s.offset_p(0), s.offset_p(0) + s.num_p_network());
  for (int i = s.offset_phat(0); i < s.offset_phat(0) + s.num_phat_network(); ++i) pq.push_back(i);
  check_dense(static_cast<int>(pq.size()));
  const FlowBlocks flow = assemble_flow(s, unit, -1);
  const Eigen::MatrixXd B = dense_block(flow.b, pq, w);
  const Eigen::MatrixXd Mw = dense_block(flow.mass, w, w);
  std::vector<double> wts(s.networks(), 0.0);
  wts[0] = 1.0;
  const Eigen::MatrixXd H = dense_block(assemble_pressure_hdg_norm(s, wts, true), pq, pq);
  Eigen::MatrixXd S = B * Mw.llt().solve(B.transpose());
  S = 0.5 * (S + S.transpose()).eval();
  // remove the constant mode (q = qhat = c) shared by both forms
  Eigen::VectorXd kappa = Eigen::VectorXd::Zero(pq.size());
  for (int e = 0; e < mesh.num_elements(); ++e) kappa[e * s.p_local()] = 1.0;
  for (int f = 0; f < mesh.num_facets(); ++f)
    kappa[s.num_p_network() + f * s.phat_per_facet()] = 1.0;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(kappa);
  const Eigen::MatrixXd Q = qr.householderQ();
  const Eigen::MatrixXd Z = Q.rightCols(pq.size() - 1);
  Eigen::MatrixXd Sz = Z.transpose() * S * Z;
  Eigen::MatrixXd Hz = Z.transpose() * H * Z;
  Sz = 0.5 * (Sz + Sz.transpose()).eval();
  Hz = 0.5 * (Hz + Hz.transpose()).eval();
  const Eigen::VectorXd ev = generalized_eigenvalues(Sz, Hz);
  return std::sqrt(std::max(0.0, ev.minCoeff()));
}

// -- spectra -----------------------------------------------------------------

Eigen::VectorXd generalized_eigenvalues(const Eigen::MatrixXd& K, const Eigen::MatrixXd& P) {
  check_dense(static_cast<int>(K.rows()));
  // symmetric diagonal scaling leaves the eigenvalues unchanged and evens out
  // blocks of very different magnitude
  Eigen::VectorXd d = P.diagonal().cwiseAbs();
  for (int i = 0; i < d.size(); ++i) d[i] = d[i] > 0 ? 1.0 / std::sqrt(d[i]) : 1.0;
  const Eigen::MatrixXd Ks = d.asDiagonal() * K * d.asDiagonal();
  const Eigen::MatrixXd Ps = d.asDiagonal() * P * d.asDiagonal();
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Ks, Ps, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw SolverError("generalized eigensolver failed");
  return es.eigenvalues();
}

SpectrumSummary summarize_spectrum(const Eigen::VectorXd& values) {
  SpectrumSummary s;
  s.values = values;
  s.neg_min = s.pos_min = std::numeric_limits<double>::infinity();
  s.neg_max = s.pos_max = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (v < 0) {
      ++s.negative;
      s.neg_min = std::min(s.neg_min, v);
      s.neg_max = std::max(s.neg_max, v);
    } else {
      ++s.positive;
      s.pos_min = std::min(s.pos_min, v);
      s.pos_max = std::max(s.pos_max, v);
    }
  }
  return s;
}

namespace {

/// Orthonormal basis of {z : L^T z = 0}.
Eigen::MatrixXd constrained_basis(const Eigen::MatrixXd& L) {
  const int n = static_cast<int>(L.rows());
  if (L.cols() == 0) return Eigen::MatrixXd::Identity(n, n);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(L);
  const Eigen::MatrixXd Q = qr.householderQ();
  return Q.rightCols(n - L.cols());
}

Eigen::MatrixXd sym_part(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

SpectrumSummary preconditioned_spectrum(const SparseMatrix& system, const BlockPreconditioner& P) {
  check_dense(static_cast<int>(system.rows()));
  if (system.rows() != P.size()) throw Error("preconditioner and system sizes differ");
  // Built block by block as T_ab = L_a^{-1} Z_a^T K_ab Z_b L_b^{-T}, with Z_b a
  // basis of the constrained subspace of block b and L_b L_b^T = Z_b^T P_b Z_b.
  // Blocks of very different conditioning then do not pollute each other, and
  // diagonal blocks that coincide with the preconditioner give the identity.
  const int nb = P.num_blocks();
  const Eigen::MatrixXd Lall = P.constraints();
  const Eigen::MatrixXd Kd = Eigen::MatrixXd(system);
  std::vector<Eigen::MatrixXd> Z(nb), Linv(nb);
  std::vector<int> offset(nb + 1, 0);
  std::vector<bool> exact(nb, false);
  for (int b = 0; b < nb; ++b) {
    const Range r = P.block_range(b);
    Eigen::MatrixXd Lb = Lall.middleRows(r.begin, r.size());
    std::vector<int> cols;
    for (int c = 0; c < Lb.cols(); ++c)
      if (Lb.col(c).norm() > 0) cols.push_back(c);
    Eigen::MatrixXd Lc(r.size(), cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c) Lc.col(c) = Lb.col(cols[c]);
    Z[b] = constrained_basis(Lc);
    const Eigen::MatrixXd Pb = Eigen::MatrixXd(P.block_matrix(b));
    exact[b] = cols.empty() && (Kd.block(r.begin, r.begin, r.size(), r.size()) - Pb).norm() == 0.0;
    Eigen::LLT<Eigen::MatrixXd> llt(sym_part(Z[b].transpose() * Pb * Z[b]));
    if (llt.info() != Eigen::Success) throw SolverError("preconditioner not SPD");
    Linv[b] = llt.matrixL().solve(Eigen::MatrixXd::Identity(Z[b].cols(), Z[b].cols()));
    offset[b + 1] = offset[b] + static_cast<int>(Z[b].cols());
  }
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(offset[nb], offset[nb]);
  for (int a = 0; a < nb; ++a) {
    const Range ra = P.block_range(a);
    for (int b = a; b < nb; ++b) {
      const Range rb = P.block_range(b);
      const int na = offset[a + 1] - offset[a], nbb = offset[b + 1] - offset[b];
      Eigen::MatrixXd Tab;
      if (a == b && exact[a]) {
        Tab = Eigen::MatrixXd::Identity(na, na);
      } else {
        const Eigen::MatrixXd Kab = Kd.block(ra.begin, rb.begin, ra.size(), rb.size());
        Tab = Linv[a] * (Z[a].transpose() * Kab * Z[b]) * Linv[b].transpose();
      }
      T.block(offset[a], offset[b], na, nbb) = Tab;
      if (a != b) T.block(offset[b], offset[a], nbb, na) = Tab.transpose();
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym_part(T), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw SolverError("eigensolver failed");
  return summarize_spectrum(es.eigenvalues());
}

SchurSpectra schur_spectra(const BlockSystem& sys, const SpaceSet& spaces,
                           const ScaledParameters& scaled) {
  check_dense(sys.size());
  const Eigen::MatrixXd A = Eigen::MatrixXd(sys.A());
  const Eigen::MatrixXd B = Eigen::MatrixXd(sys.B());
  const Eigen::MatrixXd C = Eigen::MatrixXd(sys.C());
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) throw SolverError("penalty too small");
  Eigen::MatrixXd S = B * llt.solve(B.transpose()) + C;
  S = 0.5 * (S + S.transpose()).eval();
  const Eigen::MatrixXd Xp0 = Eigen::MatrixXd(pressure_norm_block(sys, spaces, scaled));
  const CondensedSystem c = condense_velocity(sys);
  Eigen::MatrixXd Xt = Eigen::MatrixXd(c.schur) + Eigen::MatrixXd(lambda_pressure_mass(sys, spaces, scaled));
  Xt = 0.5 * (Xt + Xt.transpose()).eval();
  const Range p = sys.ranges.pressure();
  const Eigen::MatrixXd Z =
      constrained_basis(pressure_modes(sys, spaces, true).middleRows(p.begin, p.size()));
  S = sym_part(Z.transpose() * S * Z);
  const Eigen::MatrixXd Xp = sym_part(Z.transpose() * Xp0 * Z);
  Xt = sym_part(Z.transpose() * Xt * Z);
  SchurSpectra out;
  out.against_full = generalized_eigenvalues(S, Xp);
  out.against_schur = generalized_eigenvalues(S, Xt);
  out.norm_ratio = generalized_eigenvalues(Xp, Xt);
  return out;
}

// -- csv ---------------------------------------------------------------------

void write_conservation_csv(std::ostream& os, const ConservationReport& report) {
  os << "element,network,residual\n";
  os.precision(10);
  for (const auto& r : report.rows) os << r.element << ',' << r.network << ',' << r.residual << '\n';
}

void write_inf_sup_csv(std::ostream& os, const std::vector<std::pair<int, double>>& rows) {
  os << "mesh_n,beta_h\n";
  os.precision(10);
  for (const auto& [n, b] : rows) os << n << ',' << b << '\n';
}

}  // namespace mpet
