#include "mpet/assembly.hpp"

#include <memory>
#include <set>

#include "mpet/error.hpp"

namespace mpet {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

int resolve_degree(const SpaceSet& s, int d) {
  return d > 0 ? d : default_quadrature_degree(s.order());
}

SparseMatrix from_triplets(int n, const Triplets& t) {
  SparseMatrix m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

void scatter(Triplets& t, const std::vector<int>& rows, const std::vector<int>& cols,
             const Eigen::MatrixXd& local) {
  for (int i = 0; i < local.rows(); ++i)
    for (int j = 0; j < local.cols(); ++j)
      if (local(i, j) != 0.0) t.emplace_back(rows[i], cols[j], local(i, j));
}

/// Local matrices of symmetric forms are symmetrized so that rounding keeps
/// the global matrix exactly symmetric.
void scatter_symmetric(Triplets& t, const std::vector<int>& idx, const Eigen::MatrixXd& local) {
  const Eigen::MatrixXd s = 0.5 * (local + local.transpose());
  scatter(t, idx, idx, s);
}

Eigen::Matrix2d sym(const Eigen::Matrix2d& g) { return 0.5 * (g + g.transpose()); }

/// Local (u, uhat) unknowns of an element edge, and their traces:
/// jump J = (vhat - v).t and flux F = t^T eps(v) n.
struct EdgeTraces {
  std::vector<int> index;
  Eigen::VectorXd J, F;
};

void edge_traces(const SpaceSet& s, const CellValues& cv, const EdgeValues& ev, int q,
                 EdgeTraces& out) {
  const int nu = s.u_local();
  const int nuh = s.uhat_per_facet();
  if (out.index.size() != std::size_t(nu + nuh)) {
    out.index.resize(nu + nuh);
    out.J.resize(nu + nuh);
    out.F.resize(nu + nuh);
  }
  for (int j = 0; j < nu; ++j) {
    out.index[j] = cv.u_index[j];
    out.J[j] = -ev.u[q * nu + j].dot(ev.tangent);
    out.F[j] = ev.tangent.dot(sym(ev.u_grad[q * nu + j]) * ev.normal);
  }
  for (int k = 0; k < nuh; ++k) {
    out.index[nu + k] = s.uhat_dof(ev.facet, k);
    out.J[nu + k] = ev.uhat[q * nuh + k];
    out.F[nu + k] = 0.0;
  }
}

std::vector<int> p_indices(const SpaceSet& s, int i, int e) {
  std::vector<int> idx(s.p_local());
  for (int r = 0; r < s.p_local(); ++r) idx[r] = s.p_dof(i, e, r);
  return idx;
}

std::vector<int> w_indices(const SpaceSet& s, int i, int e) {
  std::vector<int> idx(s.w_local());
  for (int m = 0; m < s.w_local(); ++m) idx[m] = s.w_dof(i, e, m);
  return idx;
}

std::vector<int> phat_indices(const SpaceSet& s, int i, int f) {
  std::vector<int> idx(s.phat_per_facet());
  for (int k = 0; k < s.phat_per_facet(); ++k) idx[k] = s.phat_dof(i, f, k);
  return idx;
}

Range count_free(const Range& r, const std::vector<int>& new_index) {
  Range out{-1, -1};
  int first = -1, last = -1;
  for (int i = r.begin; i < r.end; ++i) {
    if (new_index[i] < 0) continue;
    if (first < 0) first = new_index[i];
    last = new_index[i];
  }
  if (first < 0) {
    // empty range: place it at the position of the next free unknown
    int pos = 0;
    for (int i = r.begin - 1; i >= 0; --i) {
      if (new_index[i] >= 0) {
        pos = new_index[i] + 1;
        break;
      }
    }
    return {pos, pos};
  }
  out.begin = first;
  out.end = last + 1;
  return out;
}

}  // namespace

int default_quadrature_degree(int order) { return 2 * order + 2; }

// -- BlockSystem -------------------------------------------------------------

SparseMatrix BlockSystem::A() const {
  const Range a = ranges.primal();
  return matrix.block(a.begin, a.begin, a.size(), a.size());
}

SparseMatrix BlockSystem::B() const {
  const Range a = ranges.primal();
  const Range p = ranges.pressure();
  return matrix.block(p.begin, a.begin, p.size(), a.size());
}

SparseMatrix BlockSystem::C() const {
  const Range p = ranges.pressure();
  return -SparseMatrix(matrix.block(p.begin, p.begin, p.size(), p.size()));
}

Vector BlockSystem::expand(const Vector& x) const {
  if (!constrained()) return x;
  Vector full = dirichlet;
  for (std::size_t i = 0; i < free_dofs.size(); ++i) full[free_dofs[i]] = x[i];
  return full;
}

DisplacementBC DisplacementBC::fixed(Eigen::Vector2d u) {
  DisplacementBC bc;
  bc.kind = Kind::Dirichlet;
  bc.value = [u](const Point&, double) { return u; };
  return bc;
}

DisplacementBC DisplacementBC::load(
    std::function<Eigen::Vector2d(const Point&, const Eigen::Vector2d&, double)> traction) {
  DisplacementBC bc;
  bc.kind = Kind::Traction;
  bc.traction = std::move(traction);
  return bc;
}

PressureBC PressureBC::dirichlet(std::function<double(const Point&, double)> value) {
  PressureBC bc;
  bc.kind = Kind::Dirichlet;
  bc.value = std::move(value);
  return bc;
}

PressureBC PressureBC::zero_flux() { return PressureBC{}; }

void BoundaryConditionSet::validate(const Mesh& mesh, int networks) const {
  if (!mean_zero.empty() && static_cast<int>(mean_zero.size()) != networks)
    throw ConfigError("mean-zero flags do not match the number of networks");
  std::set<std::string> tags;
  for (const auto& f : mesh.facets())
    if (f.is_boundary()) tags.insert(f.tag);
  for (const auto& tag : tags) {
    auto d = displacement.find(tag);
    if (d == displacement.end())
      throw ConfigError("no displacement condition for boundary tag '" + tag + "'");
    if (d->second.kind == DisplacementBC::Kind::Dirichlet && !d->second.value)
      throw ConfigError("displacement condition on '" + tag + "' has no value");
    if (d->second.kind == DisplacementBC::Kind::Traction && !d->second.traction)
      throw ConfigError("traction condition on '" + tag + "' has no value");
    auto p = pressure.find(tag);
    if (p == pressure.end())
      throw ConfigError("no pressure condition for boundary tag '" + tag + "'");
    if (static_cast<int>(p->second.size()) != networks)
      throw ConfigError("pressure conditions on '" + tag + "' do not match the number of networks");
    for (const auto& bc : p->second)
      if (bc.kind == PressureBC::Kind::Dirichlet && !bc.value)
        throw ConfigError("pressure condition on '" + tag + "' has no value");
  }
}

FieldRanges unconstrained_ranges(const SpaceSet& s) {
  FieldRanges r;
  r.u = {0, s.num_u()};
  r.uhat = {s.offset_uhat(), s.offset_uhat() + s.num_uhat()};
  for (int i = 0; i < s.networks(); ++i) {
    r.w.push_back({s.offset_w(i), s.offset_w(i) + s.num_w_network()});
    r.p.push_back({s.offset_p(i), s.offset_p(i) + s.num_p_network()});
    r.phat.push_back({s.offset_phat(i), s.offset_phat(i) + s.num_phat_network()});
  }
  return r;
}

// -- bilinear forms ----------------------------------------------------------

SparseMatrix assemble_a_hdg(const SpaceSet& s, double eta, int quad_degree) {
  ElementKernel kernel(s, resolve_degree(s, quad_degree));
  const Mesh& mesh = s.mesh();
  const int nu = s.u_local();
  const int l = s.order();
  CellValues cv;
  EdgeValues ev;
  EdgeTraces tr;
  Triplets t;
  Eigen::MatrixXd K(nu, nu);
  Eigen::MatrixXd Ke;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    kernel.cell(e, cv);
    K.setZero();
    for (int q = 0; q < cv.nq; ++q) {
      for (int i = 0; i < nu; ++i) {
        const Eigen::Matrix2d ei = sym(cv.u_grad[q * nu + i]);
        for (int j = 0; j <= i; ++j) {
          double v = cv.weight[q] * ei.cwiseProduct(sym(cv.u_grad[q * nu + j])).sum();
          K(i, j) += v;
          if (j != i) K(j, i) += v;
        }
      }
    }
    scatter_symmetric(t, cv.u_index, K);

    for (int k = 0; k < 3; ++k) {
      kernel.edge(e, k, ev);
      const double pen = eta * l * l / ev.h;
      Ke.setZero(nu + s.uhat_per_facet(), nu + s.uhat_per_facet());
      for (int q = 0; q < ev.nq; ++q) {
        edge_traces(s, cv, ev, q, tr);
        Ke += ev.weight[q] *
              (tr.F * tr.J.transpose() + tr.J * tr.F.transpose() + pen * tr.J * tr.J.transpose());
      }
      scatter_symmetric(t, tr.index, Ke);
    }
  }
  return from_triplets(s.size(), t);
}

DivergenceBlocks assemble_divdiv_and_coupling(const SpaceSet& s, const ScaledParameters& scaled,
                                              int quad_degree) {
  ElementKernel kernel(s, resolve_degree(s, quad_degree));
  const int nu = s.u_local();
  const int np = s.p_local();
  CellValues cv;
  Triplets td, tc;
  Eigen::MatrixXd D(nu, nu), Bl(np, nu);
  for (int e = 0; e < s.mesh().num_elements(); ++e) {
    kernel.cell(e, cv);
    D.setZero();
    Bl.setZero();
    for (int q = 0; q < cv.nq; ++q) {
      for (int i = 0; i < nu; ++i) {
        const double di = cv.u_div[q * nu + i];
        for (int j = 0; j < nu; ++j) D(i, j) += cv.weight[q] * scaled.lambda * di * cv.u_div[q * nu + j];
        for (int r = 0; r < np; ++r) Bl(r, i) -= cv.weight[q] * di * cv.p[q * np + r];
      }
    }
    scatter_symmetric(td, cv.u_index, D);
    for (int i = 0; i < s.networks(); ++i) scatter(tc, p_indices(s, i, e), cv.u_index, Bl);
  }
  return {from_triplets(s.size(), td), from_triplets(s.size(), tc)};
}

FlowBlocks assemble_flow(const SpaceSet& s, const ScaledParameters& scaled, int quad_degree) {
  if (scaled.n != s.networks()) throw ConfigError("parameter and space network counts differ");
  ElementKernel kernel(s, resolve_degree(s, quad_degree));
  const int nw = s.w_local();
  const int np = s.p_local();
  const int nph = s.phat_per_facet();
  CellValues cv;
  EdgeValues ev;
  Triplets tm, tb, tc;
  Eigen::MatrixXd M(nw, nw), Bp(np, nw), Bh(nph, nw), Mp(np, np);
  for (int e = 0; e < s.mesh().num_elements(); ++e) {
    kernel.cell(e, cv);
    M.setZero();
    Bp.setZero();
    Mp.setZero();
    for (int q = 0; q < cv.nq; ++q) {
      const double w = cv.weight[q];
      for (int a = 0; a < nw; ++a) {
        for (int b = 0; b < nw; ++b) M(a, b) += w * cv.w[q * nw + a].dot(cv.w[q * nw + b]);
        for (int r = 0; r < np; ++r) Bp(r, a) -= w * cv.w_div[q * nw + a] * cv.p[q * np + r];
      }
      for (int r = 0; r < np; ++r)
        for (int c = 0; c < np; ++c) Mp(r, c) += w * cv.p[q * np + r] * cv.p[q * np + c];
    }
    Mp = 0.5 * (Mp + Mp.transpose()).eval();
    for (int i = 0; i < s.networks(); ++i) {
      const auto wi = w_indices(s, i, e);
      const auto pi = p_indices(s, i, e);
      scatter_symmetric(tm, wi, M / scaled.R[i]);
      scatter(tb, pi, wi, Bp);
      for (int j = 0; j < s.networks(); ++j)
        if (scaled.zeta(i, j) != 0.0) scatter(tc, pi, p_indices(s, j, e), scaled.zeta(i, j) * Mp);
    }
    for (int k = 0; k < 3; ++k) {
      kernel.edge(e, k, ev);
      Bh.setZero();
      for (int q = 0; q < ev.nq; ++q)
        for (int kk = 0; kk < nph; ++kk)
          for (int a = 0; a < nw; ++a)
            Bh(kk, a) += ev.weight[q] * ev.w[q * nw + a].dot(ev.normal) * ev.phat[q * nph + kk];
      for (int i = 0; i < s.networks(); ++i)
        scatter(tb, phat_indices(s, i, ev.facet), w_indices(s, i, e), Bh);
    }
  }
  return {from_triplets(s.size(), tm), from_triplets(s.size(), tb), from_triplets(s.size(), tc)};
}

Vector assemble_load(const SpaceSet& s, const SourceTerms& src, int quad_degree) {
  Vector F = Vector::Zero(s.size());
  if (!src.f && !src.f_div && src.g.empty()) return F;
  ElementKernel kernel(s, resolve_degree(s, quad_degree));
  const int nu = s.u_local();
  const int np = s.p_local();
  CellValues cv;
  for (int e = 0; e < s.mesh().num_elements(); ++e) {
    kernel.cell(e, cv);
    for (int q = 0; q < cv.nq; ++q) {
      if (src.f) {
        const Eigen::Vector2d f = src.f(cv.x[q]);
        for (int j = 0; j < nu; ++j) F[cv.u_index[j]] += cv.weight[q] * f.dot(cv.u[q * nu + j]);
      }
      if (src.f_div) {
        const double sd = src.f_div(cv.x[q]);
        for (int j = 0; j < nu; ++j) F[cv.u_index[j]] += cv.weight[q] * sd * cv.u_div[q * nu + j];
      }
      for (int i = 0; i < static_cast<int>(src.g.size()) && i < s.networks(); ++i) {
        if (!src.g[i]) continue;
        const double g = src.g[i](cv.x[q]);
        for (int r = 0; r < np; ++r) F[s.p_dof(i, e, r)] += cv.weight[q] * g * cv.p[q * np + r];
      }
    }
  }
  return F;
}

BlockSystem assemble_system(const SpaceSet& s, const ScaledParameters& scaled, double eta,
                            const SourceTerms& sources, int quad_degree) {
  scaled.validate();
  if (scaled.n != s.networks()) throw ConfigError("parameter and space network counts differ");
  if (!(eta > 0)) throw ConfigError("penalty parameter must be positive");
  const SparseMatrix hdg = assemble_a_hdg(s, eta, quad_degree);
  const DivergenceBlocks div = assemble_divdiv_and_coupling(s, scaled, quad_degree);
  const FlowBlocks flow = assemble_flow(s, scaled, quad_degree);
  const SparseMatrix B = div.coupling + flow.b;
  const SparseMatrix Bt = B.transpose();
  BlockSystem sys;
  sys.matrix = hdg + div.divdiv + flow.mass + B + Bt - flow.C;
  sys.matrix.makeCompressed();
  sys.rhs = assemble_load(s, sources, quad_degree);
  sys.ranges = unconstrained_ranges(s);
  sys.w_block = s.w_local();
  sys.full_size = s.size();
  sys.dirichlet = Vector::Zero(s.size());
  sys.mean_zero.assign(s.networks(), false);
  sys.pressure_constraints = Eigen::MatrixXd(s.networks(), 0);
  return sys;
}

// -- norm matrices -----------------------------------------------------------

SparseMatrix assemble_displacement_hdg_norm(const SpaceSet& s, bool with_second, int quad_degree) {
  ElementKernel kernel(s, resolve_degree(s, quad_degree));
  const Mesh& mesh = s.mesh();
  const int nu = s.u_local();
  CellValues cv;
  EdgeValues ev;
  EdgeTraces tr;
  Triplets t;
  Eigen::MatrixXd K(nu, nu), Ke;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    kernel.cell(e, cv);
    const double hT = mesh.element_diameter(e);
    K.setZero();
    for (int q = 0; q < cv.nq; ++q) {
      for (int i = 0; i < nu; ++i) {
        const int a = q * nu + i;
        const Eigen::Matrix2d ei = sym(cv.u_grad[a]);
        for (int j = 0; j < nu; ++j) {
          const int b = q * nu + j;
          double v = ei.cwiseProduct(sym(cv.u_grad[b])).sum();
          if (with_second)
            v += hT * hT *
                 (cv.u_hess[a][0].cwiseProduct(cv.u_hess[b][0]).sum() +
                  cv.u_hess[a][1].cwiseProduct(cv.u_hess[b][1]).sum());
          K(i, j) += cv.weight[q] * v;
        }
      }
    }
    scatter_symmetric(t, cv.u_index, K);
    for (int k = 0; k < 3; ++k) {
      kernel.edge(e, k, ev);
      Ke.setZero(nu + s.uhat_per_facet(), nu + s.uhat_per_facet());
      for (int q = 0; q < ev.nq; ++q) {
        edge_traces(s, cv, ev, q, tr);
        Ke += ev.weight[q] / ev.h * tr.J * tr.J.transpose();
      }
      scatter_symmetric(t, tr.index, Ke);
    }
  }
  return from_triplets(s.size(), t);
}

SparseMatrix assemble_divergence_norm(const SpaceSet& s, double lambda, int quad_degree) {
  ScaledParameters sp;
  sp.lambda = lambda;
  return assemble_divdiv_and_coupling(s, sp, quad_degree).divdiv;
}

SparseMatrix assemble_pressure_hdg_norm(const SpaceSet& s, const std::vector<double>& weights,
                                        bool with_second, int quad_degree) {
  if (static_cast<int>(weights.size()) != s.networks())
    throw Error("pressure norm: one weight per network required");
  ElementKernel kernel(s, resolve_degree(s, quad_degree));
  const Mesh& mesh = s.mesh();
  const int np = s.p_local();
  const int nph = s.phat_per_facet();
  CellValues cv;
  EdgeValues ev;
  Triplets t;
  Eigen::MatrixXd K(np, np), Ke(np + nph, np + nph);
  Eigen::VectorXd J(np + nph);
  for (int e = 0; e < mesh.num_elements(); ++e) {
    kernel.cell(e, cv);
    const double hT = mesh.element_diameter(e);
    K.setZero();
    for (int q = 0; q < cv.nq; ++q) {
      for (int r = 0; r < np; ++r) {
        for (int c = 0; c < np; ++c) {
          double v = cv.p_grad[q * np + r].dot(cv.p_grad[q * np + c]);
          if (with_second)
            v += hT * hT * cv.p_hess[q * np + r].cwiseProduct(cv.p_hess[q * np + c]).sum();
          K(r, c) += cv.weight[q] * v;
        }
      }
    }
    for (int i = 0; i < s.networks(); ++i) {
      const auto pi = p_indices(s, i, e);
      scatter_symmetric(t, pi, weights[i] * K);
    }
    for (int k = 0; k < 3; ++k) {
      kernel.edge(e, k, ev);
      Ke.setZero();
      for (int q = 0; q < ev.nq; ++q) {
        for (int r = 0; r < np; ++r) J[r] = -ev.p[q * np + r];
        for (int kk = 0; kk < nph; ++kk) J[np + kk] = ev.phat[q * nph + kk];
        Ke += ev.weight[q] / ev.h * J * J.transpose();
      }
      for (int i = 0; i < s.networks(); ++i) {
        std::vector<int> idx = p_indices(s, i, e);
        const auto ph = phat_indices(s, i, ev.facet);
        idx.insert(idx.end(), ph.begin(), ph.end());
        scatter_symmetric(t, idx, weights[i] * Ke);
      }
    }
  }
  return from_triplets(s.size(), t);
}

SparseMatrix assemble_pressure_mass(const SpaceSet& s, const Eigen::MatrixXd& coef,
                                    int quad_degree) {
  if (coef.rows() != s.networks() || coef.cols() != s.networks())
    throw Error("pressure mass: coefficient matrix has wrong size");
  ElementKernel kernel(s, resolve_degree(s, quad_degree));
  const int np = s.p_local();
  CellValues cv;
  Triplets t;
  Eigen::MatrixXd Mp(np, np);
  for (int e = 0; e < s.mesh().num_elements(); ++e) {
    kernel.cell(e, cv);
    Mp.setZero();
    for (int q = 0; q < cv.nq; ++q)
      for (int r = 0; r < np; ++r)
        for (int c = 0; c < np; ++c) Mp(r, c) += cv.weight[q] * cv.p[q * np + r] * cv.p[q * np + c];
    Mp = 0.5 * (Mp + Mp.transpose()).eval();
    for (int i = 0; i < s.networks(); ++i)
      for (int j = 0; j < s.networks(); ++j)
        if (coef(i, j) != 0.0) scatter(t, p_indices(s, i, e), p_indices(s, j, e), coef(i, j) * Mp);
  }
  return from_triplets(s.size(), t);
}

SparseMatrix assemble_flux_mass(const SpaceSet& s, const std::vector<double>& weights,
                                int quad_degree) {
  if (static_cast<int>(weights.size()) != s.networks())
    throw Error("flux mass: one weight per network required");
  ElementKernel kernel(s, resolve_degree(s, quad_degree));
  const int nw = s.w_local();
  CellValues cv;
  Triplets t;
  Eigen::MatrixXd M(nw, nw);
  for (int e = 0; e < s.mesh().num_elements(); ++e) {
    kernel.cell(e, cv);
    M.setZero();
    for (int q = 0; q < cv.nq; ++q)
      for (int a = 0; a < nw; ++a)
        for (int b = 0; b < nw; ++b) M(a, b) += cv.weight[q] * cv.w[q * nw + a].dot(cv.w[q * nw + b]);
    for (int i = 0; i < s.networks(); ++i) {
      const auto wi = w_indices(s, i, e);
      scatter_symmetric(t, wi, weights[i] * M);
    }
  }
  return from_triplets(s.size(), t);
}

Vector pressure_integrals(const SpaceSet& s, int network) {
  ElementKernel kernel(s, default_quadrature_degree(s.order()));
  const int np = s.p_local();
  CellValues cv;
  Vector v = Vector::Zero(s.size());
  for (int e = 0; e < s.mesh().num_elements(); ++e) {
    kernel.cell(e, cv);
    for (int q = 0; q < cv.nq; ++q)
      for (int r = 0; r < np; ++r) v[s.p_dof(network, e, r)] += cv.weight[q] * cv.p[q * np + r];
  }
  return v;
}

// -- boundary conditions -----------------------------------------------------

std::vector<bool> essential_mask(const SpaceSet& s, const BoundaryConditionSet& bcs) {
  std::vector<bool> mask(s.size(), false);
  const Mesh& mesh = s.mesh();
  for (int f = 0; f < mesh.num_facets(); ++f) {
    const Facet& facet = mesh.facet(f);
    if (!facet.is_boundary()) continue;
    auto d = bcs.displacement.find(facet.tag);
    if (d == bcs.displacement.end())
      throw ConfigError("no displacement condition for boundary tag '" + facet.tag + "'");
    if (d->second.kind == DisplacementBC::Kind::Dirichlet) {
      for (int k = 0; k < s.u_per_facet(); ++k) mask[s.u_facet_dof(f, k)] = true;
      for (int k = 0; k < s.uhat_per_facet(); ++k) mask[s.uhat_dof(f, k)] = true;
    }
    auto p = bcs.pressure.find(facet.tag);
    if (p == bcs.pressure.end())
      throw ConfigError("no pressure condition for boundary tag '" + facet.tag + "'");
    for (int i = 0; i < s.networks() && i < static_cast<int>(p->second.size()); ++i) {
      if (p->second[i].kind != PressureBC::Kind::Dirichlet) continue;
      for (int k = 0; k < s.phat_per_facet(); ++k) mask[s.phat_dof(i, f, k)] = true;
    }
  }
  return mask;
}

Vector essential_values(const SpaceSet& s, const BoundaryConditionSet& bcs, double t,
                        int quad_degree) {
  Vector x = Vector::Zero(s.size());
  const Mesh& mesh = s.mesh();
  const QuadratureRule rule = segment_rule(resolve_degree(s, quad_degree));
  for (int f = 0; f < mesh.num_facets(); ++f) {
    const Facet& facet = mesh.facet(f);
    if (!facet.is_boundary()) continue;
    const Point& a = mesh.vertices()[facet.vertices[0]];
    const Point& b = mesh.vertices()[facet.vertices[1]];
    auto d = bcs.displacement.find(facet.tag);
    if (d != bcs.displacement.end() && d->second.kind == DisplacementBC::Kind::Dirichlet) {
      for (std::size_t q = 0; q < rule.size(); ++q) {
        const double sq = rule.points[q].x();
        const Eigen::Vector2d g = d->second.value(a + sq * (b - a), t);
        const double gn = g.dot(facet.normal), gt = g.dot(facet.tangent);
        for (int k = 0; k < s.u_per_facet(); ++k) {
          const double P = legendre(k, 2 * sq - 1);
          x[s.u_facet_dof(f, k)] += rule.weights[q] * facet.length * gn * P;
          x[s.uhat_dof(f, k)] += rule.weights[q] * (2 * k + 1) * gt * P;
        }
      }
    }
    auto p = bcs.pressure.find(facet.tag);
    if (p == bcs.pressure.end()) continue;
    for (int i = 0; i < s.networks() && i < static_cast<int>(p->second.size()); ++i) {
      if (p->second[i].kind != PressureBC::Kind::Dirichlet) continue;
      for (std::size_t q = 0; q < rule.size(); ++q) {
        const double sq = rule.points[q].x();
        const double g = p->second[i].value(a + sq * (b - a), t);
        for (int k = 0; k < s.phat_per_facet(); ++k)
          x[s.phat_dof(i, f, k)] += rule.weights[q] * (2 * k + 1) * g * legendre(k, 2 * sq - 1);
      }
    }
  }
  return x;
}

Vector natural_load(const SpaceSet& s, const BoundaryConditionSet& bcs, double t,
                    int quad_degree) {
  Vector F = Vector::Zero(s.size());
  const Mesh& mesh = s.mesh();
  std::unique_ptr<ElementKernel> kernel;
  CellValues cv;
  EdgeValues ev;
  const int nu = s.u_local();
  const int nuh = s.uhat_per_facet();
  for (int f = 0; f < mesh.num_facets(); ++f) {
    const Facet& facet = mesh.facet(f);
    if (!facet.is_boundary()) continue;
    auto d = bcs.displacement.find(facet.tag);
    if (d == bcs.displacement.end() || d->second.kind != DisplacementBC::Kind::Traction) continue;
    if (!kernel) kernel = std::make_unique<ElementKernel>(s, resolve_degree(s, quad_degree));
    kernel->cell(facet.left, cv);
    kernel->edge(facet.left, facet.local_left, ev);
    for (int q = 0; q < ev.nq; ++q) {
      const Eigen::Vector2d tr = d->second.traction(ev.x[q], ev.normal, t);
      const double tn = tr.dot(ev.normal), tt = tr.dot(ev.tangent);
      for (int j = 0; j < nu; ++j)
        F[cv.u_index[j]] += ev.weight[q] * tn * ev.u[q * nu + j].dot(ev.normal);
      for (int k = 0; k < nuh; ++k) F[s.uhat_dof(f, k)] += ev.weight[q] * tt * ev.uhat[q * nuh + k];
    }
  }
  return F;
}

Eigen::MatrixXd pressure_kernel(const SpaceSet& s, const ScaledParameters& scaled,
                                const BoundaryConditionSet& bcs) {
  const int n = s.networks();
  std::vector<bool> neumann(n, true);
  bool closed = true;  // displacement normal trace fixed on the whole boundary
  for (const auto& facet : s.mesh().facets()) {
    if (!facet.is_boundary()) continue;
    auto d = bcs.displacement.find(facet.tag);
    if (d == bcs.displacement.end() || d->second.kind != DisplacementBC::Kind::Dirichlet)
      closed = false;
    auto p = bcs.pressure.find(facet.tag);
    if (p == bcs.pressure.end()) continue;
    for (int i = 0; i < n && i < static_cast<int>(p->second.size()); ++i)
      if (p->second[i].kind == PressureBC::Kind::Dirichlet) neumann[i] = false;
  }
  std::vector<int> Z;
  for (int i = 0; i < n; ++i)
    if (neumann[i]) Z.push_back(i);
  if (Z.empty()) return Eigen::MatrixXd(n, 0);
  const int z = static_cast<int>(Z.size());
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n + (closed ? 0 : 1), z);
  for (int c = 0; c < z; ++c) {
    G.block(0, c, n, 1) = scaled.zeta.col(Z[c]);
    if (!closed) G(n, c) = 1.0;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(G, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double scale = std::max(1.0, sv.size() ? sv[0] : 0.0);
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-12 * scale) ++rank;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, z - rank);
  for (int c = rank; c < z; ++c)
    for (int k = 0; k < z; ++k) out(Z[k], c - rank) = svd.matrixV()(k, c);
  return out;
}

namespace {

/// Orthonormal basis of the kernel modes together with the unit vectors of
/// the mean-zero networks.
Eigen::MatrixXd constraint_modes(const Eigen::MatrixXd& kernel, const std::vector<bool>& mean_zero) {
  const int n = static_cast<int>(kernel.rows());
  Eigen::MatrixXd G = kernel;
  for (int i = 0; i < n && i < static_cast<int>(mean_zero.size()); ++i) {
    if (!mean_zero[i]) continue;
    G.conservativeResize(n, G.cols() + 1);
    G.col(G.cols() - 1) = Eigen::VectorXd::Unit(n, i);
  }
  if (G.cols() == 0) return G;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(G, Eigen::ComputeThinU);
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > 1e-10) ++rank;
  return svd.matrixU().leftCols(rank);
}

}  // namespace

Eigen::MatrixXd pressure_modes(const BlockSystem& sys, const SpaceSet& s, bool integrals) {
  const int m = static_cast<int>(sys.pressure_constraints.cols());
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(s.size(), m);
  if (m == 0) return Eigen::MatrixXd(sys.size(), 0);
  for (int i = 0; i < s.networks(); ++i) {
    Vector v = Vector::Zero(s.size());
    if (integrals) {
      v = pressure_integrals(s, i);
    } else {
      for (int e = 0; e < s.mesh().num_elements(); ++e) v[s.p_dof(i, e, 0)] = 1.0;
      for (int f = 0; f < s.mesh().num_facets(); ++f) v[s.phat_dof(i, f, 0)] = 1.0;
    }
    for (int c = 0; c < m; ++c) full.col(c) += sys.pressure_constraints(i, c) * v;
  }
  if (!sys.constrained()) return full;
  Eigen::MatrixXd out(sys.free_dofs.size(), m);
  for (std::size_t k = 0; k < sys.free_dofs.size(); ++k) out.row(k) = full.row(sys.free_dofs[k]);
  return out;
}

void project_pressure_constraints(const BlockSystem& sys, const SpaceSet& s, Vector& x) {
  if (sys.pressure_constraints.cols() == 0) return;
  const Eigen::MatrixXd K = pressure_modes(sys, s, false);
  const Eigen::MatrixXd L = pressure_modes(sys, s, true);
  const Vector alpha = (L.transpose() * K).lu().solve(L.transpose() * x);
  x -= K * alpha;
}

SparseMatrix restrict_matrix(const SparseMatrix& m, const std::vector<int>& rows,
                             const std::vector<int>& cols) {
  std::vector<int> rmap(m.rows(), -1), cmap(m.cols(), -1);
  for (std::size_t i = 0; i < rows.size(); ++i) rmap[rows[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < cols.size(); ++i) cmap[cols[i]] = static_cast<int>(i);
  Triplets t;
  t.reserve(m.nonZeros());
  for (int k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
      const int r = rmap[it.row()], c = cmap[it.col()];
      if (r >= 0 && c >= 0) t.emplace_back(r, c, it.value());
    }
  }
  SparseMatrix out(rows.size(), cols.size());
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

Vector reduce_rhs(const SparseMatrix& full_matrix, const Vector& full_rhs,
                  const BlockSystem& c, const SpaceSet& s) {
  const Vector lifted = full_rhs - full_matrix * c.dirichlet;
  Vector r(c.free_dofs.size());
  for (std::size_t i = 0; i < c.free_dofs.size(); ++i) r[i] = lifted[c.free_dofs[i]];
  if (c.pressure_constraints.cols() > 0) {
    // subtract constant sources so that F is orthogonal to the kernel
    const Eigen::MatrixXd K = pressure_modes(c, s, false);
    const Eigen::MatrixXd L = pressure_modes(c, s, true);
    const Vector alpha = (K.transpose() * L).lu().solve(K.transpose() * r);
    r -= L * alpha;
  }
  return r;
}

BlockSystem apply_boundary_conditions(const BlockSystem& system, const SpaceSet& s,
                                      const ScaledParameters& scaled,
                                      const BoundaryConditionSet& bcs, double t) {
  if (system.constrained()) throw Error("boundary conditions already applied");
  bcs.validate(s.mesh(), s.networks());
  const std::vector<bool> mask = essential_mask(s, bcs);
  BlockSystem out;
  out.full_size = system.size();
  out.w_block = system.w_block;
  out.symmetric = system.symmetric;
  std::vector<int> new_index(system.size(), -1);
  for (int i = 0; i < system.size(); ++i) {
    if (mask[i]) continue;
    new_index[i] = static_cast<int>(out.free_dofs.size());
    out.free_dofs.push_back(i);
  }
  out.dirichlet = essential_values(s, bcs, t);
  for (int i = 0; i < system.size(); ++i)
    if (!mask[i]) out.dirichlet[i] = 0.0;
  out.pressure_constraints = constraint_modes(pressure_kernel(s, scaled, bcs), bcs.mean_zero);
  out.mean_zero.assign(s.networks(), false);
  for (int i = 0; i < s.networks(); ++i)
    out.mean_zero[i] = out.pressure_constraints.cols() > 0 && out.pressure_constraints.row(i).norm() > 0;
  out.matrix = restrict_matrix(system.matrix, out.free_dofs, out.free_dofs);
  out.matrix.makeCompressed();
  const Vector F = system.rhs + natural_load(s, bcs, t);
  out.rhs = reduce_rhs(system.matrix, F, out, s);

  const FieldRanges& r = system.ranges;
  out.ranges.u = count_free(r.u, new_index);
  out.ranges.uhat = count_free(r.uhat, new_index);
  for (int i = 0; i < r.networks(); ++i) {
    out.ranges.w.push_back(count_free(r.w[i], new_index));
    out.ranges.p.push_back(count_free(r.p[i], new_index));
    out.ranges.phat.push_back(count_free(r.phat[i], new_index));
  }
  return out;
}

}  // namespace mpet
