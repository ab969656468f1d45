#include "mpet/spaces.hpp"

#include <functional>
#include <map>
#include <memory>
#include <mutex>

#include "mpet/error.hpp"

namespace mpet {

SpaceOrder::SpaceOrder(int l) : l_(l) {
  if (l < kMin || l > kMax) {
    throw ConfigError("unsupported polynomial order " + std::to_string(l) + " (supported: 1..3)");
  }
}

namespace {

/// Vector monomials (m, 0), (0, m) for m of total degree <= deg, embedded in degree `embed`.
std::vector<VecPoly> vector_monomials(int deg, int embed) {
  std::vector<VecPoly> out;
  for (int d = 0; d <= deg; ++d) {
    for (int py = 0; py <= d; ++py) {
      for (int c = 0; c < 2; ++c) {
        VecPoly v{{Poly(embed), Poly(embed)}};
        v.comp[c] = Poly::monomial(embed, d - py, py);
        out.push_back(v);
      }
    }
  }
  return out;
}

/// Builds the basis dual to `functionals` inside span(`spanning`).
template <class Functional>
std::vector<VecPoly> dual_basis(const std::vector<VecPoly>& spanning,
                                const std::vector<Functional>& functionals) {
  const int n = static_cast<int>(spanning.size());
  if (static_cast<int>(functionals.size()) != n) throw Error("dual_basis: dimension mismatch");
  Eigen::MatrixXd V(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) V(i, j) = functionals[i](spanning[j]);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(V);
  if (!lu.isInvertible()) throw Error("dual_basis: functionals are not unisolvent");
  Eigen::MatrixXd A = lu.inverse().transpose();
  const int deg = spanning.front().comp[0].degree();
  std::vector<VecPoly> basis(n, VecPoly{{Poly(deg), Poly(deg)}});
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      if (A(j, k) == 0.0) continue;
      for (int c = 0; c < 2; ++c) {
        Poly t = spanning[k].comp[c];
        t *= A(j, k);
        basis[j].comp[c] += t;
      }
    }
  }
  return basis;
}

using VecFunctional = std::function<double(const VecPoly&)>;

/// Edge moments int_0^1 v(x(s)).n~ P_j(2s-1) ds for j = 0..max_moment.
void add_edge_moments(std::vector<VecFunctional>& out, int max_moment, int poly_degree) {
  QuadratureRule rule = segment_rule(poly_degree + max_moment);
  for (int k = 0; k < 3; ++k) {
    for (int j = 0; j <= max_moment; ++j) {
      out.push_back([rule, k, j](const VecPoly& v) {
        double s = 0;
        const Eigen::Vector2d n = ReferenceElement::scaled_normal(k);
        for (std::size_t q = 0; q < rule.size(); ++q) {
          double t = rule.points[q].x();
          s += rule.weights[q] * v.value(ReferenceElement::edge_point(k, t)).dot(n) *
               legendre(j, 2 * t - 1);
        }
        return s;
      });
    }
  }
}

void add_interior_moments(std::vector<VecFunctional>& out, const std::vector<VecPoly>& tests,
                          int quad_degree) {
  QuadratureRule rule = triangle_rule(quad_degree);
  for (const auto& q : tests) {
    out.push_back([rule, q](const VecPoly& v) {
      double s = 0;
      for (std::size_t i = 0; i < rule.size(); ++i)
        s += rule.weights[i] * v.value(rule.points[i]).dot(q.value(rule.points[i]));
      return s;
    });
  }
}

}  // namespace

Eigen::Vector2d ReferenceElement::edge_point(int k, double s) {
  static const std::array<Eigen::Vector2d, 3> v{Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0),
                                                Eigen::Vector2d(0, 1)};
  const auto& e = Mesh::kEdgeVertices[k];
  return v[e[0]] + s * (v[e[1]] - v[e[0]]);
}

Eigen::Vector2d ReferenceElement::scaled_normal(int k) {
  switch (k) {
    case 0: return {1.0, 1.0};
    case 1: return {-1.0, 0.0};
    default: return {0.0, -1.0};
  }
}

ReferenceElement::ReferenceElement(SpaceOrder order) : order_(order) {
  const int l = order_;

  // BDM_l: P_l^2, dual to edge moments of degree <= l and moments against N_{l-1}
  {
    std::vector<VecPoly> spanning = vector_monomials(l, l);
    std::vector<VecFunctional> fn;
    add_edge_moments(fn, l, l);
    std::vector<VecPoly> tests;
    if (l >= 2) {
      tests = vector_monomials(l - 2, l - 1);
      for (int py = 0; py <= l - 2; ++py) {
        int px = l - 2 - py;
        VecPoly r{{Poly(l - 1), Poly(l - 1)}};
        r.comp[0] = Poly::monomial(l - 1, px, py + 1);
        r.comp[0] *= -1.0;
        r.comp[1] = Poly::monomial(l - 1, px + 1, py);
        tests.push_back(r);
      }
    }
    add_interior_moments(fn, tests, 2 * l);
    bdm_ = dual_basis(spanning, fn);
    bdm_tests_ = tests;
  }

  // RT_{l-1}: P_{l-1}^2 + x P~_{l-1}
  {
    const int k = l - 1;
    std::vector<VecPoly> spanning = vector_monomials(k, l);
    for (int py = 0; py <= k; ++py) {
      int px = k - py;
      VecPoly r{{Poly::monomial(l, px + 1, py), Poly::monomial(l, px, py + 1)}};
      spanning.push_back(r);
    }
    std::vector<VecFunctional> fn;
    add_edge_moments(fn, k, l);
    std::vector<VecPoly> tests;
    if (k >= 1) tests = vector_monomials(k - 1, k - 1);
    add_interior_moments(fn, tests, 2 * l);
    rt_ = dual_basis(spanning, fn);
    rt_tests_ = tests;
  }

  for (int d = 0; d <= l - 1; ++d)
    for (int py = 0; py <= d; ++py) dg_.push_back(Poly::monomial(l - 1, d - py, py));
}

const ReferenceElement& ReferenceElement::get(int order) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<ReferenceElement>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[order];
  if (!slot) slot = std::make_unique<ReferenceElement>(SpaceOrder(order));
  return *slot;
}

BasisTable eval_basis(Space space, int order, const std::vector<Eigen::Vector2d>& points) {
  SpaceOrder l(order);
  BasisTable t;
  t.num_points = static_cast<int>(points.size());

  auto fill_vector = [&](const std::vector<VecPoly>& basis) {
    t.vector_valued = true;
    t.num_basis = static_cast<int>(basis.size());
    const std::size_t n = std::size_t(t.num_points) * t.num_basis;
    t.vector_value.resize(n);
    t.jacobian.resize(n);
    t.divergence.resize(n);
    t.hessian.resize(n);
    for (int q = 0; q < t.num_points; ++q) {
      for (int j = 0; j < t.num_basis; ++j) {
        const auto& b = basis[j];
        const int i = t.at(q, j);
        t.vector_value[i] = b.value(points[q]);
        t.jacobian[i] = b.jacobian(points[q]);
        t.divergence[i] = t.jacobian[i].trace();
        t.hessian[i] = {b.comp[0].hessian(points[q]), b.comp[1].hessian(points[q])};
      }
    }
  };
  auto fill_facet = [&](int n_basis) {
    t.num_basis = n_basis;
    t.scalar_value.resize(std::size_t(t.num_points) * n_basis);
    for (int q = 0; q < t.num_points; ++q)
      for (int k = 0; k < n_basis; ++k)
        t.scalar_value[t.at(q, k)] = legendre(k, 2 * points[q].x() - 1);
  };

  const auto& ref = ReferenceElement::get(l);
  switch (space) {
    case Space::Displacement: fill_vector(ref.bdm()); break;
    case Space::Flux: fill_vector(ref.rt()); break;
    case Space::Pressure: {
      const auto& basis = ref.dg();
      t.num_basis = static_cast<int>(basis.size());
      const std::size_t n = std::size_t(t.num_points) * t.num_basis;
      t.scalar_value.resize(n);
      t.gradient.resize(n);
      t.scalar_hessian.resize(n);
      for (int q = 0; q < t.num_points; ++q) {
        for (int j = 0; j < t.num_basis; ++j) {
          t.scalar_value[t.at(q, j)] = basis[j].value(points[q]);
          t.gradient[t.at(q, j)] = basis[j].gradient(points[q]);
          t.scalar_hessian[t.at(q, j)] = basis[j].hessian(points[q]);
        }
      }
      break;
    }
    case Space::DisplacementTrace: fill_facet(order + 1); break;
    case Space::PressureTrace: fill_facet(order); break;
  }
  return t;
}

Eigen::Vector2d piola_map(const AffineMap& map, const Eigen::Vector2d& ref_value) {
  return map.jacobian * ref_value / map.det;
}

double piola_divergence(const AffineMap& map, double ref_divergence) {
  return ref_divergence / map.det;
}

Eigen::Matrix2d piola_jacobian(const AffineMap& map, const Eigen::Matrix2d& ref_jacobian) {
  return map.jacobian * ref_jacobian * map.inverse / map.det;
}

// -- SpaceSet ----------------------------------------------------------------

SpaceSet::SpaceSet(const Mesh& mesh, SpaceOrder order, int n_networks)
    : mesh_(&mesh), order_(order), networks_(n_networks), ref_(&ReferenceElement::get(order)) {
  if (n_networks < 1) throw ConfigError("need at least one network");
}

int SpaceSet::num_u() const {
  return mesh_->num_facets() * u_per_facet() + mesh_->num_elements() * u_interior();
}

int SpaceSet::num_uhat() const { return mesh_->num_facets() * uhat_per_facet(); }

int SpaceSet::size() const { return offset_phat(networks_); }

void SpaceSet::u_dofs(int e, std::vector<int>& index, std::vector<double>& sign) const {
  index.resize(u_local());
  sign.resize(u_local());
  const int nf = u_per_facet();
  for (int k = 0; k < 3; ++k) {
    const int f = mesh_->element_facet(e, k);
    const double s = mesh_->facet_sign(e, k);
    const bool flip = mesh_->facet_flipped(e, k);
    for (int j = 0; j < nf; ++j) {
      index[k * nf + j] = u_facet_dof(f, j);
      sign[k * nf + j] = (flip && (j % 2 == 1)) ? -s : s;
    }
  }
  const int base = mesh_->num_facets() * nf + e * u_interior();
  for (int m = 0; m < u_interior(); ++m) {
    index[3 * nf + m] = base + m;
    sign[3 * nf + m] = 1.0;
  }
}

DofCounts dof_counts(const Mesh& mesh, SpaceOrder order, int n_networks) {
  SpaceSet s(mesh, order, n_networks);
  const int interior = mesh.num_facets() - mesh.num_boundary_facets();
  DofCounts c;
  c.displacement = interior * s.u_per_facet() + mesh.num_elements() * s.u_interior();
  c.displacement_trace = interior * s.uhat_per_facet();
  c.flux = n_networks * s.num_w_network();
  c.pressure = n_networks * s.num_p_network();
  c.pressure_trace = n_networks * s.num_phat_network();
  return c;
}

// -- ElementKernel -----------------------------------------------------------

ElementKernel::ElementKernel(const SpaceSet& spaces, int quadrature_degree)
    : spaces_(&spaces),
      degree_(quadrature_degree),
      cell_rule_(triangle_rule(quadrature_degree)),
      edge_rule_(segment_rule(quadrature_degree)) {
  const int l = spaces.order();
  cell_u_ = eval_basis(Space::Displacement, l, cell_rule_.points);
  cell_w_ = eval_basis(Space::Flux, l, cell_rule_.points);
  cell_p_ = eval_basis(Space::Pressure, l, cell_rule_.points);
  for (int k = 0; k < 3; ++k) {
    std::vector<Eigen::Vector2d> pts;
    for (const auto& p : edge_rule_.points) pts.push_back(ReferenceElement::edge_point(k, p.x()));
    edge_u_[k] = eval_basis(Space::Displacement, l, pts);
    edge_w_[k] = eval_basis(Space::Flux, l, pts);
    edge_p_[k] = eval_basis(Space::Pressure, l, pts);
  }
}

void ElementKernel::cell(int e, CellValues& out) const {
  const SpaceSet& s = *spaces_;
  out.map = build_affine_map(s.mesh(), e);
  const auto& J = out.map.jacobian;
  const auto& Ji = out.map.inverse;
  const double det = out.map.det;
  const int nq = static_cast<int>(cell_rule_.size());
  out.nq = nq;
  out.x.resize(nq);
  out.weight.resize(nq);
  for (int q = 0; q < nq; ++q) {
    out.x[q] = out.map.to_physical(cell_rule_.points[q]);
    out.weight[q] = cell_rule_.weights[q] * det;
  }
  s.u_dofs(e, out.u_index, out.u_sign);

  const int nu = s.u_local();
  out.u.resize(nq * nu);
  out.u_grad.resize(nq * nu);
  out.u_div.resize(nq * nu);
  out.u_hess.resize(nq * nu);
  for (int q = 0; q < nq; ++q) {
    for (int j = 0; j < nu; ++j) {
      const int i = cell_u_.at(q, j);
      const double c = out.u_sign[j] / det;
      out.u[i] = c * (J * cell_u_.vector_value[i]);
      out.u_grad[i] = c * (J * cell_u_.jacobian[i] * Ji);
      out.u_div[i] = c * cell_u_.divergence[i];
      for (int a = 0; a < 2; ++a) {
        Eigen::Matrix2d h = J(a, 0) * cell_u_.hessian[i][0] + J(a, 1) * cell_u_.hessian[i][1];
        out.u_hess[i][a] = c * (Ji.transpose() * h * Ji);
      }
    }
  }

  const int nw = s.w_local();
  out.w.resize(nq * nw);
  out.w_div.resize(nq * nw);
  for (int q = 0; q < nq; ++q) {
    for (int j = 0; j < nw; ++j) {
      const int i = cell_w_.at(q, j);
      out.w[i] = J * cell_w_.vector_value[i] / det;
      out.w_div[i] = cell_w_.divergence[i] / det;
    }
  }

  const int np = s.p_local();
  out.p.resize(nq * np);
  out.p_grad.resize(nq * np);
  out.p_hess.resize(nq * np);
  for (int q = 0; q < nq; ++q) {
    for (int j = 0; j < np; ++j) {
      const int i = cell_p_.at(q, j);
      out.p[i] = cell_p_.scalar_value[i];
      out.p_grad[i] = Ji.transpose() * cell_p_.gradient[i];
      out.p_hess[i] = Ji.transpose() * cell_p_.scalar_hessian[i] * Ji;
    }
  }
}

void ElementKernel::edge(int e, int k, EdgeValues& out) const {
  const SpaceSet& s = *spaces_;
  const Mesh& mesh = s.mesh();
  const AffineMap map = build_affine_map(mesh, e);
  const auto& J = map.jacobian;
  const auto& Ji = map.inverse;
  const double det = map.det;

  out.facet = mesh.element_facet(e, k);
  const Facet& f = mesh.facet(out.facet);
  out.sign = mesh.facet_sign(e, k);
  out.normal = out.sign * f.normal;
  out.tangent = f.tangent;
  out.h = f.length;
  const bool flip = mesh.facet_flipped(e, k);

  const int nq = static_cast<int>(edge_rule_.size());
  out.nq = nq;
  out.x.resize(nq);
  out.weight.resize(nq);
  out.s.resize(nq);
  for (int q = 0; q < nq; ++q) {
    const double t = edge_rule_.points[q].x();
    out.x[q] = map.to_physical(ReferenceElement::edge_point(k, t));
    out.weight[q] = edge_rule_.weights[q] * f.length;
    out.s[q] = flip ? 1.0 - t : t;
  }

  std::vector<int> idx;
  std::vector<double> sgn;
  s.u_dofs(e, idx, sgn);
  const BasisTable& tu = edge_u_[k];
  const int nu = s.u_local();
  out.u.resize(nq * nu);
  out.u_grad.resize(nq * nu);
  for (int q = 0; q < nq; ++q) {
    for (int j = 0; j < nu; ++j) {
      const int i = tu.at(q, j);
      const double c = sgn[j] / det;
      out.u[i] = c * (J * tu.vector_value[i]);
      out.u_grad[i] = c * (J * tu.jacobian[i] * Ji);
    }
  }

  const BasisTable& tw = edge_w_[k];
  const int nw = s.w_local();
  out.w.resize(nq * nw);
  for (int q = 0; q < nq; ++q)
    for (int j = 0; j < nw; ++j) out.w[tw.at(q, j)] = J * tw.vector_value[tw.at(q, j)] / det;

  const BasisTable& tp = edge_p_[k];
  const int np = s.p_local();
  out.p.resize(nq * np);
  for (int q = 0; q < nq; ++q)
    for (int j = 0; j < np; ++j) out.p[tp.at(q, j)] = tp.scalar_value[tp.at(q, j)];

  const int nuh = s.uhat_per_facet();
  const int nph = s.phat_per_facet();
  out.uhat.resize(nq * nuh);
  out.phat.resize(nq * nph);
  for (int q = 0; q < nq; ++q) {
    for (int j = 0; j < nuh; ++j) out.uhat[q * nuh + j] = legendre(j, 2 * out.s[q] - 1);
    for (int j = 0; j < nph; ++j) out.phat[q * nph + j] = legendre(j, 2 * out.s[q] - 1);
  }
}

}  // namespace mpet
