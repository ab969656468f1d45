#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "mpet/mesh.hpp"
#include "mpet/polynomial.hpp"
#include "mpet/quadrature.hpp"

namespace mpet {

/// The five discrete spaces of the hybridized discretization.
enum class Space {
  Displacement,          ///< U_h: H(div)-conforming BDM_l
  DisplacementTrace,     ///< Uhat_h: tangential facet polynomials of degree l
  Flux,                  ///< W_h^-: element-broken RT_{l-1}
  Pressure,              ///< P_h: discontinuous P_{l-1}
  PressureTrace,         ///< Phat_h: facet polynomials of degree l-1
};

/// Polynomial order l of the displacement space.
class SpaceOrder {
 public:
  static constexpr int kMin = 1;
  static constexpr int kMax = 3;

  explicit SpaceOrder(int l);
  int value() const { return l_; }
  operator int() const { return l_; }

 private:
  int l_;
};

/// Reference-element bases for one order l.
///
/// BDM and RT functions are dual to facet moments against Legendre
/// polynomials in the edge parameter (scaled normal, so that the moment of a
/// mapped function equals int_F v.n P_k ds) followed by interior moments.
class ReferenceElement {
 public:
  explicit ReferenceElement(SpaceOrder order);

  /// Shared instance per order; construction is not cheap.
  static const ReferenceElement& get(int order);

  int order() const { return order_; }
  const std::vector<VecPoly>& bdm() const { return bdm_; }
  const std::vector<VecPoly>& rt() const { return rt_; }
  const std::vector<Poly>& dg() const { return dg_; }
  /// Test functions of the interior moments, in dual-basis order.
  const std::vector<VecPoly>& bdm_interior_tests() const { return bdm_tests_; }
  const std::vector<VecPoly>& rt_interior_tests() const { return rt_tests_; }

  /// Reference point of parameter s in [0,1] on local edge k.
  static Eigen::Vector2d edge_point(int k, double s);
  /// Outward normal of local edge k scaled by the edge length.
  static Eigen::Vector2d scaled_normal(int k);

 private:
  int order_;
  std::vector<VecPoly> bdm_;
  std::vector<VecPoly> rt_;
  std::vector<Poly> dg_;
  std::vector<VecPoly> bdm_tests_;
  std::vector<VecPoly> rt_tests_;
};

/// Values of basis functions at a list of points, laid out [point][basis].
struct BasisTable {
  int num_points = 0;
  int num_basis = 0;
  bool vector_valued = false;
  // vector-valued spaces
  std::vector<Eigen::Vector2d> vector_value;
  std::vector<Eigen::Matrix2d> jacobian;  // d v_a / d x_b
  std::vector<double> divergence;
  std::vector<std::array<Eigen::Matrix2d, 2>> hessian;  // per component
  // scalar spaces; facet spaces use the first coordinate as parameter in [0,1]
  std::vector<double> scalar_value;
  std::vector<Eigen::Vector2d> gradient;
  std::vector<Eigen::Matrix2d> scalar_hessian;

  int at(int q, int j) const { return q * num_basis + j; }
};

/// Evaluates the reference basis of `space` at reference points.
BasisTable eval_basis(Space space, int order, const std::vector<Eigen::Vector2d>& points);

/// Contravariant Piola transform of a reference vector value.
Eigen::Vector2d piola_map(const AffineMap& map, const Eigen::Vector2d& ref_value);
double piola_divergence(const AffineMap& map, double ref_divergence);
Eigen::Matrix2d piola_jacobian(const AffineMap& map, const Eigen::Matrix2d& ref_jacobian);

/// Per-space global DOF counts.
struct DofCounts {
  int displacement = 0;
  int displacement_trace = 0;
  int flux = 0;
  int pressure = 0;
  int pressure_trace = 0;

  int total() const {
    return displacement + displacement_trace + flux + pressure + pressure_trace;
  }
};

/// DOF layout of all five spaces on a mesh.
///
/// The unconstrained global vector is ordered
///   [u | uhat | w_1 .. w_n | p_1 .. p_n | phat_1 .. phat_n].
/// Displacement DOFs: facet moments (facet f, moment k) -> f*(l+1)+k, then
/// interior moments per element.
class SpaceSet {
 public:
  SpaceSet(const Mesh& mesh, SpaceOrder order, int n_networks);

  const Mesh& mesh() const { return *mesh_; }
  int order() const { return order_; }
  int networks() const { return networks_; }
  const ReferenceElement& reference() const { return *ref_; }

  int u_local() const { return (order_ + 1) * (order_ + 2); }
  int u_per_facet() const { return order_ + 1; }
  int u_interior() const { return (order_ + 1) * (order_ - 1); }
  int uhat_per_facet() const { return order_ + 1; }
  int w_local() const { return order_ * (order_ + 2); }
  int p_local() const { return order_ * (order_ + 1) / 2; }
  int phat_per_facet() const { return order_; }

  int num_u() const;
  int num_uhat() const;
  int num_w_network() const { return mesh_->num_elements() * w_local(); }
  int num_p_network() const { return mesh_->num_elements() * p_local(); }
  int num_phat_network() const { return mesh_->num_facets() * phat_per_facet(); }
  int size() const;

  int offset_uhat() const { return num_u(); }
  int offset_w(int i) const { return num_u() + num_uhat() + i * num_w_network(); }
  int offset_p(int i) const { return offset_w(networks_) + i * num_p_network(); }
  int offset_phat(int i) const { return offset_p(networks_) + i * num_phat_network(); }
  /// First index after the (u, uhat, w) unknowns.
  int offset_pressure_block() const { return offset_p(0); }

  /// Global displacement DOF and orientation sign of local basis j on element e.
  void u_dofs(int e, std::vector<int>& index, std::vector<double>& sign) const;
  int u_facet_dof(int f, int k) const { return f * u_per_facet() + k; }
  int uhat_dof(int f, int k) const { return offset_uhat() + f * uhat_per_facet() + k; }
  int w_dof(int i, int e, int m) const { return offset_w(i) + e * w_local() + m; }
  int p_dof(int i, int e, int m) const { return offset_p(i) + e * p_local() + m; }
  int phat_dof(int i, int f, int k) const {
    return offset_phat(i) + f * phat_per_facet() + k;
  }

 private:
  const Mesh* mesh_;
  int order_;
  int networks_;
  const ReferenceElement* ref_;
};

/// DOF counts with displacement DOFs on boundary facets removed (the
/// H_0(div) / zero-trace setting). Pressure traces count every facet.
DofCounts dof_counts(const Mesh& mesh, SpaceOrder order, int n_networks);

/// Physical basis values on one element, at cell quadrature points.
/// Displacement values include the global orientation sign.
struct CellValues {
  AffineMap map;
  std::vector<Point> x;
  std::vector<double> weight;  // includes |det J|
  int nq = 0;
  std::vector<int> u_index;
  std::vector<double> u_sign;
  std::vector<Eigen::Vector2d> u;        // [q][j]
  std::vector<Eigen::Matrix2d> u_grad;
  std::vector<double> u_div;
  std::vector<std::array<Eigen::Matrix2d, 2>> u_hess;
  std::vector<Eigen::Vector2d> w;
  std::vector<double> w_div;
  std::vector<double> p;
  std::vector<Eigen::Vector2d> p_grad;
  std::vector<Eigen::Matrix2d> p_hess;
};

/// Physical values on one local edge of an element, at facet quadrature points.
struct EdgeValues {
  int facet = -1;
  double sign = 1.0;     // facet normal vs. outward normal of this element
  Eigen::Vector2d normal;  // outward from this element
  Eigen::Vector2d tangent; // global facet tangent
  double h = 0.0;
  std::vector<Point> x;
  std::vector<double> weight;  // includes facet length
  std::vector<double> s;       // global facet parameter in [0,1]
  int nq = 0;
  std::vector<Eigen::Vector2d> u;  // [q][j], signed
  std::vector<Eigen::Matrix2d> u_grad;
  std::vector<Eigen::Vector2d> w;
  std::vector<double> p;
  std::vector<double> uhat;  // [q][k], tangential coefficient
  std::vector<double> phat;  // [q][k]
};

/// Maps precomputed reference tables onto physical elements.
class ElementKernel {
 public:
  ElementKernel(const SpaceSet& spaces, int quadrature_degree);

  const SpaceSet& spaces() const { return *spaces_; }
  int quadrature_degree() const { return degree_; }

  void cell(int e, CellValues& out) const;
  void edge(int e, int k, EdgeValues& out) const;

 private:
  const SpaceSet* spaces_;
  int degree_;
  QuadratureRule cell_rule_;
  QuadratureRule edge_rule_;
  BasisTable cell_u_, cell_w_, cell_p_;
  std::array<BasisTable, 3> edge_u_, edge_w_, edge_p_;
};

}  // namespace mpet
