#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "mpet/params.hpp"
#include "mpet/spaces.hpp"

namespace mpet {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

/// Half-open index interval [begin, end).
struct Range {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
  bool contains(int i) const { return i >= begin && i < end; }
};

/// Index ranges of each field in some numbering of the unknowns.
struct FieldRanges {
  Range u, uhat;
  std::vector<Range> w, p, phat;

  int networks() const { return static_cast<int>(p.size()); }
  /// (u, uhat, w): the A block.
  Range primal() const { return {u.begin, w.empty() ? uhat.end : w.back().end}; }
  /// (p, phat): the pressure block.
  Range pressure() const { return {p.front().begin, phat.back().end}; }
  Range displacement() const { return {u.begin, uhat.end}; }
};

/// Sources of the scaled system: body force f and fluid sources g_i.
struct SourceTerms {
  std::function<Eigen::Vector2d(const Point&)> f;
  /// Optional body force in divergence form: adds (s, div v) to the load, the
  /// same as f = -grad s when v . n vanishes on the boundary. Gradient forces
  /// given this way are integrated exactly against divergence-free tests.
  std::function<double(const Point&)> f_div;
  std::vector<std::function<double(const Point&)>> g;
};

/// The symmetric system [[A, B^T], [B, -C]] x = F.
///
/// Before boundary conditions are applied the numbering is the SpaceSet's
/// unconstrained one. Afterwards `free_dofs[i]` is the unconstrained index of
/// unknown i and `dirichlet` holds the values of the eliminated unknowns.
struct BlockSystem {
  SparseMatrix matrix;
  Vector rhs;
  FieldRanges ranges;
  int w_block = 0;  // size of the element blocks of the flux mass matrix
  bool symmetric = true;

  int full_size = 0;
  std::vector<int> free_dofs;
  Vector dirichlet;                // length full_size, zero on free unknowns
  std::vector<bool> mean_zero;     // per network: takes part in a mean constraint
  /// Constant pressure modes removed from the solution space, as columns of
  /// network coefficients (n x m, orthonormal). Spans the kernel of the matrix
  /// plus the constants of networks with a requested zero mean. The solution
  /// satisfies int (c . p) = 0 for every column c.
  Eigen::MatrixXd pressure_constraints;

  int size() const { return static_cast<int>(rhs.size()); }
  bool constrained() const { return !free_dofs.empty(); }

  SparseMatrix A() const;
  SparseMatrix B() const;
  /// The C block (stored with a minus sign in `matrix`).
  SparseMatrix C() const;

  /// Solution in the unconstrained numbering, Dirichlet values inserted.
  Vector expand(const Vector& x) const;
};

/// Displacement condition on a boundary tag.
struct DisplacementBC {
  enum class Kind { Dirichlet, Traction };
  Kind kind = Kind::Dirichlet;
  std::function<Eigen::Vector2d(const Point&, double)> value;  // Dirichlet displacement
  /// Traction given the outward unit normal.
  std::function<Eigen::Vector2d(const Point&, const Eigen::Vector2d&, double)> traction;

  static DisplacementBC fixed(Eigen::Vector2d u = Eigen::Vector2d::Zero());
  static DisplacementBC load(
      std::function<Eigen::Vector2d(const Point&, const Eigen::Vector2d&, double)> traction);
};

/// Pressure condition for one network on a boundary tag.
struct PressureBC {
  enum class Kind { Dirichlet, ZeroFlux };
  Kind kind = Kind::ZeroFlux;
  std::function<double(const Point&, double)> value;

  static PressureBC dirichlet(std::function<double(const Point&, double)> value);
  static PressureBC zero_flux();
};

/// Per boundary tag: one displacement and, per network, one pressure condition.
struct BoundaryConditionSet {
  std::map<std::string, DisplacementBC> displacement;
  std::map<std::string, std::vector<PressureBC>> pressure;
  /// Per network: constrain the pressure to zero mean (empty = none).
  std::vector<bool> mean_zero;

  /// Throws if some boundary facet of the mesh lacks a condition.
  void validate(const Mesh& mesh, int networks) const;
};

/// Default quadrature degree 2l+2.
int default_quadrature_degree(int order);

// -- bilinear forms, all returned in the unconstrained numbering (N x N) -----

/// Symmetric interior-penalty HDG form on (u, uhat) with penalty eta l^2 / h_F.
SparseMatrix assemble_a_hdg(const SpaceSet& spaces, double eta, int quad_degree = -1);

struct DivergenceBlocks {
  SparseMatrix divdiv;    // lambda (div u, div v)
  SparseMatrix coupling;  // rows p_i, cols u: -(div u, q_i)
};
DivergenceBlocks assemble_divdiv_and_coupling(const SpaceSet& spaces, const ScaledParameters& scaled,
                                              int quad_degree = -1);

struct FlowBlocks {
  SparseMatrix mass;  // (R_i^{-1} w_i, z_i)
  SparseMatrix b;     // rows (p_i, phat_i), cols w_i: -b(w_i, (q_i, qhat_i))
  SparseMatrix C;     // (Lambda_zeta p, q)
};
FlowBlocks assemble_flow(const SpaceSet& spaces, const ScaledParameters& scaled,
                         int quad_degree = -1);

/// Full unconstrained system with load vector from `sources` (may be empty).
BlockSystem assemble_system(const SpaceSet& spaces, const ScaledParameters& scaled, double eta,
                            const SourceTerms& sources = {}, int quad_degree = -1);

/// (f, v) + sum_i (g_i, q_i) in the unconstrained numbering.
Vector assemble_load(const SpaceSet& spaces, const SourceTerms& sources, int quad_degree = -1);

FieldRanges unconstrained_ranges(const SpaceSet& spaces);

// -- norm and mass matrices (unconstrained numbering) ------------------------

/// sum_T |eps(v)|^2 + h_F^{-1} |(vhat - v)_t|^2 [+ h_T^2 |v|_2^2].
SparseMatrix assemble_displacement_hdg_norm(const SpaceSet& spaces, bool with_second_derivatives,
                                            int quad_degree = -1);
/// lambda |div v|^2.
SparseMatrix assemble_divergence_norm(const SpaceSet& spaces, double lambda, int quad_degree = -1);
/// sum_i weight_i [ |grad q_i|^2 + h_F^{-1} |qhat_i - q_i|^2 (+ h_T^2 |q_i|_2^2) ].
SparseMatrix assemble_pressure_hdg_norm(const SpaceSet& spaces, const std::vector<double>& weights,
                                        bool with_second_derivatives, int quad_degree = -1);
/// (coef p, q) = sum_ij coef_ij (p_j, q_i) on the pressure unknowns.
SparseMatrix assemble_pressure_mass(const SpaceSet& spaces, const Eigen::MatrixXd& coef,
                                    int quad_degree = -1);
/// sum_i weight_i (w_i, z_i).
SparseMatrix assemble_flux_mass(const SpaceSet& spaces, const std::vector<double>& weights,
                                int quad_degree = -1);

// -- boundary conditions -----------------------------------------------------

/// Unknowns fixed by the essential conditions (unconstrained numbering).
std::vector<bool> essential_mask(const SpaceSet& spaces, const BoundaryConditionSet& bcs);
/// Values of the essential unknowns at time t (zero elsewhere).
Vector essential_values(const SpaceSet& spaces, const BoundaryConditionSet& bcs, double t,
                        int quad_degree = -1);
/// Natural traction load at time t.
Vector natural_load(const SpaceSet& spaces, const BoundaryConditionSet& bcs, double t,
                    int quad_degree = -1);
/// Constant pressure modes annihilated by the system under `bcs`, as columns
/// of network coefficients. Only networks with zero flux on the whole boundary
/// take part.
Eigen::MatrixXd pressure_kernel(const SpaceSet& spaces, const ScaledParameters& scaled,
                                const BoundaryConditionSet& bcs);

/// Eliminates essential unknowns (lifting them into the rhs) and adds the
/// natural loads. The pressure sources are made compatible with the
/// constraint modes by subtracting constants.
BlockSystem apply_boundary_conditions(const BlockSystem& system, const SpaceSet& spaces,
                                      const ScaledParameters& scaled,
                                      const BoundaryConditionSet& bcs, double t);

/// (F - K x_D) restricted to the free unknowns of `constrained`, using its
/// current `dirichlet` values, with the source correction along the
/// constraint modes.
Vector reduce_rhs(const SparseMatrix& full_matrix, const Vector& full_rhs,
                  const BlockSystem& constrained, const SpaceSet& spaces);

/// Constraint modes of the pressure in the numbering of `system`: the constant
/// functions (`integrals == false`) or the functionals q -> int q (`true`).
Eigen::MatrixXd pressure_modes(const BlockSystem& system, const SpaceSet& spaces, bool integrals);

/// Subtracts constant modes so that the pressure means vanish along the
/// constraint modes. `x` is in the numbering of `system`.
void project_pressure_constraints(const BlockSystem& system, const SpaceSet& spaces, Vector& x);

/// Vector with entries int_T theta_r on the pressure unknowns of one network.
Vector pressure_integrals(const SpaceSet& spaces, int network);

/// Keeps the listed rows and columns (ascending); indices are renumbered in order.
SparseMatrix restrict_matrix(const SparseMatrix& m, const std::vector<int>& rows,
                             const std::vector<int>& cols);

}  // namespace mpet
