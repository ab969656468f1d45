#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mpet/assembly.hpp"

namespace mpet {

enum class PreconditionerVariant {
  FullBlock,      ///< blockdiag(a_h, R^{-1} flux mass, pressure norm)
  SchurReduced,   ///< blockdiag(a_h, B_w M_w^{-1} B_w^T + Lambda mass) on the condensed system
};

std::string to_string(PreconditionerVariant v);
PreconditionerVariant parse_variant(const std::string& name);

struct PreconditionerConfig {
  PreconditionerVariant variant = PreconditionerVariant::SchurReduced;
  double eta = 10.0;
  /// After MinRes, add to each element flux the smallest correction (in the
  /// flux mass norm) that closes the element mass balance to rounding.
  bool local_recovery = true;
};

/// y = Op(x).
using LinearOperator = std::function<void(const Vector&, Vector&)>;

struct SolveReport {
  int iterations = 0;
  std::vector<double> residuals;  // preconditioned residual norms, starting with the initial one
  bool converged = false;
  double wall_time = 0.0;
  double conservation_residual = -1.0;  // negative if not computed

  double relative_residual() const;
};

/// Preconditioned MinRes; the residual is measured in the norm induced by
/// the inverse preconditioner. `x` holds the initial guess on entry.
SolveReport minres(const LinearOperator& op, const LinearOperator& preconditioner, const Vector& b,
                   Vector& x, double tol = 1e-8, int maxit = 500);
SolveReport minres(const SparseMatrix& K, const LinearOperator& preconditioner, const Vector& b,
                   Vector& x, double tol = 1e-8, int maxit = 500);

/// Block-diagonal SPD operator with sparse Cholesky factors per block.
///
/// A block may carry constraint functionals L, in which case it applies
/// X^{-1} restricted to {z : L^T z = 0}; the operator is then only positive
/// semidefinite and keeps Krylov iterates inside the constrained subspace.
class BlockPreconditioner {
 public:
  BlockPreconditioner() = default;

  void add_block(Range range, const SparseMatrix& matrix, const std::string& failure,
                 const Eigen::MatrixXd& constraints = {});
  void apply(const Vector& r, Vector& z) const;
  LinearOperator as_operator() const;

  int size() const { return size_; }
  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  Range block_range(int b) const;
  /// Assembled block-diagonal matrix.
  Eigen::MatrixXd dense() const;
  /// All constraint functionals as columns of a size() x m matrix.
  Eigen::MatrixXd constraints() const;
  const SparseMatrix& block_matrix(int b) const;

 private:
  struct Block;
  std::vector<std::shared_ptr<const Block>> blocks_;
  int size_ = 0;
};

/// System with the fluxes eliminated element-wise.
struct CondensedSystem {
  SparseMatrix matrix;  // [[A_uu, B_u^T], [B_u, -C - B_w M_w^{-1} B_w^T]]
  Vector rhs;
  FieldRanges ranges;   // w ranges empty
  std::vector<int> kept;  // source index of each reduced unknown
  Range w;                // flux range in the source numbering
  Range pressure;         // pressure range in the source numbering
  SparseMatrix Minv;      // inverse flux mass (w x w)
  SparseMatrix Bw;        // pressure rows x w columns
  SparseMatrix schur;     // B_w M_w^{-1} B_w^T on the pressure block
  int source_size = 0;

  /// Reduced right-hand side F_r from a source right-hand side F.
  Vector reduce(const Vector& F) const;
  /// Source-numbered solution from the reduced solution y and source rhs F.
  Vector recover(const Vector& y, const Vector& F) const;
};

CondensedSystem condense_velocity(const BlockSystem& system);

/// Lambda-weighted pressure mass on the pressure block of `system`.
SparseMatrix lambda_pressure_mass(const BlockSystem& system, const SpaceSet& spaces,
                                  const ScaledParameters& scaled);
/// X_p: sum_i R_i (pressure HDG norm without second derivatives) + Lambda mass.
SparseMatrix pressure_norm_block(const BlockSystem& system, const SpaceSet& spaces,
                                 const ScaledParameters& scaled);

/// FullBlock preconditioner in the numbering of `system`.
BlockPreconditioner build_full_block_preconditioner(const BlockSystem& system, const SpaceSet& spaces,
                                                    const ScaledParameters& scaled);
/// SchurReduced preconditioner in the numbering of `condensed`.
BlockPreconditioner build_schur_preconditioner(const BlockSystem& system,
                                               const CondensedSystem& condensed,
                                               const SpaceSet& spaces,
                                               const ScaledParameters& scaled);

/// Solves one constrained system repeatedly with a fixed matrix.
class SystemSolver {
 public:
  SystemSolver(const BlockSystem& system, const SpaceSet& spaces, const ScaledParameters& scaled,
               PreconditionerConfig config = {}, double tol = 1e-8, int maxit = 500);

  /// Returns the solution in the numbering of the constrained system.
  /// `initial` is an optional starting guess in the same numbering.
  Vector solve(const Vector& rhs, SolveReport& report, const Vector* initial = nullptr) const;
  Vector solve(SolveReport& report) const { return solve(system_->rhs, report); }

  const BlockPreconditioner& preconditioner() const { return precond_; }
  const CondensedSystem* condensed() const { return condensed_.get(); }
  PreconditionerVariant variant() const { return config_.variant; }

 private:
  const BlockSystem* system_;
  const SpaceSet* spaces_;
  PreconditionerConfig config_;
  double tol_;
  int maxit_;
  std::unique_ptr<CondensedSystem> condensed_;
  BlockPreconditioner precond_;
  void recover_local(const Vector& rhs, Vector& x) const;

  struct LocalBlock {
    std::vector<int> w, p;   // element flux and pressure unknowns
    Eigen::MatrixXd lift;    // M_T^{-1} B_T^T
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;  // of B_T M_T^{-1} B_T^T
  };
  std::vector<LocalBlock> local_;
};

/// Sparse LU solve of the constrained system, with the pressure constraint
/// modes enforced through a bordered system. Reference for the iterative path.
Vector solve_direct(const BlockSystem& system, const SpaceSet& spaces);

/// Element-local index sets (w_T, p_T of all networks) in the numbering of
/// `system`.
std::vector<std::vector<int>> element_local_unknowns(const BlockSystem& system,
                                                     const SpaceSet& spaces);

}  // namespace mpet
