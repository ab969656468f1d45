#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mpet/manufactured.hpp"
#include "mpet/solver.hpp"

namespace mpet {

/// Parameter-dependent norms of a state in the unconstrained numbering.
struct NormReport {
  double u_hdg = 0;               // ||(v, vhat)||_HDG
  double u_bar = 0;               // with lambda ||div v||^2 added
  std::vector<double> p_hdg;      // ||(q_i, qhat_i)||_HDG per network
  double p_bar = 0;               // sum_i R_i ||.||_HDG^2 + (Lambda q, q)
  double w_minus = 0;             // sum_i R_i^{-1} ||z_i||^2
  double product = 0;             // sqrt(u_bar^2 + w_minus^2 + p_bar^2)
};

/// Precomputed norm matrices for repeated evaluation.
class NormEvaluator {
 public:
  NormEvaluator(const SpaceSet& spaces, const ScaledParameters& scaled);
  NormReport evaluate(const Vector& state) const;

  /// Matrix of the squared product norm (unconstrained numbering).
  SparseMatrix product_matrix() const;

 private:
  const SpaceSet* spaces_;
  ScaledParameters scaled_;
  SparseMatrix hdg_u_, div_, lambda_mass_, flux_;
  std::vector<SparseMatrix> hdg_p_;
};

NormReport evaluate_norms(const Vector& state, const SpaceSet& spaces,
                          const ScaledParameters& scaled);

/// Canonical interpolants of the exact fields: BDM/RT moments, facet and
/// element L2 projections. Fluxes are w_i = -R_i grad p_i.
Vector interpolate(const ExactSolution& exact, const SpaceSet& spaces,
                   const ScaledParameters& scaled);

/// Errors of a discrete state against the exact solution, by quadrature.
struct ErrorReport {
  double u_energy = 0;  // ||(u - u_h, u - uhat_h)|| in the displacement norm with lambda term
  double u_l2 = 0;
  double p_l2 = 0;      // sqrt(sum_i ||p_i - p_ih||^2)
  double w_l2 = 0;      // sqrt(sum_i ||w_i - w_ih||^2)
};
ErrorReport error_norms(const Vector& state, const ExactSolution& exact, const SpaceSet& spaces,
                        const ScaledParameters& scaled);

/// Element-wise residual of the mass balance rows against P_{l-1}(T).
struct ConservationReport {
  struct Row {
    int element;
    int network;
    double residual;
  };
  std::vector<Row> rows;
  double max_relative = 0;
};

/// `x` and `rhs` in the numbering of `system`.
ConservationReport conservation_residual(const BlockSystem& system, const SpaceSet& spaces,
                                         const Vector& x, const Vector& rhs);

enum class InfSupKind { StokesLike, DarcyLike };

/// Discrete inf-sup constant by a dense generalized eigenproblem.
double estimate_inf_sup(const SpaceSet& spaces, InfSupKind kind);

/// Largest system size accepted by the dense eigen diagnostics.
constexpr int kDenseLimit = 5000;

/// Sorted generalized eigenvalues of (K, P) with K symmetric and P SPD.
Eigen::VectorXd generalized_eigenvalues(const Eigen::MatrixXd& K, const Eigen::MatrixXd& P);

struct SpectrumSummary {
  double neg_min = 0, neg_max = 0;  // negative eigenvalues lie in [neg_min, neg_max]
  double pos_min = 0, pos_max = 0;  // positive eigenvalues lie in [pos_min, pos_max]
  int negative = 0, positive = 0;
  Eigen::VectorXd values;
};
SpectrumSummary summarize_spectrum(const Eigen::VectorXd& values);

/// Eigenvalues of preconditioner^{-1} * system matrix.
SpectrumSummary preconditioned_spectrum(const SparseMatrix& system, const BlockPreconditioner& P);

/// Spectra of the pressure Schur complement S = B A^{-1} B^T + C against X_p
/// and X~_p, and of (X_p, X~_p). All positive.
struct SchurSpectra {
  Eigen::VectorXd against_full;
  Eigen::VectorXd against_schur;
  Eigen::VectorXd norm_ratio;
};
SchurSpectra schur_spectra(const BlockSystem& system, const SpaceSet& spaces,
                           const ScaledParameters& scaled);

void write_conservation_csv(std::ostream& os, const ConservationReport& report);
void write_inf_sup_csv(std::ostream& os, const std::vector<std::pair<int, double>>& rows);

}  // namespace mpet
