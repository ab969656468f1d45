#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mpet/diagnostics.hpp"
#include "mpet/timeloop.hpp"

namespace mpet {

/// Worker threads for independent cells: MPET_NUM_THREADS if set, else the
/// hardware concurrency.
int worker_threads();

/// Runs tasks 0..count-1 on up to `threads` workers. The first exception is
/// rethrown after all workers have stopped.
void parallel_for(int count, int threads, const std::function<void(int)>& task);

/// One manufactured two-network solve on the unit square in scaled-parameter mode.
struct SolveCase {
  int n = 8;  // squares per side
  int order = 1;
  double lambda = 1.0;
  std::vector<double> R{1.0, 1.0};
  std::vector<double> alpha_p{1.0, 1.0};
  double xi = 0.0;
  PreconditionerConfig solver;
  double tol = 1e-8;
  int maxit = 500;

  ScaledParameters parameters() const;
};

struct CaseResult {
  int iterations = 0;
  bool converged = false;
  double residual = 0;      // relative preconditioned residual
  double conservation = 0;  // max relative element mass-balance residual
  int unknowns = 0;
  int elements = 0;
  ErrorReport errors;       // filled on request
};

/// Assembles, applies the manufactured boundary conditions and solves.
/// `exact_initial_guess` starts MinRes from the interpolant of the exact solution.
CaseResult solve_case(const SolveCase& c, bool with_errors = false, bool exact_initial_guess = false);

/// Solves independent cases in parallel; results keep the input order.
std::vector<CaseResult> solve_cases(const std::vector<SolveCase>& cases, int threads,
                                    bool with_errors = false);

/// Parameter grids of the iteration studies.
enum class SweepMode {
  Equal,  ///< alpha_p = R = xi = 10^-i for both networks
  Mixed,  ///< alpha_p1 = R1 = 1e-4, alpha_p2 = R2 = xi = 10^-i
  ROnly,  ///< R = 10^-i, alpha_p = xi = 0
};
std::string to_string(SweepMode m);
SweepMode parse_sweep_mode(const std::string& name);

/// Scaled data of grid point i with lambda = 10^j.
SolveCase sweep_case(SweepMode mode, int i, int j, int n, int order);

struct SweepConfig {
  SweepMode mode = SweepMode::Equal;
  int n = 8;
  std::vector<int> orders{1, 2};
  std::vector<int> exponents{0, 2, 4, 6, 8};         // i
  std::vector<int> lambda_exponents{0, 4, 8};        // j
  std::vector<PreconditionerVariant> variants{PreconditionerVariant::SchurReduced};
  double eta = 10.0;
  double tol = 1e-8;
  int maxit = 500;
  bool local_recovery = true;
};

struct SweepRow {
  int order;
  PreconditionerVariant variant;
  int i, j;
  int iterations;  // maxit when not converged
  bool converged;
  double residual;
  double conservation;
};
std::vector<SweepRow> run_sweep(const SweepConfig& config, int threads);

/// Largest relative spread (max - min) / min of iterations across lambda for
/// fixed (order, variant, i).
double lambda_variation(const std::vector<SweepRow>& rows);

struct OrderRobustConfig {
  std::vector<int> orders{1, 2, 3};
  std::vector<int> meshes{2, 4, 8, 16};
  double value = 1e-4;  // alpha_p = R = xi
  double lambda = 1.0;
  PreconditionerVariant variant = PreconditionerVariant::SchurReduced;
  double eta = 10.0;
  double tol = 1e-8;
  int maxit = 500;
};
struct OrderRobustRow {
  int order, n, elements, iterations;
  bool converged;
};
std::vector<OrderRobustRow> run_order_robustness(const OrderRobustConfig& config, int threads);

struct ConvergenceConfig {
  std::vector<int> orders{1, 2};
  std::vector<int> levels{4, 8, 16};
  double lambda = 1.0;
  double R = 1.0, alpha_p = 1.0, xi = 1.0;
  PreconditionerVariant variant = PreconditionerVariant::SchurReduced;
  double eta = 10.0;
  double tol = 1e-10;
  int maxit = 1000;
};
struct ConvergenceRow {
  int order, n;
  double h;
  int iterations;
  bool converged;
  ErrorReport errors;
  // log2 ratios against the previous level; NaN on the first
  double rate_u_energy, rate_u_l2, rate_p_l2, rate_w_l2;
};
/// Rates are only filled between converged levels; callers decide what to do
/// with a non-converged row.
std::vector<ConvergenceRow> run_convergence(const ConvergenceConfig& config, int threads);

struct EigsConfig {
  SweepMode mode = SweepMode::Equal;
  std::vector<int> orders{1, 2};
  int n = 2;                                  // spectrum mesh
  std::vector<int> exponents{0, 2, 4, 6, 8};  // R = 10^-i
  std::vector<int> ratio_meshes{1, 2, 4};     // (X_p, X~_p) mesh levels
  std::vector<int> ratio_exponents{0, 4, 8};
  std::vector<int> inf_sup_meshes{2, 4, 8};
  double eta = 10.0;
};
struct SpectrumRow {
  int order;
  PreconditionerVariant variant;
  int i;
  SpectrumSummary summary;
};
struct RatioRow {
  int order, n, i;
  double min, max;
};
struct InfSupRow {
  InfSupKind kind;
  int order, n;
  double beta;
};
struct EigsResult {
  std::vector<SpectrumRow> spectra;
  std::vector<RatioRow> ratios;
  std::vector<InfSupRow> inf_sup;
};
EigsResult run_eigs(const EigsConfig& config, int threads);
/// Largest ratio between the inner negative endpoints over the R-sweep per
/// (order, variant).
double spectrum_endpoint_spread(const std::vector<SpectrumRow>& rows, int order,
                                PreconditionerVariant variant);

// -- CSV writers; `provenance` is written as a leading '#' comment line -------

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, const std::string& provenance);
void write_order_robust_csv(std::ostream& os, const std::vector<OrderRobustRow>& rows,
                            const std::string& provenance);
void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows,
                           const std::string& provenance);
void write_spectrum_csv(std::ostream& os, const std::vector<SpectrumRow>& rows,
                        const std::string& provenance);
void write_ratio_csv(std::ostream& os, const std::vector<RatioRow>& rows, const std::string& provenance);
void write_inf_sup_rows_csv(std::ostream& os, const std::vector<InfSupRow>& rows,
                            const std::string& provenance);

}  // namespace mpet
