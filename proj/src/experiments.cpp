#include "mpet/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include "mpet/error.hpp"

namespace mpet {

int worker_threads() {
  if (const char* env = std::getenv("MPET_NUM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw ConfigError("MPET_NUM_THREADS must be a positive integer");
    return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int count, int threads, const std::function<void(int)>& task) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (int i = next++; i < count; i = next++) {
      {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (error) return;
      }
      try {
        task(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// -- single manufactured solve -----------------------------------------------

ScaledParameters SolveCase::parameters() const {
  Eigen::MatrixXd X = Eigen::MatrixXd::Constant(2, 2, xi);
  return ScaledParameters::direct(lambda, R, alpha_p, X);
}

CaseResult solve_case(const SolveCase& c, bool with_errors, bool exact_initial_guess) {
  const Mesh mesh = generate_unit_square(c.n);
  const SpaceSet spaces(mesh, SpaceOrder(c.order), 2);
  const ScaledParameters sp = c.parameters();
  const ExactSolution exact = ExactSolution::trigonometric();
  const BlockSystem full = assemble_system(spaces, sp, c.solver.eta, manufactured_source(exact, sp));
  const BlockSystem sys =
      apply_boundary_conditions(full, spaces, sp, manufactured_boundary_conditions(exact, mesh), 0.0);
  const SystemSolver solver(sys, spaces, sp, c.solver, c.tol, c.maxit);
  SolveReport report;
  Vector x;
  if (exact_initial_guess) {
    const Vector xi = interpolate(exact, spaces, sp);
    Vector x0(sys.size());
    for (int i = 0; i < sys.size(); ++i) x0[i] = xi[sys.free_dofs[i]];
    x = solver.solve(sys.rhs, report, &x0);
  } else {
    x = solver.solve(report);
  }
  CaseResult r;
  r.iterations = report.converged ? report.iterations : c.maxit;
  r.converged = report.converged;
  r.residual = report.relative_residual();
  r.conservation = report.conservation_residual;
  r.unknowns = sys.size();
  r.elements = mesh.num_elements();
  if (with_errors) r.errors = error_norms(sys.expand(x), exact, spaces, sp);
  return r;
}

std::vector<CaseResult> solve_cases(const std::vector<SolveCase>& cases, int threads, bool with_errors) {
  std::vector<CaseResult> out(cases.size());
  parallel_for(static_cast<int>(cases.size()), threads,
               [&](int k) { out[k] = solve_case(cases[k], with_errors); });
  return out;
}

// -- sweeps ------------------------------------------------------------------

std::string to_string(SweepMode m) {
  switch (m) {
    case SweepMode::Equal: return "equal";
    case SweepMode::Mixed: return "mixed";
    case SweepMode::ROnly: return "r_only";
  }
  return "";
}

SweepMode parse_sweep_mode(const std::string& name) {
  if (name == "equal") return SweepMode::Equal;
  if (name == "mixed") return SweepMode::Mixed;
  if (name == "r_only") return SweepMode::ROnly;
  throw ConfigError("unknown sweep mode '" + name + "' (expected equal, mixed or r_only)");
}

SolveCase sweep_case(SweepMode mode, int i, int j, int n, int order) {
  const double v = std::pow(10.0, -i);
  SolveCase c;
  c.n = n;
  c.order = order;
  c.lambda = std::pow(10.0, j);
  switch (mode) {
    case SweepMode::Equal:
      c.R = {v, v};
      c.alpha_p = {v, v};
      c.xi = v;
      break;
    case SweepMode::Mixed:
      c.R = {1e-4, v};
      c.alpha_p = {1e-4, v};
      c.xi = v;
      break;
    case SweepMode::ROnly:
      c.R = {v, v};
      c.alpha_p = {0.0, 0.0};
      c.xi = 0.0;
      break;
  }
  return c;
}

std::vector<SweepRow> run_sweep(const SweepConfig& cfg, int threads) {
  std::vector<SolveCase> cases;
  std::vector<SweepRow> rows;
  for (int l : cfg.orders)
    for (PreconditionerVariant v : cfg.variants)
      for (int i : cfg.exponents)
        for (int j : cfg.lambda_exponents) {
          SolveCase c = sweep_case(cfg.mode, i, j, cfg.n, l);
          c.solver = {v, cfg.eta, cfg.local_recovery};
          c.tol = cfg.tol;
          c.maxit = cfg.maxit;
          cases.push_back(c);
          rows.push_back({l, v, i, j, 0, false, 0.0, 0.0});
        }
  const std::vector<CaseResult> res = solve_cases(cases, threads);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    rows[k].iterations = res[k].iterations;
    rows[k].converged = res[k].converged;
    rows[k].residual = res[k].residual;
    rows[k].conservation = res[k].conservation;
  }
  return rows;
}

double lambda_variation(const std::vector<SweepRow>& rows) {
  std::map<std::tuple<int, int, int>, std::pair<int, int>> range;
  for (const auto& r : rows) {
    const auto key = std::make_tuple(r.order, static_cast<int>(r.variant), r.i);
    auto it = range.find(key);
    if (it == range.end())
      range[key] = {r.iterations, r.iterations};
    else
      it->second = {std::min(it->second.first, r.iterations), std::max(it->second.second, r.iterations)};
  }
  double worst = 0;
  for (const auto& [key, mm] : range)
    worst = std::max(worst, double(mm.second - mm.first) / std::max(1, mm.first));
  return worst;
}

std::vector<OrderRobustRow> run_order_robustness(const OrderRobustConfig& cfg, int threads) {
  std::vector<SolveCase> cases;
  std::vector<OrderRobustRow> rows;
  for (int l : cfg.orders)
    for (int n : cfg.meshes) {
      SolveCase c;
      c.n = n;
      c.order = l;
      c.lambda = cfg.lambda;
      c.R = {cfg.value, cfg.value};
      c.alpha_p = {cfg.value, cfg.value};
      c.xi = cfg.value;
      c.solver = {cfg.variant, cfg.eta, true};
      c.tol = cfg.tol;
      c.maxit = cfg.maxit;
      cases.push_back(c);
      rows.push_back({l, n, 2 * n * n, 0, false});
    }
  const std::vector<CaseResult> res = solve_cases(cases, threads);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    rows[k].iterations = res[k].iterations;
    rows[k].converged = res[k].converged;
  }
  return rows;
}

std::vector<ConvergenceRow> run_convergence(const ConvergenceConfig& cfg, int threads) {
  std::vector<SolveCase> cases;
  std::vector<ConvergenceRow> rows;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int l : cfg.orders)
    for (int n : cfg.levels) {
      SolveCase c;
      c.n = n;
      c.order = l;
      c.lambda = cfg.lambda;
      c.R = {cfg.R, cfg.R};
      c.alpha_p = {cfg.alpha_p, cfg.alpha_p};
      c.xi = cfg.xi;
      c.solver = {cfg.variant, cfg.eta, true};
      c.tol = cfg.tol;
      c.maxit = cfg.maxit;
      cases.push_back(c);
      rows.push_back({l, n, std::sqrt(2.0) / n, 0, false, {}, nan, nan, nan, nan});
    }
  const std::vector<CaseResult> res = solve_cases(cases, threads, true);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    rows[k].iterations = res[k].iterations;
    rows[k].converged = res[k].converged;
    rows[k].errors = res[k].errors;
    if (k > 0 && rows[k - 1].order == rows[k].order && rows[k - 1].converged && rows[k].converged) {
      const double q = std::log2(rows[k - 1].h / rows[k].h);
      auto rate = [&](double a, double b) { return std::log2(a / b) / q; };
      const ErrorReport& a = rows[k - 1].errors;
      const ErrorReport& b = rows[k].errors;
      rows[k].rate_u_energy = rate(a.u_energy, b.u_energy);
      rows[k].rate_u_l2 = rate(a.u_l2, b.u_l2);
      rows[k].rate_p_l2 = rate(a.p_l2, b.p_l2);
      rows[k].rate_w_l2 = rate(a.w_l2, b.w_l2);
    }
  }
  return rows;
}

// -- spectra -----------------------------------------------------------------

EigsResult run_eigs(const EigsConfig& cfg, int threads) {
  const ExactSolution exact = ExactSolution::trigonometric();
  struct Job {
    int kind;  // 0 spectrum, 1 ratio, 2 inf-sup
    int order, n, i;
    InfSupKind inf_sup = InfSupKind::StokesLike;
  };
  std::vector<Job> jobs;
  for (int l : cfg.orders) {
    for (int i : cfg.exponents) jobs.push_back({0, l, cfg.n, i});
    for (int n : cfg.ratio_meshes)
      for (int i : cfg.ratio_exponents) jobs.push_back({1, l, n, i});
    for (int n : cfg.inf_sup_meshes)
      for (InfSupKind k : {InfSupKind::StokesLike, InfSupKind::DarcyLike}) jobs.push_back({2, l, n, 0, k});
  }
  std::vector<std::vector<SpectrumRow>> spectra(jobs.size());
  std::vector<RatioRow> ratios(jobs.size());
  std::vector<InfSupRow> infs(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), threads, [&](int k) {
    const Job& jb = jobs[k];
    const Mesh mesh = generate_unit_square(jb.n);
    const SpaceSet s(mesh, SpaceOrder(jb.order), 2);
    if (jb.kind == 2) {
      infs[k] = {jb.inf_sup, jb.order, jb.n, estimate_inf_sup(s, jb.inf_sup)};
      return;
    }
    const ScaledParameters sp = sweep_case(cfg.mode, jb.i, 0, jb.n, jb.order).parameters();
    const BlockSystem full = assemble_system(s, sp, cfg.eta, manufactured_source(exact, sp));
    const BlockSystem sys =
        apply_boundary_conditions(full, s, sp, manufactured_boundary_conditions(exact, mesh), 0.0);
    if (jb.kind == 1) {
      const SchurSpectra ss = schur_spectra(sys, s, sp);
      ratios[k] = {jb.order, jb.n, jb.i, ss.norm_ratio.minCoeff(), ss.norm_ratio.maxCoeff()};
      return;
    }
    for (PreconditionerVariant v : {PreconditionerVariant::FullBlock, PreconditionerVariant::SchurReduced}) {
      const SystemSolver solver(sys, s, sp, {v, cfg.eta, true});
      const SparseMatrix& K = solver.condensed() ? solver.condensed()->matrix : sys.matrix;
      spectra[k].push_back({jb.order, v, jb.i, preconditioned_spectrum(K, solver.preconditioner())});
    }
  });
  EigsResult out;
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    if (jobs[k].kind == 0)
      for (auto& r : spectra[k]) out.spectra.push_back(r);
    else if (jobs[k].kind == 1)
      out.ratios.push_back(ratios[k]);
    else
      out.inf_sup.push_back(infs[k]);
  }
  return out;
}

double spectrum_endpoint_spread(const std::vector<SpectrumRow>& rows, int order, PreconditionerVariant v) {
  double spread = 1.0;
  bool any = false;
  for (auto get : {+[](const SpectrumSummary& s) { return -s.neg_min; },
                   +[](const SpectrumSummary& s) { return -s.neg_max; },
                   +[](const SpectrumSummary& s) { return s.pos_min; },
                   +[](const SpectrumSummary& s) { return s.pos_max; }}) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (const auto& r : rows) {
      if (r.order != order || r.variant != v) continue;
      any = true;
      lo = std::min(lo, get(r.summary));
      hi = std::max(hi, get(r.summary));
    }
    if (any) spread = std::max(spread, lo > 0 ? hi / lo : std::numeric_limits<double>::infinity());
  }
  if (!any) throw Error("no spectrum rows for the requested order and variant");
  return spread;
}

// -- csv ---------------------------------------------------------------------

namespace {

void provenance_line(std::ostream& os, const std::string& provenance) {
  os << "# " << provenance << '\n';
  os.precision(12);
}

const char* kind_name(InfSupKind k) { return k == InfSupKind::StokesLike ? "stokes" : "darcy"; }

}  // namespace

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, const std::string& prov) {
  provenance_line(os, prov);
  os << "order,variant,i,lambda_exponent,iterations,converged,residual,conservation\n";
  for (const auto& r : rows)
    os << r.order << ',' << to_string(r.variant) << ',' << r.i << ',' << r.j << ',' << r.iterations << ','
       << (r.converged ? 1 : 0) << ',' << r.residual << ',' << r.conservation << '\n';
}

void write_order_robust_csv(std::ostream& os, const std::vector<OrderRobustRow>& rows,
                            const std::string& prov) {
  provenance_line(os, prov);
  os << "order,n,elements,iterations,converged\n";
  for (const auto& r : rows)
    os << r.order << ',' << r.n << ',' << r.elements << ',' << r.iterations << ',' << (r.converged ? 1 : 0)
       << '\n';
}

void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows,
                           const std::string& prov) {
  provenance_line(os, prov);
  os << "order,n,h,iterations,converged,u_energy,u_l2,p_l2,w_l2,rate_u_energy,rate_u_l2,rate_p_l2,rate_w_l2\n";
  for (const auto& r : rows)
    os << r.order << ',' << r.n << ',' << r.h << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << ','
       << r.errors.u_energy << ','
       << r.errors.u_l2 << ',' << r.errors.p_l2 << ',' << r.errors.w_l2 << ',' << r.rate_u_energy << ','
       << r.rate_u_l2 << ',' << r.rate_p_l2 << ',' << r.rate_w_l2 << '\n';
}

void write_spectrum_csv(std::ostream& os, const std::vector<SpectrumRow>& rows, const std::string& prov) {
  provenance_line(os, prov);
  os << "order,variant,i,neg_min,neg_max,pos_min,pos_max,negative,positive\n";
  for (const auto& r : rows)
    os << r.order << ',' << to_string(r.variant) << ',' << r.i << ',' << r.summary.neg_min << ','
       << r.summary.neg_max << ',' << r.summary.pos_min << ',' << r.summary.pos_max << ','
       << r.summary.negative << ',' << r.summary.positive << '\n';
}

void write_ratio_csv(std::ostream& os, const std::vector<RatioRow>& rows, const std::string& prov) {
  provenance_line(os, prov);
  os << "order,n,i,min,max\n";
  for (const auto& r : rows) os << r.order << ',' << r.n << ',' << r.i << ',' << r.min << ',' << r.max << '\n';
}

void write_inf_sup_rows_csv(std::ostream& os, const std::vector<InfSupRow>& rows, const std::string& prov) {
  provenance_line(os, prov);
  os << "kind,order,n,beta_h\n";
  for (const auto& r : rows) os << kind_name(r.kind) << ',' << r.order << ',' << r.n << ',' << r.beta << '\n';
}

}  // namespace mpet
