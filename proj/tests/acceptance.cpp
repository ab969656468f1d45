// Acceptance checks: one PASS/FAIL line per criterion, bounds frozen below.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mpet/config.hpp"
#include "mpet/experiments.hpp"
#include "mpet/manufactured.hpp"
#include "oracle.hpp"

using namespace mpet;

namespace {

// frozen bounds
constexpr double kOracleTol = 1e-12;
constexpr double kSymmetryTol = 1e-12;
constexpr double kConservationTol = 1e-8;
constexpr int kSweepIterationCap = 40;         // 28 observed
constexpr double kLambdaVariationCap = 0.5;
constexpr double kPlateauTol = 0.10;
constexpr double kEndpointSpreadCap = 10.0;
constexpr double kSpectrumGap = 0.05;           // |eigenvalue| >= gap
constexpr double kRatioMeshVariation = 0.25;     // (X_p, X~_p) endpoints against the coarsest mesh
constexpr double kOrderSlack = 0.2;
constexpr double kInfSupVariation = 0.2;
constexpr double kBrainIterationFactor = 2.0;
constexpr double kWindowTol = 1e-12;

int threads() { return worker_threads(); }

RunConfig preset(const std::string& command, const std::string& file) {
  return load_config(command, (std::filesystem::path(MPET_PRESET_DIR) / file).string());
}

double dense_rel(const SparseMatrix& a, const Eigen::MatrixXd& b) { return oracle::rel_max(Eigen::MatrixXd(a), b); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

Outcome criterion1() {
  Outcome o;
  Eigen::MatrixXd xi(2, 2);
  xi << 0, 0.3, 0.3, 0;
  const ScaledParameters sc = ScaledParameters::direct(7.5, {0.4, 2.5}, {0.2, 0.05}, xi);
  double worst = 0;
  for (const Mesh& m : {generate_unit_square(1), oracle::skewed_pair()}) {
    for (int l : {1, 2}) {
      const SpaceSet s(m, SpaceOrder(l), 2);
      const oracle::Blocks ref = oracle::assemble(s, sc, 10.0);
      const DivergenceBlocks div = assemble_divdiv_and_coupling(s, sc);
      const FlowBlocks flow = assemble_flow(s, sc);
      for (double e : {dense_rel(assemble_a_hdg(s, 10.0), ref.hdg), dense_rel(div.divdiv, ref.divdiv),
                       dense_rel(div.coupling, ref.coupling), dense_rel(flow.mass, ref.mass),
                       dense_rel(flow.b, ref.b), dense_rel(flow.C, ref.C),
                       dense_rel(assemble_system(s, sc, 10.0).matrix, ref.full())})
        worst = std::max(worst, e);
    }
  }
  o.detail << "max relative block deviation " << worst;
  o.require(worst < kOracleTol, "oracle deviation");
  return o;
}

Outcome criterion2() {
  Outcome o;
  double asym = 0;
  for (int l : {1, 2, 3}) {
    for (const Mesh& m : {generate_unit_square(3), generate_annulus(1.0, 2.0, 2, 12)}) {
      const SpaceSet s(m, SpaceOrder(l), 2);
      const BlockSystem sys = assemble_system(s, sweep_case(SweepMode::Equal, 2, 4, 1, l).parameters(), 10.0);
      const Eigen::MatrixXd K(sys.matrix);
      asym = std::max(asym, (K - K.transpose()).cwiseAbs().maxCoeff() / K.cwiseAbs().maxCoeff());
    }
  }
  SweepConfig cfg;
  cfg.n = 4;
  cfg.exponents = {0, 4, 8};
  cfg.lambda_exponents = {0, 8};
  cfg.variants = {PreconditionerVariant::FullBlock, PreconditionerVariant::SchurReduced};
  double worst = 0;
  int solves = 0;
  for (SweepMode mode : {SweepMode::Equal, SweepMode::Mixed, SweepMode::ROnly}) {
    cfg.mode = mode;
    for (const SweepRow& r : run_sweep(cfg, threads())) {
      o.require(r.converged, "solve did not converge");
      if (!r.converged) continue;
      worst = std::max(worst, r.conservation);
      ++solves;
    }
  }
  o.detail << "asymmetry " << asym << ", max conservation residual " << worst << " over " << solves << " solves";
  o.require(asym <= kSymmetryTol, "symmetry");
  o.require(worst <= kConservationTol, "conservation");
  return o;
}

Outcome criterion3() {
  Outcome o;
  const RunConfig c = preset("sweep", "sweep.ini");
  const std::vector<SweepRow> rows = run_sweep(c.sweep, threads());
  bool all = true;
  int most = 0;
  for (const auto& r : rows) {
    all &= r.converged;
    most = std::max(most, r.iterations);
  }
  const double var = lambda_variation(rows);
  o.detail << rows.size() << " cells, max iterations " << most << ", lambda variation " << var;
  o.require(all, "not all cells converged");
  o.require(most <= kSweepIterationCap, "iteration cap");
  o.require(var <= kLambdaVariationCap, "lambda variation");
  return o;
}

Outcome criterion4() {
  Outcome o;
  const RunConfig c = preset("sweep", "compare.ini");
  const std::vector<SweepRow> rows = run_sweep(c.sweep, threads());
  std::map<std::pair<int, PreconditionerVariant>, std::map<int, int>> counts;
  for (const auto& r : rows) {
    o.require(r.converged, "solve did not converge");
    counts[{r.order, r.variant}][r.i] = r.iterations;
  }
  for (const auto& [key, byi] : counts) {
    if (byi.size() < 2) continue;
    auto last = byi.rbegin();
    const int a = std::next(last)->second, b = last->second;
    const double change = std::abs(b - a) / double(std::max(a, 1));
    o.detail << " l=" << key.first << "/" << to_string(key.second) << ":";
    for (const auto& [i, it] : byi) o.detail << ' ' << it;
    o.require(change <= kPlateauTol, "plateau l=" + std::to_string(key.first) + " " + to_string(key.second));
  }
  return o;
}

Outcome criterion5() {
  Outcome o;
  const RunConfig c = preset("eigs", "eigs.ini");
  const EigsResult res = run_eigs(c.eigs, threads());
  for (int l : c.eigs.orders) {
    double gap = std::numeric_limits<double>::infinity();
    for (const auto& r : res.spectra)
      if (r.order == l && r.variant == PreconditionerVariant::SchurReduced)
        gap = std::min({gap, -r.summary.neg_max, r.summary.pos_min});
    const double spread = spectrum_endpoint_spread(res.spectra, l, PreconditionerVariant::SchurReduced);
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    std::map<int, std::pair<double, double>> per_mesh;
    for (const auto& r : res.ratios) {
      if (r.order != l) continue;
      lo = std::min(lo, r.min);
      hi = std::max(hi, r.max);
      auto [it, fresh] = per_mesh.try_emplace(r.n, r.min, r.max);
      if (!fresh) it->second = {std::min(it->second.first, r.min), std::max(it->second.second, r.max)};
    }
    double lo_var = 0, hi_var = 0;
    for (const auto& [n, mm] : per_mesh) {
      lo_var = std::max(lo_var, std::abs(mm.first - per_mesh.begin()->second.first) / per_mesh.begin()->second.first);
      hi_var = std::max(hi_var, std::abs(mm.second - per_mesh.begin()->second.second) / per_mesh.begin()->second.second);
    }
    o.detail << " l=" << l << ": gap " << gap << ", endpoint spread " << spread << ", ratio interval [" << lo << ", "
             << hi << "], mesh variation " << std::max(lo_var, hi_var);
    const std::string tag = " l=" + std::to_string(l);
    o.require(gap >= kSpectrumGap, "spectral gap" + tag);
    o.require(spread < kEndpointSpreadCap, "endpoint spread" + tag);
    o.require(lo > 0, "ratio positivity" + tag);
    o.require(lo_var < kRatioMeshVariation && hi_var < kRatioMeshVariation, "ratio mesh variation" + tag);
  }
  return o;
}

Outcome criterion6() {
  Outcome o;
  const RunConfig c = preset("convergence", "convergence.ini");
  const std::vector<ConvergenceRow> rows = run_convergence(c.convergence, threads());
  for (const auto& r : rows) {
    o.require(r.converged, "solve did not converge");
    if (std::isnan(r.rate_u_energy)) continue;
    o.detail << " l=" << r.order << " n=" << r.n << ": rate_u " << r.rate_u_energy << " rate_w " << r.rate_w_l2;
    o.require(r.rate_u_energy >= r.order - kOrderSlack, "displacement rate");
    o.require(r.rate_w_l2 >= r.order - kOrderSlack, "flux rate");
  }
  return o;
}

Outcome criterion7() {
  Outcome o;
  for (InfSupKind kind : {InfSupKind::StokesLike, InfSupKind::DarcyLike}) {
    for (int l : {1, 2}) {
      std::vector<double> beta;
      for (int n : {2, 4, 8}) beta.push_back(estimate_inf_sup(SpaceSet(generate_unit_square(n), SpaceOrder(l), 1), kind));
      const auto [lo, hi] = std::minmax_element(beta.begin(), beta.end());
      const double var = (*hi - *lo) / *hi;
      o.detail << ' ' << (kind == InfSupKind::StokesLike ? "stokes" : "darcy") << " l=" << l << ": [" << *lo << ", "
               << *hi << "]";
      o.require(*lo > 0 && var < kInfSupVariation, "inf-sup");
    }
  }
  return o;
}

/// Mean over [0, t + w] by the trapezoidal rule on the samples, for t < w.
double truncated_mean(const std::vector<double>& t, const std::vector<double>& v, double at, double w) {
  double s = 0;
  for (std::size_t k = 0; k + 1 < t.size() && t[k + 1] <= at + w + 1e-12; ++k) s += 0.5 * (t[k + 1] - t[k]) * (v[k] + v[k + 1]);
  return s / (at + w);
}

Outcome criterion8() {
  Outcome o;
  const RunConfig c = preset("brain", "brain.ini");
  Scenario sc = brain_scenario(c.brain);
  sc.solver.variant = c.brain_variant;
  sc.tol = c.brain_tol;
  sc.maxit = c.brain_maxit;
  TimeSeries ts;
  try {
    ts = run(sc);
  } catch (const Error& e) {
    o.require(false, e.what());
    return o;
  }
  const int first = ts.steps.front().iterations;
  int most = 0;
  for (const auto& s : ts.steps) most = std::max(most, s.iterations);
  o.detail << ts.steps.size() << " steps, first step " << first << " iterations, max " << most;
  o.require(static_cast<int>(ts.steps.size()) == sc.num_steps(), "incomplete run");
  o.require(most <= kBrainIterationFactor * first, "iteration growth");
  double dev = 0;
  const double w = c.window_half_width;
  for (std::size_t f = 0; f < ts.fields.size(); ++f)
    for (int j = 0; j < ts.num_probes; ++j)
      for (double t : ts.times) {
        if (t >= w) break;
        const std::vector<double>& v = ts.values[f][j];
        const double scale = std::max(1.0, *std::max_element(v.begin(), v.end(), [](double a, double b) {
          return std::abs(a) < std::abs(b);
        }));
        dev = std::max(dev, std::abs(windowed_mean(ts.times, v, t, w) - truncated_mean(ts.times, v, t, w)) / scale);
      }
  o.detail << ", truncated-window deviation " << dev;
  o.require(dev <= kWindowTol, "truncation rule");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                       criterion5, criterion6, criterion7, criterion8};
  bool all = true;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k]();
    } catch (const std::exception& e) {
      o.require(false, e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    all &= o.pass;
    std::printf("criterion %zu: %s (%.1f s)%s%s\n", k + 1, o.pass ? "PASS" : "FAIL", secs,
                o.detail.str().starts_with(' ') ? "" : " ", o.detail.str().c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
