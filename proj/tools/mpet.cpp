// Command-line driver: mpet <command> --config <file> --out <dir>
//
// Exit codes: 0 success, 1 configuration error, 2 solver failure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mpet/config.hpp"

namespace fs = std::filesystem;
using namespace mpet;

namespace {

constexpr int kOk = 0, kConfigFailure = 1, kSolverFailure = 2;

std::ofstream open_output(const fs::path& dir, const std::string& name) {
  std::ofstream os(dir / name);
  if (!os) throw ConfigError("cannot write " + (dir / name).string());
  return os;
}

int cmd_sweep(const RunConfig& cfg, const fs::path& out, int threads) {
  const std::vector<SweepRow> rows = run_sweep(cfg.sweep, threads);
  auto os = open_output(out, "sweep.csv");
  write_sweep_csv(os, rows, cfg.resolved());
  int failed = 0, worst = 0;
  for (const auto& r : rows) {
    failed += r.converged ? 0 : 1;
    worst = std::max(worst, r.iterations);
  }
  std::cout << "sweep: " << rows.size() << " cells, max iterations " << worst << ", lambda variation "
            << lambda_variation(rows) << "\n";
  if (failed) {
    std::cerr << "sweep: " << failed << " cells did not converge (recorded with maxit)\n";
    return kSolverFailure;
  }
  return kOk;
}

int cmd_orderrobust(const RunConfig& cfg, const fs::path& out, int threads) {
  const std::vector<OrderRobustRow> rows = run_order_robustness(cfg.order_robust, threads);
  auto os = open_output(out, "orderrobust.csv");
  write_order_robust_csv(os, rows, cfg.resolved());
  int failed = 0;
  for (const auto& r : rows) {
    failed += r.converged ? 0 : 1;
    std::cout << "order " << r.order << " n " << r.n << ": " << r.iterations << " iterations\n";
  }
  return failed ? kSolverFailure : kOk;
}

int cmd_convergence(const RunConfig& cfg, const fs::path& out, int threads) {
  std::vector<ConvergenceRow> rows = run_convergence(cfg.convergence, threads);
  // A failed level ends the table: only the rows before it are written.
  const auto bad = std::find_if(rows.begin(), rows.end(), [](const auto& r) { return !r.converged; });
  const bool failed = bad != rows.end();
  if (failed) {
    std::cerr << "convergence: MinRes failed at order " << bad->order << ", n = " << bad->n << "\n";
    rows.erase(bad, rows.end());
  }
  auto os = open_output(out, "convergence.csv");
  write_convergence_csv(os, rows, cfg.resolved());
  for (const auto& r : rows)
    std::cout << "order " << r.order << " n " << r.n << ": u_energy " << r.errors.u_energy << " (rate "
              << r.rate_u_energy << "), w_l2 " << r.errors.w_l2 << " (rate " << r.rate_w_l2 << ")\n";
  return failed ? kSolverFailure : kOk;
}

int cmd_eigs(const RunConfig& cfg, const fs::path& out, int threads) {
  const EigsResult res = run_eigs(cfg.eigs, threads);
  auto a = open_output(out, "spectrum.csv");
  write_spectrum_csv(a, res.spectra, cfg.resolved());
  auto b = open_output(out, "norm_ratio.csv");
  write_ratio_csv(b, res.ratios, cfg.resolved());
  auto c = open_output(out, "inf_sup.csv");
  write_inf_sup_rows_csv(c, res.inf_sup, cfg.resolved());
  for (int l : cfg.eigs.orders)
    for (auto v : {PreconditionerVariant::FullBlock, PreconditionerVariant::SchurReduced})
      std::cout << "order " << l << " " << to_string(v) << ": endpoint spread over R "
                << spectrum_endpoint_spread(res.spectra, l, v) << "\n";
  return kOk;
}

int cmd_brain(const RunConfig& cfg, const fs::path& out) {
  Scenario sc = brain_scenario(cfg.brain);
  sc.output_every = cfg.brain_output_every;
  sc.solver.variant = cfg.brain_variant;
  sc.tol = cfg.brain_tol;
  sc.maxit = cfg.brain_maxit;
  const auto start = std::chrono::steady_clock::now();
  const TimeSeries ts = run(sc);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const std::string prov = "# " + cfg.resolved() + "\n";
  auto a = open_output(out, "probes.csv");
  a << prov;
  write_series_csv(a, ts);
  auto b = open_output(out, "steps.csv");
  b << prov;
  write_step_log_csv(b, ts);
  auto c = open_output(out, "windowed_means.csv");
  c << prov;
  write_windowed_csv(c, ts, cfg.window_half_width);
  int worst = 0;
  for (const auto& s : ts.steps) worst = std::max(worst, s.iterations);
  auto d = open_output(out, "summary.csv");
  d << prov << "steps,first_iterations,max_iterations,probes\n"
    << ts.steps.size() << ',' << ts.steps.front().iterations << ',' << worst << ',' << ts.num_probes << '\n';
  std::cout << "brain: " << ts.steps.size() << " steps, iterations first " << ts.steps.front().iterations
            << " max " << worst << ", " << seconds << " s\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid-mixed MPET solver experiments"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"convergence", "errors and observed orders on refined meshes"},
      {"sweep", "MinRes iteration table over the parameter grid"},
      {"orderrobust", "iterations over polynomial orders and meshes"},
      {"brain", "four-network brain analog on an annulus"},
      {"eigs", "preconditioned spectra, norm ratios and inf-sup constants"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "INI configuration file")->required();
    sub->add_option("--out", out_dir, "output directory")->required();
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigFailure;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const RunConfig cfg = load_config(command, config_path);
    const int threads = worker_threads();
    const fs::path out(out_dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw ConfigError("cannot create output directory " + out_dir + ": " + ec.message());
    if (command == "sweep") return cmd_sweep(cfg, out, threads);
    if (command == "orderrobust") return cmd_orderrobust(cfg, out, threads);
    if (command == "convergence") return cmd_convergence(cfg, out, threads);
    if (command == "eigs") return cmd_eigs(cfg, out, threads);
    return cmd_brain(cfg, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigFailure;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolverFailure;
  }
}
