#include <atomic>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include <doctest.h>

#include "mpet/experiments.hpp"

using namespace mpet;

TEST_CASE("parallel_for runs every task once") {
  for (int threads : {1, 3, 16}) {
    std::vector<std::atomic<int>> hits(50);
    parallel_for(50, threads, [&](int i) { hits[i]++; });
    for (const auto& h : hits) CHECK(h.load() == 1);
  }
  CHECK_NOTHROW(parallel_for(0, 4, [](int) { throw std::runtime_error("never"); }));
}

TEST_CASE("parallel_for rethrows after all workers stop") {
  std::atomic<int> done{0};
  CHECK_THROWS_WITH(parallel_for(20, 4,
                                 [&](int i) {
                                   if (i == 7) throw std::runtime_error("task 7");
                                   done++;
                                 }),
                    "task 7");
  CHECK(done.load() <= 19);
}

TEST_CASE("worker thread count honours the environment") {
  const char* old = std::getenv("MPET_NUM_THREADS");
  const std::string saved = old ? old : "";
  setenv("MPET_NUM_THREADS", "3", 1);
  CHECK(worker_threads() == 3);
  setenv("MPET_NUM_THREADS", "zero", 1);
  CHECK_THROWS_AS(worker_threads(), ConfigError);
  setenv("MPET_NUM_THREADS", "0", 1);
  CHECK_THROWS_AS(worker_threads(), ConfigError);
  unsetenv("MPET_NUM_THREADS");
  CHECK(worker_threads() >= 1);
  if (old) setenv("MPET_NUM_THREADS", saved.c_str(), 1);
}

TEST_CASE("sweep grid points") {
  const SolveCase e = sweep_case(SweepMode::Equal, 4, 8, 2, 1);
  CHECK(e.lambda == 1e8);
  CHECK(e.R == std::vector<double>{1e-4, 1e-4});
  CHECK(e.alpha_p == std::vector<double>{1e-4, 1e-4});
  CHECK(e.xi == 1e-4);
  const SolveCase m = sweep_case(SweepMode::Mixed, 8, 0, 2, 1);
  CHECK(m.R == std::vector<double>{1e-4, 1e-8});
  CHECK(m.xi == 1e-8);
  const SolveCase r = sweep_case(SweepMode::ROnly, 2, 4, 2, 2);
  CHECK(r.alpha_p == std::vector<double>{0.0, 0.0});
  CHECK(r.xi == 0.0);
  CHECK(parse_sweep_mode(to_string(SweepMode::ROnly)) == SweepMode::ROnly);
  CHECK_THROWS_AS(parse_sweep_mode("spiral"), ConfigError);
}

TEST_CASE("solve from the exact interpolant reaches the same discrete solution") {
  SolveCase c;
  c.n = 4;
  c.order = 2;
  c.R = {0.1, 0.1};
  c.alpha_p = {0.2, 0.2};
  c.xi = 0.1;
  c.tol = 1e-10;
  const CaseResult cold = solve_case(c, true);
  const CaseResult warm = solve_case(c, true, true);
  REQUIRE(cold.converged);
  REQUIRE(warm.converged);
  CHECK(warm.errors.u_l2 == doctest::Approx(cold.errors.u_l2).epsilon(1e-6));
  CHECK(warm.errors.p_l2 == doctest::Approx(cold.errors.p_l2).epsilon(1e-6));
  CHECK(warm.errors.w_l2 == doctest::Approx(cold.errors.w_l2).epsilon(1e-6));
  CHECK(cold.elements == 32);
  CHECK(cold.conservation <= 1e-8);
}

TEST_CASE("non-converged sweep points report maxit") {
  SweepConfig cfg;
  cfg.n = 2;
  cfg.orders = {1};
  cfg.exponents = {0, 8};
  cfg.lambda_exponents = {0};
  cfg.maxit = 1;
  const std::vector<SweepRow> rows = run_sweep(cfg, 2);
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK_FALSE(r.converged);
    CHECK(r.iterations == 1);
  }
  std::ostringstream os;
  write_sweep_csv(os, rows, "command=sweep");
  CHECK(os.str().rfind("# command=sweep\norder,variant,i,lambda_exponent,iterations,converged", 0) == 0);
  CHECK(os.str().find("\n1,schur,8,0,1,0,") != std::string::npos);
}

TEST_CASE("sweep results do not depend on the thread count") {
  SweepConfig cfg;
  cfg.n = 2;
  cfg.orders = {1, 2};
  cfg.exponents = {0, 4};
  cfg.lambda_exponents = {0, 8};
  const std::vector<SweepRow> a = run_sweep(cfg, 1), b = run_sweep(cfg, 4);
  REQUIRE(a.size() == 8);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].order == b[k].order);
    CHECK(a[k].i == b[k].i);
    CHECK(a[k].j == b[k].j);
    CHECK(a[k].iterations == b[k].iterations);
    CHECK(a[k].residual == b[k].residual);
  }
}

TEST_CASE("lambda variation") {
  auto row = [](int order, int i, int j, int it) {
    return SweepRow{order, PreconditionerVariant::SchurReduced, i, j, it, true, 0, 0};
  };
  CHECK(lambda_variation({row(1, 0, 0, 10), row(1, 0, 4, 12), row(1, 2, 0, 20), row(1, 2, 4, 21)}) ==
        doctest::Approx(0.2));
  CHECK(lambda_variation({row(1, 0, 0, 10), row(2, 0, 4, 30)}) == 0.0);
}

TEST_CASE("spectrum endpoint spread") {
  auto row = [](int i, double nmin, double nmax, double pmin, double pmax) {
    SpectrumRow r{1, PreconditionerVariant::FullBlock, i, {}};
    r.summary.neg_min = nmin;
    r.summary.neg_max = nmax;
    r.summary.pos_min = pmin;
    r.summary.pos_max = pmax;
    return r;
  };
  const std::vector<SpectrumRow> rows{row(0, -2, -0.5, 0.6, 2), row(4, -2, -0.25, 0.6, 2)};
  CHECK(spectrum_endpoint_spread(rows, 1, PreconditionerVariant::FullBlock) == doctest::Approx(2.0));
  CHECK_THROWS(spectrum_endpoint_spread(rows, 2, PreconditionerVariant::FullBlock));
}

TEST_CASE("convergence study on small meshes") {
  ConvergenceConfig cfg;
  cfg.orders = {1};
  cfg.levels = {4, 8};
  const std::vector<ConvergenceRow> rows = run_convergence(cfg, 2);
  REQUIRE(rows.size() == 2);
  CHECK(std::isnan(rows[0].rate_u_l2));
  // element diameter of the right triangles
  CHECK(rows[1].h == doctest::Approx(std::sqrt(2.0) / 8));
  CHECK(rows[1].rate_u_l2 > 1.5);
  CHECK(rows[1].rate_p_l2 > 0.8);
  CHECK(rows[1].rate_w_l2 > 0.8);
  std::ostringstream os;
  write_convergence_csv(os, rows, "x");
  CHECK(os.str().rfind("# x\norder,n,h,iterations", 0) == 0);
}
