#include "mpet/timeloop.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include <Eigen/SparseLU>

#include "mpet/diagnostics.hpp"
#include "mpet/error.hpp"

namespace mpet {

// -- scenario ----------------------------------------------------------------

int Scenario::num_steps() const {
  return static_cast<int>(std::llround(T / tau()));
}

void Scenario::validate() const {
  if (!(tau() > 0)) throw ConfigError("time step must be positive");
  if (!(T >= tau() * (1 - 1e-12))) throw ConfigError("final time must be at least one time step");
  if (std::abs(num_steps() * tau() - T) > 1e-9 * T)
    throw ConfigError("final time is not a multiple of the time step");
  if (order < SpaceOrder::kMin || order > SpaceOrder::kMax) throw ConfigError("invalid order");
  if (parameters.n != networks) throw ConfigError("parameter and network counts differ");
  parameters.validate();
  if (!g.empty() && static_cast<int>(g.size()) != networks)
    throw ConfigError("one fluid source per network expected");
  if (!p0.empty() && static_cast<int>(p0.size()) != networks)
    throw ConfigError("one initial pressure per network expected");
  if (output_every < 1) throw ConfigError("output cadence must be positive");
  if (!(pressure_unit > 0)) throw ConfigError("pressure unit must be positive");
  for (const Point& p : probes)
    if (mesh.locate(p) < 0) throw ConfigError("probe point outside the domain");
  bcs.validate(mesh, networks);
}

// -- scaling -----------------------------------------------------------------

namespace {

Vector rescale(const Vector& x, const SpaceSet& s, const PhysicalParameters& phys, bool to_physical) {
  if (x.size() != s.size()) throw Error("state has wrong size");
  Vector y = x;
  const double two_mu = 2 * phys.mu;
  for (int i = 0; i < s.networks(); ++i) {
    double fp = two_mu / phys.alpha[i];
    double fw = phys.alpha[i] / phys.tau;
    if (!to_physical) {
      fp = 1 / fp;
      fw = 1 / fw;
    }
    y.segment(s.offset_w(i), s.num_w_network()) *= fw;
    y.segment(s.offset_p(i), s.num_p_network()) *= fp;
    y.segment(s.offset_phat(i), s.num_phat_network()) *= fp;
  }
  return y;
}

}  // namespace

Vector unscale_state(const Vector& scaled, const SpaceSet& s, const PhysicalParameters& phys) {
  return rescale(scaled, s, phys, true);
}

Vector scale_state(const Vector& physical, const SpaceSet& s, const PhysicalParameters& phys) {
  return rescale(physical, s, phys, false);
}

BoundaryConditionSet scale_boundary_conditions(const BoundaryConditionSet& bcs,
                                               const PhysicalParameters& phys) {
  BoundaryConditionSet out = bcs;
  const double inv_two_mu = 1 / (2 * phys.mu);
  for (auto& [tag, d] : out.displacement) {
    if (d.kind != DisplacementBC::Kind::Traction || !d.traction) continue;
    auto t = d.traction;
    d.traction = [t, inv_two_mu](const Point& x, const Eigen::Vector2d& n, double time) {
      return Eigen::Vector2d(inv_two_mu * t(x, n, time));
    };
  }
  for (auto& [tag, list] : out.pressure) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      PressureBC& p = list[i];
      if (p.kind != PressureBC::Kind::Dirichlet || !p.value) continue;
      auto v = p.value;
      const double f = phys.alpha.at(i) * inv_two_mu;
      p.value = [v, f](const Point& x, double time) { return f * v(x, time); };
    }
  }
  return out;
}

// -- point evaluation --------------------------------------------------------

PointValues evaluate_point(const Vector& x, const SpaceSet& s, const Point& at) {
  const int e = s.mesh().locate(at);
  if (e < 0) throw Error("evaluation point outside the mesh");
  const AffineMap map = build_affine_map(s.mesh(), e);
  const std::vector<Eigen::Vector2d> ref{map.to_reference(at)};
  const BasisTable bu = eval_basis(Space::Displacement, s.order(), ref);
  const BasisTable bp = eval_basis(Space::Pressure, s.order(), ref);
  std::vector<int> idx;
  std::vector<double> sgn;
  s.u_dofs(e, idx, sgn);
  PointValues out;
  for (int j = 0; j < bu.num_basis; ++j)
    out.u += sgn[j] * x[idx[j]] * piola_map(map, bu.vector_value[bu.at(0, j)]);
  out.p.assign(s.networks(), 0.0);
  for (int i = 0; i < s.networks(); ++i)
    for (int r = 0; r < bp.num_basis; ++r) out.p[i] += x[s.p_dof(i, e, r)] * bp.scalar_value[bp.at(0, r)];
  return out;
}

double evaluate_pressure_trace(const Vector& x, const SpaceSet& s, int network, int facet, double t) {
  double v = 0;
  for (int k = 0; k < s.phat_per_facet(); ++k)
    v += x[s.phat_dof(network, facet, k)] * legendre(k, 2 * t - 1);
  return v;
}

// -- time series -------------------------------------------------------------

int TimeSeries::field_index(const std::string& name) const {
  const auto it = std::find(fields.begin(), fields.end(), name);
  if (it == fields.end()) throw Error("unknown field " + name);
  return static_cast<int>(it - fields.begin());
}

const std::vector<double>& TimeSeries::series(const std::string& field, int probe) const {
  if (probe < 0 || probe >= num_probes) throw Error("probe index out of range");
  return values[field_index(field)][probe];
}

double windowed_mean(const std::vector<double>& t, const std::vector<double>& v, double tk,
                     double half_width) {
  if (t.size() != v.size()) throw Error("windowed_mean: sizes differ");
  if (t.empty()) throw Error("windowed_mean: empty series");
  const double a = std::max(tk - half_width, t.front());
  const double b = std::min(tk + half_width, t.back());
  if (!(b > a)) throw Error("windowed_mean: empty window");
  auto value_at = [&](std::size_t k, double s) {
    const double r = (s - t[k]) / (t[k + 1] - t[k]);
    return (1 - r) * v[k] + r * v[k + 1];
  };
  double integral = 0;
  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    const double lo = std::max(a, t[k]), hi = std::min(b, t[k + 1]);
    if (hi <= lo) continue;
    integral += 0.5 * (hi - lo) * (value_at(k, lo) + value_at(k, hi));
  }
  return integral / (b - a);
}

double windowed_mean(const TimeSeries& series, const std::string& field, int probe, double t,
                     double half_width) {
  return windowed_mean(series.times, series.series(field, probe), t, half_width);
}

// -- stepper -----------------------------------------------------------------

TimeStepper::TimeStepper(const Scenario& sc)
    : scenario_(&sc), spaces_(sc.mesh, SpaceOrder(sc.order), sc.networks) {
  sc.validate();
  scaled_ = scale_parameters(sc.parameters);
  scaled_bcs_ = scale_boundary_conditions(sc.bcs, sc.parameters);
  full_ = assemble_system(spaces_, scaled_, sc.solver.eta);
  system_ = apply_boundary_conditions(full_, spaces_, scaled_, scaled_bcs_, 0.0);
  essential_ = essential_mask(spaces_, scaled_bcs_);
  coupling_ = assemble_divdiv_and_coupling(spaces_, scaled_).coupling;
  storage_ = assemble_pressure_mass(
      spaces_, Eigen::Map<const Eigen::VectorXd>(scaled_.alpha_p.data(), sc.networks).asDiagonal());
  solver_ = std::make_unique<SystemSolver>(system_, spaces_, scaled_, sc.solver, sc.tol, sc.maxit);
}

State TimeStepper::initial_state() const {
  const Scenario& sc = *scenario_;
  ExactSolution init = ExactSolution::zero(sc.networks);
  if (sc.u0) init.u = sc.u0;
  for (int i = 0; i < sc.networks && !sc.p0.empty(); ++i)
    if (sc.p0[i]) init.p[i] = sc.p0[i];
  // Interpolate the physical fields, then scale; fluxes vanish with zero gradients.
  State s;
  s.x = scale_state(interpolate(init, spaces_, scaled_), spaces_, sc.parameters);
  return s;
}

void TimeStepper::set_boundary_values(double t) {
  system_.dirichlet = essential_values(spaces_, scaled_bcs_, t);
  for (int i = 0; i < system_.full_size; ++i)
    if (!essential_[i]) system_.dirichlet[i] = 0.0;
}

Vector TimeStepper::full_rhs(const State& prev, double t) const {
  const Scenario& sc = *scenario_;
  Vector F = coupling_ * prev.x - storage_ * prev.x;
  const bool has_f = static_cast<bool>(sc.f);
  const bool has_g = std::any_of(sc.g.begin(), sc.g.end(), [](const auto& g) { return bool(g); });
  if (has_f || has_g) {
    SourceTerms src;
    const double inv_two_mu = 1 / (2 * sc.parameters.mu);
    if (has_f) {
      auto f = sc.f;
      src.f = [f, t, inv_two_mu](const Point& x) { return Eigen::Vector2d(inv_two_mu * f(x, t)); };
    }
    for (int i = 0; i < sc.networks; ++i) {
      if (i < static_cast<int>(sc.g.size()) && sc.g[i]) {
        auto g = sc.g[i];
        const double c = -sc.tau() / sc.parameters.alpha[i];
        src.g.push_back([g, t, c](const Point& x) { return c * g(x, t); });
      } else {
        src.g.push_back([](const Point&) { return 0.0; });
      }
    }
    F += assemble_load(spaces_, src);
  }
  F += natural_load(spaces_, scaled_bcs_, t);
  return F;
}

State TimeStepper::step(const State& prev, SolveReport& report) {
  if (prev.x.size() != spaces_.size()) throw Error("step: state has wrong size");
  State next;
  next.step = prev.step + 1;
  next.t = next.step * scenario_->tau();
  const Vector F = full_rhs(prev, next.t);
  set_boundary_values(next.t);
  const Vector rhs = reduce_rhs(full_.matrix, F, system_, spaces_);
  const Vector x = solver_->solve(rhs, report);
  if (!report.converged) {
    std::ostringstream msg;
    msg << "MinRes did not converge at t = " << next.t << " after " << report.iterations
        << " iterations (relative residual " << report.relative_residual() << ")";
    throw StepError(msg.str(), next.t, report);
  }
  next.x = system_.expand(x);
  return next;
}

std::vector<std::string> TimeStepper::field_names() const {
  std::vector<std::string> names{"u_abs"};
  for (int i = 0; i < scenario_->networks; ++i) names.push_back("p" + std::to_string(i + 1));
  return names;
}

std::vector<double> TimeStepper::sample(const State& state, int probe) const {
  const Scenario& sc = *scenario_;
  const PointValues v = evaluate_point(state.x, spaces_, sc.probes.at(probe));
  std::vector<double> out{v.u.norm()};
  for (int i = 0; i < sc.networks; ++i)
    out.push_back(v.p[i] * 2 * sc.parameters.mu / sc.parameters.alpha[i] / sc.pressure_unit);
  return out;
}

State TimeStepper::solve_stationary(double t) const {
  State prev;
  prev.x = Vector::Zero(spaces_.size());
  // With x^{k-1} = x^k the coupling and storage terms of the load move to the matrix.
  const SparseMatrix K = full_.matrix - coupling_ + storage_;
  const Vector F = full_rhs(prev, t);
  Vector xd = essential_values(spaces_, scaled_bcs_, t);
  for (int i = 0; i < xd.size(); ++i)
    if (!essential_[i]) xd[i] = 0.0;
  const std::vector<int>& free = system_.free_dofs;
  const Vector r = F - K * xd;
  Vector rf(free.size());
  for (std::size_t i = 0; i < free.size(); ++i) rf[i] = r[free[i]];
  SparseMatrix Kf = restrict_matrix(K, free, free);
  Kf.makeCompressed();
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(Kf);
  if (lu.info() != Eigen::Success) throw SolverError("stationary system is singular");
  const Vector y = lu.solve(rf);
  State s;
  s.t = t;
  s.x = xd;
  for (std::size_t i = 0; i < free.size(); ++i) s.x[free[i]] = y[i];
  return s;
}

// -- run ---------------------------------------------------------------------

TimeSeries run(const Scenario& sc, const State* start, const std::function<void(const State&)>& on_step) {
  TimeStepper stepper(sc);
  State state = start ? *start : stepper.initial_state();
  TimeSeries ts;
  ts.fields = stepper.field_names();
  ts.num_probes = static_cast<int>(sc.probes.size());
  ts.values.assign(ts.fields.size(), std::vector<std::vector<double>>(ts.num_probes));
  auto record = [&](const State& s) {
    ts.times.push_back(s.t);
    for (int j = 0; j < ts.num_probes; ++j) {
      const std::vector<double> v = stepper.sample(s, j);
      for (std::size_t f = 0; f < v.size(); ++f) ts.values[f][j].push_back(v[f]);
    }
  };
  record(state);
  const int steps = sc.num_steps();
  while (state.step < steps) {
    SolveReport report;
    state = stepper.step(state, report);
    ts.steps.push_back({state.t, report.iterations, report.relative_residual()});
    if (state.step % sc.output_every == 0 || state.step == steps) record(state);
    if (on_step) on_step(state);
  }
  return ts;
}

// -- persistence -------------------------------------------------------------

void dump_state(std::ostream& os, const State& s) {
  os << "mpet-state 1\n" << std::hexfloat;
  os << "t " << s.t << "\nstep " << s.step << "\nsize " << s.x.size() << "\n";
  for (int i = 0; i < s.x.size(); ++i) os << s.x[i] << "\n";
  os << std::defaultfloat;
}

State restore_state(std::istream& is) {
  auto number = [&]() {
    std::string tok;
    if (!(is >> tok)) throw ConfigError("truncated state dump");
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') throw ConfigError("malformed number in state dump");
    return v;
  };
  auto expect = [&](const std::string& key) {
    std::string tok;
    if (!(is >> tok) || tok != key) throw ConfigError("state dump: expected " + key);
  };
  expect("mpet-state");
  if (number() != 1) throw ConfigError("unsupported state dump version");
  State s;
  expect("t");
  s.t = number();
  expect("step");
  s.step = static_cast<int>(number());
  expect("size");
  const int n = static_cast<int>(number());
  if (n < 0) throw ConfigError("state dump: negative size");
  s.x.resize(n);
  for (int i = 0; i < n; ++i) s.x[i] = number();
  return s;
}

// -- csv ---------------------------------------------------------------------

void write_series_csv(std::ostream& os, const TimeSeries& ts) {
  os << "t,field,probe,value\n" << std::setprecision(17);
  for (std::size_t k = 0; k < ts.times.size(); ++k)
    for (std::size_t f = 0; f < ts.fields.size(); ++f)
      for (int j = 0; j < ts.num_probes; ++j)
        os << ts.times[k] << ',' << ts.fields[f] << ',' << j + 1 << ',' << ts.values[f][j][k] << '\n';
}

void write_step_log_csv(std::ostream& os, const TimeSeries& ts) {
  os << "t,iterations,residual\n" << std::setprecision(17);
  for (const auto& s : ts.steps) os << s.t << ',' << s.iterations << ',' << s.residual << '\n';
}

void write_windowed_csv(std::ostream& os, const TimeSeries& ts, double half_width) {
  os << "t,field,probe,value\n" << std::setprecision(17);
  for (std::size_t k = 0; k < ts.times.size(); ++k)
    for (std::size_t f = 0; f < ts.fields.size(); ++f)
      for (int j = 0; j < ts.num_probes; ++j)
        os << ts.times[k] << ',' << ts.fields[f] << ',' << j + 1 << ','
           << windowed_mean(ts.times, ts.values[f][j], ts.times[k], half_width) << '\n';
}

// -- brain analog ------------------------------------------------------------

Scenario brain_scenario(const BrainOptions& o) {
  if (!(o.r_outer > o.r_inner && o.r_inner > 0)) throw ConfigError("invalid annulus radii");
  if (!(o.probe_fraction > 0 && o.probe_fraction < 1)) throw ConfigError("invalid probe fraction");
  Scenario sc;
  sc.mesh = generate_annulus(o.r_inner, o.r_outer, o.n_radial, o.n_angular);
  sc.order = o.order;
  sc.networks = 4;
  sc.T = o.T;

  PhysicalParameters& ph = sc.parameters;
  ph.n = 4;
  std::tie(ph.mu, ph.lambda) = PhysicalParameters::lame_from_young(1500.0, 0.4999);
  ph.s = {3.9e-4, 2.9e-4, 1.5e-5, 2.9e-4};
  ph.alpha = {0.49, 0.25, 0.01, 0.25};
  ph.K = {1.57e-5, 3.75e-2, 3.75e-2, 3.75e-2};
  ph.xi = Eigen::MatrixXd::Zero(4, 4);
  auto set_xi = [&](int i, int j, double v) { ph.xi(i, j) = ph.xi(j, i) = v; };
  set_xi(0, 2, 1e-6);
  set_xi(0, 3, 1e-6);
  set_xi(1, 3, 1e-6);
  set_xi(2, 3, 1e-6);
  ph.tau = o.tau;

  constexpr double two_pi = 2 * 3.14159265358979323846;
  auto mmhg = [](std::function<double(double)> f) {
    return [f](const Point&, double t) { return kPascalPerMmHg * f(t); };
  };
  auto p1s = [=](double t) { return 5 + 2 * std::sin(two_pi * t); };
  auto p1v = [=](double t) { return 5 + 2.012 * std::sin(two_pi * t); };
  auto p2 = [=](double t) { return 70 + 10 * std::sin(two_pi * t); };
  auto p3 = [](double) { return 6.0; };
  auto p4v = [](double) { return 38.0; };

  sc.bcs.displacement["skull"] = DisplacementBC::fixed();
  sc.bcs.pressure["skull"] = {PressureBC::dirichlet(mmhg(p1s)), PressureBC::dirichlet(mmhg(p2)),
                              PressureBC::dirichlet(mmhg(p3)), PressureBC::zero_flux()};
  const std::vector<double> alpha = ph.alpha;
  sc.bcs.displacement["ventricle"] = DisplacementBC::load(
      [=](const Point&, const Eigen::Vector2d& n, double t) {
        const double pv = alpha[0] * p1v(t) + alpha[1] * p2(t) + alpha[2] * p3(t) + alpha[3] * p4v(t);
        return Eigen::Vector2d(-kPascalPerMmHg * pv * n);
      });
  sc.bcs.pressure["ventricle"] = {PressureBC::dirichlet(mmhg(p1v)), PressureBC::zero_flux(),
                                  PressureBC::dirichlet(mmhg(p3)), PressureBC::zero_flux()};

  const double init[4] = {5, 70, 6, 38};
  for (double v : init) {
    const double pa = kPascalPerMmHg * v;
    sc.p0.push_back([pa](const Point&) { return pa; });
  }
  sc.pressure_unit = kPascalPerMmHg;
  const double r = o.r_inner + o.probe_fraction * (o.r_outer - o.r_inner);
  for (int k = 0; k < 3; ++k) {
    const double a = two_pi * k / 3;
    sc.probes.push_back(Point(r * std::cos(a), r * std::sin(a)));
  }
  return sc;
}

}  // namespace mpet
