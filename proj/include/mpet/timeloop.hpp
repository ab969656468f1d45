#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mpet/error.hpp"
#include "mpet/solver.hpp"

namespace mpet {

/// Pascal per millimetre of mercury.
constexpr double kPascalPerMmHg = 133.322;

/// Time step problem in physical units.
///
/// Boundary values, sources and initial fields are physical (pressures in the
/// unit of the parameters); the loop scales them for every solve.
struct Scenario {
  Mesh mesh;
  int order = 1;
  int networks = 1;
  PhysicalParameters parameters;  // parameters.tau is the time step
  BoundaryConditionSet bcs;
  /// Body force and fluid sources; empty functions mean zero.
  std::function<Eigen::Vector2d(const Point&, double)> f;
  std::vector<std::function<double(const Point&, double)>> g;
  /// Initial fields; empty functions mean zero.
  std::function<Eigen::Vector2d(const Point&)> u0;
  std::vector<std::function<double(const Point&)>> p0;
  double T = 1.0;
  std::vector<Point> probes;
  /// Probe pressures are reported divided by this factor.
  double pressure_unit = 1.0;
  int output_every = 1;          // sample probes every this many steps
  PreconditionerConfig solver;
  double tol = 1e-8;
  int maxit = 500;

  double tau() const { return parameters.tau; }
  int num_steps() const;
  void validate() const;
};

/// Scaled discrete state at time t in the unconstrained numbering.
struct State {
  double t = 0.0;
  int step = 0;
  Vector x;
};

/// Scaled <-> physical conversion of state vectors:
/// p_i = 2 mu p~_i / alpha_i, w_i = alpha_i w~_i / tau, displacements unchanged.
Vector unscale_state(const Vector& scaled, const SpaceSet& spaces, const PhysicalParameters& phys);
Vector scale_state(const Vector& physical, const SpaceSet& spaces, const PhysicalParameters& phys);

/// Boundary conditions of the scaled system: pressures times alpha_i / (2 mu),
/// tractions divided by 2 mu.
BoundaryConditionSet scale_boundary_conditions(const BoundaryConditionSet& bcs,
                                               const PhysicalParameters& phys);

/// Displacement and pressures of a state vector at a point; throws if the
/// point lies outside the mesh.
struct PointValues {
  Eigen::Vector2d u = Eigen::Vector2d::Zero();
  std::vector<double> p;
};
PointValues evaluate_point(const Vector& x, const SpaceSet& spaces, const Point& at);

/// Pressure trace of one network at parameter s in [0,1] on a facet.
double evaluate_pressure_trace(const Vector& x, const SpaceSet& spaces, int network, int facet,
                               double s);

/// Probe samples and per-step solver summaries.
struct TimeSeries {
  struct StepLog {
    double t;
    int iterations;
    double residual;
  };
  std::vector<std::string> fields;  // "u_abs", "p1", ...
  int num_probes = 0;
  std::vector<double> times;
  /// values[f][probe][k] at times[k].
  std::vector<std::vector<std::vector<double>>> values;
  std::vector<StepLog> steps;

  int field_index(const std::string& name) const;
  const std::vector<double>& series(const std::string& field, int probe) const;
};

/// Mean of the piecewise linear interpolant of (times, values) over
/// [t - half_width, t + half_width] cut to the recorded range, divided by the
/// length of the cut window.
double windowed_mean(const std::vector<double>& times, const std::vector<double>& values, double t,
                     double half_width = 0.5);
double windowed_mean(const TimeSeries& series, const std::string& field, int probe, double t,
                     double half_width = 0.5);

/// SolverError raised by a failed step.
class StepError : public SolverError {
 public:
  StepError(const std::string& what, double t, SolveReport report)
      : SolverError(what), t(t), report(std::move(report)) {}
  double t;
  SolveReport report;
};

/// Implicit Euler stepper.
///
/// Step k solves the scaled system with the fluid source
///   g~_i^k = -(tau / alpha_i) g_i(t_k) - div u^{k-1} - alpha_p_i p~_i^{k-1}
/// and the boundary data at t_k. The matrix and preconditioner are built once.
class TimeStepper {
 public:
  explicit TimeStepper(const Scenario& scenario);
  TimeStepper(const TimeStepper&) = delete;
  TimeStepper& operator=(const TimeStepper&) = delete;

  const SpaceSet& spaces() const { return spaces_; }
  const ScaledParameters& scaled() const { return scaled_; }
  const Scenario& scenario() const { return *scenario_; }

  /// Projection of the initial fields.
  State initial_state() const;
  /// One step from `previous` to previous.t + tau.
  State step(const State& previous, SolveReport& report);

  /// Probe values of a state: |u| and pressures in probe units.
  std::vector<double> sample(const State& state, int probe) const;
  std::vector<std::string> field_names() const;

  /// Fixed point of the step for data frozen at time t: the time-discrete
  /// system without the storage and div u^{k-1} coupling, by sparse LU.
  State solve_stationary(double t) const;

 private:
  const Scenario* scenario_;
  SpaceSet spaces_;
  ScaledParameters scaled_;
  BoundaryConditionSet scaled_bcs_;
  BlockSystem full_;
  BlockSystem system_;
  std::vector<bool> essential_;
  SparseMatrix coupling_;      // -(div u, q_i): pressure rows x all columns
  SparseMatrix storage_;       // (alpha_p p, q)
  std::unique_ptr<SystemSolver> solver_;

  Vector full_rhs(const State& previous, double t) const;
  void set_boundary_values(double t);
};

/// Runs from the initial state (or `start`) to scenario.T, sampling probes.
/// `on_step` is called after each accepted step.
TimeSeries run(const Scenario& scenario, const State* start = nullptr,
               const std::function<void(const State&)>& on_step = {});

/// Bit-exact text dump of a state (hexadecimal floats).
void dump_state(std::ostream& os, const State& state);
State restore_state(std::istream& is);

/// Probe series as rows `t,field,probe,value`, and per-step `t,iterations,residual`.
void write_series_csv(std::ostream& os, const TimeSeries& series);
void write_step_log_csv(std::ostream& os, const TimeSeries& series);
/// Windowed means at every sample time: `t,field,probe,value`.
void write_windowed_csv(std::ostream& os, const TimeSeries& series, double half_width = 0.5);

/// Settings of the brain-analog annulus.
struct BrainOptions {
  double r_inner = 30.0, r_outer = 70.0;
  int n_radial = 4, n_angular = 32;
  int order = 1;
  double tau = 0.0125;
  double T = 3.0;
  double probe_fraction = 0.1;  // probe radius r_inner + fraction (r_outer - r_inner)
};

/// Four-network brain analog: E = 1500 Pa, nu = 0.4999, lengths in mm,
/// pressures in Pa with probe output in mmHg. "skull" is the outer circle and
/// "ventricle" the inner one.
Scenario brain_scenario(const BrainOptions& options = {});

}  // namespace mpet
