#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mpet/config.hpp"
#include "mpet/experiments.hpp"

namespace py = pybind11;
using namespace mpet;

namespace {

Eigen::MatrixXd vertex_array(const Mesh& m) {
  Eigen::MatrixXd v(m.num_vertices(), 2);
  for (int i = 0; i < m.num_vertices(); ++i) v.row(i) = m.vertices()[i].transpose();
  return v;
}

Eigen::MatrixXi element_array(const Mesh& m) {
  Eigen::MatrixXi e(m.num_elements(), 3);
  for (int i = 0; i < m.num_elements(); ++i)
    for (int k = 0; k < 3; ++k) e(i, k) = m.elements()[i][k];
  return e;
}

py::dict series_dict(const TimeSeries& ts) {
  py::dict out;
  out["times"] = ts.times;
  py::dict fields;
  for (std::size_t f = 0; f < ts.fields.size(); ++f) fields[py::str(ts.fields[f])] = ts.values[f];
  out["values"] = fields;
  std::vector<int> its;
  for (const auto& s : ts.steps) its.push_back(s.iterations);
  out["iterations"] = its;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Parameter-robust HDG / hybrid-mixed MPET solver";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);

  py::class_<Mesh>(m, "Mesh")
      .def_property_readonly("num_vertices", &Mesh::num_vertices)
      .def_property_readonly("num_elements", &Mesh::num_elements)
      .def_property_readonly("num_facets", &Mesh::num_facets)
      .def_property_readonly("total_area", &Mesh::total_area)
      .def_property_readonly("vertices", &vertex_array)
      .def_property_readonly("elements", &element_array)
      .def("locate", [](const Mesh& self, double x, double y) { return self.locate(Point(x, y)); });
  m.def("unit_square", &generate_unit_square, py::arg("n"));
  m.def("annulus", &generate_annulus, py::arg("r_inner"), py::arg("r_outer"), py::arg("n_radial"),
        py::arg("n_angular"));

  py::enum_<PreconditionerVariant>(m, "Variant")
      .value("FULL", PreconditionerVariant::FullBlock)
      .value("SCHUR", PreconditionerVariant::SchurReduced);
  py::enum_<SweepMode>(m, "SweepMode")
      .value("EQUAL", SweepMode::Equal)
      .value("MIXED", SweepMode::Mixed)
      .value("R_ONLY", SweepMode::ROnly);
  py::enum_<InfSupKind>(m, "InfSupKind")
      .value("STOKES", InfSupKind::StokesLike)
      .value("DARCY", InfSupKind::DarcyLike);

  py::class_<ErrorReport>(m, "ErrorReport")
      .def_readonly("u_energy", &ErrorReport::u_energy)
      .def_readonly("u_l2", &ErrorReport::u_l2)
      .def_readonly("p_l2", &ErrorReport::p_l2)
      .def_readonly("w_l2", &ErrorReport::w_l2);

  py::class_<CaseResult>(m, "CaseResult")
      .def_readonly("iterations", &CaseResult::iterations)
      .def_readonly("converged", &CaseResult::converged)
      .def_readonly("residual", &CaseResult::residual)
      .def_readonly("conservation", &CaseResult::conservation)
      .def_readonly("unknowns", &CaseResult::unknowns)
      .def_readonly("elements", &CaseResult::elements)
      .def_readonly("errors", &CaseResult::errors);

  m.def(
      "solve",
      [](int n, int order, double lambda, std::vector<double> R, std::vector<double> alpha_p, double xi,
         PreconditionerVariant variant, double tol, int maxit, bool errors) {
        SolveCase c;
        c.n = n;
        c.order = order;
        c.lambda = lambda;
        c.R = std::move(R);
        c.alpha_p = std::move(alpha_p);
        c.xi = xi;
        c.solver.variant = variant;
        c.tol = tol;
        c.maxit = maxit;
        py::gil_scoped_release release;
        return solve_case(c, errors);
      },
      "Manufactured two-network solve on the unit square with scaled parameters.", py::arg("n") = 4,
      py::arg("order") = 1, py::arg("lam") = 1.0, py::arg("R") = std::vector<double>{1.0, 1.0},
      py::arg("alpha_p") = std::vector<double>{1.0, 1.0}, py::arg("xi") = 0.0,
      py::arg("variant") = PreconditionerVariant::SchurReduced, py::arg("tol") = 1e-8, py::arg("maxit") = 500,
      py::arg("errors") = false);

  m.def(
      "sweep",
      [](SweepMode mode, int n, std::vector<int> orders, std::vector<int> i, std::vector<int> lambda_exponents,
         std::vector<PreconditionerVariant> variants, int threads) {
        SweepConfig c;
        c.mode = mode;
        c.n = n;
        c.orders = std::move(orders);
        c.exponents = std::move(i);
        c.lambda_exponents = std::move(lambda_exponents);
        c.variants = std::move(variants);
        std::vector<SweepRow> rows;
        {
          py::gil_scoped_release release;
          rows = run_sweep(c, threads > 0 ? threads : worker_threads());
        }
        py::list out;
        for (const auto& r : rows) {
          py::dict d;
          d["order"] = r.order;
          d["variant"] = to_string(r.variant);
          d["i"] = r.i;
          d["lambda_exponent"] = r.j;
          d["iterations"] = r.iterations;
          d["converged"] = r.converged;
          d["conservation"] = r.conservation;
          out.append(d);
        }
        return out;
      },
      py::arg("mode") = SweepMode::Equal, py::arg("n") = 8, py::arg("orders") = std::vector<int>{1, 2},
      py::arg("i") = std::vector<int>{0, 2, 4, 6, 8}, py::arg("lambda_exponents") = std::vector<int>{0, 4, 8},
      py::arg("variants") = std::vector<PreconditionerVariant>{PreconditionerVariant::SchurReduced},
      py::arg("threads") = 0);

  m.def(
      "inf_sup",
      [](int n, int order, InfSupKind kind) {
        const Mesh mesh = generate_unit_square(n);
        return estimate_inf_sup(SpaceSet(mesh, SpaceOrder(order), 1), kind);
      },
      py::arg("n"), py::arg("order"), py::arg("kind") = InfSupKind::StokesLike);

  m.def(
      "brain",
      [](int n_radial, int n_angular, double tau, double T) {
        BrainOptions o;
        o.n_radial = n_radial;
        o.n_angular = n_angular;
        o.tau = tau;
        o.T = T;
        const Scenario sc = brain_scenario(o);
        TimeSeries ts;
        {
          py::gil_scoped_release release;
          ts = run(sc);
        }
        return series_dict(ts);
      },
      "Four-network annulus run; probe pressures in mmHg.", py::arg("n_radial") = 4, py::arg("n_angular") = 32,
      py::arg("tau") = 0.0125, py::arg("T") = 3.0);

  m.def(
      "windowed_mean",
      [](const std::vector<double>& t, const std::vector<double>& v, double at, double half_width) {
        return windowed_mean(t, v, at, half_width);
      },
      py::arg("times"), py::arg("values"), py::arg("t"), py::arg("half_width") = 0.5);

  m.def(
      "resolve_config",
      [](const std::string& command, const std::string& path) { return load_config(command, path).resolved(); },
      py::arg("command"), py::arg("path"));
}
