#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bozd/bo_solver.hpp"
#include "bozd/experiment.hpp"
#include "bozd/families.hpp"
#include "bozd/identity_lab.hpp"
#include "bozd/operator_resolvent.hpp"
#include "bozd/zd_limit.hpp"

namespace py = pybind11;
using namespace bozd;

namespace {

FormulaNumerics numerics(std::optional<double> xi_max, int m, int order) {
  FormulaNumerics n;
  if (xi_max) n.xi_max = *xi_max;
  n.m = m;
  n.order = order;
  return n;
}

}  // namespace

PYBIND11_MODULE(_bozd, m) {
  m.doc() = "Benjamin-Ono explicit formula and zero-dispersion toolkit";

  static py::handle validation = py::exception<ValidationError>(m, "ValidationError", PyExc_ValueError).release();
  static py::handle refusal = py::exception<RegimeRefusal>(m, "RegimeRefusal", PyExc_RuntimeError).release();
  static py::handle numerical = py::exception<NumericalFailure>(m, "NumericalFailure", PyExc_ArithmeticError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ValidationError& e) {
      py::set_error(validation, e.what());
    } catch (const RegimeRefusal& e) {
      py::set_error(refusal, e.what());
    } catch (const NumericalFailure& e) {
      py::set_error(numerical, e.what());
    }
  });

  py::enum_<GrowthClass>(m, "GrowthClass")
      .value("Bounded", GrowthClass::Bounded)
      .value("Sublinear", GrowthClass::Sublinear)
      .value("Linear", GrowthClass::Linear);

  py::class_<RealLineFunction>(m, "RealLineFunction")
      .def("__call__", &RealLineFunction::operator(), py::arg("x"))
      .def("__call__",
           [](const RealLineFunction& f, py::array_t<double, py::array::c_style | py::array::forcecast> x) {
             auto out = py::array_t<double>(x.request().shape);
             auto in = x.unchecked();
             auto* o = out.mutable_data();
             const double* p = in.data(0);
             for (py::ssize_t k = 0; k < x.size(); ++k) o[k] = f(p[k]);
             return out;
           })
      .def("fourier", [](const RealLineFunction& f, double xi) { return f.line().fourier(xi); })
      .def_property_readonly("description", [](const RealLineFunction& f) { return f.traits().description; })
      .def_property_readonly("growth", &RealLineFunction::growth)
      .def_property_readonly("c1_with_decay", [](const RealLineFunction& f) { return f.traits().c1_with_decay; })
      .def("growth_constant", &RealLineFunction::growth_constant, py::arg("window") = 1000.0);

  m.def("gaussian", &families::gaussian, py::arg("a") = 1.0, py::arg("sigma") = 1.0,
        py::arg("center") = 0.0);
  m.def("lorentzian", &families::lorentzian, py::arg("a") = 1.0);
  m.def("sech2", &families::sech2, py::arg("a") = 1.0, py::arg("w") = 1.0);
  m.def("spike_train", &families::spike_train, py::arg("base") = 1.0, py::arg("decay") = 1.0,
        py::arg("exponent") = 0.5, py::arg("count") = 3);
  m.def("zero", &families::zero);

  py::class_<FormulaValue>(m, "FormulaValue")
      .def_readonly("z", &FormulaValue::z)
      .def_readonly("value", &FormulaValue::value)
      .def_readonly("residual", &FormulaValue::residual)
      .def_readonly("rcond", &FormulaValue::rcond)
      .def_readonly("method", &FormulaValue::method);

  m.def("suggest_xi_max", &suggest_xi_max, py::arg("u0"), py::arg("rel") = 1e-12);
  m.def(
      "pi_u_explicit",
      [](const RealLineFunction& u0, double t, cplx z, std::optional<double> xi_max, int mm, int order) {
        return pi_u_explicit(u0, t, UpperHalfPoint(z), numerics(xi_max, mm, order));
      },
      py::arg("u0"), py::arg("t"), py::arg("z"), py::arg("xi_max") = py::none(), py::arg("m") = 2048,
      py::arg("order") = 6, py::call_guard<py::gil_scoped_release>());
  m.def(
      "zd_operator",
      [](const RealLineFunction& u0, double t, cplx z, std::optional<double> xi_max, int mm, int order) {
        return zd_operator(u0, t, UpperHalfPoint(z), numerics(xi_max, mm, order));
      },
      py::arg("u0"), py::arg("t"), py::arg("z"), py::arg("xi_max") = py::none(), py::arg("m") = 2048,
      py::arg("order") = 6, py::call_guard<py::gil_scoped_release>());
  m.def(
      "zd_log_integral",
      [](const RealLineFunction& u0, double t, cplx z) {
        return zd_log_integral(u0, t, UpperHalfPoint(z)).value;
      },
      py::arg("u0"), py::arg("t"), py::arg("z"), py::call_guard<py::gil_scoped_release>());
  m.def(
      "cauchy_extension",
      [](const RealLineFunction& u0, cplx z) { return cauchy_extension(u0, UpperHalfPoint(z)); },
      py::arg("u0"), py::arg("z"));

  py::class_<CriticalSet>(m, "CriticalSet")
      .def_readonly("t", &CriticalSet::t)
      .def_readonly("fold_points", &CriticalSet::fold_points)
      .def_readonly("values", &CriticalSet::values)
      .def_readonly("crit_tol", &CriticalSet::crit_tol)
      .def("contains", &CriticalSet::contains);
  m.def("critical_values", [](const RealLineFunction& u0, double t) { return critical_values(u0, t); },
        py::arg("u0"), py::arg("t"));
  m.def("first_critical_time", &first_critical_time, py::arg("u0"));
  m.def(
      "branch_roots",
      [](const RealLineFunction& u0, double t, double x) { return branch_roots(u0, t, x).roots; },
      py::arg("u0"), py::arg("t"), py::arg("x"));
  m.def("branch_zd", [](const RealLineFunction& u0, double t, double x) { return branch_zd(u0, t, x); },
        py::arg("u0"), py::arg("t"), py::arg("x"));
  m.def(
      "zd_real_line",
      [](const RealLineFunction& u0, double t, double x) {
        const auto v = zd_real_line(u0, t, x);
        return py::make_tuple(v.value, v.estimated_error, v.warning);
      },
      py::arg("u0"), py::arg("t"), py::arg("x"));

  m.def(
      "solve",
      [](const RealLineFunction& u0, double t, double eps, double L, int n_modes, double dt) {
        SolveReport rep;
        {
          py::gil_scoped_release release;
          StepperConfig cfg;
          cfg.dt = dt;
          rep = solve_to(u0, t, eps, Box{L, n_modes}, cfg);
        }
        const auto& s = rep.state;
        py::array_t<double> x(s.box.n_modes), u(s.box.n_modes);
        for (int j = 0; j < s.box.n_modes; ++j) {
          x.mutable_at(j) = s.box.x(j);
          u.mutable_at(j) = s.u[j];
        }
        py::dict info;
        info["steps"] = rep.steps;
        info["relative_drift"] = rep.relative_drift;
        info["edge_max"] = rep.edge_max;
        return py::make_tuple(x, u, info);
      },
      py::arg("u0"), py::arg("t"), py::arg("eps"), py::arg("L") = 40.0, py::arg("n_modes") = 4096,
      py::arg("dt") = 1e-3);

  auto id = m.def_submodule("identity", "integral identity checks");
  py::class_<identity::IdentityRecord>(id, "IdentityRecord")
      .def_readonly("case", &identity::IdentityRecord::case_name)
      .def_readonly("check", &identity::IdentityRecord::check)
      .def_readonly("n", &identity::IdentityRecord::n)
      .def_readonly("j", &identity::IdentityRecord::j)
      .def_readonly("lhs", &identity::IdentityRecord::lhs)
      .def_readonly("rhs", &identity::IdentityRecord::rhs)
      .def_readonly("rel_err", &identity::IdentityRecord::rel_err)
      .def_readonly("method", &identity::IdentityRecord::method)
      .def_property_readonly("status",
                             [](const identity::IdentityRecord& r) { return identity::to_string(r.status); });
  py::class_<identity::TestFunction>(id, "TestFunction")
      .def_property_readonly("name", &identity::TestFunction::name)
      .def_property_readonly("tags", [](const identity::TestFunction& f) { return f.tags().str(); });
  id.def("standard_functions", &identity::standard_functions);
  id.def(
      "lemma17_check",
      [](const identity::TestFunction& f, int n) { return identity::lemma17_check(f, n); },
      py::arg("f"), py::arg("n"));
  id.def(
      "region_check",
      [](const identity::TestFunction& f, int n, int j) { return identity::region_check(f, n, j); },
      py::arg("f"), py::arg("n"), py::arg("j"));
  id.def(
      "toeplitz_moment_check",
      [](const identity::TestFunction& f, int n) { return identity::toeplitz_moment_check(f, n); },
      py::arg("f"), py::arg("n"));

  m.def(
      "run_config",
      [](const std::string& text, const std::string& command, const std::string& out_dir) -> py::tuple {
        auto loaded = cli::parse_config(text, command);
        if (!loaded.ok()) {
          std::string msg;
          for (const auto& d : loaded.diagnostics) msg += d.str() + "\n";
          return py::make_tuple(2, msg, py::list());
        }
        auto cfg = *loaded.config;
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        cli::RunResult res;
        {
          py::gil_scoped_release release;
          res = cli::run(cfg);
        }
        std::vector<std::string> files;
        for (const auto& a : res.artifacts) files.push_back(a.string());
        return py::make_tuple(res.exit_code, res.message, files);
      },
      py::arg("config_json"), py::arg("command") = "", py::arg("out_dir") = "",
      "Run a bo-zdl experiment; returns (exit_code, message, artifacts).");
}
