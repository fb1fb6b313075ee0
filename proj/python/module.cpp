#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "robayes/huber.hpp"
#include "robayes/mallows.hpp"
#include "robayes/npmle.hpp"
#include "robayes/risk.hpp"
#include "robayes/simulate.hpp"

namespace py = pybind11;
using namespace robayes;

namespace {

Grid to_grid(const std::vector<double>& v) { return Grid(v); }

// Elementwise over an array-like, or a plain float for a scalar.
template <class F>
py::object map_array(const py::object& x, F&& f) {
  if (py::isinstance<py::float_>(x) || py::isinstance<py::int_>(x)) return py::float_(f(x.cast<double>()));
  auto in = py::array_t<double, py::array::c_style | py::array::forcecast>::ensure(x);
  if (!in) throw Error(Errc::invalid_argument, "expected a number or an array of numbers");
  py::array_t<double> out(std::vector<py::ssize_t>(in.shape(), in.shape() + in.ndim()));
  const double* a = in.data();
  double* b = out.mutable_data();
  for (py::ssize_t i = 0; i < in.size(); ++i) b[i] = f(a[i]);
  return std::move(out);
}

SolverConfig solver(const std::string& algorithm, double tol, std::size_t max_iterations) {
  SolverConfig c;
  c.algorithm = parse_algorithm(algorithm);
  c.tol = tol;
  c.max_iterations = max_iterations;
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Robust empirical Bayes estimation in the Gaussian sequence model";

  static py::exception<Error> exc(m, "RobayesError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(exc, (std::string(errc_name(e.code())) + ": " + e.what()).c_str());
    }
  });

  py::class_<DiscreteDistribution>(m, "DiscreteDistribution")
      .def(py::init<std::vector<double>, std::vector<double>>(), py::arg("support"), py::arg("weights"))
      .def_static("dirac", &DiscreteDistribution::dirac, py::arg("c") = 0.0)
      .def_static("two_point", &DiscreteDistribution::two_point, py::arg("a"))
      .def_static("gaussian_grid", &DiscreteDistribution::gaussian_grid, py::arg("variance"), py::arg("mean") = 0.0,
                  py::arg("n") = 2001, py::arg("span_sd") = 8.0)
      .def_static("uniform_grid", &DiscreteDistribution::uniform_grid, py::arg("lo"), py::arg("hi"), py::arg("n") = 2001)
      .def_static("parse", [](const std::string& s) { return PriorSpec::parse(s).gridded(); })
      .def_property_readonly("support", &DiscreteDistribution::support)
      .def_property_readonly("weights", &DiscreteDistribution::weights)
      .def("mean", &DiscreteDistribution::mean)
      .def("variance", &DiscreteDistribution::variance)
      .def("__len__", &DiscreteDistribution::size)
      .def("__repr__", [](const DiscreteDistribution& d) {
        return "<DiscreteDistribution with " + std::to_string(d.size()) + " atoms>";
      });

  py::class_<DecisionRule>(m, "Rule")
      .def("__call__", [](const DecisionRule& r, const py::object& x) { return map_array(x, [&](double v) { return r(v); }); })
      .def("score",
           [](const DecisionRule& r, const py::object& x) { return map_array(x, [&](double v) { return r.score(v); }); })
      .def_readonly("label", &DecisionRule::label)
      .def("__repr__", [](const DecisionRule& r) { return "<Rule " + r.label + ">"; });

  m.def("identity_rule", &identity_rule);
  m.def(
      "bayes_rule",
      [](const DiscreteDistribution& G) { return tweedie_rule(MixtureDensity(NoiseKernel::gaussian(), G)); },
      py::arg("prior"));
  m.def(
      "tanh_rule",
      [] {
        return DecisionRule{[](double x) { return std::tanh(x) - x; },
                            [](double x) { return -std::tanh(x) * std::tanh(x); }, "tanh"};
      });

  m.def("default_f_grid", [] { return default_f_grid().values(); });
  m.def("default_theta_grid", [] { return default_theta_grid().values(); });
  m.def(
      "fisher_information_grid",
      [](const std::vector<double>& values, const std::vector<double>& grid) {
        return fisher_information_grid(values, to_grid(grid));
      },
      py::arg("values"), py::arg("grid"));
  m.def(
      "marginal_density",
      [](const DiscreteDistribution& G, const std::vector<double>& x) {
        return MixtureDensity(NoiseKernel::gaussian(), G).tabulate(to_grid(x));
      },
      py::arg("prior"), py::arg("x"));

  // Huber
  m.def("huber_k", py::overload_cast<double>(&huber_k), py::arg("eps"));
  m.def(
      "huber_rule", [](const std::string& prior, double eps) { return fit_huber(PriorSpec::parse(prior), eps).rule; },
      py::arg("prior"), py::arg("eps"));
  m.def(
      "huber_bound",
      [](const std::string& prior, double eps) {
        const HuberFit f = fit_huber(PriorSpec::parse(prior), eps);
        const double k = f.closed ? huber_k(*f.closed) : f.general->max_abs_score;
        return 1.0 + k * k;
      },
      py::arg("prior"), py::arg("eps"));

  // Mallows
  py::class_<MallowsSolution>(m, "MallowsSolution")
      .def_readonly("eps", &MallowsSolution::eps)
      .def_readonly("objective", &MallowsSolution::objective)
      .def_readonly("f_values", &MallowsSolution::f_values)
      .def_readonly("contamination", &MallowsSolution::contamination)
      .def_readonly("least_favorable_prior", &MallowsSolution::least_favorable_prior)
      .def_property_readonly("f_grid", [](const MallowsSolution& s) { return s.f_grid.values(); })
      .def_property_readonly("gap", [](const MallowsSolution& s) { return s.stats.gap; })
      .def_property_readonly("converged", [](const MallowsSolution& s) { return s.stats.converged; })
      .def_property_readonly("worst_risk", [](const MallowsSolution& s) { return s.stats.worst_risk; })
      .def("mass_points", [](const MallowsSolution& s) { return extract_mass_points(s); })
      .def("rule", &mallows_rule);
  m.def(
      "solve_mallows",
      [](const DiscreteDistribution& G, double eps, const std::string& algorithm, double tol, std::size_t max_iterations) {
        return solve_mallows(assemble_problem(G, eps), solver(algorithm, tol, max_iterations));
      },
      py::arg("prior"), py::arg("eps"), py::arg("algorithm") = "active_set_newton", py::arg("tol") = 1e-9,
      py::arg("max_iterations") = 5000, py::call_guard<py::gil_scoped_release>());

  // NPMLE
  py::class_<NPMLEFit>(m, "NPMLEFit")
      .def_readonly("mixing", &NPMLEFit::mixing)
      .def_readonly("log_likelihood", &NPMLEFit::log_likelihood)
      .def_readonly("iterations", &NPMLEFit::iterations)
      .def_readonly("kkt_gap", &NPMLEFit::kkt_gap)
      .def_readonly("converged", &NPMLEFit::converged)
      .def("rule", py::overload_cast<const NPMLEFit&>(&empirical_bayes_rule))
      .def(
          "mallows_rule", [](const NPMLEFit& f, double eps) { return empirical_mallows_rule(f, eps); }, py::arg("eps"))
      .def(
          "huber_rule", [](const NPMLEFit& f, double eps) { return empirical_huber_rule(f, eps); }, py::arg("eps"));
  m.def(
      "fit_npmle",
      [](const std::vector<double>& x, std::size_t grid_points, double tol, const std::string& algorithm) {
        NPMLEConfig c;
        c.grid_points = grid_points;
        c.tol = tol;
        if (algorithm == "em") c.algorithm = NpmleAlgorithm::em;
        else if (algorithm != "active_set") throw Error(Errc::invalid_argument, "unknown algorithm '" + algorithm + "'");
        return fit_npmle(x, c);
      },
      py::arg("x"), py::arg("grid_points") = 600, py::arg("tol") = 1e-6, py::arg("algorithm") = "active_set",
      py::call_guard<py::gil_scoped_release>());

  // Risk
  m.def(
      "pointwise_risk",
      [](const DecisionRule& r, const py::object& theta) {
        return map_array(theta, [&](double t) { return pointwise_risk(r, t); });
      },
      py::arg("rule"), py::arg("theta"));
  m.def(
      "bayes_risk", [](const DecisionRule& r, const DiscreteDistribution& G) { return bayes_risk(r, G); },
      py::arg("rule"), py::arg("prior"));
  m.def("brown_identity_gap", &brown_identity_gap, py::arg("prior"));

  // Simulation
  m.def(
      "draw",
      [](const std::string& prior, const std::string& noise, std::size_t n, std::uint64_t seed, std::uint64_t index) {
        const Sample s = draw_sample(DGP{PriorSpec::parse(prior), NoiseSpec::parse(noise), n}, seed, index);
        return py::make_tuple(s.theta, s.x);
      },
      py::arg("prior"), py::arg("noise"), py::arg("n"), py::arg("seed"), py::arg("index") = 0);
}
