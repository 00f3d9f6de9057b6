#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "muellertf/config.hpp"
#include "muellertf/coulomb.hpp"
#include "muellertf/mueller.hpp"
#include "muellertf/runner.hpp"
#include "muellertf/screening.hpp"
#include "muellertf/semiclassics.hpp"
#include "muellertf/tf.hpp"

namespace py = pybind11;
using namespace mtf;

namespace {

py::array_t<double> array(std::span<const double> v) { return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data()); }

// Python handle on a shared grid.
struct Grid {
  GridPtr ptr;
};

RadialFunction from_array(const Grid& grid, const py::array_t<double>& v) {
  const GridPtr& g = grid.ptr;
  if (static_cast<std::size_t>(v.size()) != g->size()) throw std::invalid_argument("values do not match the grid size");
  const auto u = v.unchecked<1>();
  std::vector<double> out(g->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = u(static_cast<py::ssize_t>(i));
  return RadialFunction(g, std::move(out));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Mueller functional, Thomas-Fermi theory and screening on radial grids";
  m.attr("__version__") = code_version();
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<TFError>(m, "TFError", PyExc_RuntimeError);

  auto tfm = m.def_submodule("tf", "Thomas-Fermi constants");
  tfm.attr("c_tf") = tf::c_tf;
  tfm.attr("a_tf") = tf::a_tf;
  tfm.attr("zeta") = tf::zeta;
  tfm.attr("L_sc") = tf::L_sc;
  tfm.def("length_scale", &tf::length_scale, py::arg("Z"));

  py::class_<Grid>(m, "RadialGrid")
      .def_static(
          "logarithmic", [](double a, double b, std::size_t n) { return Grid{RadialGrid::logarithmic(a, b, n)}; },
          py::arg("r_min"), py::arg("r_max"), py::arg("n"))
      .def_property_readonly("nodes", [](const Grid& g) { return array(g.ptr->nodes()); })
      .def_property_readonly("r_min", [](const Grid& g) { return g.ptr->r_min(); })
      .def_property_readonly("r_max", [](const Grid& g) { return g.ptr->r_max(); })
      .def("__len__", [](const Grid& g) { return g.ptr->size(); });

  m.def(
      "direct_energy", [](const Grid& g, const py::array_t<double>& f) { return direct_energy(from_array(g, f)); },
      py::arg("grid"), py::arg("values"), "D(f, f) of a radial function sampled on grid");
  m.def(
      "integrate3d", [](const Grid& g, const py::array_t<double>& f) { return integrate3d(from_array(g, f)); },
      py::arg("grid"), py::arg("values"));

  py::class_<TFSolution>(m, "TFSolution")
      .def_readonly("z", &TFSolution::z)
      .def_readonly("r_inner", &TFSolution::r_inner)
      .def_readonly("mass", &TFSolution::mass)
      .def_readonly("energy", &TFSolution::energy)
      .def_readonly("shoot_param", &TFSolution::shoot_param)
      .def_readonly("residual", &TFSolution::residual)
      .def_property_readonly("r", [](const TFSolution& s) { return array(s.grid().nodes()); })
      .def_property_readonly("rho", [](const TFSolution& s) { return array(s.rho.values()); })
      .def_property_readonly("phi", [](const TFSolution& s) { return array(s.phi.values()); })
      .def("screened_charge", &tf_screened_charge, py::arg("r"));

  m.def(
      "solve_tf", [](double Z, std::optional<Grid> g) { return solve_tf(Z, g ? g->ptr : screening_tf_grid(Z)); }, py::arg("Z"),
      py::arg("grid") = py::none());
  m.def("solve_exterior_tf", [](double z, double r, const Grid& g) { return solve_exterior_tf(z, r, g.ptr); }, py::arg("z"),
        py::arg("r"), py::arg("grid"));

  py::class_<EnergyBreakdown>(m, "EnergyBreakdown")
      .def_readonly("kinetic", &EnergyBreakdown::kinetic)
      .def_readonly("external", &EnergyBreakdown::external)
      .def_readonly("direct", &EnergyBreakdown::direct)
      .def_readonly("exchange", &EnergyBreakdown::exchange)
      .def_readonly("total", &EnergyBreakdown::total);

  py::class_<MuellerOptions>(m, "MuellerOptions")
      .def(py::init<>())
      .def_readwrite("l_max", &MuellerOptions::l_max)
      .def_readwrite("k_max", &MuellerOptions::k_max)
      .def_readwrite("grid_r_min", &MuellerOptions::grid_r_min)
      .def_readwrite("grid_r_max", &MuellerOptions::grid_r_max)
      .def_readwrite("grid_n", &MuellerOptions::grid_n)
      .def_readwrite("tol", &MuellerOptions::tol)
      .def_readwrite("max_iter", &MuellerOptions::max_iter)
      .def_readwrite("dN", &MuellerOptions::dN)
      .def_readwrite("mu_tol", &MuellerOptions::mu_tol)
      .def_readwrite("flat_points", &MuellerOptions::flat_points);

  py::class_<MuellerResult>(m, "MuellerResult")
      .def_readonly("Z", &MuellerResult::Z)
      .def_readonly("N", &MuellerResult::N)
      .def_readonly("breakdown", &MuellerResult::breakdown)
      .def_readonly("chemical_potential", &MuellerResult::chemical_potential)
      .def_readonly("iterations", &MuellerResult::iterations)
      .def_readonly("converged", &MuellerResult::converged)
      .def_readonly("stationarity", &MuellerResult::stationarity)
      .def_readonly("energy_history", &MuellerResult::energy_history)
      .def_property_readonly("r", [](const MuellerResult& r) { return array(r.gamma.grid().nodes()); })
      .def_property_readonly("density", [](const MuellerResult& r) {
        const auto rho = density_of(r.gamma);
        return array(rho.values());
      })
      .def("screened_charge", [](const MuellerResult& r, double x) { return screened_charge(density_of(r.gamma), r.Z, x); },
           py::arg("r"));

  m.def("minimize", [](double Z, double N, const MuellerOptions& o) { return minimize(Z, N, o); }, py::arg("Z"), py::arg("N"),
        py::arg("options") = MuellerOptions{}, py::call_guard<py::gil_scoped_release>());

  py::class_<SweepPoint>(m, "SweepPoint")
      .def_readonly("N", &SweepPoint::N)
      .def_readonly("energy", &SweepPoint::energy)
      .def_readonly("mu", &SweepPoint::mu)
      .def_readonly("converged", &SweepPoint::converged);
  py::class_<IonizationSweep>(m, "IonizationSweep")
      .def_readonly("Z", &IonizationSweep::Z)
      .def_readonly("N_c", &IonizationSweep::N_c)
      .def_readonly("points", &IonizationSweep::points)
      .def_readonly("reached_flat", &IonizationSweep::reached_flat)
      .def_readonly("all_converged", &IonizationSweep::all_converged);
  m.def("ionization_sweep", [](double Z, const MuellerOptions& o) { return ionization_sweep(Z, o); }, py::arg("Z"),
        py::arg("options") = MuellerOptions{}, py::call_guard<py::gil_scoped_release>());

  m.def("eta_profile", &eta_profile, py::arg("t"));
  m.def("sphere_average_positive_part", &sphere_average_positive_part, py::arg("z"));

  m.def(
      "parse_config", [](const std::string& text) { return to_ini(parse_config(text)); }, py::arg("text"),
      "Validates INI text and returns its canonical form");
  m.def(
      "config_hash", [](const std::string& text) { return config_hash(parse_config(text)); }, py::arg("text"));
  m.def(
      "run",
      [](const std::string& text, std::optional<std::filesystem::path> out) {
        ExperimentConfig c;
        try {
          c = parse_config(text);
        } catch (const ConfigError&) {
          return exit_code::invalid_config;
        }
        if (out) c.out = *out;
        std::ostringstream log;
        py::gil_scoped_release release;
        return mtf::run(c, log);
      },
      py::arg("config"), py::arg("out") = py::none(), "Runs an experiment from INI text; returns the exit code");
  m.def(
      "report", [](const std::filesystem::path& dir) {
        std::ostringstream log;
        return mtf::report(dir, log);
      },
      py::arg("dir"));
}
