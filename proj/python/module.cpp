#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "phasetherm/analytic.hpp"
#include "phasetherm/enumerate.hpp"
#include "phasetherm/montecarlo.hpp"
#include "phasetherm/probe.hpp"
#include "phasetherm/scan.hpp"

namespace py = pybind11;
using namespace phasetherm;

namespace {

py::dict series_dict(const DecoherenceSeries& s) {
  py::dict d;
  d["t"] = s.t;
  d["r"] = s.r;
  d["dr"] = s.dr;
  d["se_r"] = s.se_r;
  d["se_dr"] = s.se_dr;
  d["beta"] = s.beta;
  d["flags"] = s.flags;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Phase thermometry of the 2D Ising lattice (C++ core).";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ArithmeticError);

  m.def("onsager_beta_c", &onsager_beta_c, py::arg("J") = 0.25);
  m.def("qfi_from_r", &qfi_from_r, py::arg("r"), py::arg("dr"), py::arg("tolerance") = 1e-9);
  m.def("reparametrize", &reparametrize, py::arg("F_beta"), py::arg("beta"));

  py::class_<ThermoParams>(m, "ThermoParams")
      .def(py::init([](int L, double radius, double beta) {
             return ThermoParams::lattice_defaults(L, radius, beta);
           }),
           py::arg("L") = 20, py::arg("radius") = 0.0, py::arg("beta") = 1.0)
      .def_readwrite("J", &ThermoParams::J)
      .def_readwrite("h", &ThermoParams::h)
      .def_readwrite("beta", &ThermoParams::beta)
      .def_readwrite("g", &ThermoParams::g)
      .def_readonly("L", &ThermoParams::L)
      .def_property_readonly("n", [](const ThermoParams& p) { return p.cluster.size(); });

  py::class_<BondCounts>(m, "BondCounts")
      .def_readonly("K", &BondCounts::K)
      .def_readonly("K12", &BondCounts::K12)
      .def_readonly("K22", &BondCounts::K22)
      .def_readonly("K23", &BondCounts::K23)
      .def_readonly("K24", &BondCounts::K24);
  m.def("bond_counts", [](const ThermoParams& p) { return bond_counts(Lattice(p.L), p.cluster); });

  m.def("exact_decoherence",
        [](const ThermoParams& p, const std::vector<double>& t) {
          return series_dict(exact_decoherence(p, t));
        });

  m.def("run_sampler",
        [](const ThermoParams& p, const std::vector<double>& t, std::uint64_t sweeps,
           std::uint64_t burn_in, std::uint64_t seed, const std::string& algorithm,
           bool symmetrize) {
          SamplerConfig cfg;
          cfg.sweeps = sweeps;
          cfg.burn_in = burn_in;
          cfg.seed = seed;
          cfg.algorithm = algorithm_from_string(algorithm);
          cfg.symmetrize = symmetrize;
          SamplerResult res;
          {
            py::gil_scoped_release release;
            res = run_sampler(p, cfg, t);
          }
          py::dict d = series_dict(res.series);
          d["samples_used"] = res.stats.samples_used;
          d["mean_energy"] = res.stats.mean_energy();
          d["local_fi"] = p.cluster.size() <= 13 ? py::cast(local_fi(res.stats, 0).value)
                                                 : py::none();
          return d;
        },
        py::arg("params"), py::arg("t"), py::arg("sweeps") = 10000, py::arg("burn_in") = 1000,
        py::arg("seed") = 1, py::arg("algorithm") = "auto", py::arg("symmetrize") = false);

  m.def("cw_qfi",
        [](double beta_over_beta_c, int N, double t, double J, double g) {
          ThermoParams p;
          p.J = J;
          p.g = g;
          p.beta = beta_over_beta_c / J;
          return cw_qfi(cw_saddle_point(p, N), p, t);
        },
        py::arg("beta_over_beta_c"), py::arg("N"), py::arg("t"), py::arg("J") = 0.25,
        py::arg("g") = 0.1);

  m.def("run_command",
        [](const std::string& config_json) {
          const RunConfig cfg = parse_run_config(config_json);
          Dataset d;
          {
            py::gil_scoped_release release;
            d = run_command(cfg);
          }
          return format_json(d);
        },
        py::arg("config_json"),
        "Runs a scan described by a JSON config and returns the JSON dataset.");

  m.attr("__version__") = version_string();
}
