#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "qlidar/click_model.hpp"
#include "qlidar/config.hpp"
#include "qlidar/errors.hpp"
#include "qlidar/llv.hpp"
#include "qlidar/montecarlo.hpp"
#include "qlidar/report.hpp"
#include "qlidar/scenarios.hpp"

namespace py = pybind11;
using namespace qlidar;

namespace {

py::dict summary_of(const RunReport& r) {
  auto json = py::module_::import("json");
  return json.attr("loads")(r.summary.dump()).cast<py::dict>();
}

}  // namespace

PYBIND11_MODULE(_qlidar, m) {
  m.doc() = "Quantum-illumination lidar click model and simulator";
  m.attr("__version__") = library_version();

  static py::exception<Error> error(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(), e.what());
    }
  });

  py::enum_<Hypothesis>(m, "Hypothesis").value("h0", Hypothesis::h0).value("h1", Hypothesis::h1);

  py::class_<SystemParams>(m, "SystemParams")
      .def(py::init<>())
      .def_readwrite("n_mean", &SystemParams::n_mean)
      .def_readwrite("xi", &SystemParams::xi)
      .def_readwrite("eta_s", &SystemParams::eta_s)
      .def_readwrite("eta_i", &SystemParams::eta_i)
      .def_readwrite("nbg_s", &SystemParams::nbg_s)
      .def_readwrite("nbg_i", &SystemParams::nbg_i)
      .def_readwrite("tau_c", &SystemParams::tau_c)
      .def_readwrite("t_int", &SystemParams::t_int)
      .def_readwrite("gamma", &SystemParams::gamma)
      .def_readwrite("beta", &SystemParams::beta)
      .def("ci_trials", &SystemParams::ci_trials)
      .def("with_xi", &SystemParams::with_xi)
      .def("with_signal_background_rate", &SystemParams::with_signal_background_rate)
      .def("__eq__", [](const SystemParams& a, const SystemParams& b) { return a == b; });

  py::class_<SourceSetup>(m, "SourceSetup")
      .def(py::init<>())
      .def_readwrite("pair_rate", &SourceSetup::pair_rate)
      .def_readwrite("loss_db", &SourceSetup::loss_db)
      .def_readwrite("eta_s", &SourceSetup::eta_s)
      .def_readwrite("eta_i", &SourceSetup::eta_i)
      .def_readwrite("signal_background_rate", &SourceSetup::signal_background_rate)
      .def_readwrite("idler_background_rate", &SourceSetup::idler_background_rate)
      .def_readwrite("tau_c", &SourceSetup::tau_c)
      .def_readwrite("t_int", &SourceSetup::t_int)
      .def_readwrite("beta", &SourceSetup::beta)
      .def_readwrite("gamma", &SourceSetup::gamma);

  m.def("make_params", &make_params);
  m.def("validate", [](const SystemParams& p) { return validate(p).issues; });

  py::class_<ClickProbabilities>(m, "ClickProbabilities")
      .def_readonly("p_h0_ci", &ClickProbabilities::p_h0_ci)
      .def_readonly("p_h1_ci", &ClickProbabilities::p_h1_ci)
      .def_readonly("p_h0_qi", &ClickProbabilities::p_h0_qi)
      .def_readonly("p_h1_qi", &ClickProbabilities::p_h1_qi)
      .def_readonly("p_idler", &ClickProbabilities::p_idler)
      .def_readonly("n_cond", &ClickProbabilities::n_cond);
  m.def("click_probabilities", &click_probabilities);

  py::class_<LinearLlvCoeffs>(m, "LinearLlvCoeffs")
      .def_readonly("m", &LinearLlvCoeffs::m)
      .def_readonly("c", &LinearLlvCoeffs::c);
  m.def("linear_coeffs", &linear_coeffs, py::arg("p_h0"), py::arg("p_h1"));
  m.def("llv", &llv, py::arg("x"), py::arg("k"), py::arg("coeffs"));

  m.def(
      "analytic_phi",
      [](const SystemParams& p, bool quantum, std::size_t n_av, double threshold) {
        const auto a = analytic_distributions(p, quantum ? Illumination::quantum : Illumination::classical, n_av);
        return analytic_pd_pfa(a.h1, a.h0, threshold).distinguishability();
      },
      py::arg("params"), py::arg("quantum"), py::arg("n_av") = 1, py::arg("threshold") = 0.0);
  m.def("equivalent_averaging_factor",
        py::overload_cast<const SystemParams&, const SystemParams&, std::size_t, std::size_t>(
            &equivalent_averaging_factor),
        py::arg("ci_params"), py::arg("qi_params"), py::arg("n_av"), py::arg("roc_points") = 201);

  py::class_<MeasurementRecord>(m, "MeasurementRecord")
      .def_readonly("signal_counts", &MeasurementRecord::signal_counts)
      .def_readonly("idler_counts", &MeasurementRecord::idler_counts)
      .def_readonly("coincidence_counts", &MeasurementRecord::coincidence_counts)
      .def_readonly("k_ci", &MeasurementRecord::k_ci);
  m.def(
      "run_measurement",
      [](const SystemParams& p, Hypothesis h, std::uint64_t seed) {
        Rng rng(RngSeedPolicy{seed}.derive(0));
        return run_measurement(p, h, rng);
      },
      py::arg("params"), py::arg("hypothesis"), py::arg("seed") = 1);

  m.def(
      "run_config",
      [](const std::string& path, std::optional<std::uint64_t> seed, std::optional<double> scale,
         std::optional<std::filesystem::path> out) {
        auto c = load_config(path);
        if (seed) c.seed = *seed;
        if (scale) c.scale = *scale;
        RunReport r;
        {
          py::gil_scoped_release release;
          r = run_scenario(c);
        }
        if (out) write_report(r, *out, OutputFormat::csv);
        return summary_of(r);
      },
      py::arg("path"), py::arg("seed") = py::none(), py::arg("scale") = py::none(), py::arg("out") = py::none(),
      "Run a scenario config and return its summary as a dict.");

  m.def("oracle_max_sigma", [](const SystemParams& p, std::uint64_t windows, std::uint64_t seed) {
    Rng rng(RngSeedPolicy{seed}.derive(0));
    return oracle_check(p, windows, rng).max_sigma();
  });
}
