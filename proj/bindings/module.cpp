#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "lcsmto/adjoint.hpp"
#include "lcsmto/config.hpp"
#include "lcsmto/io.hpp"
#include "lcsmto/oracle.hpp"
#include "lcsmto/schedule.hpp"
#include "lcsmto/trainer.hpp"

namespace py = pybind11;
using namespace lcsmto;

PYBIND11_MODULE(_lcsmto, m) {
  m.doc() = "Level-set topology optimization of Brinkman flow (core bindings)";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<OracleError>(m, "OracleError");
  py::register_exception<TrainError>(m, "TrainError");
  py::register_exception<IoError>(m, "IoError");

  py::class_<ProblemConfig>(m, "ProblemConfig")
      .def_static("preset", &preset_config, py::arg("name"))
      .def_static("from_json", &config_from_json_text, py::arg("text"))
      .def_static("parse", &parse_config, py::arg("source"))
      .def("to_json", &config_to_json_text)
      .def("validate", &ProblemConfig::validate)
      .def_readwrite("name", &ProblemConfig::name)
      .def_readwrite("width", &ProblemConfig::width)
      .def_readwrite("height", &ProblemConfig::height)
      .def_readwrite("v_target", &ProblemConfig::v_target)
      .def_readwrite("grid_nx", &ProblemConfig::grid_nx)
      .def_readwrite("grid_ny", &ProblemConfig::grid_ny)
      .def_readwrite("n_bc_per_side", &ProblemConfig::n_bc_per_side)
      .def_property(
          "epochs", [](const ProblemConfig& c) { return c.optimizer.epochs; },
          [](ProblemConfig& c, int e) { c.optimizer.epochs = e; });

  m.def("preset_names", &preset_names);

  m.def(
      "scheduled_volume",
      [](int epoch, const ProblemConfig& cfg) {
        return scheduled_volume(epoch, ScheduleState::from_config(cfg));
      },
      py::arg("epoch"), py::arg("config"));

  m.def(
      "material_interp",
      [](double rho, const ProblemConfig& cfg) {
        return material_interp(rho, {cfg.kappa_inv_max, cfg.kappa_inv_min, cfg.q});
      },
      py::arg("rho"), py::arg("config"));

  py::class_<LossBreakdown>(m, "LossBreakdown")
      .def_readonly("objective", &LossBreakdown::objective)
      .def_readonly("r_mx", &LossBreakdown::r_mx)
      .def_readonly("r_my", &LossBreakdown::r_my)
      .def_readonly("r_c", &LossBreakdown::r_c)
      .def_readonly("c1_sq", &LossBreakdown::c1_sq)
      .def_readonly("total", &LossBreakdown::total)
      .def_readonly("mu_p", &LossBreakdown::mu_p)
      .def_readonly("v_scheduled", &LossBreakdown::v_scheduled);

  py::class_<TrainOutcome>(m, "TrainOutcome")
      .def_readonly("final_epoch", &TrainOutcome::final_epoch)
      .def_readonly("final_breakdown", &TrainOutcome::final_breakdown)
      .def_readonly("final_volume_fraction_hard", &TrainOutcome::final_volume_fraction_hard)
      .def_readonly("runtime_s", &TrainOutcome::runtime_s);

  py::class_<Trainer>(m, "Trainer")
      .def(py::init<const ProblemConfig&, std::uint64_t>(), py::arg("config"), py::arg("seed"))
      .def(
          "train",
          [](Trainer& t, const std::filesystem::path& out_dir, std::optional<int> epochs,
             bool deterministic, std::optional<bool> weighting) {
            TrainOptions opts;
            opts.epochs = epochs;
            opts.deterministic = deterministic;
            opts.weighting = weighting;
            return t.train(out_dir, opts);
          },
          py::arg("out_dir"), py::arg("epochs") = std::nullopt, py::arg("deterministic") = false,
          py::arg("weighting") = std::nullopt)
      .def_static(
          "resume",
          [](const std::filesystem::path& checkpoint, std::optional<int> epochs,
             bool deterministic) {
            TrainOptions opts;
            opts.epochs = epochs;
            opts.deterministic = deterministic;
            return Trainer::resume(checkpoint, opts);
          },
          py::arg("checkpoint"), py::arg("epochs") = std::nullopt,
          py::arg("deterministic") = false);

  m.def(
      "gradcheck",
      [](const ProblemConfig& cfg, std::uint64_t seed, int n_coords, double step) {
        LossEvaluator eval(cfg, seed);
        ParamVector pv = eval.make_params();
        EpochInputs in;
        in.weights = Eigen::VectorXd::Ones(eval.grid().count());
        in.v_scheduled = cfg.v_target;
        in.ws = WeightState::from_config(cfg);
        return eval.fd_gradcheck(pv, in, n_coords, step, seed);
      },
      py::arg("config"), py::arg("seed") = 0, py::arg("n_coords") = 25, py::arg("step") = 1e-6);

  py::class_<OracleResult>(m, "OracleResult")
      .def_readonly("nx", &OracleResult::nx)
      .def_readonly("ny", &OracleResult::ny)
      .def_readonly("u", &OracleResult::u)
      .def_readonly("v", &OracleResult::v)
      .def_readonly("p", &OracleResult::p)
      .def_readonly("dissipated_power", &OracleResult::dissipated_power)
      .def_readonly("volume_fraction", &OracleResult::volume_fraction)
      .def_readonly("max_divergence", &OracleResult::max_divergence)
      .def_readonly("solver_residual", &OracleResult::solver_residual)
      .def_readonly("inlet_flux", &OracleResult::inlet_flux)
      .def_readonly("outlet_flux", &OracleResult::outlet_flux)
      .def_readonly("mid_flux", &OracleResult::mid_flux)
      .def_readonly("near_zero_flow", &OracleResult::near_zero_flow)
      .def_readonly("interface_fraction", &OracleResult::interface_fraction);

  py::class_<OracleSolver>(m, "OracleSolver")
      .def(py::init<const ProblemConfig&, int, int>(), py::arg("config"), py::arg("nx") = 0,
           py::arg("ny") = 0)
      .def_property_readonly("nx", &OracleSolver::nx)
      .def_property_readonly("ny", &OracleSolver::ny)
      .def("solve", &OracleSolver::solve, py::arg("rho_cells"), py::arg("tol") = 1e-10);

  m.def(
      "validate_density_file",
      [](const std::filesystem::path& path, const ProblemConfig& cfg) {
        return validate_density(import_density_csv(path), cfg);
      },
      py::arg("path"), py::arg("config"));
}
