#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lcsmto/adjoint.hpp"
#include "lcsmto/config.hpp"
#include "lcsmto/io.hpp"
#include "lcsmto/oracle.hpp"
#include "lcsmto/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ConfigArgs {
  std::string preset;
  std::string config_file;

  void attach(CLI::App* cmd) {
    auto* p = cmd->add_option("--preset", preset, "built-in problem preset");
    auto* c = cmd->add_option("--config", config_file, "JSON config file");
    p->excludes(c);
  }

  lcsmto::ProblemConfig resolve() const {
    if (!config_file.empty()) return lcsmto::parse_config(config_file);
    if (!preset.empty()) return lcsmto::preset_config(preset);
    throw lcsmto::ConfigError("one of --preset or --config is required");
  }
};

int cmd_run(const ConfigArgs& ca, std::uint64_t seed, int repeats, const std::string& out,
            int epochs, bool deterministic, bool no_weighting, int checkpoint_every) {
  lcsmto::ProblemConfig cfg = ca.resolve();
  lcsmto::TrainOptions opts;
  if (epochs >= 0) opts.epochs = epochs;
  opts.deterministic = deterministic;
  if (no_weighting) opts.weighting = false;
  opts.checkpoint_every = checkpoint_every;

  std::vector<fs::path> dirs;
  for (int r = 0; r < repeats; ++r) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(r);
    const fs::path dir = repeats == 1 ? fs::path(out) : fs::path(out) / ("seed_" + std::to_string(s));
    std::cout << "[run] " << cfg.name << " seed=" << s << " -> " << dir.string() << std::endl;
    lcsmto::Trainer trainer(cfg, s);
    const auto outcome = trainer.train(dir, opts);
    std::cout << "[run] done: epoch=" << outcome.final_epoch
              << " J=" << outcome.final_breakdown.objective
              << " total=" << outcome.final_breakdown.total
              << " V=" << outcome.final_volume_fraction_hard << std::endl;
    dirs.push_back(dir);
  }
  if (repeats > 1) std::cout << lcsmto::format_summary_table(lcsmto::summarize_repeats(dirs));
  return 0;
}

int cmd_resume(const std::string& checkpoint, int epochs, bool deterministic) {
  lcsmto::TrainOptions opts;
  if (epochs >= 0) opts.epochs = epochs;
  opts.deterministic = deterministic;
  const auto outcome = lcsmto::Trainer::resume(checkpoint, opts);
  std::cout << "[resume] done: epoch=" << outcome.final_epoch
            << " J=" << outcome.final_breakdown.objective << std::endl;
  return 0;
}

int cmd_validate(const ConfigArgs& ca, const std::string& density, const std::string& out) {
  const lcsmto::ProblemConfig cfg = ca.resolve();
  const lcsmto::DensityRaster raster = lcsmto::import_density_csv(density);
  const lcsmto::OracleResult res = lcsmto::validate_density(raster, cfg);

  json report;
  report["schema_version"] = 1;
  report["problem"] = cfg.name;
  report["j_c"] = res.dissipated_power;
  report["volume_fraction"] = res.volume_fraction;
  report["max_divergence"] = res.max_divergence;
  report["solver_residual"] = res.solver_residual;
  report["inlet_flux"] = res.inlet_flux;
  report["outlet_flux"] = res.outlet_flux;
  report["mid_flux"] = res.mid_flux;
  report["near_zero_flow"] = res.near_zero_flow;
  report["interface_fraction"] = res.interface_fraction;
  if (res.interface_fraction > 0.2)
    report["warning"] = "high interface fraction; raster may be noise or checkerboard";

  const std::string text = report.dump(2) + "\n";
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    std::ofstream f(out);
    if (!f) throw lcsmto::IoError("cannot write " + out);
    f << text;
    std::cout << "[validate] J_c=" << res.dissipated_power << " V=" << res.volume_fraction
              << " div=" << res.max_divergence << " -> " << out << std::endl;
  }
  return 0;
}

int cmd_gradcheck(const ConfigArgs& ca, int nx, int ny, int n_bc, int coords, double step,
                  std::uint64_t seed, double tol) {
  lcsmto::ProblemConfig cfg = ca.resolve();
  if (nx > 0) cfg.grid_nx = nx;
  if (ny > 0) cfg.grid_ny = ny;
  if (n_bc > 0) cfg.n_bc_per_side = n_bc;

  lcsmto::LossEvaluator eval(cfg, seed);
  lcsmto::ParamVector pv = eval.make_params();
  lcsmto::EpochInputs in;
  in.weights = Eigen::VectorXd::Ones(eval.grid().count());
  in.v_scheduled = cfg.v_target;
  in.ws = lcsmto::WeightState::from_config(cfg);
  const double err = eval.fd_gradcheck(pv, in, coords, step, seed);
  std::cout << "gradcheck: max relative error " << err << " over " << coords
            << " coordinates (step " << step << ")" << std::endl;
  if (err > tol) {
    std::cerr << "gradcheck FAILED (tolerance " << tol << ")" << std::endl;
    return 1;
  }
  return 0;
}

int cmd_summarize(const std::vector<std::string>& dirs, const std::string& csv_out) {
  std::vector<fs::path> paths(dirs.begin(), dirs.end());
  const lcsmto::RepeatSummary s = lcsmto::summarize_repeats(paths);
  std::cout << lcsmto::format_summary_table(s);
  if (!csv_out.empty()) {
    std::ofstream f(csv_out);
    if (!f) throw lcsmto::IoError("cannot write " + csv_out);
    f << lcsmto::format_summary_csv(s);
  }
  return 0;
}

int cmd_export(const std::string& checkpoint, const std::string& out, const std::string& mode) {
  lcsmto::Trainer trainer = lcsmto::Trainer::load_checkpoint(checkpoint);
  trainer.export_artifacts(out, mode == "train" ? lcsmto::DensityMode::Train
                                                : lcsmto::DensityMode::Hard);
  std::cout << "[export] wrote density/residual files to " << out << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lcsmto: level-set topology optimization of Brinkman flow"};
  app.require_subcommand(1);

  ConfigArgs run_ca, val_ca, gc_ca;
  std::uint64_t run_seed = 0, gc_seed = 0;
  int run_repeats = 1, run_epochs = -1, run_ckpt_every = 1000;
  std::string run_out;
  bool run_det = false, run_no_w = false;

  auto* run = app.add_subcommand("run", "train a design from scratch");
  run_ca.attach(run);
  run->add_option("--seed", run_seed, "base RNG seed");
  run->add_option("--repeats", run_repeats, "independent seeded repetitions")
      ->check(CLI::PositiveNumber);
  run->add_option("--epochs", run_epochs, "override training epochs");
  run->add_option("--out", run_out, "output directory")->required();
  run->add_option("--checkpoint-every", run_ckpt_every, "checkpoint cadence (epochs)");
  run->add_flag("--deterministic", run_det, "zero timing columns for bit-identical output");
  run->add_flag("--no-weighting", run_no_w, "disable localized interface weighting");

  std::string res_ckpt;
  int res_epochs = -1;
  bool res_det = false;
  auto* resume = app.add_subcommand("resume", "continue a checkpointed run");
  resume->add_option("--checkpoint", res_ckpt, "checkpoint file")->required();
  resume->add_option("--epochs", res_epochs, "override training epochs");
  resume->add_flag("--deterministic", res_det, "zero timing columns");

  std::string val_density, val_out;
  auto* validate = app.add_subcommand("validate", "solve the frozen Brinkman flow for a density");
  val_ca.attach(validate);
  validate->add_option("--density", val_density, "density.csv file")->required();
  validate->add_option("--out", val_out, "report JSON path ('-' for stdout)");

  int gc_nx = 20, gc_ny = 20, gc_nbc = 4, gc_coords = 50;
  double gc_step = 1e-6, gc_tol = 1e-4;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the loss gradient");
  gc_ca.attach(gradcheck);
  gradcheck->add_option("--nx", gc_nx, "lattice width");
  gradcheck->add_option("--ny", gc_ny, "lattice height");
  gradcheck->add_option("--n-bc", gc_nbc, "anchors per side");
  gradcheck->add_option("--coords", gc_coords, "sampled coordinates");
  gradcheck->add_option("--step", gc_step, "central-difference step");
  gradcheck->add_option("--seed", gc_seed, "RNG seed");
  gradcheck->add_option("--tol", gc_tol, "failure threshold on max relative error");

  std::vector<std::string> sum_dirs;
  std::string sum_csv;
  auto* summarize = app.add_subcommand("summarize", "aggregate statistics over finished runs");
  summarize->add_option("dirs", sum_dirs, "run directories")->required();
  summarize->add_option("--csv", sum_csv, "also write a CSV table here");

  std::string exp_ckpt, exp_out, exp_mode = "hard";
  auto* export_cmd = app.add_subcommand("export", "re-export artifacts from a checkpoint");
  export_cmd->add_option("--checkpoint", exp_ckpt, "checkpoint file")->required();
  export_cmd->add_option("--out", exp_out, "output directory")->required();
  export_cmd->add_option("--mode", exp_mode, "density mode")
      ->check(CLI::IsMember({"train", "hard"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(run_ca, run_seed, run_repeats, run_out, run_epochs, run_det, run_no_w,
                     run_ckpt_every);
    if (resume->parsed()) return cmd_resume(res_ckpt, res_epochs, res_det);
    if (validate->parsed()) return cmd_validate(val_ca, val_density, val_out);
    if (gradcheck->parsed())
      return cmd_gradcheck(gc_ca, gc_nx, gc_ny, gc_nbc, gc_coords, gc_step, gc_seed, gc_tol);
    if (summarize->parsed()) return cmd_summarize(sum_dirs, sum_csv);
    if (export_cmd->parsed()) return cmd_export(exp_ckpt, exp_out, exp_mode);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
