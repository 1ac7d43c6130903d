#include "lcsmto/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "lcsmto/oracle.hpp"

namespace lcsmto {

namespace fs = std::filesystem;
using nlohmann::json;

double OptimizerState::lr_at(int epoch) const {
  double lr = lr0;
  for (int e : decay_epochs)
    if (epoch >= e) lr *= decay;
  return lr;
}

void adam_step(ParamVector& params, const Eigen::VectorXd& grad, OptimizerState& opt, int epoch) {
  if (!grad.allFinite()) throw TrainError("non-finite gradient; aborting Adam step");
  opt.step += 1;
  const double gn = grad.norm();
  const double scale = (opt.grad_clip > 0.0 && gn > opt.grad_clip) ? opt.grad_clip / gn : 1.0;
  const double b1 = opt.beta1, b2 = opt.beta2;
  params.adam_m = b1 * params.adam_m + (1.0 - b1) * scale * grad;
  params.adam_v = b2 * params.adam_v.array() + (1.0 - b2) * (scale * grad.array()).square();
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(opt.step));
  const double lr = opt.lr_at(epoch);
  params.values.array() -=
      lr * (params.adam_m.array() / bc1) /
      ((params.adam_v.array() / bc2).sqrt() + opt.eps);
}

Trainer::Trainer(const ProblemConfig& config, std::uint64_t seed) : cfg_(config), seed_(seed) {
  eval_ = std::make_unique<LossEvaluator>(cfg_, seed_);
  state_.params = eval_->make_params();
  state_.opt = OptimizerState::from_config(cfg_.optimizer);
  state_.ws = WeightState::from_config(cfg_);
}

TrainOutcome Trainer::run_loop(const fs::path& out_dir, const TrainOptions& opts, bool fresh) {
  fs::create_directories(out_dir);
  const int total_epochs = opts.epochs.value_or(cfg_.optimizer.epochs);
  bool weighting_enabled = opts.weighting.value_or(cfg_.weighting.enabled);
  state_.ws.enabled = weighting_enabled;

  if (fresh) {
    std::ofstream snap(out_dir / "config.json");
    snap << config_to_json_text(cfg_);
  }
  HistoryWriter history(out_dir / "history.csv", /*append=*/!fresh);
  const ScheduleState sched = ScheduleState::from_config(cfg_);

  const auto t0 = std::chrono::steady_clock::now();
  Eigen::VectorXd grad;
  EpochInputs in;
  TrainOutcome outcome;

  for (int epoch = state_.epoch; epoch < total_epochs; ++epoch) {
    in.v_scheduled = scheduled_volume(epoch, sched);
    in.ws = state_.ws;
    if (weighting_enabled && epoch >= state_.ws.activation_epoch && state_.last_psi.size() > 0) {
      in.weights = local_weights(interface_distance(state_.last_psi, eval_->grid()), state_.ws,
                                 epoch);
    } else {
      in.weights = Eigen::VectorXd::Ones(eval_->grid().count());
    }

    LossResult res;
    try {
      res = eval_->loss_and_grad(state_.params, in, grad);
    } catch (const std::exception& e) {
      save_checkpoint(out_dir / "abort.ckpt");
      throw TrainError(std::string("training aborted at epoch ") + std::to_string(epoch) + ": " +
                       e.what());
    }

    const double lr = state_.opt.lr_at(epoch);
    adam_step(state_.params, grad, state_.opt, epoch);

    state_.adapt_accum +=
        state_.ws.mu_p *
        Eigen::Vector4d(
            state_.ws.alpha[0] * res.breakdown.r_mx, state_.ws.alpha[1] * res.breakdown.r_my,
            state_.ws.alpha[2] * res.breakdown.r_c, state_.ws.alpha[3] * res.breakdown.c1_sq);
    state_.adapt_loss_accum += res.breakdown.total;
    state_.adapt_c1_accum += res.breakdown.c1_sq;
    state_.adapt_count += 1;
    if (state_.adapt_count >= state_.ws.adapt_every) {
      adapt_weights(state_.adapt_accum / state_.adapt_count,
                    state_.adapt_loss_accum / state_.adapt_count,
                    state_.adapt_c1_accum / state_.adapt_count, state_.ws);
      state_.adapt_accum.setZero();
      state_.adapt_loss_accum = 0.0;
      state_.adapt_c1_accum = 0.0;
      state_.adapt_count = 0;
    }

    state_.last_psi = res.psi;
    state_.epoch = epoch + 1;

    const double wall =
        opts.deterministic
            ? 0.0
            : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.write_row(epoch, res.breakdown, lr, wall);
    if (opts.on_epoch) opts.on_epoch(epoch, res.breakdown);

    if (opts.checkpoint_every > 0 && state_.epoch % opts.checkpoint_every == 0)
      save_checkpoint(out_dir / "checkpoint.ckpt");

    outcome.final_breakdown = res.breakdown;
    outcome.final_epoch = epoch;
  }

  save_checkpoint(out_dir / "checkpoint.ckpt");
  export_artifacts(out_dir, DensityMode::Hard);
  outcome.runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  // Final summary, including the independent oracle recomputation.
  FieldBatch batch;
  eval_->conditioned_fields(state_.params, batch);
  Eigen::VectorXd rho_hard(batch.psi.size());
  for (long j = 0; j < batch.psi.size(); ++j) rho_hard[j] = SmoothedHeaviside::hard(batch.psi[j]);
  const double vol_hard = volume_fraction(rho_hard, eval_->grid());
  outcome.final_volume_fraction_hard = vol_hard;

  json summary;
  summary["schema_version"] = 1;
  summary["problem"] = cfg_.name;
  summary["seed"] = seed_;
  summary["epochs"] = state_.epoch;
  summary["objective"] = outcome.final_breakdown.objective;
  summary["c1_sq"] = outcome.final_breakdown.c1_sq;
  summary["volume_fraction"] = vol_hard;
  summary["runtime_s"] = opts.deterministic ? 0.0 : outcome.runtime_s;
  try {
    OracleSolver oracle(cfg_);
    const OracleResult orc = oracle.solve(rho_hard);
    summary["oracle_power"] = orc.dissipated_power;
    summary["oracle_volume_fraction"] = orc.volume_fraction;
    summary["oracle_max_divergence"] = orc.max_divergence;
  } catch (const std::exception& e) {
    summary["oracle_power"] = nullptr;
    summary["oracle_error"] = e.what();
  }
  std::ofstream sout(out_dir / "summary.json");
  sout << summary.dump(2) << '\n';
  return outcome;
}

TrainOutcome Trainer::train(const fs::path& out_dir, const TrainOptions& opts) {
  return run_loop(out_dir, opts, /*fresh=*/state_.epoch == 0);
}

TrainOutcome Trainer::resume(const fs::path& checkpoint, const TrainOptions& opts) {
  Trainer t = load_checkpoint(checkpoint);
  return t.run_loop(checkpoint.parent_path(), opts, /*fresh=*/false);
}

namespace {

void write_raw(std::ofstream& out, const void* data, size_t bytes) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

template <typename T>
void write_val(std::ofstream& out, T v) {
  write_raw(out, &v, sizeof(T));
}

void write_vec(std::ofstream& out, const Eigen::VectorXd& v) {
  write_val<std::uint64_t>(out, static_cast<std::uint64_t>(v.size()));
  write_raw(out, v.data(), sizeof(double) * v.size());
}

void read_raw(std::ifstream& in, void* data, size_t bytes) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
  if (!in) throw TrainError("truncated checkpoint");
}

template <typename T>
T read_val(std::ifstream& in) {
  T v;
  read_raw(in, &v, sizeof(T));
  return v;
}

Eigen::VectorXd read_vec(std::ifstream& in) {
  const auto n = read_val<std::uint64_t>(in);
  if (n > (1ull << 32)) throw TrainError("corrupt checkpoint: absurd vector length");
  Eigen::VectorXd v(static_cast<long>(n));
  read_raw(in, v.data(), sizeof(double) * n);
  return v;
}

}  // namespace

void Trainer::save_checkpoint(const fs::path& path) const {
  std::ofstream out(path, std::ios_base::binary);
  if (!out) throw TrainError("cannot write checkpoint: " + path.string());
  write_raw(out, kCheckpointMagic, sizeof(kCheckpointMagic));
  write_val<std::uint32_t>(out, kCheckpointVersion);

  const std::string cfg_json = config_to_json_text(cfg_);
  write_val<std::uint64_t>(out, cfg_json.size());
  write_raw(out, cfg_json.data(), cfg_json.size());

  write_val<std::uint64_t>(out, seed_);
  write_val<std::int64_t>(out, state_.epoch);
  const auto& d = eval_->model().dims();
  for (int v : {cfg_.grid_nx, cfg_.grid_ny, d.gx, d.gy, d.F, d.H, d.L})
    write_val<std::int32_t>(out, v);
  write_val<std::uint64_t>(out, static_cast<std::uint64_t>(state_.params.size()));

  write_val<std::int64_t>(out, state_.opt.step);
  write_val<double>(out, state_.ws.mu_p);
  for (int i = 0; i < 4; ++i) write_val<double>(out, state_.ws.alpha[i]);
  for (int i = 0; i < 4; ++i) write_val<double>(out, state_.adapt_accum[i]);
  write_val<double>(out, state_.adapt_loss_accum);
  write_val<double>(out, state_.adapt_c1_accum);
  write_val<std::int32_t>(out, state_.adapt_count);

  write_vec(out, state_.params.values);
  write_vec(out, state_.params.adam_m);
  write_vec(out, state_.params.adam_v);
  write_vec(out, state_.last_psi);
}

Trainer Trainer::load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios_base::binary);
  if (!in) throw TrainError("cannot read checkpoint: " + path.string());
  char magic[8];
  read_raw(in, magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw TrainError("bad checkpoint magic: " + path.string());
  const auto version = read_val<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw TrainError("unsupported checkpoint version " + std::to_string(version));

  const auto cfg_len = read_val<std::uint64_t>(in);
  if (cfg_len > (1ull << 24)) throw TrainError("corrupt checkpoint: config too large");
  std::string cfg_json(cfg_len, '\0');
  read_raw(in, cfg_json.data(), cfg_len);
  const ProblemConfig cfg = config_from_json_text(cfg_json);

  const auto seed = read_val<std::uint64_t>(in);
  Trainer t(cfg, seed);
  t.state_.epoch = static_cast<int>(read_val<std::int64_t>(in));

  const auto& d = t.eval_->model().dims();
  const int expect[] = {cfg.grid_nx, cfg.grid_ny, d.gx, d.gy, d.F, d.H, d.L};
  for (int v : expect) {
    const auto got = read_val<std::int32_t>(in);
    if (got != v)
      throw TrainError("checkpoint shape mismatch: stored " + std::to_string(got) +
                       ", expected " + std::to_string(v));
  }
  const auto n_params = read_val<std::uint64_t>(in);
  if (static_cast<long>(n_params) != t.state_.params.size())
    throw TrainError("checkpoint parameter-count mismatch");

  t.state_.opt.step = read_val<std::int64_t>(in);
  t.state_.ws.mu_p = read_val<double>(in);
  for (int i = 0; i < 4; ++i) t.state_.ws.alpha[i] = read_val<double>(in);
  for (int i = 0; i < 4; ++i) t.state_.adapt_accum[i] = read_val<double>(in);
  t.state_.adapt_loss_accum = read_val<double>(in);
  t.state_.adapt_c1_accum = read_val<double>(in);
  t.state_.adapt_count = read_val<std::int32_t>(in);

  t.state_.params.values = read_vec(in);
  t.state_.params.adam_m = read_vec(in);
  t.state_.params.adam_v = read_vec(in);
  t.state_.last_psi = read_vec(in);
  if (t.state_.params.values.size() != t.state_.params.size())
    throw TrainError("checkpoint parameter payload mismatch");
  return t;
}

void Trainer::export_artifacts(const fs::path& out_dir, DensityMode mode) const {
  fs::create_directories(out_dir);
  FieldBatch batch;
  eval_->conditioned_fields(state_.params, batch);

  DensityRaster raster;
  raster.nx = eval_->grid().nx;
  raster.ny = eval_->grid().ny;
  raster.width = cfg_.width;
  raster.height = cfg_.height;
  raster.rho.resize(batch.psi.size());
  for (long j = 0; j < batch.psi.size(); ++j)
    raster.rho[j] = mode == DensityMode::Hard ? SmoothedHeaviside::hard(batch.psi[j])
                                              : eval_->heaviside().train(batch.psi[j]);
  export_density(raster, mode, out_dir);
  export_residuals(batch, eval_->grid(), out_dir / "residuals.csv");
}

}  // namespace lcsmto
