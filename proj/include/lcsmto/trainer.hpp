#pragma once

#include <filesystem>
#include <functional>
#include <optional>

#include "lcsmto/adjoint.hpp"
#include "lcsmto/io.hpp"

namespace lcsmto {

struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Adam with a step-decay learning rate. Decay epochs come from the config.
struct OptimizerState {
  double lr0 = 1e-3;
  double decay = 0.75;
  std::vector<int> decay_epochs;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 100.0;
  long step = 0;

  static OptimizerState from_config(const OptimizerOptions& o) {
    return {o.lr, o.decay, o.decay_epochs, o.beta1, o.beta2, o.eps, o.grad_clip, 0};
  }
  double lr_at(int epoch) const;
};

/// Standard bias-corrected Adam update; aborts on non-finite gradients.
/// The gradient is rescaled to opt.grad_clip in global 2-norm when it exceeds
/// it: a single loss transient otherwise inflates the second moments by the
/// squared spike, and with beta2 = 0.999 that suppresses the affected
/// parameters' steps for thousands of epochs afterwards.
void adam_step(ParamVector& params, const Eigen::VectorXd& grad, OptimizerState& opt, int epoch);

struct TrainOptions {
  std::optional<int> epochs;      // override config epochs
  bool deterministic = false;     // zeroes wall-time column in history.csv
  std::optional<bool> weighting;  // override localized weighting on/off
  int checkpoint_every = 1000;
  std::function<void(int, const LossBreakdown&)> on_epoch;  // optional hook
};

struct TrainOutcome {
  int final_epoch = 0;
  LossBreakdown final_breakdown;
  double final_volume_fraction_hard = 0.0;
  double runtime_s = 0.0;
};

/// Full training state needed for bit-identical resume.
struct TrainerState {
  ParamVector params;
  OptimizerState opt;
  WeightState ws;
  int epoch = 0;
  Eigen::Vector4d adapt_accum = Eigen::Vector4d::Zero();
  double adapt_loss_accum = 0.0;
  double adapt_c1_accum = 0.0;
  int adapt_count = 0;
  Eigen::VectorXd last_psi;  // level set of the previous epoch (interface weights)
};

class Trainer {
 public:
  Trainer(const ProblemConfig& config, std::uint64_t seed);

  /// Runs the optimization loop, writing history.csv, checkpoints, and final
  /// exports (density, residuals, summary.json, config snapshot) to out_dir.
  TrainOutcome train(const std::filesystem::path& out_dir, const TrainOptions& opts = {});

  /// Continues a checkpointed run in the directory that holds the checkpoint.
  static TrainOutcome resume(const std::filesystem::path& checkpoint,
                             const TrainOptions& opts = {});

  const LossEvaluator& evaluator() const { return *eval_; }
  TrainerState& state() { return state_; }

  void save_checkpoint(const std::filesystem::path& path) const;
  static Trainer load_checkpoint(const std::filesystem::path& path);

  /// Final (or current) exports without running further epochs.
  void export_artifacts(const std::filesystem::path& out_dir, DensityMode mode) const;

 private:
  ProblemConfig cfg_;
  std::uint64_t seed_ = 0;
  std::unique_ptr<LossEvaluator> eval_;
  TrainerState state_;

  TrainOutcome run_loop(const std::filesystem::path& out_dir, const TrainOptions& opts,
                        bool fresh);
};

/// Checkpoint format: magic "LCSMTOCK", little-endian u32 version, shape
/// header, then f64 parameter/moment payloads.
inline constexpr char kCheckpointMagic[8] = {'L', 'C', 'S', 'M', 'T', 'O', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 2;

}  // namespace lcsmto
