#pragma once

#include <Eigen/Core>
#include <memory>

#include "lcsmto/config.hpp"
#include "lcsmto/gp.hpp"
#include "lcsmto/grid.hpp"
#include "lcsmto/pgcan.hpp"
#include "lcsmto/physics.hpp"
#include "lcsmto/schedule.hpp"

namespace lcsmto {

/// Per-epoch inputs assembled before the loss/gradient evaluation. The local
/// weights are treated as fixed data for the epoch (they come from the
/// previous forward's level set).
struct EpochInputs {
  Eigen::VectorXd weights;  // per collocation point, all ones when inactive
  double v_scheduled = 1.0;
  WeightState ws;
};

struct LossResult {
  double loss = 0.0;
  LossBreakdown breakdown;
  FieldBatch batch;        // conditioned fields + derivatives + residuals
  Eigen::VectorXd psi;     // conditioned level set on the lattice
};

/// Owns everything needed to evaluate the scalar loss and its exact
/// reverse-mode gradient for one problem: the collocation lattice, the
/// boundary anchors, the GP conditioning operators (constant affine maps,
/// kernels are fixed) and the mean network.
class LossEvaluator {
 public:
  LossEvaluator(const ProblemConfig& config, std::uint64_t seed);
  ~LossEvaluator();

  const ProblemConfig& config() const { return cfg_; }
  const CollocationGrid& grid() const { return grid_; }
  const BoundaryAnchors& anchors() const { return anchors_; }
  const Pgcan& model() const { return model_; }
  const SmoothedHeaviside& heaviside() const { return heaviside_; }
  std::uint64_t seed() const { return seed_; }

  ParamVector make_params() const;

  /// Forward evaluation only (no tape needed by the caller).
  LossResult evaluate(const ParamVector& pv, const EpochInputs& in) const;

  /// Forward + backward. grad is zeroed and filled; loss matches evaluate()
  /// to roundoff. Throws on non-finite loss or gradient, naming the term.
  LossResult loss_and_grad(const ParamVector& pv, const EpochInputs& in,
                           Eigen::VectorXd& grad) const;

  /// Central-difference check over `n_coords` deterministically sampled
  /// coordinates; returns max |g_ad - g_fd| / (|g_fd| + 1e-8). The differenced
  /// loss is evaluated in extended precision (evaluate_ref) so the check is
  /// limited by the step's truncation error, not by rounding of the loss value.
  double fd_gradcheck(const ParamVector& pv, const EpochInputs& in, int n_coords, double step,
                      std::uint64_t sample_seed = 0) const;

  /// Same loss as evaluate(), accumulated in long double throughout.
  long double evaluate_ref(const ParamVector& pv, const EpochInputs& in) const;

  /// Level-set field on the lattice for the current parameters (used to build
  /// next epoch's interface weights without a full loss evaluation).
  Eigen::VectorXd psi_on_lattice(const ParamVector& pv) const;

  /// Conditioned fields at the lattice for given parameters (export paths).
  void conditioned_fields(const ParamVector& pv, FieldBatch& batch) const;

 private:
  ProblemConfig cfg_;
  std::uint64_t seed_ = 0;
  CollocationGrid grid_;
  BoundaryAnchors anchors_;
  Pgcan model_;
  Pgcan::PointSet points_;  // lattice + stacked anchor points
  Stencils stencils_;
  SmoothedHeaviside heaviside_;
  MaterialConstants mat_;
  ConditionedField cf_u_, cf_v_, cf_p_, cf_psi_;
  long n_cp_ = 0;
  long off_u_ = 0, off_v_ = 0, off_p_ = 0, off_psi_ = 0;  // anchor row offsets
  long n_total_ = 0;

  struct Tape;
  mutable std::unique_ptr<Tape> scratch_;  // reused across epochs
  void forward_internal(const ParamVector& pv, const EpochInputs& in, LossResult& out,
                        Tape* tape) const;
};

}  // namespace lcsmto
