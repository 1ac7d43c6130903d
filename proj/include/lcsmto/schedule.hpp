#pragma once

#include <Eigen/Core>

#include "lcsmto/config.hpp"
#include "lcsmto/grid.hpp"
#include "lcsmto/physics.hpp"

namespace lcsmto {

/// Block-wise curriculum for the volume-fraction target: starts at 1, steps
/// down once per block of b_s epochs, reaches V_target at i_t and stays there.
struct ScheduleState {
  int block_size = 20;
  int target_epoch = 4000;
  double exponent = 1.0;
  double v_target = 0.5;

  static ScheduleState from_config(const ProblemConfig& c) {
    return {c.schedule.block_size, c.schedule.target_epoch, c.schedule.exponent, c.v_target};
  }
};

double scheduled_volume(int epoch, const ScheduleState& sched);

/// Distance-based interface weighting plus the adaptive penalty state.
struct WeightState {
  bool enabled = true;
  double delta = 0.1;
  double w_low = 0.9;
  double w_high = 2.0;
  int activation_epoch = 9000;

  double mu_p = 10.0;
  double mu_p_growth = 1.05;
  double mu_p_max = 1e6;
  double c1_sq_tol = 1e-5;
  double alpha_c_growth = 1.3;
  double alpha_c_decay = 0.9;
  double alpha_c_max = 1e4;
  int adapt_every = 100;
  Eigen::Vector4d alpha = Eigen::Vector4d::Ones();  // [r_mx, r_my, r_c, volume]

  static WeightState from_config(const ProblemConfig& c) {
    WeightState w;
    w.enabled = c.weighting.enabled;
    w.delta = c.weighting.delta;
    w.w_low = c.weighting.w_low;
    w.w_high = c.weighting.w_high;
    w.activation_epoch = c.weighting.activation_epoch;
    w.mu_p = c.penalty.mu_p;
    w.mu_p_growth = c.penalty.mu_p_growth;
    w.mu_p_max = c.penalty.mu_p_max;
    w.c1_sq_tol = c.penalty.c1_sq_tol;
    w.alpha_c_growth = c.penalty.alpha_c_growth;
    w.alpha_c_decay = c.penalty.alpha_c_decay;
    w.alpha_c_max = c.penalty.alpha_c_max;
    w.adapt_every = c.penalty.adapt_every;
    return w;
  }
};

/// Distance from every lattice point to the discrete zero level set, taken as
/// the midpoints of lattice edges where psi changes sign. +inf when no sign
/// change exists.
Eigen::VectorXd interface_distance(const Eigen::VectorXd& psi, const CollocationGrid& grid);

/// Eq.-style piecewise-linear ramp; all ones before the activation epoch.
Eigen::VectorXd local_weights(const Eigen::VectorXd& d, const WeightState& ws, int epoch);

/// Per-term values of the assembled penalty loss.
struct LossBreakdown {
  double objective = 0.0;            // L_o
  double r_mx = 0.0, r_my = 0.0, r_c = 0.0;  // integrated squared residuals (unweighted by alpha)
  double c1 = 0.0;                   // volume constraint value (signed)
  double c1_sq = 0.0;
  double total = 0.0;
  Eigen::Vector4d alpha = Eigen::Vector4d::Ones();
  double mu_p = 0.0;
  double v_scheduled = 1.0;
};

/// total = L_o + mu_p [ sum_i alpha_i sum_j w_j r_i^2 w_quad + alpha_4 C1^2 ],
/// C1 = sum_j rho_j w_quad - V_scheduled |Omega|.
LossBreakdown assemble_loss(const FieldBatch& batch, const Eigen::VectorXd& weights,
                            double v_scheduled, const WeightState& ws,
                            const CollocationGrid& grid);

/// Rebalances the three residual weights against each other: each is scaled
/// by the ratio of the mean total loss to that term's mean contribution,
/// clipped to [1/10, 10], then renormalized to mean 1 over the residual
/// triple. The clip bounds the spread, so a persistently small residual
/// (continuity late in training) cannot absorb the weight budget.
///
/// The volume-constraint weight is deliberately excluded from that
/// equalization: carving material out of an all-fluid state has to overcome
/// the objective's preference for open flow, which requires the constraint
/// term to *dominate* the loss for a while — exactly the situation
/// contribution-balancing would undo. Instead it follows its own controller:
/// multiplied by alpha_c_growth while the windowed mean C1^2 exceeds
/// c1_sq_tol, decayed by alpha_c_decay once the constraint is met, and kept
/// in [1, alpha_c_max]. mu_p grows by its fixed factor toward the cap.
///
/// `term_means` holds the mean contributions of the four penalty terms
/// (mu_p- and alpha-weighted) since the last adaptation; `loss_mean` the
/// mean total loss and `c1_sq_mean` the mean raw constraint violation over
/// the same window.
void adapt_weights(const Eigen::Vector4d& term_means, double loss_mean, double c1_sq_mean,
                   WeightState& ws);

}  // namespace lcsmto
