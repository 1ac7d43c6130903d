#include "lcsmto/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace lcsmto {

double scheduled_volume(int epoch, const ScheduleState& s) {
  const int b_n = s.target_epoch / s.block_size;
  const int block = std::min(b_n, epoch / s.block_size);
  const double frac = 1.0 - static_cast<double>(block) / b_n;
  return s.v_target + (1.0 - s.v_target) * std::pow(frac, s.exponent);
}

Eigen::VectorXd interface_distance(const Eigen::VectorXd& psi, const CollocationGrid& grid) {
  const int nx = grid.nx, ny = grid.ny;
  std::vector<Eigen::Vector2d> mids;
  auto maybe_mid = [&](int a, int b) {
    const double pa = psi[a], pb = psi[b];
    if ((pa < 0.0) != (pb < 0.0) || pa == 0.0 || pb == 0.0)
      mids.emplace_back(0.5 * (grid.points.row(a) + grid.points.row(b)));
  };
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix + 1 < nx; ++ix) maybe_mid(grid.index(ix, iy), grid.index(ix + 1, iy));
  for (int iy = 0; iy + 1 < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) maybe_mid(grid.index(ix, iy), grid.index(ix, iy + 1));

  Eigen::VectorXd d(grid.count());
  if (mids.empty()) {
    d.setConstant(std::numeric_limits<double>::infinity());
    return d;
  }
  for (int j = 0; j < grid.count(); ++j) {
    const Eigen::Vector2d p = grid.points.row(j);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& m : mids) best = std::min(best, (p - m).squaredNorm());
    d[j] = std::sqrt(best);
  }
  return d;
}

Eigen::VectorXd local_weights(const Eigen::VectorXd& d, const WeightState& ws, int epoch) {
  if (!ws.enabled || epoch < ws.activation_epoch)
    return Eigen::VectorXd::Ones(d.size());
  Eigen::VectorXd w(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i)
    w[i] = d[i] < ws.delta ? ws.w_high - (ws.w_high - ws.w_low) * d[i] / ws.delta : ws.w_low;
  return w;
}

LossBreakdown assemble_loss(const FieldBatch& batch, const Eigen::VectorXd& weights,
                            double v_scheduled, const WeightState& ws,
                            const CollocationGrid& grid) {
  LossBreakdown out;
  const double wq = grid.cell_weight();
  out.objective = dissipated_power(batch, grid);
  // Extended-precision accumulation keeps the loss smooth enough for tight
  // central-difference checks despite its large magnitude.
  long double smx = 0, smy = 0, sc = 0, srho = 0;
  for (Eigen::Index j = 0; j < weights.size(); ++j) {
    smx += static_cast<long double>(weights[j]) * batch.r_mx[j] * batch.r_mx[j];
    smy += static_cast<long double>(weights[j]) * batch.r_my[j] * batch.r_my[j];
    sc += static_cast<long double>(weights[j]) * batch.r_c[j] * batch.r_c[j];
    srho += batch.rho[j];
  }
  out.r_mx = static_cast<double>(wq * smx);
  out.r_my = static_cast<double>(wq * smy);
  out.r_c = static_cast<double>(wq * sc);
  out.c1 = static_cast<double>(srho * wq - static_cast<long double>(v_scheduled) * grid.area());
  out.c1_sq = out.c1 * out.c1;
  out.alpha = ws.alpha;
  out.mu_p = ws.mu_p;
  out.v_scheduled = v_scheduled;
  out.total = out.objective +
              ws.mu_p * (ws.alpha[0] * out.r_mx + ws.alpha[1] * out.r_my + ws.alpha[2] * out.r_c +
                         ws.alpha[3] * out.c1_sq);
  if (!std::isfinite(out.total)) {
    const char* term = !std::isfinite(out.objective) ? "objective"
                       : !std::isfinite(out.r_mx)    ? "momentum-x residual"
                       : !std::isfinite(out.r_my)    ? "momentum-y residual"
                       : !std::isfinite(out.r_c)     ? "continuity residual"
                                                     : "volume constraint";
    throw PhysicsError(std::string("non-finite loss term: ") + term);
  }
  return out;
}

void adapt_weights(const Eigen::Vector4d& term_means, double loss_mean, double c1_sq_mean,
                   WeightState& ws) {
  const Eigen::Vector4d mags = term_means.cwiseAbs().cwiseMax(1e-300);
  const double ref = std::max(std::abs(loss_mean), 1e-300);
  // The clip bounds the updated weight itself, so a persistent ordering of
  // the residual magnitudes cannot compound indefinitely: before
  // renormalization every weight stays within [1/10, 10].
  for (int i = 0; i < 3; ++i)
    ws.alpha[i] = std::clamp(ws.alpha[i] * (ref / mags[i]), 0.1, 10.0);
  const double res_sum = ws.alpha[0] + ws.alpha[1] + ws.alpha[2];
  ws.alpha.head<3>() *= 3.0 / res_sum;  // renormalize residual weights to mean 1
  const double factor = c1_sq_mean > ws.c1_sq_tol ? ws.alpha_c_growth : ws.alpha_c_decay;
  ws.alpha[3] = std::clamp(ws.alpha[3] * factor, 1.0, ws.alpha_c_max);
  ws.mu_p = std::min(ws.mu_p * ws.mu_p_growth, ws.mu_p_max);
}

}  // namespace lcsmto
