#include "lcsmto/adjoint.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace lcsmto {

namespace {

Eigen::MatrixX2d stack_points(const CollocationGrid& grid, const BoundaryAnchors& a) {
  const long n = grid.count() + a.u.count() + a.v.count() + a.p.count() + a.psi.count();
  Eigen::MatrixX2d pts(n, 2);
  long r = 0;
  pts.middleRows(r, grid.count()) = grid.points;
  r += grid.count();
  pts.middleRows(r, a.u.count()) = a.u.points;
  r += a.u.count();
  pts.middleRows(r, a.v.count()) = a.v.points;
  r += a.v.count();
  pts.middleRows(r, a.p.count()) = a.p.points;
  r += a.p.count();
  pts.middleRows(r, a.psi.count()) = a.psi.points;
  return pts;
}

}  // namespace

struct LossEvaluator::Tape {
  Pgcan::Workspace ws;
  Eigen::MatrixXd mean;     // n_total x 4
  Eigen::VectorXd psi_tilde;  // conditioned level set at lattice
};

LossEvaluator::~LossEvaluator() = default;

LossEvaluator::LossEvaluator(const ProblemConfig& config, std::uint64_t seed)
    : cfg_(config),
      seed_(seed),
      grid_(build_grid(config)),
      anchors_(sample_boundary(config)),
      model_(config.network, config.width, config.height, seed),
      stencils_(grid_.nx, grid_.ny, grid_.hx, grid_.hy),
      heaviside_{config.gp.beta},
      mat_{config.kappa_inv_max, config.kappa_inv_min, config.q} {
  n_cp_ = grid_.count();
  off_u_ = n_cp_;
  off_v_ = off_u_ + anchors_.u.count();
  off_p_ = off_v_ + anchors_.v.count();
  off_psi_ = off_p_ + anchors_.p.count();
  n_total_ = off_psi_ + anchors_.psi.count();

  points_ = model_.prepare(stack_points(grid_, anchors_));

  const Kernel kernel{cfg_.gp.gamma, cfg_.gp.nugget};
  const double cap = cfg_.gp.cache_cap_mb;
  cf_u_ = ConditionedField(kernel, anchors_.u, grid_.points, cap);
  cf_v_ = ConditionedField(kernel, anchors_.v, grid_.points, cap);
  cf_p_ = ConditionedField(kernel, anchors_.p, grid_.points, cap);
  cf_psi_ = ConditionedField(kernel, anchors_.psi, grid_.points, cap);
}

ParamVector LossEvaluator::make_params() const {
  ParamVector pv;
  model_.init_params(seed_, pv);
  return pv;
}

void LossEvaluator::forward_internal(const ParamVector& pv, const EpochInputs& in,
                                     LossResult& out, Tape* tape) const {
  Tape local;
  Tape& tp = tape ? *tape : local;

  model_.forward_fast(pv, points_, tp.ws, tp.mean);

  FieldBatch& b = out.batch;
  b.u = cf_u_.apply(tp.mean.col(0).head(n_cp_),
                    tp.mean.col(0).segment(off_u_, anchors_.u.count()));
  b.v = cf_v_.apply(tp.mean.col(1).head(n_cp_),
                    tp.mean.col(1).segment(off_v_, anchors_.v.count()));
  b.p = cf_p_.apply(tp.mean.col(2).head(n_cp_),
                    tp.mean.col(2).segment(off_p_, anchors_.p.count()));
  tp.psi_tilde = cf_psi_.apply(tp.mean.col(3).head(n_cp_),
                               tp.mean.col(3).segment(off_psi_, anchors_.psi.count()));
  b.psi = tp.psi_tilde;
  out.psi = tp.psi_tilde;

  b.rho.resize(n_cp_);
  b.kinv.resize(n_cp_);
  for (long j = 0; j < n_cp_; ++j) {
    b.rho[j] = heaviside_.train(tp.psi_tilde[j]);
    b.kinv[j] = material_interp(b.rho[j], mat_);
  }

  fd_derivatives(b, stencils_);
  residuals(b, cfg_.viscosity);

  out.breakdown = assemble_loss(b, in.weights, in.v_scheduled, in.ws, grid_);
  out.loss = out.breakdown.total;
}

LossResult LossEvaluator::evaluate(const ParamVector& pv, const EpochInputs& in) const {
  LossResult out;
  forward_internal(pv, in, out, nullptr);
  return out;
}

LossResult LossEvaluator::loss_and_grad(const ParamVector& pv, const EpochInputs& in,
                                        Eigen::VectorXd& grad) const {
  if (!scratch_) scratch_ = std::make_unique<Tape>();
  Tape& tape = *scratch_;
  LossResult out;
  forward_internal(pv, in, out, &tape);

  const FieldBatch& b = out.batch;
  const double wq = grid_.cell_weight();
  const double mu = cfg_.viscosity;
  const double mu_p = in.ws.mu_p;
  const Eigen::Vector4d& alpha = in.ws.alpha;
  const Eigen::ArrayXd& w = in.weights.array();

  // Residual-term cotangents: d/dr_i of mu_p alpha_i sum w r_i^2 wq.
  const Eigen::ArrayXd rmx_bar = 2.0 * mu_p * alpha[0] * wq * w * b.r_mx.array();
  const Eigen::ArrayXd rmy_bar = 2.0 * mu_p * alpha[1] * wq * w * b.r_my.array();
  const Eigen::ArrayXd rc_bar = 2.0 * mu_p * alpha[2] * wq * w * b.r_c.array();

  // Field/derivative cotangents, objective first.
  Eigen::VectorXd ux_bar = (wq * b.ux.array() + rc_bar).matrix();
  Eigen::VectorXd vy_bar = (wq * b.vy.array() + rc_bar).matrix();
  Eigen::VectorXd uy_bar = wq * b.uy;
  Eigen::VectorXd vx_bar = wq * b.vx;
  Eigen::VectorXd px_bar = (-rmx_bar).matrix();
  Eigen::VectorXd py_bar = (-rmy_bar).matrix();
  Eigen::VectorXd lapu_bar = (mu * rmx_bar).matrix();
  Eigen::VectorXd lapv_bar = (mu * rmy_bar).matrix();

  Eigen::VectorXd u_bar =
      (wq * b.kinv.array() * b.u.array() - mu * b.kinv.array() * rmx_bar).matrix();
  Eigen::VectorXd v_bar =
      (wq * b.kinv.array() * b.v.array() - mu * b.kinv.array() * rmy_bar).matrix();
  Eigen::ArrayXd kinv_bar = 0.5 * wq * (b.u.array().square() + b.v.array().square()) -
                            mu * b.u.array() * rmx_bar - mu * b.v.array() * rmy_bar;

  // Volume constraint.
  const double c1_bar = 2.0 * mu_p * alpha[3] * out.breakdown.c1;
  Eigen::ArrayXd rho_bar = Eigen::ArrayXd::Constant(n_cp_, c1_bar * wq);
  for (long j = 0; j < n_cp_; ++j)
    rho_bar[j] += kinv_bar[j] * material_interp_drho(b.rho[j], mat_);

  Eigen::VectorXd psi_bar(n_cp_);
  for (long j = 0; j < n_cp_; ++j)
    psi_bar[j] = rho_bar[j] * heaviside_.train_deriv(tape.psi_tilde[j]);

  // Stencil transposes fold the derivative cotangents back onto the fields.
  stencils_.dx_adjoint(ux_bar, u_bar);
  stencils_.dy_adjoint(uy_bar, u_bar);
  stencils_.laplacian_adjoint(lapu_bar, u_bar);
  stencils_.dx_adjoint(vx_bar, v_bar);
  stencils_.dy_adjoint(vy_bar, v_bar);
  stencils_.laplacian_adjoint(lapv_bar, v_bar);
  Eigen::VectorXd p_bar = Eigen::VectorXd::Zero(n_cp_);
  stencils_.dx_adjoint(px_bar, p_bar);
  stencils_.dy_adjoint(py_bar, p_bar);

  // Conditioning adjoint: mean cotangents at lattice and anchor points.
  Eigen::MatrixXd mean_bar = Eigen::MatrixXd::Zero(n_total_, 4);
  cf_u_.apply_adjoint(u_bar, mean_bar.col(0).head(n_cp_),
                      mean_bar.col(0).segment(off_u_, anchors_.u.count()));
  cf_v_.apply_adjoint(v_bar, mean_bar.col(1).head(n_cp_),
                      mean_bar.col(1).segment(off_v_, anchors_.v.count()));
  cf_p_.apply_adjoint(p_bar, mean_bar.col(2).head(n_cp_),
                      mean_bar.col(2).segment(off_p_, anchors_.p.count()));
  cf_psi_.apply_adjoint(psi_bar, mean_bar.col(3).head(n_cp_),
                        mean_bar.col(3).segment(off_psi_, anchors_.psi.count()));

  grad.setZero(pv.size());
  model_.backward_fast(pv, points_, tape.ws, mean_bar, grad);

  if (!grad.allFinite()) {
    std::ostringstream ss;
    ss << "non-finite gradient (loss terms: objective=" << out.breakdown.objective
       << ", r_mx=" << out.breakdown.r_mx << ", r_my=" << out.breakdown.r_my
       << ", r_c=" << out.breakdown.r_c << ", c1_sq=" << out.breakdown.c1_sq << ")";
    throw PhysicsError(ss.str());
  }
  return out;
}

namespace {

using VecLD = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
using MatLD = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

// First/second derivative lines in long double, mirroring Stencils exactly.
void d1_ld(const VecLD& f, VecLD& out, int nx, int ny, long double hx, long double hy,
           bool along_x) {
  out.resize(f.size());
  const int lines = along_x ? ny : nx;
  const int n = along_x ? nx : ny;
  const long stride = along_x ? 1 : nx;
  const long double inv2h = 0.5L / (along_x ? hx : hy);
  for (int l = 0; l < lines; ++l) {
    const long base = along_x ? static_cast<long>(l) * nx : l;
    auto at = [&](int i) { return base + static_cast<long>(i) * stride; };
    out[at(0)] = (-3.0L * f[at(0)] + 4.0L * f[at(1)] - f[at(2)]) * inv2h;
    for (int i = 1; i < n - 1; ++i) out[at(i)] = (f[at(i + 1)] - f[at(i - 1)]) * inv2h;
    out[at(n - 1)] = (3.0L * f[at(n - 1)] - 4.0L * f[at(n - 2)] + f[at(n - 3)]) * inv2h;
  }
}

void d2_ld(const VecLD& f, VecLD& out, int nx, int ny, long double hx, long double hy,
           bool along_x) {
  const int lines = along_x ? ny : nx;
  const int n = along_x ? nx : ny;
  const long stride = along_x ? 1 : nx;
  const long double h = along_x ? hx : hy;
  const long double invh2 = 1.0L / (h * h);
  for (int l = 0; l < lines; ++l) {
    const long base = along_x ? static_cast<long>(l) * nx : l;
    auto at = [&](int i) { return base + static_cast<long>(i) * stride; };
    const int e = n - 1;
    if (n >= 4) {
      out[at(0)] += (2.0L * f[at(0)] - 5.0L * f[at(1)] + 4.0L * f[at(2)] - f[at(3)]) * invh2;
      out[at(e)] +=
          (2.0L * f[at(e)] - 5.0L * f[at(e - 1)] + 4.0L * f[at(e - 2)] - f[at(e - 3)]) * invh2;
    } else {
      out[at(0)] += (f[at(0)] - 2.0L * f[at(1)] + f[at(2)]) * invh2;
      out[at(e)] += (f[at(e)] - 2.0L * f[at(e - 1)] + f[at(e - 2)]) * invh2;
    }
    for (int i = 1; i < e; ++i)
      out[at(i)] += (f[at(i + 1)] - 2.0L * f[at(i)] + f[at(i - 1)]) * invh2;
  }
}

}  // namespace

long double LossEvaluator::evaluate_ref(const ParamVector& pv, const EpochInputs& in) const {
  MatLD mean;
  model_.forward_ref(pv, points_, mean);

  auto cond = [&](const ConditionedField& cf, long off, long n_a, int col) {
    VecLD z = mean.col(col).head(n_cp_);
    z.noalias() += cf.cross().cast<long double>() *
                   (cf.anchor_values().cast<long double>() -
                    mean.col(col).segment(off, n_a).eval());
    return z;
  };
  const VecLD u = cond(cf_u_, off_u_, anchors_.u.count(), 0);
  const VecLD v = cond(cf_v_, off_v_, anchors_.v.count(), 1);
  const VecLD p = cond(cf_p_, off_p_, anchors_.p.count(), 2);
  const VecLD psi = cond(cf_psi_, off_psi_, anchors_.psi.count(), 3);

  VecLD rho(n_cp_), kinv(n_cp_);
  const long double beta = heaviside_.beta;
  const long double kmax = mat_.kappa_inv_max, kmin = mat_.kappa_inv_min, q = mat_.q;
  for (long j = 0; j < n_cp_; ++j) {
    rho[j] = 0.5L * (1.0L + std::tanh(beta * psi[j]));
    kinv[j] = kmax + (kmin - kmax) * rho[j] * (1.0L + q) / (rho[j] + q);
  }

  const int nx = grid_.nx, ny = grid_.ny;
  const long double hx = grid_.hx, hy = grid_.hy;
  VecLD ux, uy, vx, vy, px, py;
  d1_ld(u, ux, nx, ny, hx, hy, true);
  d1_ld(u, uy, nx, ny, hx, hy, false);
  d1_ld(v, vx, nx, ny, hx, hy, true);
  d1_ld(v, vy, nx, ny, hx, hy, false);
  d1_ld(p, px, nx, ny, hx, hy, true);
  d1_ld(p, py, nx, ny, hx, hy, false);
  VecLD lap_u = VecLD::Zero(n_cp_), lap_v = VecLD::Zero(n_cp_);
  d2_ld(u, lap_u, nx, ny, hx, hy, true);
  d2_ld(u, lap_u, nx, ny, hx, hy, false);
  d2_ld(v, lap_v, nx, ny, hx, hy, true);
  d2_ld(v, lap_v, nx, ny, hx, hy, false);

  const long double mu = cfg_.viscosity;
  const long double wq = grid_.cell_weight();
  long double obj = 0, smx = 0, smy = 0, sc = 0, srho = 0;
  for (long j = 0; j < n_cp_; ++j) {
    const long double w = in.weights[j];
    const long double rmx = -px[j] + mu * lap_u[j] - mu * kinv[j] * u[j];
    const long double rmy = -py[j] + mu * lap_v[j] - mu * kinv[j] * v[j];
    const long double rc = ux[j] + vy[j];
    obj += ux[j] * ux[j] + uy[j] * uy[j] + vx[j] * vx[j] + vy[j] * vy[j] +
           kinv[j] * (u[j] * u[j] + v[j] * v[j]);
    smx += w * rmx * rmx;
    smy += w * rmy * rmy;
    sc += w * rc * rc;
    srho += rho[j];
  }
  const long double c1 =
      srho * wq - static_cast<long double>(in.v_scheduled) * grid_.area();
  return 0.5L * wq * obj +
         static_cast<long double>(in.ws.mu_p) *
             (static_cast<long double>(in.ws.alpha[0]) * wq * smx +
              static_cast<long double>(in.ws.alpha[1]) * wq * smy +
              static_cast<long double>(in.ws.alpha[2]) * wq * sc +
              static_cast<long double>(in.ws.alpha[3]) * c1 * c1);
}

double LossEvaluator::fd_gradcheck(const ParamVector& pv, const EpochInputs& in, int n_coords,
                                   double step, std::uint64_t sample_seed) const {
  Eigen::VectorXd grad;
  loss_and_grad(pv, in, grad);

  ParamVector work = pv;
  std::mt19937_64 rng(sample_seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<long> pick(0, pv.size() - 1);

  double worst = 0.0;
  for (int k = 0; k < n_coords; ++k) {
    const long i = pick(rng);
    const double orig = work.values[i];
    work.values[i] = orig + step;
    const long double lp = evaluate_ref(work, in);
    work.values[i] = orig - step;
    const long double lm = evaluate_ref(work, in);
    work.values[i] = orig;
    const double g_fd = static_cast<double>((lp - lm) / (2.0L * step));
    const double err = std::abs(grad[i] - g_fd) / (std::abs(g_fd) + 1e-8);
    worst = std::max(worst, err);
  }
  return worst;
}

Eigen::VectorXd LossEvaluator::psi_on_lattice(const ParamVector& pv) const {
  Tape tape;
  model_.forward_fast(pv, points_, tape.ws, tape.mean);
  return cf_psi_.apply(tape.mean.col(3).head(n_cp_),
                       tape.mean.col(3).segment(off_psi_, anchors_.psi.count()));
}

void LossEvaluator::conditioned_fields(const ParamVector& pv, FieldBatch& batch) const {
  Tape tape;
  model_.forward_fast(pv, points_, tape.ws, tape.mean);
  batch.u = cf_u_.apply(tape.mean.col(0).head(n_cp_),
                        tape.mean.col(0).segment(off_u_, anchors_.u.count()));
  batch.v = cf_v_.apply(tape.mean.col(1).head(n_cp_),
                        tape.mean.col(1).segment(off_v_, anchors_.v.count()));
  batch.p = cf_p_.apply(tape.mean.col(2).head(n_cp_),
                        tape.mean.col(2).segment(off_p_, anchors_.p.count()));
  batch.psi = cf_psi_.apply(tape.mean.col(3).head(n_cp_),
                            tape.mean.col(3).segment(off_psi_, anchors_.psi.count()));
  batch.rho.resize(n_cp_);
  batch.kinv.resize(n_cp_);
  for (long j = 0; j < n_cp_; ++j) {
    batch.rho[j] = heaviside_.train(batch.psi[j]);
    batch.kinv[j] = material_interp(batch.rho[j], mat_);
  }
  fd_derivatives(batch, stencils_);
  residuals(batch, cfg_.viscosity);
}

}  // namespace lcsmto
