#include "lcsmto/pgcan.hpp"

#include <Eigen/LU>
#include <cmath>
#include <random>

namespace lcsmto {

namespace {

using Eigen::Map;
using Eigen::MatrixXd;
using Eigen::VectorXd;

using ConstMat = Map<const MatrixXd>;
using ConstVec = Map<const VectorXd>;
using MutMat = Map<MatrixXd>;
using MutVec = Map<VectorXd>;

inline ConstMat mat(const Eigen::Ref<const VectorXd>& v, long off, int rows, int cols) {
  return ConstMat(v.data() + off, rows, cols);
}
inline ConstVec vec(const Eigen::Ref<const VectorXd>& v, long off, int n) {
  return ConstVec(v.data() + off, n);
}
inline MutMat mmat(Eigen::Ref<VectorXd> v, long off, int rows, int cols) {
  return MutMat(v.data() + off, rows, cols);
}
inline MutVec mvec(Eigen::Ref<VectorXd> v, long off, int n) {
  return MutVec(v.data() + off, n);
}

// tanh through the vectorized exp kernel; saturates correctly at +-1.
inline void tanh_inplace(MatrixXd& m) {
  m = 1.0 - 2.0 * ((2.0 * m.array()).exp() + 1.0).inverse();
}

}  // namespace

Pgcan::Pgcan(const NetworkOptions& opts, double width, double height, std::uint64_t jitter_seed)
    : width_(width), height_(height) {
  dims_.gx = std::max(1, static_cast<int>(std::lround(opts.cells_per_unit * width)));
  dims_.gy = std::max(1, static_cast<int>(std::lround(opts.cells_per_unit * height)));
  dims_.F = opts.features;
  dims_.H = opts.hidden;
  dims_.L = opts.hidden_layers;
  cx_ = width_ / dims_.gx;
  cy_ = height_ / dims_.gy;

  // Fixed jitter table, drawn once; boundary vertices stay put so the grid
  // covers the domain exactly. Offsets are clamped to a quarter cell to keep
  // the quads convex.
  std::mt19937_64 rng(jitter_seed ^ 0x6a74746572ULL);
  std::normal_distribution<double> nx(0.0, opts.jitter_sigma_frac * cx_);
  std::normal_distribution<double> ny(0.0, opts.jitter_sigma_frac * cy_);
  for (int vol = 0; vol < 2; ++vol) {
    auto& pos = vertex_pos_[vol];
    pos.resize(dims_.vertices(), 2);
    for (int iy = 0; iy <= dims_.gy; ++iy) {
      for (int ix = 0; ix <= dims_.gx; ++ix) {
        const long id = static_cast<long>(iy) * (dims_.gx + 1) + ix;
        double jx = std::clamp(nx(rng), -0.25 * cx_, 0.25 * cx_);
        double jy = std::clamp(ny(rng), -0.25 * cy_, 0.25 * cy_);
        if (ix == 0 || ix == dims_.gx) jx = 0.0;
        if (iy == 0 || iy == dims_.gy) jy = 0.0;
        pos(id, 0) = ix * cx_ + jx;
        pos(id, 1) = iy * cy_ + jy;
      }
    }
  }
}

void Pgcan::init_params(std::uint64_t seed, ParamVector& pv) const {
  pv.resize(dims_.total());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> feat(0.0, 0.1);
  for (long i = 0; i < 2 * dims_.grid_size(); ++i) pv.values[i] = feat(rng);

  auto glorot = [&](long off, int rows, int cols) {
    const double a = std::sqrt(6.0 / (rows + cols));
    std::uniform_real_distribution<double> u(-a, a);
    for (long i = 0; i < static_cast<long>(rows) * cols; ++i) pv.values[off + i] = u(rng);
  };
  const int H = dims_.H, F = dims_.F, O = dims_.O;
  glorot(dims_.off_w_in(), H, 2 * F);
  for (int k = 0; k < dims_.L; ++k) {
    glorot(dims_.off_w(k), H, H);
    glorot(dims_.off_a(k), H, H);
  }
  glorot(dims_.off_p1(), H, F);
  glorot(dims_.off_p2(), H, F);
  glorot(dims_.off_w_out(), O, H);
  // biases stay zero
}

Pgcan::PointSet Pgcan::prepare(const Eigen::MatrixX2d& points) const {
  const long n = points.rows();
  PointSet ps;
  ps.points = points;
  ps.cell_ix.resize(n);
  ps.cell_iy.resize(n);
  ps.w[0].resize(n, 4);
  ps.w[1].resize(n, 4);

  const double tol = 1e-9 * std::max(width_, height_);
  for (long i = 0; i < n; ++i) {
    const double x = points(i, 0), y = points(i, 1);
    if (x < -tol || x > width_ + tol || y < -tol || y > height_ + tol)
      throw DomainError("query point outside the design domain");
    const int ix = std::clamp(static_cast<int>(std::floor(x / cx_)), 0, dims_.gx - 1);
    const int iy = std::clamp(static_cast<int>(std::floor(y / cy_)), 0, dims_.gy - 1);
    ps.cell_ix[i] = ix;
    ps.cell_iy[i] = iy;

    for (int vol = 0; vol < 2; ++vol) {
      const auto& pos = vertex_pos_[vol];
      const long v00 = static_cast<long>(iy) * (dims_.gx + 1) + ix;
      const long v10 = v00 + 1;
      const long v01 = v00 + (dims_.gx + 1);
      const long v11 = v01 + 1;
      const Eigen::Vector2d p00 = pos.row(v00), p10 = pos.row(v10), p01 = pos.row(v01),
                            p11 = pos.row(v11);
      // Inverse bilinear map of the (mildly distorted) quad via Newton.
      double s = (x - ix * cx_) / cx_;
      double t = (y - iy * cy_) / cy_;
      for (int it = 0; it < 12; ++it) {
        const Eigen::Vector2d pp = (1 - s) * (1 - t) * p00 + s * (1 - t) * p10 +
                                   (1 - s) * t * p01 + s * t * p11;
        const Eigen::Vector2d r = pp - Eigen::Vector2d(x, y);
        if (r.norm() < 1e-14) break;
        const Eigen::Vector2d ds = (1 - t) * (p10 - p00) + t * (p11 - p01);
        const Eigen::Vector2d dt = (1 - s) * (p01 - p00) + s * (p11 - p10);
        Eigen::Matrix2d J;
        J.col(0) = ds;
        J.col(1) = dt;
        const Eigen::Vector2d step = J.inverse() * r;
        s -= step[0];
        t -= step[1];
      }
      ps.w[vol](i, 0) = (1 - s) * (1 - t);
      ps.w[vol](i, 1) = s * (1 - t);
      ps.w[vol](i, 2) = (1 - s) * t;
      ps.w[vol](i, 3) = s * t;
    }
  }
  return ps;
}

void Pgcan::smooth_grid(const Eigen::Ref<const VectorXd>& grid, VectorXd& out) const {
  const int gx = dims_.gx, gy = dims_.gy, F = dims_.F;
  out.setZero(dims_.grid_size());
  for (int iy = 0; iy <= gy; ++iy) {
    for (int ix = 0; ix <= gx; ++ix) {
      const long base = (static_cast<long>(iy) * (gx + 1) + ix) * F;
      for (int dy = -1; dy <= 1; ++dy) {
        const int jy = std::clamp(iy + dy, 0, gy);
        for (int dx = -1; dx <= 1; ++dx) {
          const int jx = std::clamp(ix + dx, 0, gx);
          const long src = (static_cast<long>(jy) * (gx + 1) + jx) * F;
          for (int f = 0; f < F; ++f) out[base + f] += grid[src + f];
        }
      }
      for (int f = 0; f < F; ++f) out[base + f] /= 9.0;
    }
  }
}

void Pgcan::smooth_grid_adjoint(const Eigen::Ref<const VectorXd>& sbar,
                                Eigen::Ref<VectorXd> gbar) const {
  const int gx = dims_.gx, gy = dims_.gy, F = dims_.F;
  for (int iy = 0; iy <= gy; ++iy) {
    for (int ix = 0; ix <= gx; ++ix) {
      const long base = (static_cast<long>(iy) * (gx + 1) + ix) * F;
      for (int dy = -1; dy <= 1; ++dy) {
        const int jy = std::clamp(iy + dy, 0, gy);
        for (int dx = -1; dx <= 1; ++dx) {
          const int jx = std::clamp(ix + dx, 0, gx);
          const long dst = (static_cast<long>(jy) * (gx + 1) + jx) * F;
          for (int f = 0; f < F; ++f) gbar[dst + f] += sbar[base + f] / 9.0;
        }
      }
    }
  }
}

void Pgcan::gather(const VectorXd& smoothed, const PointSet& ps, int volume, long r0, long nb,
                   Eigen::Ref<MatrixXd> out) const {
  const int F = dims_.F;
  for (long i = 0; i < nb; ++i) {
    const long r = r0 + i;
    const long v00 = (static_cast<long>(ps.cell_iy[r]) * (dims_.gx + 1) + ps.cell_ix[r]) * F;
    const long v10 = v00 + F;
    const long v01 = v00 + static_cast<long>(dims_.gx + 1) * F;
    const long v11 = v01 + F;
    const double w0 = ps.w[volume](r, 0), w1 = ps.w[volume](r, 1), w2 = ps.w[volume](r, 2),
                 w3 = ps.w[volume](r, 3);
    for (int f = 0; f < F; ++f)
      out(i, f) = w0 * smoothed[v00 + f] + w1 * smoothed[v10 + f] + w2 * smoothed[v01 + f] +
                  w3 * smoothed[v11 + f];
  }
}

void Pgcan::scatter(const PointSet& ps, int volume, long r0, long nb,
                    const Eigen::Ref<const MatrixXd>& fbar, VectorXd& sbar) const {
  const int F = dims_.F;
  for (long i = 0; i < nb; ++i) {
    const long r = r0 + i;
    const long v00 = (static_cast<long>(ps.cell_iy[r]) * (dims_.gx + 1) + ps.cell_ix[r]) * F;
    const long v10 = v00 + F;
    const long v01 = v00 + static_cast<long>(dims_.gx + 1) * F;
    const long v11 = v01 + F;
    const double w0 = ps.w[volume](r, 0), w1 = ps.w[volume](r, 1), w2 = ps.w[volume](r, 2),
                 w3 = ps.w[volume](r, 3);
    for (int f = 0; f < F; ++f) {
      const double b = fbar(i, f);
      sbar[v00 + f] += w0 * b;
      sbar[v10 + f] += w1 * b;
      sbar[v01 + f] += w2 * b;
      sbar[v11 + f] += w3 * b;
    }
  }
}

void Pgcan::forward(const ParamVector& pv, const PointSet& ps, Workspace& ws,
                    MatrixXd& out) const {
  const int F = dims_.F, H = dims_.H, L = dims_.L, O = dims_.O;
  const long n = ps.count();
  const auto& v = pv.values;

  smooth_grid(v.segment(dims_.off_grid(0), dims_.grid_size()), ws.s1);
  smooth_grid(v.segment(dims_.off_grid(1), dims_.grid_size()), ws.s2);

  ws.X0.resize(n, 2 * F);
  gather(ws.s1, ps, 0, 0, n, ws.X0.leftCols(F));
  gather(ws.s2, ps, 1, 0, n, ws.X0.rightCols(F));

  const auto P1 = mat(v, dims_.off_p1(), H, F);
  const auto P2 = mat(v, dims_.off_p2(), H, F);
  ws.L1.noalias() = ws.X0.leftCols(F) * P1.transpose();
  ws.L2.noalias() = ws.X0.rightCols(F) * P2.transpose();

  ws.h.resize(L + 1);
  ws.g.resize(L);
  ws.t.resize(L);

  const auto W_in = mat(v, dims_.off_w_in(), H, 2 * F);
  const auto b_in = vec(v, dims_.off_b_in(), H);
  ws.h[0].noalias() = ws.X0 * W_in.transpose();
  ws.h[0].rowwise() += b_in.transpose();
  tanh_inplace(ws.h[0]);

  for (int k = 0; k < L; ++k) {
    const auto W = mat(v, dims_.off_w(k), H, H);
    const auto b = vec(v, dims_.off_b(k), H);
    const auto A = mat(v, dims_.off_a(k), H, H);
    const auto c = vec(v, dims_.off_c(k), H);

    ws.g[k].noalias() = ws.h[k] * A.transpose();
    ws.g[k].rowwise() += c.transpose();
    ws.g[k] = ((-ws.g[k].array()).exp() + 1.0).inverse();  // sigmoid

    ws.t[k].noalias() = ws.h[k] * W.transpose();
    ws.t[k].rowwise() += b.transpose();
    tanh_inplace(ws.t[k]);

    ws.h[k + 1] = (1.0 - ws.g[k].array()) * ws.L1.array() + ws.g[k].array() * ws.L2.array() +
                  ws.t[k].array();
  }

  const auto W_out = mat(v, dims_.off_w_out(), O, H);
  const auto b_out = vec(v, dims_.off_b_out(), O);
  out.noalias() = ws.h[L] * W_out.transpose();
  out.rowwise() += b_out.transpose();
}

void Pgcan::backward(const ParamVector& pv, const PointSet& ps, Workspace& ws,
                     const MatrixXd& out_bar, Eigen::Ref<VectorXd> grad) const {
  const int F = dims_.F, H = dims_.H, L = dims_.L, O = dims_.O;
  const long n = ps.count();
  const auto& v = pv.values;

  const auto W_out = mat(v, dims_.off_w_out(), O, H);
  mmat(grad, dims_.off_w_out(), O, H).noalias() += out_bar.transpose() * ws.h[L];
  mvec(grad, dims_.off_b_out(), O) += out_bar.colwise().sum();

  ws.hbar.noalias() = out_bar * W_out;  // n x H
  ws.L1bar.resize(n, H);
  ws.L1bar.setZero();
  ws.L2bar.resize(n, H);
  ws.L2bar.setZero();
  ws.tmp.resize(n, H);
  ws.hprev.resize(n, H);

  for (int k = L - 1; k >= 0; --k) {
    const auto W = mat(v, dims_.off_w(k), H, H);
    const auto A = mat(v, dims_.off_a(k), H, H);

    ws.L1bar.array() += ws.hbar.array() * (1.0 - ws.g[k].array());
    ws.L2bar.array() += ws.hbar.array() * ws.g[k].array();

    // tanh branch
    ws.tmp = ws.hbar.array() * (1.0 - ws.t[k].array().square());
    mmat(grad, dims_.off_w(k), H, H).noalias() += ws.tmp.transpose() * ws.h[k];
    mvec(grad, dims_.off_b(k), H) += ws.tmp.colwise().sum();
    ws.hprev.noalias() = ws.tmp * W;

    // gate branch
    ws.tmp = ws.hbar.array() * (ws.L2.array() - ws.L1.array()) * ws.g[k].array() *
             (1.0 - ws.g[k].array());
    mmat(grad, dims_.off_a(k), H, H).noalias() += ws.tmp.transpose() * ws.h[k];
    mvec(grad, dims_.off_c(k), H) += ws.tmp.colwise().sum();
    ws.hprev.noalias() += ws.tmp * A;

    ws.hbar.swap(ws.hprev);
  }

  // input layer
  ws.tmp = ws.hbar.array() * (1.0 - ws.h[0].array().square());
  const auto W_in = mat(v, dims_.off_w_in(), H, 2 * F);
  mmat(grad, dims_.off_w_in(), H, 2 * F).noalias() += ws.tmp.transpose() * ws.X0;
  mvec(grad, dims_.off_b_in(), H) += ws.tmp.colwise().sum();
  ws.X0bar.noalias() = ws.tmp * W_in;  // n x 2F

  // lifts
  const auto P1 = mat(v, dims_.off_p1(), H, F);
  const auto P2 = mat(v, dims_.off_p2(), H, F);
  mmat(grad, dims_.off_p1(), H, F).noalias() += ws.L1bar.transpose() * ws.X0.leftCols(F);
  mmat(grad, dims_.off_p2(), H, F).noalias() += ws.L2bar.transpose() * ws.X0.rightCols(F);
  ws.X0bar.leftCols(F).noalias() += ws.L1bar * P1;
  ws.X0bar.rightCols(F).noalias() += ws.L2bar * P2;

  // encoder scatter, then smoothing transpose into the raw grids
  ws.s1bar.setZero(dims_.grid_size());
  ws.s2bar.setZero(dims_.grid_size());
  scatter(ps, 0, 0, n, ws.X0bar.leftCols(F), ws.s1bar);
  scatter(ps, 1, 0, n, ws.X0bar.rightCols(F), ws.s2bar);
  smooth_grid_adjoint(ws.s1bar, grad.segment(dims_.off_grid(0), dims_.grid_size()));
  smooth_grid_adjoint(ws.s2bar, grad.segment(dims_.off_grid(1), dims_.grid_size()));
}

namespace {
constexpr long kTile = 512;  // rows per cache-resident block
}

void Pgcan::tile_forward(const ParamVector& pv, Workspace& ws, long nb,
                         Eigen::Ref<MatrixXd> out) const {
  const int F = dims_.F, H = dims_.H, L = dims_.L, O = dims_.O;
  const auto& v = pv.values;

  const auto P1 = mat(v, dims_.off_p1(), H, F);
  const auto P2 = mat(v, dims_.off_p2(), H, F);
  ws.L1.resize(nb, H);
  ws.L2.resize(nb, H);
  ws.L1.noalias() = ws.X0.leftCols(F) * P1.transpose();
  ws.L2.noalias() = ws.X0.rightCols(F) * P2.transpose();

  ws.h.resize(L + 1);
  ws.g.resize(L);
  ws.t.resize(L);

  const auto W_in = mat(v, dims_.off_w_in(), H, 2 * F);
  const auto b_in = vec(v, dims_.off_b_in(), H);
  ws.h[0].resize(nb, H);
  ws.h[0].noalias() = ws.X0 * W_in.transpose();
  ws.h[0].rowwise() += b_in.transpose();
  tanh_inplace(ws.h[0]);

  for (int k = 0; k < L; ++k) {
    const auto W = mat(v, dims_.off_w(k), H, H);
    const auto b = vec(v, dims_.off_b(k), H);
    const auto A = mat(v, dims_.off_a(k), H, H);
    const auto c = vec(v, dims_.off_c(k), H);

    ws.g[k].resize(nb, H);
    ws.g[k].noalias() = ws.h[k] * A.transpose();
    ws.g[k].rowwise() += c.transpose();
    ws.g[k] = ((-ws.g[k].array()).exp() + 1.0).inverse();

    ws.t[k].resize(nb, H);
    ws.t[k].noalias() = ws.h[k] * W.transpose();
    ws.t[k].rowwise() += b.transpose();
    tanh_inplace(ws.t[k]);

    ws.h[k + 1].resize(nb, H);
    ws.h[k + 1] = (1.0 - ws.g[k].array()) * ws.L1.array() + ws.g[k].array() * ws.L2.array() +
                  ws.t[k].array();
  }

  const auto W_out = mat(v, dims_.off_w_out(), O, H);
  const auto b_out = vec(v, dims_.off_b_out(), O);
  out.noalias() = ws.h[L] * W_out.transpose();
  out.rowwise() += b_out.transpose();
}

void Pgcan::forward_fast(const ParamVector& pv, const PointSet& ps, Workspace& ws,
                         MatrixXd& out) const {
  const int F = dims_.F, O = dims_.O;
  const long n = ps.count();
  const auto& v = pv.values;

  smooth_grid(v.segment(dims_.off_grid(0), dims_.grid_size()), ws.s1);
  smooth_grid(v.segment(dims_.off_grid(1), dims_.grid_size()), ws.s2);

  out.resize(n, O);
  for (long r0 = 0; r0 < n; r0 += kTile) {
    const long nb = std::min(kTile, n - r0);
    ws.X0.resize(nb, 2 * F);
    gather(ws.s1, ps, 0, r0, nb, ws.X0.leftCols(F));
    gather(ws.s2, ps, 1, r0, nb, ws.X0.rightCols(F));
    tile_forward(pv, ws, nb, out.middleRows(r0, nb));
  }
}

void Pgcan::backward_fast(const ParamVector& pv, const PointSet& ps, Workspace& ws,
                          const MatrixXd& out_bar, Eigen::Ref<VectorXd> grad) const {
  const int F = dims_.F, H = dims_.H, L = dims_.L, O = dims_.O;
  const long n = ps.count();
  const auto& v = pv.values;

  smooth_grid(v.segment(dims_.off_grid(0), dims_.grid_size()), ws.s1);
  smooth_grid(v.segment(dims_.off_grid(1), dims_.grid_size()), ws.s2);
  ws.s1bar.setZero(dims_.grid_size());
  ws.s2bar.setZero(dims_.grid_size());

  MatrixXd out_tile;
  const auto W_out = mat(v, dims_.off_w_out(), O, H);
  const auto W_in = mat(v, dims_.off_w_in(), H, 2 * F);
  const auto P1 = mat(v, dims_.off_p1(), H, F);
  const auto P2 = mat(v, dims_.off_p2(), H, F);

  for (long r0 = 0; r0 < n; r0 += kTile) {
    const long nb = std::min(kTile, n - r0);
    ws.X0.resize(nb, 2 * F);
    gather(ws.s1, ps, 0, r0, nb, ws.X0.leftCols(F));
    gather(ws.s2, ps, 1, r0, nb, ws.X0.rightCols(F));
    out_tile.resize(nb, O);
    tile_forward(pv, ws, nb, out_tile);

    const auto ob = out_bar.middleRows(r0, nb);
    mmat(grad, dims_.off_w_out(), O, H).noalias() += ob.transpose() * ws.h[L];
    mvec(grad, dims_.off_b_out(), O) += ob.colwise().sum();

    ws.hbar.resize(nb, H);
    ws.hbar.noalias() = ob * W_out;
    ws.L1bar.resize(nb, H);
    ws.L1bar.setZero();
    ws.L2bar.resize(nb, H);
    ws.L2bar.setZero();
    ws.tmp.resize(nb, H);
    ws.hprev.resize(nb, H);

    for (int k = L - 1; k >= 0; --k) {
      const auto W = mat(v, dims_.off_w(k), H, H);
      const auto A = mat(v, dims_.off_a(k), H, H);

      ws.L1bar.array() += ws.hbar.array() * (1.0 - ws.g[k].array());
      ws.L2bar.array() += ws.hbar.array() * ws.g[k].array();

      ws.tmp = ws.hbar.array() * (1.0 - ws.t[k].array().square());
      mmat(grad, dims_.off_w(k), H, H).noalias() += ws.tmp.transpose() * ws.h[k];
      mvec(grad, dims_.off_b(k), H) += ws.tmp.colwise().sum();
      ws.hprev.noalias() = ws.tmp * W;

      ws.tmp = ws.hbar.array() * (ws.L2.array() - ws.L1.array()) * ws.g[k].array() *
               (1.0 - ws.g[k].array());
      mmat(grad, dims_.off_a(k), H, H).noalias() += ws.tmp.transpose() * ws.h[k];
      mvec(grad, dims_.off_c(k), H) += ws.tmp.colwise().sum();
      ws.hprev.noalias() += ws.tmp * A;

      ws.hbar.swap(ws.hprev);
    }

    ws.tmp = ws.hbar.array() * (1.0 - ws.h[0].array().square());
    mmat(grad, dims_.off_w_in(), H, 2 * F).noalias() += ws.tmp.transpose() * ws.X0;
    mvec(grad, dims_.off_b_in(), H) += ws.tmp.colwise().sum();
    ws.X0bar.resize(nb, 2 * F);
    ws.X0bar.noalias() = ws.tmp * W_in;

    mmat(grad, dims_.off_p1(), H, F).noalias() += ws.L1bar.transpose() * ws.X0.leftCols(F);
    mmat(grad, dims_.off_p2(), H, F).noalias() += ws.L2bar.transpose() * ws.X0.rightCols(F);
    ws.X0bar.leftCols(F).noalias() += ws.L1bar * P1;
    ws.X0bar.rightCols(F).noalias() += ws.L2bar * P2;

    scatter(ps, 0, r0, nb, ws.X0bar.leftCols(F), ws.s1bar);
    scatter(ps, 1, r0, nb, ws.X0bar.rightCols(F), ws.s2bar);
  }

  smooth_grid_adjoint(ws.s1bar, grad.segment(dims_.off_grid(0), dims_.grid_size()));
  smooth_grid_adjoint(ws.s2bar, grad.segment(dims_.off_grid(1), dims_.grid_size()));
}

void Pgcan::forward_ref(const ParamVector& pv, const PointSet& ps,
                        Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>& out) const {
  using MatLD = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using VecLD = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  const int gx = dims_.gx, gy = dims_.gy;
  const int F = dims_.F, H = dims_.H, L = dims_.L, O = dims_.O;
  const long n = ps.count();
  const auto& v = pv.values;

  // 3x3 smoothing of both feature volumes.
  VecLD s[2];
  for (int vol = 0; vol < 2; ++vol) {
    const long off = dims_.off_grid(vol);
    s[vol].setZero(dims_.grid_size());
    for (int iy = 0; iy <= gy; ++iy) {
      for (int ix = 0; ix <= gx; ++ix) {
        const long base = (static_cast<long>(iy) * (gx + 1) + ix) * F;
        for (int dy = -1; dy <= 1; ++dy) {
          const int jy = std::clamp(iy + dy, 0, gy);
          for (int dx = -1; dx <= 1; ++dx) {
            const int jx = std::clamp(ix + dx, 0, gx);
            const long src = (static_cast<long>(jy) * (gx + 1) + jx) * F;
            for (int f = 0; f < F; ++f) s[vol][base + f] += v[off + src + f];
          }
        }
        for (int f = 0; f < F; ++f) s[vol][base + f] /= 9.0L;
      }
    }
  }

  // Bilinear gather with the precomputed stencil weights.
  MatLD X0(n, 2 * F);
  for (int vol = 0; vol < 2; ++vol) {
    for (long i = 0; i < n; ++i) {
      const long v00 = (static_cast<long>(ps.cell_iy[i]) * (gx + 1) + ps.cell_ix[i]) * F;
      const long v10 = v00 + F;
      const long v01 = v00 + static_cast<long>(gx + 1) * F;
      const long v11 = v01 + F;
      const long double w0 = ps.w[vol](i, 0), w1 = ps.w[vol](i, 1), w2 = ps.w[vol](i, 2),
                        w3 = ps.w[vol](i, 3);
      for (int f = 0; f < F; ++f)
        X0(i, vol * F + f) = w0 * s[vol][v00 + f] + w1 * s[vol][v10 + f] +
                             w2 * s[vol][v01 + f] + w3 * s[vol][v11 + f];
    }
  }

  const MatLD P1 = mat(v, dims_.off_p1(), H, F).cast<long double>();
  const MatLD P2 = mat(v, dims_.off_p2(), H, F).cast<long double>();
  const MatLD L1 = X0.leftCols(F) * P1.transpose();
  const MatLD L2 = X0.rightCols(F) * P2.transpose();

  MatLD h = X0 * mat(v, dims_.off_w_in(), H, 2 * F).cast<long double>().transpose();
  h.rowwise() += vec(v, dims_.off_b_in(), H).cast<long double>().transpose();
  h = h.array().tanh();

  for (int k = 0; k < L; ++k) {
    MatLD g = h * mat(v, dims_.off_a(k), H, H).cast<long double>().transpose();
    g.rowwise() += vec(v, dims_.off_c(k), H).cast<long double>().transpose();
    g = ((-g.array()).exp() + 1.0L).inverse();

    MatLD t = h * mat(v, dims_.off_w(k), H, H).cast<long double>().transpose();
    t.rowwise() += vec(v, dims_.off_b(k), H).cast<long double>().transpose();
    t = t.array().tanh();

    h = (1.0L - g.array()) * L1.array() + g.array() * L2.array() + t.array();
  }

  out = h * mat(v, dims_.off_w_out(), O, H).cast<long double>().transpose();
  out.rowwise() += vec(v, dims_.off_b_out(), O).cast<long double>().transpose();
}

void Pgcan::encode(const ParamVector& pv, double x, double y, VectorXd& f1, VectorXd& f2) const {
  Eigen::MatrixX2d pts(1, 2);
  pts << x, y;
  const PointSet ps = prepare(pts);
  VectorXd s1, s2;
  smooth_grid(pv.values.segment(dims_.off_grid(0), dims_.grid_size()), s1);
  smooth_grid(pv.values.segment(dims_.off_grid(1), dims_.grid_size()), s2);
  MatrixXd o1(1, dims_.F), o2(1, dims_.F);
  gather(s1, ps, 0, 0, 1, o1);
  gather(s2, ps, 1, 0, 1, o2);
  f1 = o1.row(0);
  f2 = o2.row(0);
}

Eigen::Vector4d Pgcan::decode(const ParamVector& pv, const VectorXd& f1,
                              const VectorXd& f2) const {
  const int F = dims_.F, H = dims_.H, L = dims_.L, O = dims_.O;
  const auto& v = pv.values;
  VectorXd x0(2 * F);
  x0 << f1, f2;
  const VectorXd l1 = mat(v, dims_.off_p1(), H, F) * f1;
  const VectorXd l2 = mat(v, dims_.off_p2(), H, F) * f2;
  VectorXd h = (mat(v, dims_.off_w_in(), H, 2 * F) * x0 + vec(v, dims_.off_b_in(), H))
                   .array()
                   .tanh();
  for (int k = 0; k < L; ++k) {
    const VectorXd g =
        ((-(mat(v, dims_.off_a(k), H, H) * h + vec(v, dims_.off_c(k), H)).array()).exp() + 1.0)
            .inverse();
    const VectorXd t =
        (mat(v, dims_.off_w(k), H, H) * h + vec(v, dims_.off_b(k), H)).array().tanh();
    h = ((1.0 - g.array()) * l1.array() + g.array() * l2.array() + t.array()).matrix();
  }
  return mat(v, dims_.off_w_out(), O, H) * h + vec(v, dims_.off_b_out(), O);
}

MatrixXd Pgcan::forward_batch(const ParamVector& pv, const Eigen::MatrixX2d& points) const {
  const PointSet ps = prepare(points);
  Workspace ws;
  MatrixXd out;
  forward(pv, ps, ws, out);
  return out;
}

}  // namespace lcsmto
