#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "lcsmto/config.hpp"

namespace lcsmto {

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat parameter layout: [grid1, grid2, W_in, b_in, {W_k, b_k, A_k, c_k} x L,
/// P1, P2, W_out, b_out]. Grids store vertex-major, feature-minor:
/// index = (iy*(gx+1) + ix)*F + f.
struct PgcanDims {
  int gx = 32, gy = 32;  // encoder cells per axis
  int F = 8;             // features per vertex
  int H = 64;            // decoder width
  int L = 3;             // hidden layers
  int O = 4;             // outputs (m_u, m_v, m_p, m_psi)

  long vertices() const { return static_cast<long>(gx + 1) * (gy + 1); }
  long grid_size() const { return vertices() * F; }
  long off_grid(int vol) const { return vol * grid_size(); }
  long off_w_in() const { return 2 * grid_size(); }
  long off_b_in() const { return off_w_in() + static_cast<long>(H) * 2 * F; }
  long layer_block() const { return 2L * H * H + 2L * H; }
  long off_layer(int k) const { return off_b_in() + H + k * layer_block(); }
  long off_w(int k) const { return off_layer(k); }
  long off_b(int k) const { return off_layer(k) + static_cast<long>(H) * H; }
  long off_a(int k) const { return off_b(k) + H; }
  long off_c(int k) const { return off_a(k) + static_cast<long>(H) * H; }
  long off_p1() const { return off_layer(L); }
  long off_p2() const { return off_p1() + static_cast<long>(H) * F; }
  long off_w_out() const { return off_p2() + static_cast<long>(H) * F; }
  long off_b_out() const { return off_w_out() + static_cast<long>(O) * H; }
  long total() const { return off_b_out() + O; }
};

/// All trainable parameters plus the parallel gradient and Adam moment buffers.
struct ParamVector {
  Eigen::VectorXd values;
  Eigen::VectorXd grad;
  Eigen::VectorXd adam_m;
  Eigen::VectorXd adam_v;

  void resize(long n) {
    values.setZero(n);
    grad.setZero(n);
    adam_m.setZero(n);
    adam_v.setZero(n);
  }
  long size() const { return values.size(); }
};

/// Parametric-grid convolutional attention network. Two trainable feature
/// volumes are 3x3-smoothed, sampled at jittered vertex positions via bilinear
/// interpolation, and fed to a gated 3x64 decoder with 4 outputs.
class Pgcan {
 public:
  Pgcan(const NetworkOptions& opts, double width, double height, std::uint64_t jitter_seed);

  const PgcanDims& dims() const { return dims_; }
  double width() const { return width_; }
  double height() const { return height_; }

  /// Decoder weights get uniform Glorot-style fan scaling, feature grids
  /// N(0, 0.1^2), biases zero. Deterministic in the seed.
  void init_params(std::uint64_t seed, ParamVector& pv) const;

  /// Precomputed interpolation stencil for a fixed point set: cell corner plus
  /// 4 bilinear weights per feature volume (jitter makes them differ).
  struct PointSet {
    Eigen::MatrixX2d points;
    Eigen::ArrayXi cell_ix, cell_iy;
    Eigen::Matrix<double, Eigen::Dynamic, 4> w[2];
    long count() const { return points.rows(); }
  };
  PointSet prepare(const Eigen::MatrixX2d& points) const;

  struct Workspace {
    Eigen::MatrixXd X0;            // N x 2F, [f1 f2]
    Eigen::MatrixXd L1, L2;        // N x H lifted features
    std::vector<Eigen::MatrixXd> h;  // h[0..L], each N x H
    std::vector<Eigen::MatrixXd> g;  // gate activations, N x H
    std::vector<Eigen::MatrixXd> t;  // tanh branch activations, N x H
    // Scratch reused across epochs to avoid ~50 MB of churn per step.
    Eigen::VectorXd s1, s2, s1bar, s2bar;
    Eigen::MatrixXd hbar, L1bar, L2bar, tmp, hprev, X0bar;
  };

  /// out is N x 4. Records intermediates for one backward sweep.
  void forward(const ParamVector& pv, const PointSet& ps, Workspace& ws,
               Eigen::MatrixXd& out) const;

  /// Accumulates d(sum(out .* out_bar))/d(params) into grad.
  void backward(const ParamVector& pv, const PointSet& ps, Workspace& ws,
                const Eigen::MatrixXd& out_bar, Eigen::Ref<Eigen::VectorXd> grad) const;

  /// Cache-blocked variants used by the training loop: forward_fast keeps no
  /// activations (out only); backward_fast recomputes them tile by tile.
  /// Values and gradients match forward/backward to roundoff.
  void forward_fast(const ParamVector& pv, const PointSet& ps, Workspace& ws,
                    Eigen::MatrixXd& out) const;
  void backward_fast(const ParamVector& pv, const PointSet& ps, Workspace& ws,
                     const Eigen::MatrixXd& out_bar, Eigen::Ref<Eigen::VectorXd> grad) const;

  /// Extended-precision forward (same math, long double accumulation). The
  /// finite-difference gradient check differences this instead of the double
  /// pipeline so the check is not drowned by rounding of the loss value.
  void forward_ref(const ParamVector& pv, const PointSet& ps,
                   Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>& out) const;

  /// Single-point conveniences (tests, diagnostics).
  void encode(const ParamVector& pv, double x, double y, Eigen::VectorXd& f1,
              Eigen::VectorXd& f2) const;
  Eigen::Vector4d decode(const ParamVector& pv, const Eigen::VectorXd& f1,
                         const Eigen::VectorXd& f2) const;
  Eigen::MatrixXd forward_batch(const ParamVector& pv, const Eigen::MatrixX2d& points) const;

  /// Jittered vertex positions of one feature volume (row = vertex id).
  const Eigen::MatrixX2d& vertex_positions(int volume) const { return vertex_pos_[volume]; }

  /// 3x3 edge-replicated uniform smoothing of a feature volume (exposed for
  /// tests). grid has grid_size() entries.
  void smooth_grid(const Eigen::Ref<const Eigen::VectorXd>& grid, Eigen::VectorXd& out) const;
  void smooth_grid_adjoint(const Eigen::Ref<const Eigen::VectorXd>& sbar,
                           Eigen::Ref<Eigen::VectorXd> gbar) const;

 private:
  PgcanDims dims_;
  double width_ = 1.0, height_ = 1.0;
  double cx_ = 0.0, cy_ = 0.0;  // cell sizes
  Eigen::MatrixX2d vertex_pos_[2];

  void gather(const Eigen::VectorXd& smoothed, const PointSet& ps, int volume, long r0, long nb,
              Eigen::Ref<Eigen::MatrixXd> out) const;
  void scatter(const PointSet& ps, int volume, long r0, long nb,
               const Eigen::Ref<const Eigen::MatrixXd>& fbar, Eigen::VectorXd& sbar) const;
  // Forward pass over rows [r0, r0+nb) with tile-sized workspace buffers.
  void tile_forward(const ParamVector& pv, Workspace& ws, long nb,
                    Eigen::Ref<Eigen::MatrixXd> out) const;
};

}  // namespace lcsmto
