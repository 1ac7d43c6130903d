#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

#include "lcsmto/grid.hpp"

namespace lcsmto {

struct GpError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Squared-exponential kernel k(a, b) = exp(-gamma * |a-b|^2). gamma is fixed
/// for the whole run and never trained.
struct Kernel {
  double gamma = 1e3;
  double nugget = 1e-8;

  double operator()(const Eigen::RowVector2d& a, const Eigen::RowVector2d& b) const {
    return std::exp(-gamma * (a - b).squaredNorm());
  }
};

/// h_beta(psi) = 0.5*(1 + tanh(beta*psi)) during training; a hard sign
/// threshold (psi >= 0 -> 1, fluid) for export.
struct SmoothedHeaviside {
  double beta = 10.0;

  double train(double psi) const { return 0.5 * (1.0 + std::tanh(beta * psi)); }
  double train_deriv(double psi) const {
    // sech^2 via the exponential form: 1 - tanh^2 rounds to exactly zero for
    // |beta psi| > ~19, which freezes a saturated level set for good (Adam
    // normalizes the gradient scale away, but not an exact zero). This form
    // stays nonzero down to ~1e-300.
    const double e = std::exp(-2.0 * std::abs(beta * psi));
    const double s = 2.0 * std::sqrt(e) / (1.0 + e);
    return 0.5 * beta * s * s;
  }
  static double hard(double psi) { return psi >= 0.0 ? 1.0 : 0.0; }
};

/// Conditioning operator for one variable: caches C = k(Xq, X) K^-1 so each
/// epoch costs one matrix-vector product. The conditioned field
///   z(xq) = m(xq) + C (y - m(X))
/// is affine in the mean values, which makes the adjoint a plain transpose.
class ConditionedField {
 public:
  ConditionedField() = default;
  ConditionedField(const Kernel& kernel, const AnchorSet& anchors,
                   const Eigen::MatrixX2d& query_points, double cache_cap_mb = 1024.0);

  int n_anchors() const { return static_cast<int>(anchor_values_.size()); }
  int n_query() const { return static_cast<int>(cross_.rows()); }
  const Eigen::VectorXd& anchor_values() const { return anchor_values_; }
  const Eigen::MatrixXd& cross() const { return cross_; }
  double factorization_residual() const { return factorization_residual_; }

  /// z = m_query + C (y - m_anchor)
  Eigen::VectorXd apply(const Eigen::VectorXd& mean_query,
                        const Eigen::VectorXd& mean_anchor) const;

  /// Given dL/dz, accumulate dL/dm at query (+= zbar) and anchor (-= C^T zbar)
  /// points.
  void apply_adjoint(const Eigen::VectorXd& zbar, Eigen::Ref<Eigen::VectorXd> mbar_query,
                     Eigen::Ref<Eigen::VectorXd> mbar_anchor) const;

  /// Evaluate the conditioned field at arbitrary points (diagnostics/tests).
  static Eigen::VectorXd condition_at(const Kernel& kernel, const AnchorSet& anchors,
                                      const Eigen::MatrixX2d& query,
                                      const Eigen::VectorXd& mean_query,
                                      const Eigen::VectorXd& mean_anchor);

 private:
  Eigen::MatrixXd cross_;  // n_query x n_anchors, rows k(xq, X) K^-1
  Eigen::VectorXd anchor_values_;
  double factorization_residual_ = 0.0;
};

/// Cross-kernel matrix k(points, anchors) without the K^-1 factor.
Eigen::MatrixXd cross_kernel(const Kernel& kernel, const Eigen::MatrixX2d& points,
                             const Eigen::MatrixX2d& anchors);

}  // namespace lcsmto
