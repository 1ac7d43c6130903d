#include "lcsmto/gp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace lcsmto {

Eigen::MatrixXd cross_kernel(const Kernel& kernel, const Eigen::MatrixX2d& points,
                             const Eigen::MatrixX2d& anchors) {
  const auto n = points.rows();
  const auto m = anchors.rows();
  Eigen::MatrixXd out(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double ax = anchors(j, 0), ay = anchors(j, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double dx = points(i, 0) - ax, dy = points(i, 1) - ay;
      out(i, j) = std::exp(-kernel.gamma * (dx * dx + dy * dy));
    }
  }
  return out;
}

ConditionedField::ConditionedField(const Kernel& kernel, const AnchorSet& anchors,
                                   const Eigen::MatrixX2d& query_points, double cache_cap_mb) {
  if (anchors.count() == 0) throw GpError("conditioning requires a nonempty anchor set");

  const double required_bytes =
      8.0 * static_cast<double>(query_points.rows()) * anchors.count();
  if (required_bytes > cache_cap_mb * 1024.0 * 1024.0) {
    std::ostringstream ss;
    ss << "cross-kernel cache would need " << static_cast<long long>(required_bytes)
       << " bytes, exceeding the cap of " << static_cast<long long>(cache_cap_mb * 1024.0 * 1024.0);
    throw GpError(ss.str());
  }

  Eigen::MatrixXd K = cross_kernel(kernel, anchors.points, anchors.points);
  K.diagonal().array() += kernel.nugget;

  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K, Eigen::EigenvaluesOnly);
    std::ostringstream ss;
    ss << "Gram matrix factorization failed; eigenvalue range [" << es.eigenvalues().minCoeff()
       << ", " << es.eigenvalues().maxCoeff() << "], condition estimate "
       << es.eigenvalues().maxCoeff() / std::max(es.eigenvalues().minCoeff(), 1e-300);
    throw GpError(ss.str());
  }

  // ||K K^-1 - I||_inf, the factorization sanity bound.
  Eigen::MatrixXd Kinv = llt.solve(Eigen::MatrixXd::Identity(K.rows(), K.cols()));
  factorization_residual_ = (K * Kinv - Eigen::MatrixXd::Identity(K.rows(), K.cols()))
                                .cwiseAbs()
                                .rowwise()
                                .sum()
                                .maxCoeff();
  if (factorization_residual_ >= 1e-6) {
    std::ostringstream ss;
    ss << "Gram matrix ill-conditioned: ||K K^-1 - I||_inf = " << factorization_residual_;
    throw GpError(ss.str());
  }

  cross_ = cross_kernel(kernel, query_points, anchors.points) * Kinv;
  anchor_values_ = anchors.values;
}

Eigen::VectorXd ConditionedField::apply(const Eigen::VectorXd& mean_query,
                                        const Eigen::VectorXd& mean_anchor) const {
  return mean_query + cross_ * (anchor_values_ - mean_anchor);
}

void ConditionedField::apply_adjoint(const Eigen::VectorXd& zbar,
                                     Eigen::Ref<Eigen::VectorXd> mbar_query,
                                     Eigen::Ref<Eigen::VectorXd> mbar_anchor) const {
  mbar_query += zbar;
  mbar_anchor.noalias() -= cross_.transpose() * zbar;
}

Eigen::VectorXd ConditionedField::condition_at(const Kernel& kernel, const AnchorSet& anchors,
                                               const Eigen::MatrixX2d& query,
                                               const Eigen::VectorXd& mean_query,
                                               const Eigen::VectorXd& mean_anchor) {
  ConditionedField cf(kernel, anchors, query);
  return cf.apply(mean_query, mean_anchor);
}

}  // namespace lcsmto
