#include <random>

#include "doctest.h"
#include "lcsmto/gp.hpp"

using namespace lcsmto;

namespace {

Eigen::VectorXd randn(long n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (long i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

}  // namespace

TEST_SUITE_BEGIN("gp");

TEST_CASE("kernel basics") {
  Kernel k;
  CHECK(k(Eigen::RowVector2d(0.3, 0.4), Eigen::RowVector2d(0.3, 0.4)) == doctest::Approx(1.0));
  const double d2 = 0.01 * 0.01;
  CHECK(k(Eigen::RowVector2d(0, 0), Eigen::RowVector2d(0.01, 0)) ==
        doctest::Approx(std::exp(-1e3 * d2)));
}

TEST_CASE("smoothed heaviside: range, midpoint, derivative") {
  SmoothedHeaviside h;
  CHECK(h.train(0.0) == doctest::Approx(0.5));
  CHECK(h.train(1.0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(h.train(-1.0) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(h.train_deriv(0.0) == doctest::Approx(5.0));  // beta / 2
  const double eps = 1e-6;
  CHECK(h.train_deriv(0.07) ==
        doctest::Approx((h.train(0.07 + eps) - h.train(0.07 - eps)) / (2 * eps)).epsilon(1e-6));
  CHECK(SmoothedHeaviside::hard(0.0) == 1.0);
  CHECK(SmoothedHeaviside::hard(-1e-12) == 0.0);
}

TEST_CASE("conditioning reproduces anchor values at the anchors") {
  // Conditioned at the anchor locations themselves, the field must return the
  // prescribed boundary data whatever the mean network does.
  std::mt19937_64 rng(7);
  for (const auto& name : preset_names()) {
    ProblemConfig c = preset_config(name);
    c.n_bc_per_side = 12;
    const BoundaryAnchors a = sample_boundary(c);
    const Kernel kernel{c.gp.gamma, c.gp.nugget};
    for (int draw = 0; draw < 10; ++draw) {
      // One mean draw, evaluated consistently at the (coinciding) query and
      // anchor locations — conditioning must then return the anchor data.
      const Eigen::VectorXd m = randn(a.u.count(), rng);
      const Eigen::VectorXd z = ConditionedField::condition_at(kernel, a.u, a.u.points, m, m);
      for (int i = 0; i < a.u.count(); ++i) {
        const double scale = std::max(1.0, std::abs(a.u.values[i]));
        CHECK(std::abs(z[i] - a.u.values[i]) / scale <= 1e-4);
      }
    }
  }
}

TEST_CASE("conditioning is exact for a mean that already matches the anchors") {
  ProblemConfig c = preset_config("rugby");
  c.n_bc_per_side = 8;
  const BoundaryAnchors a = sample_boundary(c);
  const CollocationGrid g = build_grid([&] {
    ProblemConfig cc = c;
    cc.grid_nx = cc.grid_ny = 9;
    return cc;
  }());
  const Kernel kernel{c.gp.gamma, c.gp.nugget};
  ConditionedField cf(kernel, a.u, g.points);
  // m(X) == y makes the correction vanish: z == m(xq).
  const Eigen::VectorXd mq = Eigen::VectorXd::LinSpaced(g.count(), -1.0, 2.0);
  const Eigen::VectorXd z = cf.apply(mq, a.u.values);
  CHECK((z - mq).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("apply is affine and apply_adjoint is its exact transpose") {
  ProblemConfig c = preset_config("rugby");
  c.n_bc_per_side = 6;
  const BoundaryAnchors a = sample_boundary(c);
  ProblemConfig cs = c;
  cs.grid_nx = cs.grid_ny = 7;
  const CollocationGrid g = build_grid(cs);
  const Kernel kernel{c.gp.gamma, c.gp.nugget};
  ConditionedField cf(kernel, a.psi, g.points);

  std::mt19937_64 rng(11);
  const long nq = g.count(), na = a.psi.count();
  const Eigen::VectorXd mq1 = randn(nq, rng), mq2 = randn(nq, rng);
  const Eigen::VectorXd ma1 = randn(na, rng), ma2 = randn(na, rng);

  // Affinity: z(m + d) - z(m) is linear in d.
  const Eigen::VectorXd base = cf.apply(mq1, ma1);
  const Eigen::VectorXd shifted = cf.apply(mq1 + 2.0 * mq2, ma1 + 2.0 * ma2);
  const Eigen::VectorXd lin = cf.apply(mq2, ma2) - cf.apply(Eigen::VectorXd::Zero(nq),
                                                            Eigen::VectorXd::Zero(na));
  CHECK((shifted - base - 2.0 * lin).cwiseAbs().maxCoeff() <= 1e-9);

  // Transpose identity: <A m, w> == <m, A^T w> for the linear part.
  const Eigen::VectorXd w = randn(nq, rng);
  Eigen::VectorXd mbar_q = Eigen::VectorXd::Zero(nq);
  Eigen::VectorXd mbar_a = Eigen::VectorXd::Zero(na);
  cf.apply_adjoint(w, mbar_q, mbar_a);
  const double lhs = lin.dot(w);  // <A [mq2, ma2], w>
  const double rhs = mbar_q.dot(mq2) + mbar_a.dot(ma2);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("factorization sanity is tracked") {
  ProblemConfig c = preset_config("rugby");
  c.n_bc_per_side = 10;
  const BoundaryAnchors a = sample_boundary(c);
  ProblemConfig cs = c;
  cs.grid_nx = cs.grid_ny = 5;
  const CollocationGrid g = build_grid(cs);
  ConditionedField cf(Kernel{c.gp.gamma, c.gp.nugget}, a.u, g.points);
  CHECK(cf.factorization_residual() < 1e-6);
  CHECK(cf.n_anchors() == a.u.count());
  CHECK(cf.n_query() == g.count());
}

TEST_SUITE_END();
