#include <random>

#include "doctest.h"
#include "lcsmto/pgcan.hpp"

using namespace lcsmto;

namespace {

NetworkOptions small_net() {
  NetworkOptions n;
  n.cells_per_unit = 6;
  n.features = 4;
  n.hidden = 16;
  n.hidden_layers = 2;
  return n;
}

Eigen::MatrixX2d random_points(long n, double w, double h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, w), uy(0.0, h);
  Eigen::MatrixX2d pts(n, 2);
  for (long i = 0; i < n; ++i) {
    pts(i, 0) = ux(rng);
    pts(i, 1) = uy(rng);
  }
  return pts;
}

}  // namespace

TEST_SUITE_BEGIN("pgcan");

TEST_CASE("parameter layout is dense and contiguous") {
  Pgcan net(small_net(), 1.0, 1.0, 3);
  const PgcanDims& d = net.dims();
  CHECK(d.gx == 6);
  CHECK(d.gy == 6);
  CHECK(d.off_w_in() == 2 * d.grid_size());
  CHECK(d.off_layer(0) == d.off_b_in() + d.H);
  CHECK(d.off_p1() == d.off_layer(d.L));
  CHECK(d.total() == d.off_b_out() + d.O);
  ParamVector pv;
  net.init_params(0, pv);
  CHECK(pv.size() == d.total());
}

TEST_CASE("init is deterministic in the seed, biases zero") {
  Pgcan net(small_net(), 1.0, 1.0, 5);
  ParamVector a, b, c;
  net.init_params(42, a);
  net.init_params(42, b);
  net.init_params(43, c);
  CHECK(a.values == b.values);
  CHECK(a.values != c.values);
  const PgcanDims& d = net.dims();
  CHECK(a.values.segment(d.off_b_in(), d.H).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.values.segment(d.off_b_out(), d.O).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("jitter keeps boundary vertices on the boundary and interior offsets small") {
  Pgcan net(small_net(), 2.0, 1.0, 9);
  const PgcanDims& d = net.dims();
  const double cx = 2.0 / d.gx, cy = 1.0 / d.gy;
  for (int vol = 0; vol < 2; ++vol) {
    const auto& pos = net.vertex_positions(vol);
    for (int iy = 0; iy <= d.gy; ++iy) {
      for (int ix = 0; ix <= d.gx; ++ix) {
        const long id = static_cast<long>(iy) * (d.gx + 1) + ix;
        if (ix == 0) CHECK(pos(id, 0) == 0.0);
        if (ix == d.gx) CHECK(pos(id, 0) == doctest::Approx(2.0));
        if (iy == 0) CHECK(pos(id, 1) == 0.0);
        if (iy == d.gy) CHECK(pos(id, 1) == doctest::Approx(1.0));
        CHECK(std::abs(pos(id, 0) - ix * cx) <= 0.25 * cx + 1e-12);
        CHECK(std::abs(pos(id, 1) - iy * cy) <= 0.25 * cy + 1e-12);
      }
    }
  }
  // The two volumes are jittered independently.
  CHECK(net.vertex_positions(0) != net.vertex_positions(1));
}

TEST_CASE("queries outside the domain are rejected") {
  Pgcan net(small_net(), 1.0, 1.0, 1);
  Eigen::MatrixX2d bad(1, 2);
  bad << 1.2, 0.5;
  CHECK_THROWS_AS(net.prepare(bad), DomainError);
}

TEST_CASE("interpolation weights form a partition of unity") {
  Pgcan net(small_net(), 1.0, 1.0, 2);
  const auto ps = net.prepare(random_points(200, 1.0, 1.0, 17));
  for (int vol = 0; vol < 2; ++vol) {
    for (long i = 0; i < ps.count(); ++i) {
      CHECK(ps.w[vol].row(i).sum() == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("constant feature volumes survive smoothing and interpolation") {
  Pgcan net(small_net(), 1.0, 1.0, 4);
  const PgcanDims& d = net.dims();
  Eigen::VectorXd grid(d.grid_size());
  for (long v = 0; v < d.vertices(); ++v)
    for (int f = 0; f < d.F; ++f) grid[v * d.F + f] = 1.0 + f;
  Eigen::VectorXd smoothed;
  net.smooth_grid(grid, smoothed);
  CHECK((smoothed - grid).cwiseAbs().maxCoeff() <= 1e-12);

  ParamVector pv;
  net.init_params(0, pv);
  pv.values.segment(d.off_grid(0), d.grid_size()) = grid;
  Eigen::VectorXd f1, f2;
  net.encode(pv, 0.37, 0.61, f1, f2);
  for (int f = 0; f < d.F; ++f) CHECK(f1[f] == doctest::Approx(1.0 + f).epsilon(1e-10));
}

TEST_CASE("smoothing adjoint is the exact transpose") {
  Pgcan net(small_net(), 1.0, 1.0, 6);
  const long n = net.dims().grid_size();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d(0, 1);
  Eigen::VectorXd x(n), y(n);
  for (long i = 0; i < n; ++i) {
    x[i] = d(rng);
    y[i] = d(rng);
  }
  Eigen::VectorXd sx;
  net.smooth_grid(x, sx);
  Eigen::VectorXd aty = Eigen::VectorXd::Zero(n);
  net.smooth_grid_adjoint(y, aty);
  CHECK(sx.dot(y) == doctest::Approx(x.dot(aty)).epsilon(1e-12));
}

TEST_CASE("forward_fast matches forward; decode matches the batched path") {
  Pgcan net(small_net(), 1.0, 1.0, 8);
  ParamVector pv;
  net.init_params(1, pv);
  const Eigen::MatrixX2d pts = random_points(700, 1.0, 1.0, 23);  // spans >1 tile
  const auto ps = net.prepare(pts);

  Pgcan::Workspace ws1, ws2;
  Eigen::MatrixXd ref, fast;
  net.forward(pv, ps, ws1, ref);
  net.forward_fast(pv, ps, ws2, fast);
  CHECK((ref - fast).cwiseAbs().maxCoeff() <= 1e-12 * ref.cwiseAbs().maxCoeff() + 1e-14);

  Eigen::VectorXd f1, f2;
  net.encode(pv, pts(5, 0), pts(5, 1), f1, f2);
  const Eigen::Vector4d single = net.decode(pv, f1, f2);
  CHECK((single.transpose() - ref.row(5)).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("backward_fast matches backward") {
  Pgcan net(small_net(), 1.0, 1.0, 12);
  ParamVector pv;
  net.init_params(2, pv);
  const auto ps = net.prepare(random_points(600, 1.0, 1.0, 29));

  std::mt19937_64 rng(31);
  std::normal_distribution<double> d(0, 1);
  Eigen::MatrixXd out_bar(ps.count(), 4);
  for (long i = 0; i < out_bar.size(); ++i) out_bar.data()[i] = d(rng);

  Pgcan::Workspace ws1, ws2;
  Eigen::MatrixXd out;
  net.forward(pv, ps, ws1, out);
  Eigen::VectorXd g_ref = Eigen::VectorXd::Zero(pv.size());
  net.backward(pv, ps, ws1, out_bar, g_ref);
  Eigen::VectorXd g_fast = Eigen::VectorXd::Zero(pv.size());
  net.backward_fast(pv, ps, ws2, out_bar, g_fast);
  const double scale = g_ref.cwiseAbs().maxCoeff();
  CHECK((g_ref - g_fast).cwiseAbs().maxCoeff() <= 1e-10 * scale);
}

TEST_CASE("backward agrees with central differences through the full network") {
  Pgcan net(small_net(), 1.0, 1.0, 14);
  ParamVector pv;
  net.init_params(4, pv);
  const auto ps = net.prepare(random_points(40, 1.0, 1.0, 37));

  std::mt19937_64 rng(41);
  std::normal_distribution<double> nd(0, 1);
  Eigen::MatrixXd out_bar(ps.count(), 4);
  for (long i = 0; i < out_bar.size(); ++i) out_bar.data()[i] = nd(rng);

  Pgcan::Workspace ws;
  Eigen::MatrixXd out;
  net.forward(pv, ps, ws, out);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(pv.size());
  net.backward(pv, ps, ws, out_bar, grad);

  std::uniform_int_distribution<long> pick(0, pv.size() - 1);
  const double h = 1e-6;
  for (int k = 0; k < 25; ++k) {
    const long i = pick(rng);
    const double orig = pv.values[i];
    Eigen::MatrixXd op, om;
    pv.values[i] = orig + h;
    net.forward(pv, ps, ws, op);
    pv.values[i] = orig - h;
    net.forward(pv, ps, ws, om);
    pv.values[i] = orig;
    const double g_fd = ((op - om).array() * out_bar.array()).sum() / (2 * h);
    CHECK(grad[i] == doctest::Approx(g_fd).epsilon(1e-5));
  }
}

TEST_CASE("forward_ref agrees with the double pipeline") {
  Pgcan net(small_net(), 1.0, 1.0, 21);
  ParamVector pv;
  net.init_params(6, pv);
  const auto ps = net.prepare(random_points(150, 1.0, 1.0, 43));
  Pgcan::Workspace ws;
  Eigen::MatrixXd out;
  net.forward(pv, ps, ws, out);
  Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> ref;
  net.forward_ref(pv, ps, ref);
  CHECK((out - ref.cast<double>()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_SUITE_END();
