#include <cmath>

#include "doctest.h"
#include "lcsmto/adjoint.hpp"

using namespace lcsmto;

namespace {

ProblemConfig reduced(const char* preset, int n) {
  ProblemConfig c = preset_config(preset);
  c.grid_nx = c.grid_ny = n;
  c.n_bc_per_side = 4;
  c.network.cells_per_unit = 8;
  c.network.features = 4;
  c.network.hidden = 16;
  c.network.hidden_layers = 2;
  return c;
}

EpochInputs plain_inputs(const ProblemConfig& c) {
  EpochInputs in;
  in.weights = Eigen::VectorXd::Ones(static_cast<long>(c.grid_nx) * c.grid_ny);
  in.v_scheduled = c.v_target;
  in.ws = WeightState::from_config(c);
  return in;
}

}  // namespace

TEST_SUITE_BEGIN("adjoint");

TEST_CASE("loss_and_grad returns the same loss as evaluate") {
  const ProblemConfig c = reduced("rugby", 8);
  const LossEvaluator ev(c, 3);
  const ParamVector pv = ev.make_params();
  const EpochInputs in = plain_inputs(c);
  Eigen::VectorXd grad;
  const LossResult a = ev.loss_and_grad(pv, in, grad);
  const LossResult b = ev.evaluate(pv, in);
  CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-14));
  CHECK(grad.size() == pv.size());
  CHECK(grad.allFinite());
  CHECK(grad.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("extended-precision reference matches the double pipeline") {
  const ProblemConfig c = reduced("rugby", 8);
  const LossEvaluator ev(c, 3);
  const ParamVector pv = ev.make_params();
  const EpochInputs in = plain_inputs(c);
  const double loss = ev.evaluate(pv, in).loss;
  const double ref = static_cast<double>(ev.evaluate_ref(pv, in));
  CHECK(loss == doctest::Approx(ref).epsilon(1e-10));
}

TEST_CASE("gradient matches central differences on a small rugby setup") {
  const ProblemConfig c = reduced("rugby", 6);
  const LossEvaluator ev(c, 0);
  const ParamVector pv = ev.make_params();
  const double err = ev.fd_gradcheck(pv, plain_inputs(c), 40, 1e-6, 0);
  CHECK(err <= 1e-4);
}

TEST_CASE("gradient stays correct with localized weights and adapted alpha") {
  const ProblemConfig c = reduced("obstacle", 6);
  const LossEvaluator ev(c, 5);
  const ParamVector pv = ev.make_params();

  EpochInputs in = plain_inputs(c);
  in.v_scheduled = 0.7;
  in.ws.mu_p = 123.0;
  in.ws.alpha << 1.7, 0.4, 1.2, 0.7;
  // Non-uniform weights exercise the weighted residual cotangents.
  const Eigen::VectorXd psi = ev.psi_on_lattice(pv);
  in.weights = local_weights(interface_distance(psi, ev.grid()), in.ws, in.ws.activation_epoch);

  const double err = ev.fd_gradcheck(pv, in, 30, 1e-6, 1);
  CHECK(err <= 1e-4);
}

TEST_CASE("conditioned fields honor boundary anchors on the lattice edge region") {
  const ProblemConfig c = reduced("rugby", 16);
  const LossEvaluator ev(c, 1);
  const ParamVector pv = ev.make_params();
  FieldBatch b;
  ev.conditioned_fields(pv, b);
  CHECK(b.u.size() == ev.grid().count());
  CHECK(b.rho.minCoeff() >= 0.0);
  CHECK(b.rho.maxCoeff() <= 1.0);
  // kinv consistent with rho through the interpolation.
  for (int j = 0; j < ev.grid().count(); ++j)
    CHECK(b.kinv[j] ==
          doctest::Approx(material_interp(b.rho[j], MaterialConstants{
                                                        c.kappa_inv_max, c.kappa_inv_min, c.q})));
}

TEST_CASE("psi_on_lattice matches the level set used in the loss") {
  const ProblemConfig c = reduced("rugby", 8);
  const LossEvaluator ev(c, 2);
  const ParamVector pv = ev.make_params();
  const Eigen::VectorXd psi = ev.psi_on_lattice(pv);
  const LossResult r = ev.evaluate(pv, plain_inputs(c));
  CHECK((psi - r.psi).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("same seed gives identical losses, different seeds differ") {
  const ProblemConfig c = reduced("rugby", 6);
  const LossEvaluator a(c, 9), b(c, 9), d(c, 10);
  const EpochInputs in = plain_inputs(c);
  CHECK(a.evaluate(a.make_params(), in).loss == b.evaluate(b.make_params(), in).loss);
  CHECK(a.evaluate(a.make_params(), in).loss != d.evaluate(d.make_params(), in).loss);
}

TEST_SUITE_END();
