#include <cmath>

#include "doctest.h"
#include "lcsmto/config.hpp"

using namespace lcsmto;

TEST_SUITE_BEGIN("config");

TEST_CASE("presets expose the documented geometry and targets") {
  const ProblemConfig rugby = preset_config("rugby");
  CHECK(rugby.width == 1.0);
  CHECK(rugby.height == 1.0);
  CHECK(rugby.v_target == doctest::Approx(0.9));
  CHECK(rugby.grid_nx == 100);
  CHECK(rugby.grid_ny == 100);
  CHECK(rugby.n_bc_per_side == 25);

  const ProblemConfig obstacle = preset_config("obstacle");
  CHECK(obstacle.v_target == doctest::Approx(0.3));

  const ProblemConfig dp = preset_config("double_pipe");
  CHECK(dp.width == 3.0);
  CHECK(dp.height == 1.0);
  CHECK(dp.v_target == doctest::Approx(1.0 / 3.0));
  CHECK(dp.grid_nx == 300);
  CHECK(dp.grid_ny == 100);

  CHECK(preset_names().size() == 3);
  CHECK_THROWS_AS(preset_config("nope"), ConfigError);
}

TEST_CASE("default physical constants") {
  const ProblemConfig c = preset_config("rugby");
  CHECK(c.viscosity == 1.0);
  CHECK(c.kappa_inv_max == doctest::Approx(2.5e4));
  CHECK(c.kappa_inv_min == doctest::Approx(2.5e-4));
  CHECK(c.q == doctest::Approx(0.1));
  CHECK(c.gp.gamma == doctest::Approx(1e3));
  CHECK(c.gp.nugget == doctest::Approx(1e-8));
  CHECK(c.gp.beta == doctest::Approx(10.0));
  CHECK(c.penalty.mu_p == doctest::Approx(10.0));
  CHECK(c.penalty.mu_p_growth == doctest::Approx(1.05));
  CHECK(c.penalty.mu_p_max == doctest::Approx(1e6));
  CHECK(c.penalty.adapt_every == 100);
  CHECK(c.optimizer.lr == doctest::Approx(1e-3));
  CHECK(c.optimizer.decay == doctest::Approx(0.75));
  CHECK(c.optimizer.epochs == 20000);
  CHECK(c.optimizer.decay_epochs == std::vector<int>{4000, 8000, 12000, 16000});
  CHECK(c.schedule.block_size == 20);
  CHECK(c.schedule.target_epoch == 4000);
  CHECK(c.weighting.delta == doctest::Approx(0.1));
  CHECK(c.weighting.w_low == doctest::Approx(0.9));
  CHECK(c.weighting.w_high == doctest::Approx(2.0));
  CHECK(c.weighting.activation_epoch == 9000);
}

TEST_CASE("segments tile each preset boundary") {
  for (const auto& name : preset_names()) CHECK_NOTHROW(preset_config(name).validate());
}

TEST_CASE("json round trip preserves the config") {
  const ProblemConfig a = preset_config("double_pipe");
  const ProblemConfig b = config_from_json_text(config_to_json_text(a));
  CHECK(b.name == a.name);
  CHECK(b.width == a.width);
  CHECK(b.v_target == a.v_target);
  CHECK(b.boundary_segments.size() == a.boundary_segments.size());
  for (size_t i = 0; i < a.boundary_segments.size(); ++i) {
    CHECK(b.boundary_segments[i].side == a.boundary_segments[i].side);
    CHECK(b.boundary_segments[i].from == doctest::Approx(a.boundary_segments[i].from));
    CHECK(b.boundary_segments[i].to == doctest::Approx(a.boundary_segments[i].to));
  }
  CHECK(b.pressure_pin.x == a.pressure_pin.x);
  CHECK(config_to_json_text(b) == config_to_json_text(a));
}

TEST_CASE("unknown keys are rejected with a path") {
  CHECK_THROWS_WITH_AS(config_from_json_text(R"({"preset":"rugby","lr":0.5})"),
                       doctest::Contains("unknown config key"), ConfigError);
  CHECK_THROWS_WITH_AS(config_from_json_text(R"({"preset":"rugby","optimizer":{"momentum":1}})"),
                       doctest::Contains("optimizer.momentum"), ConfigError);
}

TEST_CASE("preset base plus overrides") {
  const ProblemConfig c =
      config_from_json_text(R"({"preset":"rugby","grid_nx":20,"grid_ny":20,"n_bc_per_side":4})");
  CHECK(c.grid_nx == 20);
  CHECK(c.v_target == doctest::Approx(0.9));
}

TEST_CASE("validate rejects bad values") {
  ProblemConfig c = preset_config("rugby");
  c.v_target = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = preset_config("rugby");
  c.v_target = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = preset_config("rugby");
  c.kappa_inv_min = c.kappa_inv_max;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = preset_config("rugby");
  c.boundary_segments.pop_back();
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = preset_config("rugby");
  c.pressure_pin.x = 2.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(config_from_json_text(R"({"width":1.0})"), ConfigError);
}

TEST_CASE("parabolic profile peaks at the segment midpoint and vanishes at its ends") {
  BoundarySegment b;
  b.side = Side::Left;
  b.from = 0.25;
  b.to = 0.75;
  b.kind = BcKind::Velocity;
  b.profile = Profile::Parabolic;
  b.peak = 2.0;
  double u, v;
  b.velocity_at(0.5, u, v);
  CHECK(u == doctest::Approx(2.0));
  CHECK(v == 0.0);
  b.velocity_at(0.25, u, v);
  CHECK(u == doctest::Approx(0.0));
  b.velocity_at(0.375, u, v);
  CHECK(u == doctest::Approx(1.5));  // 4 s (1-s) with s = 1/4
}

TEST_SUITE_END();
