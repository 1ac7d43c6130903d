#include <chrono>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "lcsmto/trainer.hpp"

using namespace lcsmto;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("lcsmto_train_" +
            std::to_string(
                std::chrono::steady_clock::now().time_since_epoch().count()) +
            "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

ProblemConfig tiny() {
  ProblemConfig c = preset_config("rugby");
  c.grid_nx = c.grid_ny = 12;
  c.n_bc_per_side = 4;
  c.network.cells_per_unit = 6;
  c.network.features = 4;
  c.network.hidden = 16;
  c.network.hidden_layers = 2;
  c.optimizer.epochs = 6;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE_BEGIN("trainer");

TEST_CASE("learning-rate schedule decays by 0.75 at each milestone") {
  OptimizerState opt = OptimizerState::from_config(OptimizerOptions{});
  CHECK(opt.lr_at(0) == doctest::Approx(1e-3));
  CHECK(opt.lr_at(3999) == doctest::Approx(1e-3));
  CHECK(opt.lr_at(4000) == doctest::Approx(7.5e-4));
  CHECK(opt.lr_at(8000) == doctest::Approx(5.625e-4));
  CHECK(opt.lr_at(12000) == doctest::Approx(4.21875e-4));
  CHECK(opt.lr_at(16000) == doctest::Approx(3.1640625e-4));
  CHECK(opt.lr_at(19999) == doctest::Approx(3.1640625e-4));
}

TEST_CASE("adam matches a hand-rolled first step") {
  ParamVector pv;
  pv.resize(2);
  pv.values << 1.0, -2.0;
  Eigen::VectorXd g(2);
  g << 0.5, -0.25;
  OptimizerState opt = OptimizerState::from_config(OptimizerOptions{});
  adam_step(pv, g, opt, 0);
  // First step: mhat = g, vhat = g^2 => update ~ -lr * sign(g).
  for (int i = 0; i < 2; ++i) {
    const double expect = (i == 0 ? 1.0 : -2.0) -
                          1e-3 * g[i] / (std::abs(g[i]) + 1e-8);
    CHECK(pv.values[i] == doctest::Approx(expect).epsilon(1e-9));
  }
  CHECK(opt.step == 1);
  g[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(adam_step(pv, g, opt, 1), TrainError);
}

TEST_CASE("gradient clipping keeps one spike from poisoning the second moments") {
  // A single huge gradient must behave exactly like its rescaled version:
  // otherwise adam_v holds the squared spike and, with beta2 = 0.999, the
  // parameter barely moves for thousands of subsequent steps.
  ParamVector spiked, scaled;
  spiked.resize(2);
  scaled.resize(2);
  spiked.values << 1.0, -2.0;
  scaled.values << 1.0, -2.0;
  OptimizerState o1 = OptimizerState::from_config(OptimizerOptions{});
  OptimizerState o2 = o1;
  Eigen::VectorXd g(2);
  g << 3e5, -4e5;  // norm 5e5, far above the clip
  adam_step(spiked, g, o1, 0);
  adam_step(scaled, Eigen::VectorXd(g * (o1.grad_clip / 5e5)), o2, 0);
  CHECK(spiked.values == scaled.values);
  CHECK(spiked.adam_v == scaled.adam_v);

  // Below the clip the gradient passes through untouched.
  ParamVector pv;
  pv.resize(2);
  pv.values << 1.0, -2.0;
  OptimizerState o3 = OptimizerState::from_config(OptimizerOptions{});
  Eigen::VectorXd small(2);
  small << 0.5, -0.25;
  adam_step(pv, small, o3, 0);
  CHECK(pv.adam_v[0] == doctest::Approx(0.001 * 0.25).epsilon(1e-12));
}

TEST_CASE("short training run writes the full artifact set and reduces the loss") {
  TempDir tmp;
  ProblemConfig c = tiny();
  c.optimizer.epochs = 10;
  Trainer t(c, 0);
  TrainOptions opts;
  opts.deterministic = true;
  std::vector<double> totals;
  opts.on_epoch = [&](int, const LossBreakdown& b) { totals.push_back(b.total); };
  const TrainOutcome out = t.train(tmp.path, opts);

  CHECK(out.final_epoch == 9);
  CHECK(totals.size() == 10);
  CHECK(totals.back() < totals.front());
  for (const char* f : {"history.csv", "config.json", "summary.json", "density.csv",
                        "density.pgm", "residuals.csv", "checkpoint.ckpt"})
    CHECK(fs::exists(tmp.path / f));

  // 10 data rows + header.
  std::ifstream in(tmp.path / "history.csv");
  int lines = 0;
  std::string line;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 11);

  // The config snapshot reproduces the effective run configuration.
  CHECK(config_to_json_text(parse_config((tmp.path / "config.json").string())) ==
        config_to_json_text(c));
}

TEST_CASE("checkpoint + resume reproduces an uninterrupted run bit for bit") {
  TempDir full, split;
  const ProblemConfig c = tiny();
  TrainOptions opts;
  opts.deterministic = true;
  opts.checkpoint_every = 3;

  Trainer a(c, 7);
  a.train(full.path, opts);

  TrainOptions first = opts;
  first.epochs = 3;
  Trainer b(c, 7);
  b.train(split.path, first);
  Trainer::resume(split.path / "checkpoint.ckpt", opts);

  CHECK(slurp(full.path / "history.csv") == slurp(split.path / "history.csv"));
  CHECK(slurp(full.path / "summary.json") == slurp(split.path / "summary.json"));
  CHECK(slurp(full.path / "checkpoint.ckpt") == slurp(split.path / "checkpoint.ckpt"));
  CHECK(slurp(full.path / "density.csv") == slurp(split.path / "density.csv"));
}

TEST_CASE("two runs with the same seed are bit-identical, different seeds are not") {
  TempDir r1, r2, r3;
  const ProblemConfig c = tiny();
  TrainOptions opts;
  opts.deterministic = true;
  Trainer(c, 3).train(r1.path, opts);
  Trainer(c, 3).train(r2.path, opts);
  Trainer(c, 4).train(r3.path, opts);
  CHECK(slurp(r1.path / "history.csv") == slurp(r2.path / "history.csv"));
  CHECK(slurp(r1.path / "history.csv") != slurp(r3.path / "history.csv"));
}

TEST_CASE("corrupt or truncated checkpoints are rejected") {
  TempDir tmp;
  const ProblemConfig c = tiny();
  Trainer t(c, 0);
  const fs::path ck = tmp.path / "checkpoint.ckpt";
  t.save_checkpoint(ck);
  CHECK_NOTHROW(Trainer::load_checkpoint(ck));

  // Flip the magic.
  std::string bytes = slurp(ck);
  bytes[0] = 'X';
  std::ofstream(tmp.path / "bad_magic.ckpt", std::ios::binary) << bytes;
  CHECK_THROWS_WITH_AS(Trainer::load_checkpoint(tmp.path / "bad_magic.ckpt"),
                       doctest::Contains("magic"), TrainError);

  // Truncate the payload.
  std::ofstream(tmp.path / "short.ckpt", std::ios::binary)
      << slurp(ck).substr(0, bytes.size() / 2);
  CHECK_THROWS_AS(Trainer::load_checkpoint(tmp.path / "short.ckpt"), TrainError);

  CHECK_THROWS_AS(Trainer::load_checkpoint(tmp.path / "missing.ckpt"), TrainError);
}

TEST_CASE("disabled weighting is honored via the train options") {
  TempDir tmp;
  ProblemConfig c = tiny();
  c.optimizer.epochs = 2;
  c.weighting.activation_epoch = 1;  // would activate immediately
  Trainer t(c, 1);
  TrainOptions opts;
  opts.deterministic = true;
  opts.weighting = false;
  CHECK_NOTHROW(t.train(tmp.path, opts));
}

TEST_SUITE_END();
