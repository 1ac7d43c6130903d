#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lcsmto {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Side { Left, Right, Bottom, Top };
enum class BcKind { Velocity, NoSlip };
enum class Profile { Uniform, Parabolic };
enum class PhaseAnchor { None, Void, Solid };

const char* to_string(Side s);
Side side_from_string(const std::string& s);

/// One piece of the domain boundary with its prescribed data. The segment
/// interval is expressed in the side coordinate (y for left/right, x for
/// bottom/top).
struct BoundarySegment {
  Side side = Side::Left;
  double from = 0.0;
  double to = 1.0;
  BcKind kind = BcKind::NoSlip;
  Profile profile = Profile::Uniform;
  double u = 0.0;   // uniform velocity components
  double v = 0.0;
  double peak = 0.0;  // parabolic peak, directed along +x (left/right) or +y (bottom/top)
  PhaseAnchor phase = PhaseAnchor::None;

  // Velocity at side coordinate t (must lie in [from, to]).
  void velocity_at(double t, double& out_u, double& out_v) const;
  bool contains(double t) const { return t >= from - 1e-12 && t <= to + 1e-12; }
};

struct PressurePin {
  double x = 0.0;
  double y = 0.0;
  double value = 0.0;
};

struct ScheduleOptions {
  int block_size = 20;      // b_s
  int target_epoch = 4000;  // i_t
  double exponent = 1.0;    // p_c
};

struct WeightingOptions {
  bool enabled = true;
  double delta = 0.1;
  double w_low = 0.9;
  double w_high = 2.0;
  int activation_epoch = 9000;
};

struct OptimizerOptions {
  double lr = 1e-3;
  double decay = 0.75;
  std::vector<int> decay_epochs = {4000, 8000, 12000, 16000};
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 100.0;  // global gradient-norm cap; <= 0 disables
  int epochs = 20000;
};

struct NetworkOptions {
  int cells_per_unit = 32;  // encoder cells per unit length
  int features = 8;
  int hidden = 64;
  int hidden_layers = 3;
  double jitter_sigma_frac = 0.1;  // stddev of vertex jitter, fraction of cell size
};

struct GpOptions {
  double gamma = 1e3;    // kernel k = exp(-gamma * d^2), fixed
  double nugget = 1e-8;
  double beta = 10.0;    // smoothed-Heaviside sharpness
  double cache_cap_mb = 1024.0;
};

struct PenaltyOptions {
  double mu_p = 10.0;
  double mu_p_growth = 1.05;
  double mu_p_max = 1e6;
  double c1_sq_tol = 1e-5;        // violation threshold on mean C1^2
  double alpha_c_growth = 1.3;    // constraint-weight factor while violated
  double alpha_c_decay = 0.9;     // constraint-weight factor once met
  double alpha_c_max = 1e4;
  int adapt_every = 100;
};

struct ProblemConfig {
  std::string name = "custom";
  double width = 1.0;
  double height = 1.0;
  double v_target = 0.5;
  double viscosity = 1.0;
  double kappa_inv_max = 2.5e4;
  double kappa_inv_min = 2.5e-4;
  double q = 0.1;
  int n_bc_per_side = 25;
  int grid_nx = 100;
  int grid_ny = 100;
  std::vector<BoundarySegment> boundary_segments;
  PressurePin pressure_pin;
  ScheduleOptions schedule;
  WeightingOptions weighting;
  OptimizerOptions optimizer;
  NetworkOptions network;
  GpOptions gp;
  PenaltyOptions penalty;

  // Throws ConfigError on invariant violations (key path in the message).
  void validate() const;

  double area() const { return width * height; }
};

/// Built-in benchmark presets: "rugby", "obstacle", "double_pipe".
ProblemConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

/// Parse a JSON config file; unknown keys are rejected. `source` is either a
/// preset name or a path to a config file.
ProblemConfig parse_config(const std::string& source);
ProblemConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ProblemConfig& cfg);

}  // namespace lcsmto
