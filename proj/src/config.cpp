#include "lcsmto/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace lcsmto {

using nlohmann::json;

const char* to_string(Side s) {
  switch (s) {
    case Side::Left: return "left";
    case Side::Right: return "right";
    case Side::Bottom: return "bottom";
    case Side::Top: return "top";
  }
  return "?";
}

Side side_from_string(const std::string& s) {
  if (s == "left") return Side::Left;
  if (s == "right") return Side::Right;
  if (s == "bottom") return Side::Bottom;
  if (s == "top") return Side::Top;
  throw ConfigError("unknown side: " + s);
}

void BoundarySegment::velocity_at(double t, double& out_u, double& out_v) const {
  if (kind == BcKind::NoSlip) {
    out_u = 0.0;
    out_v = 0.0;
    return;
  }
  if (profile == Profile::Uniform) {
    out_u = u;
    out_v = v;
    return;
  }
  const double len = to - from;
  const double bump = 4.0 * (t - from) * (to - t) / (len * len);
  if (side == Side::Left || side == Side::Right) {
    out_u = peak * bump;
    out_v = 0.0;
  } else {
    out_u = 0.0;
    out_v = peak * bump;
  }
}

namespace {

double side_length(const ProblemConfig& c, Side s) {
  return (s == Side::Left || s == Side::Right) ? c.height : c.width;
}

}  // namespace

void ProblemConfig::validate() const {
  if (width <= 0 || height <= 0) throw ConfigError("width/height must be positive");
  if (!(v_target > 0 && v_target <= 1)) throw ConfigError("v_target must lie in (0, 1]");
  if (!(kappa_inv_max > kappa_inv_min && kappa_inv_min > 0))
    throw ConfigError("require kappa_inv_max > kappa_inv_min > 0");
  if (q <= 0) throw ConfigError("q must be positive");
  if (n_bc_per_side < 1) throw ConfigError("n_bc_per_side must be >= 1");
  if (grid_nx < 1 || grid_ny < 1) throw ConfigError("grid_nx/grid_ny must be positive");
  if (static_cast<long long>(grid_nx) * grid_ny < 9)
    throw ConfigError("collocation grid needs at least 9 points");
  if (network.cells_per_unit < 1 || network.features < 1 || network.hidden < 1)
    throw ConfigError("network sizes must be positive");
  if (gp.gamma <= 0) throw ConfigError("gp.gamma must be positive");
  if (gp.nugget < 0) throw ConfigError("gp.nugget must be non-negative");

  // Boundary segments must tile each side without overlap.
  for (Side s : {Side::Left, Side::Right, Side::Bottom, Side::Top}) {
    std::vector<const BoundarySegment*> segs;
    for (const auto& b : boundary_segments)
      if (b.side == s) segs.push_back(&b);
    std::sort(segs.begin(), segs.end(),
              [](const BoundarySegment* a, const BoundarySegment* b) { return a->from < b->from; });
    double cursor = 0.0;
    const double len = side_length(*this, s);
    for (const auto* b : segs) {
      if (b->to <= b->from) throw ConfigError(std::string("degenerate segment on side ") + to_string(s));
      if (std::abs(b->from - cursor) > 1e-9)
        throw ConfigError(std::string("boundary segments do not tile side ") + to_string(s));
      cursor = b->to;
    }
    if (std::abs(cursor - len) > 1e-9)
      throw ConfigError(std::string("boundary segments do not cover side ") + to_string(s));
  }

  const bool on_boundary =
      std::abs(pressure_pin.x) < 1e-9 || std::abs(pressure_pin.x - width) < 1e-9 ||
      std::abs(pressure_pin.y) < 1e-9 || std::abs(pressure_pin.y - height) < 1e-9;
  if (pressure_pin.x < -1e-9 || pressure_pin.x > width + 1e-9 || pressure_pin.y < -1e-9 ||
      pressure_pin.y > height + 1e-9)
    throw ConfigError("pressure_pin must lie inside the closed domain");
  (void)on_boundary;
}

namespace {

BoundarySegment seg(Side s, double from, double to, BcKind kind) {
  BoundarySegment b;
  b.side = s;
  b.from = from;
  b.to = to;
  b.kind = kind;
  return b;
}

}  // namespace

ProblemConfig preset_config(const std::string& name) {
  ProblemConfig c;
  c.name = name;
  if (name == "rugby") {
    c.width = c.height = 1.0;
    c.v_target = 0.9;
    c.grid_nx = c.grid_ny = 100;
    for (Side s : {Side::Left, Side::Right, Side::Bottom, Side::Top}) {
      BoundarySegment b = seg(s, 0.0, 1.0, BcKind::Velocity);
      b.profile = Profile::Uniform;
      b.u = 1.0;
      b.v = 0.0;
      b.phase = PhaseAnchor::Void;
      c.boundary_segments.push_back(b);
    }
    // No outlet segment exists; gauge at the center of the right side.
    c.pressure_pin = {1.0, 0.5, 0.0};
  } else if (name == "obstacle") {
    c.width = c.height = 1.0;
    c.v_target = 0.3;
    c.grid_nx = c.grid_ny = 100;
    const double a = 1.0 / 3.0, b2 = 2.0 / 3.0;
    BoundarySegment inlet = seg(Side::Left, a, b2, BcKind::Velocity);
    inlet.profile = Profile::Parabolic;
    inlet.peak = 1.0;
    inlet.phase = PhaseAnchor::Void;
    BoundarySegment outlet = seg(Side::Right, a, b2, BcKind::Velocity);
    outlet.profile = Profile::Parabolic;
    outlet.peak = 1.0;
    outlet.phase = PhaseAnchor::Void;
    c.boundary_segments = {
        seg(Side::Left, 0.0, a, BcKind::NoSlip), inlet, seg(Side::Left, b2, 1.0, BcKind::NoSlip),
        seg(Side::Right, 0.0, a, BcKind::NoSlip), outlet, seg(Side::Right, b2, 1.0, BcKind::NoSlip),
        seg(Side::Bottom, 0.0, 1.0, BcKind::NoSlip), seg(Side::Top, 0.0, 1.0, BcKind::NoSlip)};
    c.pressure_pin = {1.0, 0.5, 0.0};
  } else if (name == "double_pipe") {
    c.width = 3.0;
    c.height = 1.0;
    c.v_target = 1.0 / 3.0;
    c.grid_nx = 300;
    c.grid_ny = 100;
    const double w = 1.0 / 6.0;
    auto pipe = [&](Side s, double center) {
      BoundarySegment b = seg(s, center - w / 2, center + w / 2, BcKind::Velocity);
      b.profile = Profile::Parabolic;
      b.peak = 1.0;
      b.phase = PhaseAnchor::Void;
      return b;
    };
    c.boundary_segments = {
        seg(Side::Left, 0.0, 0.25 - w / 2, BcKind::NoSlip),
        pipe(Side::Left, 0.25),
        seg(Side::Left, 0.25 + w / 2, 0.75 - w / 2, BcKind::NoSlip),
        pipe(Side::Left, 0.75),
        seg(Side::Left, 0.75 + w / 2, 1.0, BcKind::NoSlip),
        seg(Side::Right, 0.0, 0.25 - w / 2, BcKind::NoSlip),
        pipe(Side::Right, 0.25),
        seg(Side::Right, 0.25 + w / 2, 0.75 - w / 2, BcKind::NoSlip),
        pipe(Side::Right, 0.75),
        seg(Side::Right, 0.75 + w / 2, 1.0, BcKind::NoSlip),
        seg(Side::Bottom, 0.0, 3.0, BcKind::NoSlip),
        seg(Side::Top, 0.0, 3.0, BcKind::NoSlip)};
    c.pressure_pin = {3.0, 0.25, 0.0};  // center of the first outlet
  } else {
    throw ConfigError("unknown preset: " + name);
  }
  c.validate();
  return c;
}

std::vector<std::string> preset_names() { return {"rugby", "obstacle", "double_pipe"}; }

namespace {

void reject_unknown(const json& j, const std::vector<std::string>& allowed, const std::string& path) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ConfigError("unknown config key: " + path + it.key());
  }
}

template <typename T>
void get_if(const json& j, const char* key, T& out, const std::string& path) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for " + path + key + ": " + e.what());
  }
}

BoundarySegment segment_from_json(const json& j, const std::string& path) {
  reject_unknown(j, {"side", "from", "to", "kind", "profile", "u", "v", "peak", "phase_anchor"}, path);
  BoundarySegment b;
  std::string side, kind = "noslip", profile = "uniform", phase = "none";
  get_if(j, "side", side, path);
  b.side = side_from_string(side);
  get_if(j, "from", b.from, path);
  get_if(j, "to", b.to, path);
  get_if(j, "kind", kind, path);
  if (kind == "velocity")
    b.kind = BcKind::Velocity;
  else if (kind == "noslip")
    b.kind = BcKind::NoSlip;
  else
    throw ConfigError("bad value for " + path + "kind: " + kind);
  get_if(j, "profile", profile, path);
  if (profile == "uniform")
    b.profile = Profile::Uniform;
  else if (profile == "parabolic")
    b.profile = Profile::Parabolic;
  else
    throw ConfigError("bad value for " + path + "profile: " + profile);
  get_if(j, "u", b.u, path);
  get_if(j, "v", b.v, path);
  get_if(j, "peak", b.peak, path);
  get_if(j, "phase_anchor", phase, path);
  if (phase == "none")
    b.phase = PhaseAnchor::None;
  else if (phase == "void")
    b.phase = PhaseAnchor::Void;
  else if (phase == "solid")
    b.phase = PhaseAnchor::Solid;
  else
    throw ConfigError("bad value for " + path + "phase_anchor: " + phase);
  return b;
}

json segment_to_json(const BoundarySegment& b) {
  json j;
  j["side"] = to_string(b.side);
  j["from"] = b.from;
  j["to"] = b.to;
  j["kind"] = b.kind == BcKind::Velocity ? "velocity" : "noslip";
  j["profile"] = b.profile == Profile::Uniform ? "uniform" : "parabolic";
  j["u"] = b.u;
  j["v"] = b.v;
  j["peak"] = b.peak;
  j["phase_anchor"] =
      b.phase == PhaseAnchor::None ? "none" : (b.phase == PhaseAnchor::Void ? "void" : "solid");
  return j;
}

}  // namespace

ProblemConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }

  ProblemConfig c;
  if (j.contains("preset")) {
    c = preset_config(j.at("preset").get<std::string>());
  }
  reject_unknown(j, {"preset", "name", "width", "height", "v_target", "viscosity", "kappa_inv_max",
                     "kappa_inv_min", "q", "n_bc_per_side", "grid_nx", "grid_ny",
                     "boundary_segments", "pressure_pin", "schedule", "weighting", "optimizer",
                     "network", "gp", "penalty"},
                 "");
  get_if(j, "name", c.name, "");
  get_if(j, "width", c.width, "");
  get_if(j, "height", c.height, "");
  get_if(j, "v_target", c.v_target, "");
  get_if(j, "viscosity", c.viscosity, "");
  get_if(j, "kappa_inv_max", c.kappa_inv_max, "");
  get_if(j, "kappa_inv_min", c.kappa_inv_min, "");
  get_if(j, "q", c.q, "");
  get_if(j, "n_bc_per_side", c.n_bc_per_side, "");
  get_if(j, "grid_nx", c.grid_nx, "");
  get_if(j, "grid_ny", c.grid_ny, "");
  if (j.contains("boundary_segments")) {
    c.boundary_segments.clear();
    int k = 0;
    for (const auto& sj : j.at("boundary_segments"))
      c.boundary_segments.push_back(
          segment_from_json(sj, "boundary_segments[" + std::to_string(k++) + "]."));
  }
  if (j.contains("pressure_pin")) {
    const auto& p = j.at("pressure_pin");
    reject_unknown(p, {"x", "y", "value"}, "pressure_pin.");
    get_if(p, "x", c.pressure_pin.x, "pressure_pin.");
    get_if(p, "y", c.pressure_pin.y, "pressure_pin.");
    get_if(p, "value", c.pressure_pin.value, "pressure_pin.");
  }
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    reject_unknown(s, {"block_size", "target_epoch", "exponent"}, "schedule.");
    get_if(s, "block_size", c.schedule.block_size, "schedule.");
    get_if(s, "target_epoch", c.schedule.target_epoch, "schedule.");
    get_if(s, "exponent", c.schedule.exponent, "schedule.");
  }
  if (j.contains("weighting")) {
    const auto& s = j.at("weighting");
    reject_unknown(s, {"enabled", "delta", "w_low", "w_high", "activation_epoch"}, "weighting.");
    get_if(s, "enabled", c.weighting.enabled, "weighting.");
    get_if(s, "delta", c.weighting.delta, "weighting.");
    get_if(s, "w_low", c.weighting.w_low, "weighting.");
    get_if(s, "w_high", c.weighting.w_high, "weighting.");
    get_if(s, "activation_epoch", c.weighting.activation_epoch, "weighting.");
  }
  if (j.contains("optimizer")) {
    const auto& s = j.at("optimizer");
    reject_unknown(s,
                   {"lr", "decay", "decay_epochs", "beta1", "beta2", "eps", "grad_clip",
                    "epochs"},
                   "optimizer.");
    get_if(s, "lr", c.optimizer.lr, "optimizer.");
    get_if(s, "decay", c.optimizer.decay, "optimizer.");
    get_if(s, "decay_epochs", c.optimizer.decay_epochs, "optimizer.");
    get_if(s, "beta1", c.optimizer.beta1, "optimizer.");
    get_if(s, "beta2", c.optimizer.beta2, "optimizer.");
    get_if(s, "eps", c.optimizer.eps, "optimizer.");
    get_if(s, "grad_clip", c.optimizer.grad_clip, "optimizer.");
    get_if(s, "epochs", c.optimizer.epochs, "optimizer.");
  }
  if (j.contains("network")) {
    const auto& s = j.at("network");
    reject_unknown(s, {"cells_per_unit", "features", "hidden", "hidden_layers", "jitter_sigma_frac"},
                   "network.");
    get_if(s, "cells_per_unit", c.network.cells_per_unit, "network.");
    get_if(s, "features", c.network.features, "network.");
    get_if(s, "hidden", c.network.hidden, "network.");
    get_if(s, "hidden_layers", c.network.hidden_layers, "network.");
    get_if(s, "jitter_sigma_frac", c.network.jitter_sigma_frac, "network.");
  }
  if (j.contains("gp")) {
    const auto& s = j.at("gp");
    reject_unknown(s, {"gamma", "nugget", "beta", "cache_cap_mb"}, "gp.");
    get_if(s, "gamma", c.gp.gamma, "gp.");
    get_if(s, "nugget", c.gp.nugget, "gp.");
    get_if(s, "beta", c.gp.beta, "gp.");
    get_if(s, "cache_cap_mb", c.gp.cache_cap_mb, "gp.");
  }
  if (j.contains("penalty")) {
    const auto& s = j.at("penalty");
    reject_unknown(s,
                   {"mu_p", "mu_p_growth", "mu_p_max", "c1_sq_tol", "alpha_c_growth",
                    "alpha_c_decay", "alpha_c_max", "adapt_every"},
                   "penalty.");
    get_if(s, "mu_p", c.penalty.mu_p, "penalty.");
    get_if(s, "mu_p_growth", c.penalty.mu_p_growth, "penalty.");
    get_if(s, "mu_p_max", c.penalty.mu_p_max, "penalty.");
    get_if(s, "c1_sq_tol", c.penalty.c1_sq_tol, "penalty.");
    get_if(s, "alpha_c_growth", c.penalty.alpha_c_growth, "penalty.");
    get_if(s, "alpha_c_decay", c.penalty.alpha_c_decay, "penalty.");
    get_if(s, "alpha_c_max", c.penalty.alpha_c_max, "penalty.");
    get_if(s, "adapt_every", c.penalty.adapt_every, "penalty.");
  }
  if (!j.contains("preset") && !j.contains("boundary_segments"))
    throw ConfigError("config must provide boundary_segments or a preset");
  c.validate();
  return c;
}

std::string config_to_json_text(const ProblemConfig& c) {
  json j;
  j["name"] = c.name;
  j["width"] = c.width;
  j["height"] = c.height;
  j["v_target"] = c.v_target;
  j["viscosity"] = c.viscosity;
  j["kappa_inv_max"] = c.kappa_inv_max;
  j["kappa_inv_min"] = c.kappa_inv_min;
  j["q"] = c.q;
  j["n_bc_per_side"] = c.n_bc_per_side;
  j["grid_nx"] = c.grid_nx;
  j["grid_ny"] = c.grid_ny;
  j["boundary_segments"] = json::array();
  for (const auto& b : c.boundary_segments) j["boundary_segments"].push_back(segment_to_json(b));
  j["pressure_pin"] = {{"x", c.pressure_pin.x}, {"y", c.pressure_pin.y}, {"value", c.pressure_pin.value}};
  j["schedule"] = {{"block_size", c.schedule.block_size},
                   {"target_epoch", c.schedule.target_epoch},
                   {"exponent", c.schedule.exponent}};
  j["weighting"] = {{"enabled", c.weighting.enabled},
                    {"delta", c.weighting.delta},
                    {"w_low", c.weighting.w_low},
                    {"w_high", c.weighting.w_high},
                    {"activation_epoch", c.weighting.activation_epoch}};
  j["optimizer"] = {{"lr", c.optimizer.lr},       {"decay", c.optimizer.decay},
                    {"decay_epochs", c.optimizer.decay_epochs},
                    {"beta1", c.optimizer.beta1}, {"beta2", c.optimizer.beta2},
                    {"eps", c.optimizer.eps},     {"grad_clip", c.optimizer.grad_clip},
                    {"epochs", c.optimizer.epochs}};
  j["network"] = {{"cells_per_unit", c.network.cells_per_unit},
                  {"features", c.network.features},
                  {"hidden", c.network.hidden},
                  {"hidden_layers", c.network.hidden_layers},
                  {"jitter_sigma_frac", c.network.jitter_sigma_frac}};
  j["gp"] = {{"gamma", c.gp.gamma},
             {"nugget", c.gp.nugget},
             {"beta", c.gp.beta},
             {"cache_cap_mb", c.gp.cache_cap_mb}};
  j["penalty"] = {{"mu_p", c.penalty.mu_p},
                  {"mu_p_growth", c.penalty.mu_p_growth},
                  {"mu_p_max", c.penalty.mu_p_max},
                  {"c1_sq_tol", c.penalty.c1_sq_tol},
                  {"alpha_c_growth", c.penalty.alpha_c_growth},
                  {"alpha_c_decay", c.penalty.alpha_c_decay},
                  {"alpha_c_max", c.penalty.alpha_c_max},
                  {"adapt_every", c.penalty.adapt_every}};
  return j.dump(2);
}

ProblemConfig parse_config(const std::string& source) {
  const auto names = preset_names();
  if (std::find(names.begin(), names.end(), source) != names.end()) return preset_config(source);
  std::ifstream in(source);
  if (!in) throw ConfigError("cannot read config file: " + source);
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

}  // namespace lcsmto
