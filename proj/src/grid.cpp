#include "lcsmto/grid.hpp"

#include <cmath>
#include <vector>

namespace lcsmto {

CollocationGrid build_grid(const ProblemConfig& config) {
  config.validate();
  CollocationGrid g;
  g.nx = config.grid_nx;
  g.ny = config.grid_ny;
  g.width = config.width;
  g.height = config.height;
  g.hx = config.width / g.nx;
  g.hy = config.height / g.ny;
  g.points.resize(g.count(), 2);
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      const int id = g.index(ix, iy);
      g.points(id, 0) = (ix + 0.5) * g.hx;
      g.points(id, 1) = (iy + 0.5) * g.hy;
    }
  }
  return g;
}

namespace {

struct SidePoint {
  double x, y, t;  // position and side coordinate
};

std::vector<SidePoint> side_points(const ProblemConfig& c, Side s, int n) {
  std::vector<SidePoint> pts;
  pts.reserve(n);
  const double len = (s == Side::Left || s == Side::Right) ? c.height : c.width;
  for (int k = 0; k < n; ++k) {
    const double t = (k + 0.5) * len / n;
    SidePoint p{0, 0, t};
    switch (s) {
      case Side::Left: p.x = 0.0; p.y = t; break;
      case Side::Right: p.x = c.width; p.y = t; break;
      case Side::Bottom: p.x = t; p.y = 0.0; break;
      case Side::Top: p.x = t; p.y = c.height; break;
    }
    pts.push_back(p);
  }
  return pts;
}

const BoundarySegment* find_segment(const ProblemConfig& c, Side s, double t) {
  for (const auto& b : c.boundary_segments)
    if (b.side == s && b.contains(t)) return &b;
  return nullptr;
}

AnchorSet to_anchor_set(const std::vector<std::array<double, 3>>& rows) {
  AnchorSet a;
  a.points.resize(rows.size(), 2);
  a.values.resize(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    a.points(i, 0) = rows[i][0];
    a.points(i, 1) = rows[i][1];
    a.values(i) = rows[i][2];
  }
  return a;
}

}  // namespace

BoundaryAnchors sample_boundary(const ProblemConfig& config) {
  config.validate();
  std::vector<std::array<double, 3>> au, av, apsi;
  for (Side s : {Side::Left, Side::Right, Side::Bottom, Side::Top}) {
    for (const auto& p : side_points(config, s, config.n_bc_per_side)) {
      const BoundarySegment* seg = find_segment(config, s, p.t);
      if (!seg) throw ConfigError("no boundary segment covers a sampled point");
      double u, v;
      seg->velocity_at(p.t, u, v);
      au.push_back({p.x, p.y, u});
      av.push_back({p.x, p.y, v});
      if (seg->phase != PhaseAnchor::None)
        apsi.push_back({p.x, p.y, seg->phase == PhaseAnchor::Void ? 0.5 : -0.5});
    }
  }
  BoundaryAnchors out;
  out.u = to_anchor_set(au);
  out.v = to_anchor_set(av);
  out.psi = to_anchor_set(apsi);
  out.p = to_anchor_set({{config.pressure_pin.x, config.pressure_pin.y, config.pressure_pin.value}});
  if (out.u.count() == 0 || out.v.count() == 0)
    throw ConfigError("empty velocity anchor set");
  if (out.psi.count() == 0)
    throw ConfigError("empty level-set anchor set: no segment carries a phase anchor");
  return out;
}

}  // namespace lcsmto
