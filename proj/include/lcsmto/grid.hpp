#pragma once

#include <Eigen/Core>

#include "lcsmto/config.hpp"

namespace lcsmto {

/// Cell-centered regular lattice of collocation points. Point (ix, iy) sits at
/// ((ix+0.5)hx, (iy+0.5)hy) and carries quadrature weight hx*hy. Row-major
/// ordering: id = iy*nx + ix.
struct CollocationGrid {
  int nx = 0;
  int ny = 0;
  double hx = 0.0;
  double hy = 0.0;
  double width = 0.0;
  double height = 0.0;
  Eigen::MatrixX2d points;  // n x 2

  int count() const { return nx * ny; }
  double cell_weight() const { return hx * hy; }
  double area() const { return width * height; }
  int index(int ix, int iy) const { return iy * nx + ix; }
};

CollocationGrid build_grid(const ProblemConfig& config);

/// Anchor set for one conditioned variable: locations on the boundary plus the
/// prescribed values there.
struct AnchorSet {
  Eigen::MatrixX2d points;
  Eigen::VectorXd values;
  int count() const { return static_cast<int>(points.rows()); }
};

struct BoundaryAnchors {
  AnchorSet u;
  AnchorSet v;
  AnchorSet p;
  AnchorSet psi;
};

/// Samples n_bc_per_side equispaced (cell-centered along each side) boundary
/// points. Velocity anchors come from every segment; level-set anchors only
/// from segments with a phase anchor; the pressure set holds exactly the pin.
BoundaryAnchors sample_boundary(const ProblemConfig& config);

}  // namespace lcsmto
