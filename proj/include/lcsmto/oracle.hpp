#pragma once

#include <Eigen/Core>
#include <functional>

#include "lcsmto/config.hpp"
#include "lcsmto/io.hpp"

namespace lcsmto {

struct OracleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Solution and diagnostics of one staggered-grid solve.
struct OracleResult {
  int nx = 0, ny = 0;
  double hx = 0, hy = 0;
  // MAC layout: u on vertical faces ((nx+1) x ny), v on horizontal faces
  // (nx x (ny+1)), p at cell centers (nx x ny). Row-major, x fastest.
  Eigen::VectorXd u, v, p;
  double dissipated_power = 0.0;
  double volume_fraction = 0.0;
  double max_divergence = 0.0;
  double solver_residual = 0.0;
  double inlet_flux = 0.0;   // prescribed inflow through boundary faces
  double outlet_flux = 0.0;  // prescribed outflow
  double mid_flux = 0.0;     // flux through the vertical mid-plane, fluid cells only
  bool near_zero_flow = false;       // all-solid density
  double interface_fraction = 0.0;   // fraction of cell edges crossing phases
};

/// Independent staggered-grid (MAC) finite-difference solver for the frozen
/// Brinkman system: assembles the saddle-point system with Dirichlet velocity
/// BCs via ghost values, pins the pressure gauge, solves with a sparse direct
/// factorization, and recomputes the dissipated power.
class OracleSolver {
 public:
  /// nx/ny of 0 default to the config's collocation resolution.
  explicit OracleSolver(const ProblemConfig& config, int nx = 0, int ny = 0);

  int nx() const { return nx_; }
  int ny() const { return ny_; }

  /// rho_cells: density at the solver's cell centers (row-major, size nx*ny).
  OracleResult solve(const Eigen::VectorXd& rho_cells, double tol = 1e-10) const;

  /// Boundary velocity at a physical point on side `s` (from the config BCs).
  void boundary_velocity(Side s, double t, double& u, double& v) const;

  /// Optional replacement for the config BCs (manufactured-solution studies).
  std::function<void(Side, double, double&, double&)> bc_override;

 private:
  ProblemConfig cfg_;
  int nx_ = 0, ny_ = 0;
  double hx_ = 0, hy_ = 0;
  MaterialConstants mat_;
};

/// Nearest-neighbor resample of a raster to the solver resolution.
Eigen::VectorXd resample_nearest(const DensityRaster& raster, int nx, int ny);

/// Reads a density CSV, resamples, solves, and returns the report (the
/// `validate` CLI surface).
OracleResult validate_density(const DensityRaster& raster, const ProblemConfig& config,
                              double tol = 1e-10);

}  // namespace lcsmto
