#pragma once

#include <Eigen/Core>
#include <stdexcept>

#include "lcsmto/grid.hpp"

namespace lcsmto {

struct PhysicsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Second-order finite differences on the cell-centered lattice: central in
/// the interior, one-sided at lattice-edge rows/columns. All operators expose
/// their exact transpose for the adjoint sweep.
class Stencils {
 public:
  Stencils() = default;
  Stencils(int nx, int ny, double hx, double hy);

  void dx(const Eigen::VectorXd& f, Eigen::VectorXd& out) const;
  void dy(const Eigen::VectorXd& f, Eigen::VectorXd& out) const;
  void laplacian(const Eigen::VectorXd& f, Eigen::VectorXd& out) const;

  void dx_adjoint(const Eigen::VectorXd& bar, Eigen::VectorXd& acc) const;
  void dy_adjoint(const Eigen::VectorXd& bar, Eigen::VectorXd& acc) const;
  void laplacian_adjoint(const Eigen::VectorXd& bar, Eigen::VectorXd& acc) const;

  int nx() const { return nx_; }
  int ny() const { return ny_; }

 private:
  int nx_ = 0, ny_ = 0;
  double hx_ = 0, hy_ = 0;

  // 1D passes along rows (x) / columns (y).
  void d1(const Eigen::VectorXd& f, Eigen::VectorXd& out, bool along_x, bool adjoint) const;
  void d2(const Eigen::VectorXd& f, Eigen::VectorXd& out, bool along_x, bool adjoint) const;
};

/// All per-point fields and derivatives needed by the residuals and objective.
struct FieldBatch {
  Eigen::VectorXd u, v, p, psi, rho, kinv;
  Eigen::VectorXd ux, uy, vx, vy, px, py, lap_u, lap_v;
  Eigen::VectorXd r_mx, r_my, r_c;
};

struct MaterialConstants {
  double kappa_inv_max = 2.5e4;
  double kappa_inv_min = 2.5e-4;
  double q = 0.1;
};

/// kappa^-1(rho) = kmax + (kmin - kmax) * rho (1+q)/(rho+q), monotone
/// decreasing on [0, 1].
double material_interp(double rho, const MaterialConstants& c);
double material_interp_drho(double rho, const MaterialConstants& c);

/// Populates the derivative fields of `batch` from its u, v, p entries.
void fd_derivatives(FieldBatch& batch, const Stencils& st);

/// r_mx = -px + mu lap(u) - mu kinv u ; r_my analogous ; r_c = ux + vy.
void residuals(FieldBatch& batch, double mu);

/// J = 1/2 sum_j (ux^2+uy^2+vx^2+vy^2 + kinv (u^2+v^2)) w_j
double dissipated_power(const FieldBatch& batch, const CollocationGrid& grid);

/// sum_j rho_j w_j / |Omega|
double volume_fraction(const Eigen::VectorXd& rho, const CollocationGrid& grid);

}  // namespace lcsmto
