#include "lcsmto/oracle.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <vector>

#include "lcsmto/grid.hpp"
#include "lcsmto/physics.hpp"

namespace lcsmto {

OracleSolver::OracleSolver(const ProblemConfig& config, int nx, int ny) : cfg_(config) {
  cfg_.validate();
  nx_ = nx > 0 ? nx : cfg_.grid_nx;
  ny_ = ny > 0 ? ny : cfg_.grid_ny;
  if (nx_ < 3 || ny_ < 3) throw OracleError("oracle grid must be at least 3x3");
  hx_ = cfg_.width / nx_;
  hy_ = cfg_.height / ny_;
  mat_ = {cfg_.kappa_inv_max, cfg_.kappa_inv_min, cfg_.q};
}

void OracleSolver::boundary_velocity(Side s, double t, double& u, double& v) const {
  if (bc_override) {
    bc_override(s, t, u, v);
    return;
  }
  for (const auto& seg : cfg_.boundary_segments)
    if (seg.side == s && seg.contains(t)) {
      seg.velocity_at(t, u, v);
      return;
    }
  throw OracleError("no boundary segment covers side coordinate " + std::to_string(t));
}

OracleResult OracleSolver::solve(const Eigen::VectorXd& rho, double tol) const {
  const int nx = nx_, ny = ny_;
  if (rho.size() != static_cast<long>(nx) * ny)
    throw OracleError("density raster size mismatch: got " + std::to_string(rho.size()) +
                      ", expected " + std::to_string(static_cast<long>(nx) * ny));
  for (long i = 0; i < rho.size(); ++i)
    if (!(rho[i] >= -1e-9 && rho[i] <= 1.0 + 1e-9))
      throw OracleError("density value outside [0, 1]: " + std::to_string(rho[i]));

  const double mu = cfg_.viscosity;
  const double hx = hx_, hy = hy_;
  const long nu = static_cast<long>(nx + 1) * ny;
  const long nv = static_cast<long>(nx) * (ny + 1);
  const long np = static_cast<long>(nx) * ny;
  const long n = nu + nv + np;

  auto iu = [&](int i, int j) { return static_cast<long>(j) * (nx + 1) + i; };
  auto iv = [&](int i, int j) { return nu + static_cast<long>(j) * nx + i; };
  auto ip = [&](int i, int j) { return nu + nv + static_cast<long>(j) * nx + i; };
  auto rc = [&](int i, int j) { return rho[static_cast<long>(j) * nx + i]; };

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(8 * n));
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);

  const double ax = mu / (hx * hx), ay = mu / (hy * hy);

  // x-momentum rows on vertical faces.
  for (int j = 0; j < ny; ++j) {
    const double y = (j + 0.5) * hy;
    for (int i = 0; i <= nx; ++i) {
      const long row = iu(i, j);
      if (i == 0 || i == nx) {
        double ub, vb;
        boundary_velocity(i == 0 ? Side::Left : Side::Right, y, ub, vb);
        trip.emplace_back(row, row, 1.0);
        b[row] = ub;
        continue;
      }
      const double rho_f = 0.5 * (rc(i - 1, j) + rc(i, j));
      const double kinv = material_interp(std::clamp(rho_f, 0.0, 1.0), mat_);
      double diag = -2.0 * ax - 2.0 * ay - mu * kinv;
      trip.emplace_back(row, iu(i - 1, j), ax);
      trip.emplace_back(row, iu(i + 1, j), ax);
      if (j > 0) {
        trip.emplace_back(row, iu(i, j - 1), ay);
      } else {
        double ub, vb;
        boundary_velocity(Side::Bottom, i * hx, ub, vb);
        diag -= ay;
        b[row] -= 2.0 * ay * ub;
      }
      if (j < ny - 1) {
        trip.emplace_back(row, iu(i, j + 1), ay);
      } else {
        double ub, vb;
        boundary_velocity(Side::Top, i * hx, ub, vb);
        diag -= ay;
        b[row] -= 2.0 * ay * ub;
      }
      trip.emplace_back(row, row, diag);
      trip.emplace_back(row, ip(i - 1, j), 1.0 / hx);
      trip.emplace_back(row, ip(i, j), -1.0 / hx);
    }
  }

  // y-momentum rows on horizontal faces.
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const long row = iv(i, j);
      const double x = (i + 0.5) * hx;
      if (j == 0 || j == ny) {
        double ub, vb;
        boundary_velocity(j == 0 ? Side::Bottom : Side::Top, x, ub, vb);
        trip.emplace_back(row, row, 1.0);
        b[row] = vb;
        continue;
      }
      const double rho_f = 0.5 * (rc(i, j - 1) + rc(i, j));
      const double kinv = material_interp(std::clamp(rho_f, 0.0, 1.0), mat_);
      double diag = -2.0 * ax - 2.0 * ay - mu * kinv;
      trip.emplace_back(row, iv(i, j - 1), ay);
      trip.emplace_back(row, iv(i, j + 1), ay);
      if (i > 0) {
        trip.emplace_back(row, iv(i - 1, j), ax);
      } else {
        double ub, vb;
        boundary_velocity(Side::Left, j * hy, ub, vb);
        diag -= ax;
        b[row] -= 2.0 * ax * vb;
      }
      if (i < nx - 1) {
        trip.emplace_back(row, iv(i + 1, j), ax);
      } else {
        double ub, vb;
        boundary_velocity(Side::Right, j * hy, ub, vb);
        diag -= ax;
        b[row] -= 2.0 * ax * vb;
      }
      trip.emplace_back(row, row, diag);
      trip.emplace_back(row, ip(i, j - 1), 1.0 / hy);
      trip.emplace_back(row, ip(i, j), -1.0 / hy);
    }
  }

  // Continuity rows at cells; one cell pinned to fix the pressure gauge.
  const int pin_ix = std::clamp(static_cast<int>(cfg_.pressure_pin.x / hx), 0, nx - 1);
  const int pin_iy = std::clamp(static_cast<int>(cfg_.pressure_pin.y / hy), 0, ny - 1);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const long row = ip(i, j);
      if (i == pin_ix && j == pin_iy) {
        trip.emplace_back(row, row, 1.0);
        b[row] = cfg_.pressure_pin.value;
        continue;
      }
      trip.emplace_back(row, iu(i + 1, j), 1.0 / hx);
      trip.emplace_back(row, iu(i, j), -1.0 / hx);
      trip.emplace_back(row, iv(i, j + 1), 1.0 / hy);
      trip.emplace_back(row, iv(i, j), -1.0 / hy);
    }
  }

  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(trip.begin(), trip.end());
  A.makeCompressed();

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success)
    throw OracleError("sparse factorization failed (singular saddle-point system)");
  Eigen::VectorXd x = lu.solve(b);
  // One step of iterative refinement keeps the relative residual near machine
  // precision even for stiff (high-drag, fine-grid) systems.
  x += lu.solve(b - A * x);
  const double bn = b.norm();
  const double res = (A * x - b).norm() / (bn > 0 ? bn : 1.0);
  if (!(res <= tol))
    throw OracleError("solver residual " + std::to_string(res) + " exceeds tolerance " +
                      std::to_string(tol));

  OracleResult out;
  out.nx = nx;
  out.ny = ny;
  out.hx = hx;
  out.hy = hy;
  out.u = x.segment(0, nu);
  out.v = x.segment(nu, nv);
  out.p = x.segment(nu + nv, np);
  out.solver_residual = res;

  auto uf = [&](int i, int j) { return out.u[static_cast<long>(j) * (nx + 1) + i]; };
  auto vf = [&](int i, int j) { return out.v[static_cast<long>(j) * nx + i]; };

  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      if (i == pin_ix && j == pin_iy) continue;
      const double div = (uf(i + 1, j) - uf(i, j)) / hx + (vf(i, j + 1) - vf(i, j)) / hy;
      out.max_divergence = std::max(out.max_divergence, std::abs(div));
    }

  // Dissipated power on the cell-centered lattice with the same second-order
  // stencils as the trainer: averages faces to centers first.
  {
    ProblemConfig gc = cfg_;
    gc.grid_nx = nx;
    gc.grid_ny = ny;
    const CollocationGrid grid = build_grid(gc);
    FieldBatch batch;
    batch.u.resize(np);
    batch.v.resize(np);
    batch.p = out.p;
    batch.rho = rho;
    batch.kinv.resize(np);
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const long c = static_cast<long>(j) * nx + i;
        batch.u[c] = 0.5 * (uf(i, j) + uf(i + 1, j));
        batch.v[c] = 0.5 * (vf(i, j) + vf(i, j + 1));
        batch.kinv[c] = material_interp(std::clamp(rho[c], 0.0, 1.0), mat_);
      }
    const Stencils st(nx, ny, hx, hy);
    fd_derivatives(batch, st);
    out.dissipated_power = dissipated_power(batch, grid);
    out.volume_fraction = volume_fraction(rho, grid);
  }

  // Boundary fluxes, counting inward contributions as inlet flow.
  for (int j = 0; j < ny; ++j) {
    const double fin = uf(0, j) * hy;
    const double fout = uf(nx, j) * hy;
    out.inlet_flux += std::max(fin, 0.0) + std::max(-fout, 0.0);
    out.outlet_flux += std::max(-fin, 0.0) + std::max(fout, 0.0);
  }
  for (int i = 0; i < nx; ++i) {
    const double fin = vf(i, 0) * hx;
    const double fout = vf(i, ny) * hx;
    out.inlet_flux += std::max(fin, 0.0) + std::max(-fout, 0.0);
    out.outlet_flux += std::max(-fin, 0.0) + std::max(fout, 0.0);
  }

  const int i_mid = nx / 2;
  for (int j = 0; j < ny; ++j) {
    const double rho_f = 0.5 * (rc(i_mid - 1, j) + rc(i_mid, j));
    if (rho_f >= 0.5) out.mid_flux += uf(i_mid, j) * hy;
  }

  out.near_zero_flow = rho.maxCoeff() < 0.5;

  long edges = 0, cuts = 0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      if (i + 1 < nx) {
        ++edges;
        if ((rc(i, j) >= 0.5) != (rc(i + 1, j) >= 0.5)) ++cuts;
      }
      if (j + 1 < ny) {
        ++edges;
        if ((rc(i, j) >= 0.5) != (rc(i, j + 1) >= 0.5)) ++cuts;
      }
    }
  out.interface_fraction = edges > 0 ? static_cast<double>(cuts) / edges : 0.0;
  return out;
}

Eigen::VectorXd resample_nearest(const DensityRaster& raster, int nx, int ny) {
  if (raster.nx <= 0 || raster.ny <= 0 || raster.rho.size() != static_cast<long>(raster.nx) * raster.ny)
    throw OracleError("invalid density raster");
  Eigen::VectorXd out(static_cast<long>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    const int sj = std::clamp(static_cast<int>((j + 0.5) * raster.ny / ny), 0, raster.ny - 1);
    for (int i = 0; i < nx; ++i) {
      const int si = std::clamp(static_cast<int>((i + 0.5) * raster.nx / nx), 0, raster.nx - 1);
      out[static_cast<long>(j) * nx + i] = raster.rho[static_cast<long>(sj) * raster.nx + si];
    }
  }
  return out;
}

OracleResult validate_density(const DensityRaster& raster, const ProblemConfig& config,
                              double tol) {
  OracleSolver solver(config);
  return solver.solve(resample_nearest(raster, solver.nx(), solver.ny()), tol);
}

}  // namespace lcsmto
