#include "lcsmto/physics.hpp"

#include <cmath>

namespace lcsmto {

Stencils::Stencils(int nx, int ny, double hx, double hy) : nx_(nx), ny_(ny), hx_(hx), hy_(hy) {
  if (nx < 3 || ny < 3) throw PhysicsError("FD lattice needs nx, ny >= 3");
}

namespace {

struct Line {
  long base;
  long stride;
  int n;
  double h;
};

template <typename Fwd, typename Adj>
void for_each_line(int nx, int ny, double hx, double hy, bool along_x, bool adjoint, Fwd&& fwd,
                   Adj&& adj) {
  if (along_x) {
    for (int iy = 0; iy < ny; ++iy) {
      Line ln{static_cast<long>(iy) * nx, 1, nx, hx};
      if (adjoint)
        adj(ln);
      else
        fwd(ln);
    }
  } else {
    for (int ix = 0; ix < nx; ++ix) {
      Line ln{ix, nx, ny, hy};
      if (adjoint)
        adj(ln);
      else
        fwd(ln);
    }
  }
}

}  // namespace

void Stencils::d1(const Eigen::VectorXd& f, Eigen::VectorXd& out, bool along_x,
                  bool adjoint) const {
  auto at = [](const Line& ln, int i) { return ln.base + static_cast<long>(i) * ln.stride; };
  for_each_line(
      nx_, ny_, hx_, hy_, along_x, adjoint,
      [&](const Line& ln) {
        const double inv2h = 1.0 / (2.0 * ln.h);
        out[at(ln, 0)] = (-3.0 * f[at(ln, 0)] + 4.0 * f[at(ln, 1)] - f[at(ln, 2)]) * inv2h;
        for (int i = 1; i < ln.n - 1; ++i)
          out[at(ln, i)] = (f[at(ln, i + 1)] - f[at(ln, i - 1)]) * inv2h;
        const int e = ln.n - 1;
        out[at(ln, e)] = (3.0 * f[at(ln, e)] - 4.0 * f[at(ln, e - 1)] + f[at(ln, e - 2)]) * inv2h;
      },
      [&](const Line& ln) {
        const double inv2h = 1.0 / (2.0 * ln.h);
        double c = f[at(ln, 0)] * inv2h;  // f is the cotangent here
        out[at(ln, 0)] += -3.0 * c;
        out[at(ln, 1)] += 4.0 * c;
        out[at(ln, 2)] += -c;
        for (int i = 1; i < ln.n - 1; ++i) {
          c = f[at(ln, i)] * inv2h;
          out[at(ln, i + 1)] += c;
          out[at(ln, i - 1)] -= c;
        }
        const int e = ln.n - 1;
        c = f[at(ln, e)] * inv2h;
        out[at(ln, e)] += 3.0 * c;
        out[at(ln, e - 1)] += -4.0 * c;
        out[at(ln, e - 2)] += c;
      });
}

void Stencils::d2(const Eigen::VectorXd& f, Eigen::VectorXd& out, bool along_x,
                  bool adjoint) const {
  auto at = [](const Line& ln, int i) { return ln.base + static_cast<long>(i) * ln.stride; };
  for_each_line(
      nx_, ny_, hx_, hy_, along_x, adjoint,
      [&](const Line& ln) {
        const double invh2 = 1.0 / (ln.h * ln.h);
        const int e = ln.n - 1;
        if (ln.n >= 4) {
          out[at(ln, 0)] += (2.0 * f[at(ln, 0)] - 5.0 * f[at(ln, 1)] + 4.0 * f[at(ln, 2)] -
                             f[at(ln, 3)]) *
                            invh2;
          out[at(ln, e)] += (2.0 * f[at(ln, e)] - 5.0 * f[at(ln, e - 1)] +
                             4.0 * f[at(ln, e - 2)] - f[at(ln, e - 3)]) *
                            invh2;
        } else {
          out[at(ln, 0)] += (f[at(ln, 0)] - 2.0 * f[at(ln, 1)] + f[at(ln, 2)]) * invh2;
          out[at(ln, e)] += (f[at(ln, e)] - 2.0 * f[at(ln, e - 1)] + f[at(ln, e - 2)]) * invh2;
        }
        for (int i = 1; i < e; ++i)
          out[at(ln, i)] +=
              (f[at(ln, i + 1)] - 2.0 * f[at(ln, i)] + f[at(ln, i - 1)]) * invh2;
      },
      [&](const Line& ln) {
        const double invh2 = 1.0 / (ln.h * ln.h);
        const int e = ln.n - 1;
        if (ln.n >= 4) {
          double c = f[at(ln, 0)] * invh2;
          out[at(ln, 0)] += 2.0 * c;
          out[at(ln, 1)] += -5.0 * c;
          out[at(ln, 2)] += 4.0 * c;
          out[at(ln, 3)] += -c;
          c = f[at(ln, e)] * invh2;
          out[at(ln, e)] += 2.0 * c;
          out[at(ln, e - 1)] += -5.0 * c;
          out[at(ln, e - 2)] += 4.0 * c;
          out[at(ln, e - 3)] += -c;
        } else {
          double c = f[at(ln, 0)] * invh2;
          out[at(ln, 0)] += c;
          out[at(ln, 1)] += -2.0 * c;
          out[at(ln, 2)] += c;
          c = f[at(ln, e)] * invh2;
          out[at(ln, e)] += c;
          out[at(ln, e - 1)] += -2.0 * c;
          out[at(ln, e - 2)] += c;
        }
        for (int i = 1; i < e; ++i) {
          const double c = f[at(ln, i)] * invh2;
          out[at(ln, i + 1)] += c;
          out[at(ln, i)] += -2.0 * c;
          out[at(ln, i - 1)] += c;
        }
      });
}

void Stencils::dx(const Eigen::VectorXd& f, Eigen::VectorXd& out) const {
  out.resize(f.size());
  d1(f, out, true, false);
}

void Stencils::dy(const Eigen::VectorXd& f, Eigen::VectorXd& out) const {
  out.resize(f.size());
  d1(f, out, false, false);
}

void Stencils::laplacian(const Eigen::VectorXd& f, Eigen::VectorXd& out) const {
  out.setZero(f.size());
  d2(f, out, true, false);
  d2(f, out, false, false);
}

void Stencils::dx_adjoint(const Eigen::VectorXd& bar, Eigen::VectorXd& acc) const {
  d1(bar, acc, true, true);
}

void Stencils::dy_adjoint(const Eigen::VectorXd& bar, Eigen::VectorXd& acc) const {
  d1(bar, acc, false, true);
}

void Stencils::laplacian_adjoint(const Eigen::VectorXd& bar, Eigen::VectorXd& acc) const {
  d2(bar, acc, true, true);
  d2(bar, acc, false, true);
}

double material_interp(double rho, const MaterialConstants& c) {
  if (rho < -1e-9 || rho > 1.0 + 1e-9)
    throw PhysicsError("density outside [0, 1]: " + std::to_string(rho));
  rho = std::clamp(rho, 0.0, 1.0);
  return c.kappa_inv_max + (c.kappa_inv_min - c.kappa_inv_max) * rho * (1.0 + c.q) / (rho + c.q);
}

double material_interp_drho(double rho, const MaterialConstants& c) {
  rho = std::clamp(rho, 0.0, 1.0);
  const double d = rho + c.q;
  return (c.kappa_inv_min - c.kappa_inv_max) * (1.0 + c.q) * c.q / (d * d);
}

void fd_derivatives(FieldBatch& batch, const Stencils& st) {
  st.dx(batch.u, batch.ux);
  st.dy(batch.u, batch.uy);
  st.dx(batch.v, batch.vx);
  st.dy(batch.v, batch.vy);
  st.dx(batch.p, batch.px);
  st.dy(batch.p, batch.py);
  st.laplacian(batch.u, batch.lap_u);
  st.laplacian(batch.v, batch.lap_v);
}

void residuals(FieldBatch& batch, double mu) {
  batch.r_mx = -batch.px + mu * batch.lap_u - mu * batch.kinv.cwiseProduct(batch.u);
  batch.r_my = -batch.py + mu * batch.lap_v - mu * batch.kinv.cwiseProduct(batch.v);
  batch.r_c = batch.ux + batch.vy;
}

double dissipated_power(const FieldBatch& b, const CollocationGrid& grid) {
  long double acc = 0;
  for (Eigen::Index j = 0; j < b.u.size(); ++j) {
    acc += static_cast<long double>(b.ux[j]) * b.ux[j] + static_cast<long double>(b.uy[j]) * b.uy[j] +
           static_cast<long double>(b.vx[j]) * b.vx[j] + static_cast<long double>(b.vy[j]) * b.vy[j];
    acc += static_cast<long double>(b.kinv[j]) * (b.u[j] * b.u[j] + b.v[j] * b.v[j]);
  }
  return static_cast<double>(0.5L * grid.cell_weight() * acc);
}

double volume_fraction(const Eigen::VectorXd& rho, const CollocationGrid& grid) {
  return rho.sum() * grid.cell_weight() / grid.area();
}

}  // namespace lcsmto
