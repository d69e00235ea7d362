#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "gbl/cases.hpp"
#include "gbl/errors.hpp"
#include "gbl/flux.hpp"
#include "gbl/metrics.hpp"

namespace gbl {

struct Grid1D {
  double x_min = 0.0;
  double x_max = 1.0;
  int n_cells = 1;
  int ghost = 3;  // WENO5 stencil width

  double dx() const { return (x_max - x_min) / n_cells; }
  double center(int i) const { return x_min + (i + 0.5) * dx(); }
};

struct FieldPair {
  std::vector<double> u;
  std::vector<double> phi;
};

// WENO-JS left-biased interface value from the five point values
// v[0..4] = v_{i-2..i+2}. Candidates are written as v[2] plus a difference
// correction so constant data reproduces bitwise.
inline double weno5_reconstruct(const std::array<double, 5>& v) {
  const double d0 = v[0] - v[2], d1 = v[1] - v[2];
  const double d3 = v[3] - v[2], d4 = v[4] - v[2];
  const double c0 = (2.0 * d0 - 7.0 * d1) / 6.0;
  const double c1 = (2.0 * d3 - d1) / 6.0;
  const double c2 = (5.0 * d3 - d4) / 6.0;
  auto sq = [](double a) { return a * a; };
  const double b0 = (13.0 / 12.0) * sq(d0 - 2.0 * d1) + 0.25 * sq(d0 - 4.0 * d1);
  const double b1 = (13.0 / 12.0) * sq(d1 + d3) + 0.25 * sq(d1 - d3);
  const double b2 = (13.0 / 12.0) * sq(d4 - 2.0 * d3) + 0.25 * sq(d4 - 4.0 * d3);
  const double eps = 1e-6;
  const double a0 = 0.1 / sq(eps + b0);
  const double a1 = 0.6 / sq(eps + b1);
  const double a2 = 0.3 / sq(eps + b2);
  return v[2] + (a0 * c0 + a1 * c1 + a2 * c2) / (a0 + a1 + a2);
}

struct RhsResult {
  std::vector<double> dudt;
  std::vector<double> fluxes;  // n_cells + 1 interface values
  double alpha = 0.0;
};

// Global Lax-Friedrichs splitting with constant-extrapolation ghosts.
// alpha_hold > 0 pins the splitting constant (a driver that froze it at
// selection time); otherwise it is taken fresh from the current fields.
inline RhsResult weno_rhs(const FieldPair& f, const Grid1D& g, const Mobility& M,
                          double alpha_hold = 0.0) {
  const int n = g.n_cells, gh = g.ghost;
  const int ne = n + 2 * gh;
  std::vector<double> ue(ne), pe(ne);
  for (int j = 0; j < ne; ++j) {
    const int i = std::clamp(j - gh, 0, n - 1);
    ue[j] = f.u[i];
    pe[j] = f.phi[i];
  }
  double alpha = alpha_hold;
  if (alpha <= 0.0)
    for (int i = 0; i < n; ++i)
      alpha = std::max(alpha, std::abs(flux_f_u(f.u[i], f.phi[i], M)));
  std::vector<double> fp(ne), fm(ne);
  for (int j = 0; j < ne; ++j) {
    const double fj = flux_f(ue[j], pe[j], M);
    fp[j] = 0.5 * (fj + alpha * ue[j]);
    fm[j] = 0.5 * (fj - alpha * ue[j]);
  }
  RhsResult r;
  r.alpha = alpha;
  r.fluxes.resize(n + 1);
  for (int k = 0; k <= n; ++k) {
    const int e = gh + k;
    r.fluxes[k] =
        weno5_reconstruct({fp[e - 3], fp[e - 2], fp[e - 1], fp[e], fp[e + 1]}) +
        weno5_reconstruct({fm[e + 2], fm[e + 1], fm[e], fm[e - 1], fm[e - 2]});
  }
  r.dudt.resize(n);
  const double dx = g.dx();
  for (int i = 0; i < n; ++i) r.dudt[i] = -(r.fluxes[i + 1] - r.fluxes[i]) / dx;
  return r;
}

inline void check_cfl(double alpha, double dt, double dx, double cfl) {
  if (dt > 0.0 && alpha * dt / dx > cfl * (1.0 + 1e-9))
    throw CFLViolation("alpha*dt/dx = " + std::to_string(alpha * dt / dx) +
                       " exceeds CFL " + std::to_string(cfl));
}

// phi has zero flux; its increment is identically zero and the array is
// never rewritten.
inline FieldPair rhs(const FieldPair& f, const Grid1D& g, const Mobility& M,
                     double dt = 0.0, double cfl = 0.4) {
  RhsResult r = weno_rhs(f, g, M);
  check_cfl(r.alpha, dt, g.dx(), cfl);
  return {std::move(r.dudt), std::vector<double>(g.n_cells, 0.0)};
}

// Shu-Osher stage combination, shared by the grid stepper below.
template <class F>
double rk3_scalar(F&& rhs_fn, double u, double dt) {
  const double u1 = u + dt * rhs_fn(u);
  const double u2 = 0.75 * u + 0.25 * (u1 + dt * rhs_fn(u1));
  return u / 3.0 + (2.0 / 3.0) * (u2 + dt * rhs_fn(u2));
}

struct StepStats {
  double flux_left = 0.0;   // effective RK3 boundary flux, left edge
  double flux_right = 0.0;  // and right edge
  double clipped = 0.0;     // L1 mass moved by the post-step clip
};

inline StepStats step_tvdrk3(FieldPair& f, const Grid1D& g, const Mobility& M,
                             double dt, double alpha_hold = 0.0) {
  const int n = g.n_cells;
  const double dx = g.dx();
  // dt and alpha_hold selection are the caller's contract (validated where
  // the caller picks them); states emerging mid-run may outrun a previously
  // selected pair, which is the documented near-vacuum failure mode, not a
  // usage error.
  RhsResult r0 = weno_rhs(f, g, M, alpha_hold);
  FieldPair s1{std::vector<double>(n), f.phi};
  for (int i = 0; i < n; ++i) s1.u[i] = f.u[i] + dt * r0.dudt[i];
  RhsResult r1 = weno_rhs(s1, g, M, alpha_hold);
  FieldPair s2{std::vector<double>(n), f.phi};
  for (int i = 0; i < n; ++i)
    s2.u[i] = 0.75 * f.u[i] + 0.25 * (s1.u[i] + dt * r1.dudt[i]);
  RhsResult r2 = weno_rhs(s2, g, M, alpha_hold);
  StepStats st;
  for (int i = 0; i < n; ++i) {
    double un = f.u[i] / 3.0 + (2.0 / 3.0) * (s2.u[i] + dt * r2.dudt[i]);
    const double lo = 0.0, hi = f.phi[i];
    if (un < lo) {
      st.clipped += (lo - un) * dx;
      un = lo;
    } else if (un > hi) {
      st.clipped += (un - hi) * dx;
      un = hi;
    }
    f.u[i] = un;
  }
  st.flux_left = r0.fluxes[0] / 6.0 + r1.fluxes[0] / 6.0 + 2.0 / 3.0 * r2.fluxes[0];
  st.flux_right = r0.fluxes[n] / 6.0 + r1.fluxes[n] / 6.0 + 2.0 / 3.0 * r2.fluxes[n];
  return st;
}

struct WenoRun {
  SolutionField eval_field;  // on the shared evaluation set
  SolutionField native;      // cell centers at each output time
  double total_clipped = 0.0;
  long steps = 0;
};

inline WenoRun solve_weno(const CaseConfig& c, int n_cells = 0, double cfl = 0.4) {
  if (c.form == Form::NonConservative)
    throw NonConservativeUnsupported(
        "finite-difference treatment of the non-conservative form is an open "
        "problem; case " +
        c.name + " refused");
  Grid1D g;
  g.x_min = c.domain.x_min;
  g.x_max = c.domain.x_max;
  g.n_cells = n_cells > 0
                  ? n_cells
                  : static_cast<int>(std::llround((c.domain.x_max - c.domain.x_min) /
                                                  0.005));
  const Mobility M(c.M);
  const int n = g.n_cells;
  FieldPair f{std::vector<double>(n), std::vector<double>(n)};
  for (int i = 0; i < n; ++i) {
    const double x = g.center(i);
    f.u[i] = x <= 0.0 ? c.u_L : c.u_R;
    f.phi[i] = x <= 0.0 ? c.phi_L : c.phi_R;
  }
  // The splitting constant and dt are both selected once, from the initial
  // profile. States created by the evolution can be faster than anything in
  // the data (interface crossings reach speeds ~ 1/phi), and on the
  // near-vacuum cases that selection gap is exactly the documented
  // breakdown: emerging states outrun both the dissipation and the CFL
  // budget, and the run degrades into clipped oscillations.
  double alpha0 = 0.0;
  for (int i = 0; i < n; ++i)
    alpha0 = std::max(alpha0, std::abs(flux_f_u(f.u[i], f.phi[i], M)));
  const double dt0 = alpha0 > 0.0 ? cfl * g.dx() / alpha0 : c.domain.t_max;
  check_cfl(alpha0, dt0, g.dx(), cfl);
  WenoRun run;
  run.eval_field = {c.name, "weno5", 0, {}};
  run.native = {c.name, "weno5", 0, {}};
  const std::vector<double> xs = eval_xs(c);
  double t = 0.0;
  for (double T : c.eval.times) {
    while (T - t > 1e-12) {
      const double dt = std::min(dt0, T - t);
      run.total_clipped += step_tvdrk3(f, g, M, dt, alpha0).clipped;
      t += dt;
      ++run.steps;
    }
    for (int i = 0; i < n; ++i)
      run.native.samples.push_back({g.center(i), T, f.u[i], f.phi[i]});
    for (double x : xs) {
      // Linear interpolation between cell centers; constant beyond the
      // first/last center, matching the ghost extrapolation.
      const double w = (x - g.center(0)) / g.dx();
      const int j = std::clamp(static_cast<int>(std::floor(w)), 0, n - 2);
      const double a = std::clamp(w - j, 0.0, 1.0);
      run.eval_field.samples.push_back({x, T, (1.0 - a) * f.u[j] + a * f.u[j + 1],
                                        (1.0 - a) * f.phi[j] + a * f.phi[j + 1]});
    }
  }
  return run;
}

}  // namespace gbl
