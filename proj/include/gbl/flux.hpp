#pragma once

// Closed-form algebra for the two-phase fractional-flow function
//
//     f(u, phi) = u^2 / (u^2 + M (phi - u)^2),    0 <= u <= phi,
//
// shared by the exact Riemann solver, the finite-difference solver and the
// network losses. Everything here is a pure function of its arguments.

#include <algorithm>
#include <cmath>
#include <limits>

#include "gbl/errors.hpp"

namespace gbl {

/// Water-over-oil viscosity ratio M > 0.
///
/// f(., phi) has a single inflection along the ray phi = m* u with m* > 1;
/// m* depends only on M and is located once per Mobility and cached.
class Mobility {
 public:
  explicit Mobility(double m) : m_(m) {
    if (!(m > 0.0)) throw MobilityOutOfRange("Mobility requires M > 0");
    m_star_ = find_m_star(m_);
  }

  double value() const { return m_; }

  /// Unique direction m* in (1, 50] with f_uu(u, m* u) = 0, to 1e-12.
  double m_star() const {
    if (std::isnan(m_star_))
      throw NoRoot("no f_uu sign change on (1, 50]: M too small");
    return m_star_;
  }

 private:
  // Sign of f_uu along phi = m u is the sign of
  //   p(m) = -1 + (m-1) (-3 + 3M(m-1) + M(m-1)^2)     (u = 1 slice).
  static double inflection_bracket(double M, double m) {
    const double a = m - 1.0;
    return -1.0 + a * (-3.0 + 3.0 * M * a + M * a * a);
  }

  static double find_m_star(double M) {
    double lo = 1.0, hi = 50.0;
    if (!(inflection_bracket(M, lo) < 0.0 && inflection_bracket(M, hi) > 0.0))
      return std::numeric_limits<double>::quiet_NaN();
    while (hi - lo > 1e-12) {
      const double mid = 0.5 * (lo + hi);
      (inflection_bracket(M, mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  double m_;
  double m_star_;
};

/// Conserved pair: u = phi * saturation, porosity phi.
struct State {
  double u = 0.0;
  double phi = 0.0;

  bool valid() const { return phi > 0.0 && u >= 0.0 && u <= phi; }
};

/// Sign of f_uu at a state: OmegaMinus where f_uu < 0 (phi < m* u),
/// OmegaPlus where f_uu > 0 (phi > m* u), Boundary otherwise.
enum class Region { OmegaMinus, OmegaPlus, Boundary };

inline double denom(double u, double phi, const Mobility& M) {
  const double d = phi - u;
  return u * u + M.value() * d * d;
}

inline double flux_f(double u, double phi, const Mobility& M) {
  const double D = denom(u, phi, M);
  if (D <= 0.0) throw DegenerateState("flux_f at u = phi = 0");
  return u * u / D;
}

inline double flux_f_u(double u, double phi, const Mobility& M) {
  const double D = denom(u, phi, M);
  if (D <= 0.0) throw DegenerateState("flux_f_u at u = phi = 0");
  return 2.0 * M.value() * phi * u * (phi - u) / (D * D);
}

inline double flux_f_uu(double u, double phi, const Mobility& M) {
  const double D = denom(u, phi, M);
  if (D <= 0.0) throw DegenerateState("flux_f_uu at u = phi = 0");
  const double m = M.value();
  const double d = phi - u;
  const double bracket = -u * u * u + d * (-3.0 * u * u + 3.0 * m * u * d + m * d * d);
  return 2.0 * m * phi * bracket / (D * D * D);
}

inline double flux_f_phi(double u, double phi, const Mobility& M) {
  const double D = denom(u, phi, M);
  if (D <= 0.0) throw DegenerateState("flux_f_phi at u = phi = 0");
  return -2.0 * M.value() * u * u * (phi - u) / (D * D);
}

/// Mixed second derivative d^2 f / du dphi.
inline double flux_f_uphi(double u, double phi, const Mobility& M) {
  const double D = denom(u, phi, M);
  if (D <= 0.0) throw DegenerateState("flux_f_uphi at u = phi = 0");
  const double m = M.value();
  const double d = phi - u;
  return 2.0 * m * (u * (2.0 * phi - u) * D - 4.0 * m * phi * u * d * d) / (D * D * D);
}

inline double flux_f_phiphi(double u, double phi, const Mobility& M) {
  const double D = denom(u, phi, M);
  if (D <= 0.0) throw DegenerateState("flux_f_phiphi at u = phi = 0");
  const double m = M.value();
  const double d = phi - u;
  return -2.0 * m * u * u * (D - 4.0 * m * d * d) / (D * D * D);
}

inline double m_star(const Mobility& M) { return M.m_star(); }

/// f_uu-sign classification. States off the open wedge 0 < u < phi, and the
/// ray phi = m* u itself (relative width 1e-12), report Boundary.
inline Region classify_region(const State& s, const Mobility& M) {
  if (!(s.u > 0.0 && s.u < s.phi)) return Region::Boundary;
  const double ray = M.m_star() * s.u;
  if (std::abs(s.phi - ray) <= 1e-12 * std::max(s.phi, ray)) return Region::Boundary;
  return s.phi < ray ? Region::OmegaMinus : Region::OmegaPlus;
}

/// Non-conservative flux g(w) = w^2 / (w^2 + M (1-w)^2), w the saturation.
inline double flux_g(double w, const Mobility& M) {
  const double d = 1.0 - w;
  return w * w / (w * w + M.value() * d * d);
}

inline double flux_g_u(double w, const Mobility& M) { return flux_f_u(w, 1.0, M); }
inline double flux_g_uu(double w, const Mobility& M) { return flux_f_uu(w, 1.0, M); }

}  // namespace gbl
