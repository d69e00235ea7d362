#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "gbl/errors.hpp"
#include "gbl/flux.hpp"
#include "json.hpp"

namespace gbl {

struct RiemannData {
  State left;
  State right;
  Mobility M;
};

// Zero-speed jump across the porosity discontinuity. Flux continuity holds
// exactly because f is degree-zero homogeneous and u/phi is preserved.
struct StandingWave {
  double u_minus = 0.0;
  double u_plus = 0.0;
  double phi_minus = 0.0;
  double phi_plus = 0.0;
  double speed = 0.0;
};

enum class WaveKind { Shock, Rarefaction };

// One self-similar wave. Shocks carry speed_left == speed_right (the RH
// speed); rarefactions carry the edge characteristic speeds in xi-order.
struct WavePiece {
  WaveKind kind = WaveKind::Shock;
  double u_left = 0.0;
  double u_right = 0.0;
  double speed_left = 0.0;
  double speed_right = 0.0;
};

struct RiemannFan {
  RiemannData data;
  double u_M = 0.0;
  StandingWave standing;
  std::vector<WavePiece> pieces;  // nondecreasing speeds, all >= 0
  std::optional<double> u_star;
};

inline void validate(const RiemannData& d) {
  if (!(d.left.phi > 0.0) || !(d.right.phi > 0.0) || !(d.left.u > 0.0) ||
      !(d.right.u > 0.0) || d.left.u > d.left.phi || d.right.u > d.right.phi)
    throw DegenerateState("Riemann data must satisfy 0 < u <= phi on both sides");
}

inline double middle_state(const RiemannData& d) {
  return d.left.u / d.left.phi * d.right.phi;
}

// Tangency point of the line through (u_R, f(u_R)) with f(., phi_R): the
// admissible root of the factored cubic. Written in Citardauq form so the
// leading coefficient phi_R - 2 u_R can pass through zero; the explicitly
// degenerate branch keeps that point exact.
inline double u_star(double u_R, double phi_R, const Mobility& M) {
  if (M.value() <= 1.0)
    throw MobilityOutOfRange("u_star requires M > 1, got " + std::to_string(M.value()));
  const double mt = M.value() / (M.value() + 1.0);
  if (std::abs(phi_R - 2.0 * u_R) <= 1e-12 * phi_R)
    return 2.0 * M.value() * u_R / (M.value() + 1.0);
  const double a = phi_R - 2.0 * u_R;
  const double b = 2.0 * phi_R * u_R;
  const double c = mt * phi_R * phi_R * phi_R;
  return 2.0 * c / (b + std::sqrt(b * b + 4.0 * a * c));
}

inline double shock_speed(double ua, double ub, double phi, const Mobility& M) {
  return (flux_f(ua, phi, M) - flux_f(ub, phi, M)) / (ua - ub);
}

// Convex-envelope decomposition of f(., phi) between u_from and u_to.
// The single inflection of f makes every admissible wave either a shock,
// a rarefaction, or a rarefaction followed by a contact shock through the
// tangency point.
inline std::vector<WavePiece> envelope_construct(double u_from, double u_to,
                                                 double phi, const Mobility& M) {
  std::vector<WavePiece> out;
  const double us = u_star(u_to, phi, M);
  const double tol = 1e-12 * phi;
  const bool decreasing = u_from > u_to;
  const bool pure_shock = decreasing ? (us >= u_from - tol) : (us <= u_from + tol);
  const bool pure_raref = decreasing ? (us <= u_to + tol) : (us >= u_to - tol);
  if (pure_shock) {
    const double s = shock_speed(u_from, u_to, phi, M);
    out.push_back({WaveKind::Shock, u_from, u_to, s, s});
    return out;
  }
  if (pure_raref) {
    out.push_back({WaveKind::Rarefaction, u_from, u_to, flux_f_u(u_from, phi, M),
                   flux_f_u(u_to, phi, M)});
    return out;
  }
  out.push_back({WaveKind::Rarefaction, u_from, us, flux_f_u(u_from, phi, M),
                 flux_f_u(us, phi, M)});
  const double s = shock_speed(us, u_to, phi, M);
  out.push_back({WaveKind::Shock, us, u_to, s, s});
  return out;
}

inline RiemannFan solve_riemann(const RiemannData& d) {
  validate(d);
  RiemannFan fan{d, middle_state(d), {}, {}, std::nullopt};
  fan.standing = {d.left.u, fan.u_M, d.left.phi, d.right.phi, 0.0};
  if (std::abs(fan.u_M - d.right.u) >= 1e-12) {
    fan.u_star = u_star(d.right.u, d.right.phi, d.M);
    fan.pieces = envelope_construct(fan.u_M, d.right.u, d.right.phi, d.M);
  }
  return fan;
}

inline double to_nonconservative(double u, double phi) {
  if (!(phi > 0.0)) throw DegenerateState("to_nonconservative requires phi > 0");
  return u / phi;
}

inline State evaluate_fan(const RiemannFan& fan, double x, double t) {
  if (!(t > 0.0)) throw Error("evaluate_fan requires t > 0");
  if (x < 0.0) return fan.data.left;
  const double phi = fan.data.right.phi;
  const double xi = x / t;
  for (const WavePiece& p : fan.pieces) {
    if (xi < p.speed_left) return {p.u_left, phi};
    if (p.kind == WaveKind::Rarefaction && xi <= p.speed_right) {
      // f_u is monotone along the fan segment; bisect on the parameter.
      double wlo = 0.0, whi = 1.0;
      const double du = p.u_right - p.u_left;
      while (std::abs(du) * (whi - wlo) > 1e-10) {
        const double wm = 0.5 * (wlo + whi);
        if (flux_f_u(p.u_left + wm * du, phi, fan.data.M) < xi)
          wlo = wm;
        else
          whi = wm;
      }
      return {p.u_left + 0.5 * (wlo + whi) * du, phi};
    }
  }
  return {fan.pieces.empty() ? fan.u_M : fan.pieces.back().u_right, phi};
}

inline nlohmann::json fan_to_json(const RiemannFan& fan) {
  nlohmann::json j;
  j["schema"] = "fan_v1";
  j["data"] = {{"left", {{"u", fan.data.left.u}, {"phi", fan.data.left.phi}}},
               {"right", {{"u", fan.data.right.u}, {"phi", fan.data.right.phi}}},
               {"M", fan.data.M.value()}};
  j["u_M"] = fan.u_M;
  if (fan.u_star)
    j["u_star"] = *fan.u_star;
  else
    j["u_star"] = nullptr;
  j["standing"] = {{"u_minus", fan.standing.u_minus},
                   {"u_plus", fan.standing.u_plus},
                   {"phi_minus", fan.standing.phi_minus},
                   {"phi_plus", fan.standing.phi_plus},
                   {"speed", fan.standing.speed}};
  j["pieces"] = nlohmann::json::array();
  for (const WavePiece& p : fan.pieces)
    j["pieces"].push_back({{"kind", p.kind == WaveKind::Shock ? "shock" : "rarefaction"},
                           {"u_left", p.u_left},
                           {"u_right", p.u_right},
                           {"speed_left", p.speed_left},
                           {"speed_right", p.speed_right}});
  return j;
}

inline RiemannFan fan_from_json(const nlohmann::json& j) {
  if (j.at("schema").get<std::string>() != "fan_v1")
    throw Error("unsupported fan schema: " + j.at("schema").get<std::string>());
  const auto& d = j.at("data");
  RiemannFan fan{{{d.at("left").at("u"), d.at("left").at("phi")},
                  {d.at("right").at("u"), d.at("right").at("phi")},
                  Mobility(d.at("M").get<double>())},
                 j.at("u_M"),
                 {},
                 {},
                 std::nullopt};
  if (!j.at("u_star").is_null()) fan.u_star = j.at("u_star").get<double>();
  const auto& s = j.at("standing");
  fan.standing = {s.at("u_minus"), s.at("u_plus"), s.at("phi_minus"),
                  s.at("phi_plus"), s.at("speed")};
  for (const auto& p : j.at("pieces"))
    fan.pieces.push_back({p.at("kind").get<std::string>() == "shock"
                              ? WaveKind::Shock
                              : WaveKind::Rarefaction,
                          p.at("u_left"), p.at("u_right"), p.at("speed_left"),
                          p.at("speed_right")});
  return fan;
}

}  // namespace gbl
