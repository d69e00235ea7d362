#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "gbl/errors.hpp"
#include "gbl/riemann.hpp"

namespace gbl {

enum class Form { Conservative, NonConservative };
enum class BudgetKind { Desk, Full };

// Variable substitution phi = delta1*phibar, u = delta2*ubar, applied to the
// subdomain holding the near-vacuum state; the other side stays physical.
struct RescaleParams {
  double delta1 = 1.0;
  double delta2 = 1.0;
  int subdomain = 1;  // 1 or 2
};

struct Domain {
  double x_min = -1.0;
  double x_max = 10.0;
  double t_max = 3.0;
};

struct EvalGridSpec {
  int nx = 512;  // inclusive endpoints
  std::vector<double> times{0.75, 1.5, 2.25, 3.0};
};

struct TrainBudget {
  long epochs = 0;
  int n_u1 = 0, n_u2 = 0;
  int n_f1 = 0, n_f2 = 0;
  int n_if = 0;
  int n_seeds = 1;
};

struct CaseConfig {
  std::string name;
  Form form = Form::Conservative;
  double u_L = 0.0, phi_L = 0.0, u_R = 0.0, phi_R = 0.0;
  double M = 2.0;
  Domain domain;
  std::optional<RescaleParams> rescale;
  long full_epochs = 100000;
  int n_u1 = 101, n_u2 = 499, n_f1 = 3000, n_f2 = 12500, n_if = 99;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  EvalGridSpec eval;

  RiemannData riemann() const {
    return {{u_L, phi_L}, {u_R, phi_R}, Mobility(M)};
  }
};

inline TrainBudget budget_for(const CaseConfig& c, BudgetKind k) {
  if (k == BudgetKind::Full)
    return {c.full_epochs, c.n_u1, c.n_u2, c.n_f1, c.n_f2, c.n_if,
            static_cast<int>(c.seeds.size())};
  return {20000, c.n_u1, c.n_u2, c.n_f1 / 4, c.n_f2 / 4, c.n_if, 1};
}

inline std::vector<CaseConfig> case_registry() {
  std::vector<CaseConfig> out;
  auto add = [&](const std::string& name, double uL, double pL, double uR, double pR,
                 double xmax, int nf2, std::optional<RescaleParams> cons,
                 std::optional<RescaleParams> nc) {
    CaseConfig c;
    c.name = name;
    c.u_L = uL;
    c.phi_L = pL;
    c.u_R = uR;
    c.phi_R = pR;
    c.domain = {-1.0, xmax, 3.0};
    c.n_f2 = nf2;
    c.rescale = cons;
    out.push_back(c);
    c.name = name + "-nc";
    c.form = Form::NonConservative;
    c.rescale = nc;
    out.push_back(c);
  };
  const std::optional<RescaleParams> none;
  add("case1", 0.6, 0.7, 0.3, 0.6, 10.0, 12500, none, none);
  add("case2", 0.45, 0.8, 0.3, 0.6, 10.0, 12500, none, none);
  add("case3a", 2e-4, 0.1, 0.35, 0.5, 10.0, 12500, none, none);
  add("case3b", 2e-4, 0.1, 0.35, 0.5, 10.0, 12500, RescaleParams{1e-2, 1e-4, 1},
      RescaleParams{1e-2, 1e-3, 1});
  add("case4a", 0.6, 0.7, 4e-4, 0.2, 25.0, 17500, none, none);
  add("case4b", 0.6, 0.7, 4e-4, 0.2, 25.0, 17500, RescaleParams{1.0, 0.8, 2},
      RescaleParams{1.0, 0.8, 2});
  add("case5a", 0.49, 0.7, 4e-4, 0.2, 25.0, 17500, none, none);
  add("case5b", 0.49, 0.7, 4e-4, 0.2, 25.0, 17500, RescaleParams{1.0, 0.8, 2},
      RescaleParams{1.0, 0.4, 2});
  return out;
}

inline CaseConfig find_case(const std::string& name) {
  for (CaseConfig& c : case_registry())
    if (c.name == name) return c;
  throw Error("unknown case: " + name);
}

// FNV-1a over a canonical rendering of every registry field; freezing this
// value in a test guards the paper data against accidental drift.
inline std::uint64_t registry_checksum() {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const std::string& s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 1099511628211ull;
    }
  };
  auto mixd = [&](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g;", v);
    mix(buf);
  };
  for (const CaseConfig& c : case_registry()) {
    mix(c.name + ";");
    mix(c.form == Form::Conservative ? "cons;" : "nc;");
    for (double v : {c.u_L, c.phi_L, c.u_R, c.phi_R, c.M, c.domain.x_min,
                     c.domain.x_max, c.domain.t_max})
      mixd(v);
    if (c.rescale) {
      mixd(c.rescale->delta1);
      mixd(c.rescale->delta2);
      mixd(static_cast<double>(c.rescale->subdomain));
    } else {
      mix("noresc;");
    }
    for (double v : {static_cast<double>(c.full_epochs), static_cast<double>(c.n_u1),
                     static_cast<double>(c.n_u2), static_cast<double>(c.n_f1),
                     static_cast<double>(c.n_f2), static_cast<double>(c.n_if),
                     static_cast<double>(c.eval.nx)})
      mixd(v);
    for (auto s : c.seeds) mixd(static_cast<double>(s));
    for (double t : c.eval.times) mixd(t);
  }
  return h;
}

}  // namespace gbl
