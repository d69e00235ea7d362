#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <random>

#include "gbl/weno5.hpp"

using namespace gbl;

namespace {

double u01(std::mt19937_64& g) { return (g() >> 11) * 0x1.0p-53; }

// Derivative error of the reconstruction on periodic sine data with unit
// advection speed (pure left-biased upwind; no splitting needed).
double sine_derivative_l1(int n) {
  const double h = 2.0 * M_PI / n;
  auto v = [&](int i) { return std::sin(((i % n + n) % n + 0.5) * h); };
  std::vector<double> F(n + 1);
  for (int k = 0; k <= n; ++k)
    F[k] = weno5_reconstruct({v(k - 3), v(k - 2), v(k - 1), v(k), v(k + 1)});
  double e = 0.0;
  for (int i = 0; i < n; ++i)
    e += std::abs((F[i + 1] - F[i]) / h - std::cos((i + 0.5) * h)) * h;
  return e;
}

double total_variation(const std::vector<double>& u) {
  double tv = 0.0;
  for (size_t i = 1; i < u.size(); ++i) tv += std::abs(u[i] - u[i - 1]);
  return tv;
}

// Relative L2 against the exact fan on the run's own cells at the final time.
double native_final_l2(const CaseConfig& c, const WenoRun& run) {
  const RiemannFan fan = solve_riemann(c.riemann());
  const double tf = c.eval.times.back();
  SolutionField pf{c.name, "weno5", 0, {}}, ef{c.name, "exact", 0, {}};
  for (const Sample& s : run.native.samples)
    if (s.t == tf) {
      pf.samples.push_back(s);
      const State st = evaluate_fan(fan, s.x, s.t);
      ef.samples.push_back({s.x, s.t, st.u, st.phi});
    }
  return relative_l2(pf, ef);
}

}  // namespace

TEST_CASE("reconstruction reproduces constants bitwise", "[weno5]") {
  for (double c : {0.3, 0.7, 1e-3, -2.5}) {
    CHECK(weno5_reconstruct({c, c, c, c, c}) == c);
  }
}

TEST_CASE("reconstruction reproduces linear data at the interface", "[weno5]") {
  const double h = 0.1, a = 0.4, b = 1.7;
  std::array<double, 5> v;
  for (int j = 0; j < 5; ++j) v[j] = a + b * (j - 2) * h;
  CHECK(weno5_reconstruct(v) == Catch::Approx(a + b * h / 2.0).margin(1e-13));
}

TEST_CASE("reconstruction derivative converges at order >= 4.5 on sine data",
          "[weno5]") {
  const double e1 = sine_derivative_l1(40);
  const double e2 = sine_derivative_l1(80);
  const double e3 = sine_derivative_l1(160);
  CHECK(std::log2(e1 / e2) >= 4.5);
  CHECK(std::log2(e2 / e3) >= 4.5);
}

TEST_CASE("rk3 stage combination is exactly third-order Taylor on linear rhs",
          "[weno5]") {
  const double lam = -1.0, u0 = 1.3, dt = 0.1;
  auto f = [&](double u) { return lam * u; };
  const double z = lam * dt;
  const double taylor = u0 * (1.0 + z + z * z / 2.0 + z * z * z / 6.0);
  CHECK(rk3_scalar(f, u0, dt) == Catch::Approx(taylor).margin(1e-15));
  // Global order on a fixed horizon.
  auto integrate = [&](int steps) {
    double u = u0;
    for (int s = 0; s < steps; ++s) u = rk3_scalar(f, u, 1.0 / steps);
    return std::abs(u - u0 * std::exp(lam));
  };
  const double order = std::log2(integrate(16) / integrate(32));
  CHECK(order >= 2.9);
}

TEST_CASE("uniform fields give a zero increment; phi rhs is always zero",
          "[weno5]") {
  Grid1D g{0.0, 1.0, 64};
  Mobility M(2.0);
  FieldPair f{std::vector<double>(64, 0.3), std::vector<double>(64, 0.6)};
  FieldPair inc = rhs(f, g, M);
  for (double d : inc.u) REQUIRE(d == 0.0);
  std::mt19937_64 rng(201);
  for (int i = 0; i < 64; ++i) {
    f.phi[i] = 0.4 + 0.5 * u01(rng);
    f.u[i] = f.phi[i] * u01(rng);
  }
  for (double d : rhs(f, g, M).phi) REQUIRE(d == 0.0);
}

TEST_CASE("single-cell perturbation stays within the stencil radius", "[weno5]") {
  Grid1D g{0.0, 1.0, 64};
  Mobility M(2.0);
  FieldPair base{std::vector<double>(64, 0.3), std::vector<double>(64, 0.6)};
  base.u[20] = 0.4;  // pins the global wave speed away from the probe
  FieldPair pert = base;
  pert.u[50] += 1e-4;
  const FieldPair r0 = rhs(base, g, M);
  const FieldPair r1 = rhs(pert, g, M);
  for (int i = 0; i < 64; ++i) {
    if (std::abs(i - 50) <= 3)
      continue;
    REQUIRE(r1.u[i] == r0.u[i]);
  }
  CHECK(r1.u[50] != r0.u[50]);
  CHECK(r1.u[48] != r0.u[48]);
}

TEST_CASE("mass changes only by the effective boundary fluxes", "[weno5]") {
  const CaseConfig c = find_case("case1");
  Grid1D g{c.domain.x_min, c.domain.x_max, 220};
  Mobility M(c.M);
  FieldPair f{std::vector<double>(220), std::vector<double>(220)};
  for (int i = 0; i < 220; ++i) {
    f.u[i] = g.center(i) <= 0.0 ? c.u_L : c.u_R;
    f.phi[i] = g.center(i) <= 0.0 ? c.phi_L : c.phi_R;
  }
  const double dx = g.dx();
  for (int s = 0; s < 20; ++s) {
    double alpha = 0.0;
    for (int i = 0; i < 220; ++i)
      alpha = std::max(alpha, std::abs(flux_f_u(f.u[i], f.phi[i], M)));
    const double dt = 0.4 * dx / alpha;
    double mass0 = 0.0;
    for (double v : f.u) mass0 += v * dx;
    StepStats st = step_tvdrk3(f, g, M, dt);
    REQUIRE(st.clipped == 0.0);
    double mass1 = 0.0;
    for (double v : f.u) mass1 += v * dx;
    REQUIRE(mass1 - mass0 ==
            Catch::Approx(-dt * (st.flux_right - st.flux_left)).margin(1e-10));
  }
}

TEST_CASE("phi is bitwise unchanged across steps", "[weno5]") {
  const CaseConfig c = find_case("case1");
  Grid1D g{c.domain.x_min, c.domain.x_max, 200};
  Mobility M(c.M);
  FieldPair f{std::vector<double>(200), std::vector<double>(200)};
  for (int i = 0; i < 200; ++i) {
    f.u[i] = g.center(i) <= 0.0 ? c.u_L : c.u_R;
    f.phi[i] = g.center(i) <= 0.0 ? c.phi_L : c.phi_R;
  }
  const std::vector<double> phi0 = f.phi;
  for (int s = 0; s < 100; ++s) step_tvdrk3(f, g, M, 0.4 * g.dx() / 4.0);
  REQUIRE(std::memcmp(phi0.data(), f.phi.data(), 200 * sizeof(double)) == 0);
}

TEST_CASE("uniform state is a fixed point; zero-jump case preserved", "[weno5]") {
  Grid1D g{-1.0, 1.0, 80};
  Mobility M(2.0);
  FieldPair f{std::vector<double>(80, 0.25), std::vector<double>(80, 0.5)};
  const std::vector<double> u0 = f.u;
  for (int s = 0; s < 50; ++s) step_tvdrk3(f, g, M, 1e-3);
  for (int i = 0; i < 80; ++i) REQUIRE(std::abs(f.u[i] - u0[i]) <= 1e-12);

  CaseConfig c = find_case("case1");
  c.u_L = c.u_R = 0.3;
  c.phi_L = c.phi_R = 0.6;
  WenoRun run = solve_weno(c, 150);
  for (const Sample& s : run.eval_field.samples)
    REQUIRE(std::abs(s.u - 0.3) <= 1e-12);
}

TEST_CASE("CFL misuse and non-conservative cases are rejected", "[weno5]") {
  Grid1D g{0.0, 1.0, 64};
  Mobility M(2.0);
  FieldPair f{std::vector<double>(64, 0.3), std::vector<double>(64, 0.6)};
  f.u[10] = 0.4;
  double alpha = 0.0;
  for (int i = 0; i < 64; ++i)
    alpha = std::max(alpha, std::abs(flux_f_u(f.u[i], f.phi[i], M)));
  CHECK_THROWS_AS(rhs(f, g, M, 2.0 * 0.4 * g.dx() / alpha, 0.4), CFLViolation);
  CHECK_THROWS_AS(solve_weno(find_case("case1-nc")), NonConservativeUnsupported);
}

TEST_CASE("case 2 total variation grows at most 5 percent", "[weno5][slow]") {
  const CaseConfig c = find_case("case2");
  WenoRun run = solve_weno(c);
  const double tv0 = std::abs(c.u_L - c.u_R);
  std::vector<double> ufinal;
  for (const Sample& s : run.native.samples)
    if (s.t == c.eval.times.back()) ufinal.push_back(s.u);
  REQUIRE(ufinal.size() == 2200);
  CHECK(total_variation(ufinal) <= 1.05 * tv0);
  CHECK(run.total_clipped <= 1e-12);
}

TEST_CASE("case 1 matches the exact fan within twice the reference error",
          "[weno5][slow]") {
  const CaseConfig c = find_case("case1");
  WenoRun run = solve_weno(c);
  // Shared-evaluation-set error is shock-sample dominated and sits near the
  // wider cross-oracle bound; the run's own grid at the final time carries
  // the tighter factor-2 agreement.
  const double l2 = native_final_l2(c, run);
  CHECK(l2 <= 2.0 * 1.85e-3);
  CHECK(l2 >= 1e-5);  // sanity: a genuine numerical solution, not the oracle
  CHECK(relative_l2(run.eval_field, exact_field(c)) <= 3.0 * 1.85e-3);
}

TEST_CASE("case 3a matches the exact fan within three times the reference error",
          "[weno5][slow]") {
  const CaseConfig c = find_case("case3a");
  WenoRun run = solve_weno(c);
  const double l2 = relative_l2(run.eval_field, exact_field(c));
  CHECK(l2 <= 3.0 * 6.93e-3);
}

TEST_CASE("near-vacuum case 4a degrades into clipped oscillations",
          "[weno5][slow]") {
  const CaseConfig c = find_case("case4a");
  WenoRun run = solve_weno(c);
  CHECK(relative_l2(run.eval_field, exact_field(c)) > 5e-2);
  CHECK(run.total_clipped > 0.0);
}
