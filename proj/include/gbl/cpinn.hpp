#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gbl/cases.hpp"
#include "gbl/errors.hpp"
#include "gbl/flux.hpp"
#include "gbl/metrics.hpp"
#include "gbl/nn.hpp"
#include "gbl/riemann.hpp"

namespace gbl {

// The interface sits just right of the porosity jump so the standing wave is
// interior to subdomain 1 and subdomain 2 carries a single scalar equation.
constexpr double kInterfaceX = 0.01;

// ---------------------------------------------------------------------------
// Training-point sampling

/// Open-interval uniform in (0,1); never returns an endpoint, so stratified
/// offsets keep collocation points strictly inside their boxes.
inline double unit_uniform_open(std::mt19937_64& g) {
  return (static_cast<double>(g() >> 11) + 0.5) * 0x1.0p-53;
}

/// Fisher-Yates shuffle of 0..n-1, hand-rolled because the engine draw
/// sequence is part of the seeded-reproducibility contract (std::shuffle
/// may differ across standard library implementations).
inline std::vector<int> shuffled_iota(int n, std::mt19937_64& g) {
  std::vector<int> p(n);
  for (int i = 0; i < n; ++i) p[i] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(g() % static_cast<std::uint64_t>(i + 1));
    std::swap(p[i], p[j]);
  }
  return p;
}

struct SampleSet {
  // t = 0 data points with physical initial-data targets
  std::vector<double> u1_x, u1_u, u1_phi;
  std::vector<double> u2_x, u2_u;
  // interior collocation, strictly inside each subdomain's space-time box
  std::vector<double> f1_x, f1_t;
  std::vector<double> f2_x, f2_t;
  // shared interface times at x = x_I, identical for both loss sides
  std::vector<double> if_t;
};

namespace detail {

// Latin hypercube over [x_lo, x_hi] x [0, t_max]: exactly one point per 1/n
// stratum on each axis, jittered by open-interval offsets.
inline void lhs_fill(int n, double x_lo, double x_hi, double t_max,
                     std::mt19937_64& g, std::vector<double>& xs,
                     std::vector<double>& ts) {
  const std::vector<int> px = shuffled_iota(n, g);
  const std::vector<int> pt = shuffled_iota(n, g);
  xs.reserve(n);
  ts.reserve(n);
  for (int i = 0; i < n; ++i) {
    xs.push_back(x_lo + (px[i] + unit_uniform_open(g)) / n * (x_hi - x_lo));
    ts.push_back((pt[i] + unit_uniform_open(g)) / n * t_max);
  }
}

}  // namespace detail

/// Draws the training set for one case. Data points are uniform on each
/// subdomain's spatial extent at t = 0 and target the Riemann initial data
/// (the jump at x = 0 resolves ties leftward); interior points are Latin
/// hypercube per subdomain; interface times are uniform. The draw order
/// (u1, u2, f1, f2, interface) is fixed; changing it changes every seeded
/// run.
inline SampleSet sample_points(const CaseConfig& c, const TrainBudget& b,
                               std::mt19937_64& rng,
                               double x_I = kInterfaceX) {
  SampleSet s;
  for (int i = 0; i < b.n_u1; ++i) {
    const double x =
        c.domain.x_min + unit_uniform(rng) * (x_I - c.domain.x_min);
    s.u1_x.push_back(x);
    s.u1_u.push_back(x <= 0.0 ? c.u_L : c.u_R);
    s.u1_phi.push_back(x <= 0.0 ? c.phi_L : c.phi_R);
  }
  for (int i = 0; i < b.n_u2; ++i) {
    const double x = x_I + unit_uniform_open(rng) * (c.domain.x_max - x_I);
    s.u2_x.push_back(x);
    s.u2_u.push_back(c.u_R);
  }
  detail::lhs_fill(b.n_f1, c.domain.x_min, x_I, c.domain.t_max, rng, s.f1_x,
                   s.f1_t);
  detail::lhs_fill(b.n_f2, x_I, c.domain.x_max, c.domain.t_max, rng, s.f2_x,
                   s.f2_t);
  for (int i = 0; i < b.n_if; ++i)
    s.if_t.push_back(unit_uniform(rng) * c.domain.t_max);
  return s;
}

/// Sample set with the case's full configured counts.
inline SampleSet sample_points(const CaseConfig& c, std::mt19937_64& rng) {
  return sample_points(c, budget_for(c, BudgetKind::Full), rng);
}

// ---------------------------------------------------------------------------
// Entropy-corrected flux for the scalar subdomain

/// Wave-structure summary the subdomain-2 residual is conditioned on.
/// Branch rows:
///   0: u_M > u_R, u_M > u*   rarefaction-shock, decreasing
///   1: u_M > u_R, u_M < u*   pure shock, decreasing
///   2: u_M < u_R, u_M < u*   rarefaction-shock, increasing
///   3: u_M < u_R, u_M > u*   pure shock, increasing
/// delta1/delta2 are 1 unless subdomain 2 is trained in rescaled variables.
struct EntropyContext {
  double u_M = 0.0;
  double u_R = 0.0;
  double u_star = 0.0;
  double s = 0.0;  // RH speed of the moving shock piece
  int branch = 0;
  double delta1 = 1.0;
  double delta2 = 1.0;
  double shock_lo = 0.0, shock_hi = 0.0;  // [min(u*, u_R), max(u*, u_R)]
};

inline int entropy_branch(double u_M, double u_R, double u_star) {
  if (u_M > u_R) return u_M > u_star ? 0 : 1;
  return u_M < u_star ? 2 : 3;
}

inline void check_context(const EntropyContext& ctx) {
  if (ctx.branch != entropy_branch(ctx.u_M, ctx.u_R, ctx.u_star))
    throw ContextMismatch("entropy branch does not match state orderings");
}

inline EntropyContext make_entropy_context(const CaseConfig& c) {
  const RiemannFan fan = solve_riemann(c.riemann());
  const Mobility M(c.M);
  EntropyContext ctx;
  ctx.u_M = fan.u_M;
  ctx.u_R = c.u_R;
  ctx.u_star = u_star(c.u_R, c.phi_R, M);
  ctx.branch = entropy_branch(ctx.u_M, ctx.u_R, ctx.u_star);
  ctx.shock_lo = std::min(ctx.u_star, ctx.u_R);
  ctx.shock_hi = std::max(ctx.u_star, ctx.u_R);
  // Moving-shock RH speed from the fan. A pure rarefaction has no shock
  // piece; keep the u*-to-u_R chord so off-solution network states still
  // see a finite transport speed.
  ctx.s = std::abs(ctx.u_star - ctx.u_R) > 1e-14
              ? shock_speed(ctx.u_star, ctx.u_R, c.phi_R, M)
              : flux_f_u(ctx.u_R, c.phi_R, M);
  for (const WavePiece& p : fan.pieces)
    if (p.kind == WaveKind::Shock) ctx.s = p.speed_left;
  if (c.rescale && c.rescale->subdomain == 2) {
    ctx.delta1 = c.rescale->delta1;
    ctx.delta2 = c.rescale->delta2;
  }
  return ctx;
}

namespace detail {

// Entropy-flux pieces without the per-call consistency check. In rescaled
// variables (u = delta2*ubar, phi = delta1*phibar) shock speeds become
// s/delta2 and the rarefaction row becomes (1/delta2) f(u, delta1/delta2 *
// phi), whose u-derivative equals f_u(delta2*u, phi_R) by homogeneity.
inline bool eflux_shock_row(double u, const EntropyContext& ctx) {
  if (ctx.branch == 1 || ctx.branch == 3) return true;
  const double u_phys = ctx.delta2 * u;
  return u_phys >= ctx.shock_lo && u_phys <= ctx.shock_hi;
}

inline double eflux_value(double u, const EntropyContext& ctx, double phi_R,
                          const Mobility& M) {
  if (eflux_shock_row(u, ctx)) return ctx.s / ctx.delta2 * u;
  return flux_f(u, ctx.delta1 / ctx.delta2 * phi_R, M) / ctx.delta2;
}

inline double eflux_slope(double u, const EntropyContext& ctx, double phi_R,
                          const Mobility& M) {
  if (eflux_shock_row(u, ctx)) return ctx.s / ctx.delta2;
  return flux_f_u(u, ctx.delta1 / ctx.delta2 * phi_R, M) / ctx.delta2;
}

inline double eflux_curv(double u, const EntropyContext& ctx, double phi_R,
                         const Mobility& M) {
  if (eflux_shock_row(u, ctx)) return 0.0;
  return flux_f_uu(u, ctx.delta1 / ctx.delta2 * phi_R, M) / ctx.delta2;
}

}  // namespace detail

/// Oleinik-modified flux. Pure-shock rows are transport at the RH speed;
/// composite rows switch between the shock chord and the underlying flux by
/// membership of the physical saturation in the envelope's shock interval.
/// phi_R is the porosity in the same scaling as u (barred when rescaled).
inline double entropy_flux(double u, const EntropyContext& ctx, double phi_R,
                           const Mobility& M) {
  check_context(ctx);
  return detail::eflux_value(u, ctx, phi_R, M);
}

/// d/du of entropy_flux; the quantity the interior residual transports by.
inline double entropy_flux_slope(double u, const EntropyContext& ctx,
                                 double phi_R, const Mobility& M) {
  check_context(ctx);
  return detail::eflux_slope(u, ctx, phi_R, M);
}

// ---------------------------------------------------------------------------
// Interior residuals

/// Value and first-order sensitivities of the subdomain-1 residual with
/// respect to the network outputs (v saturation-like, p porosity-like) and
/// their derivatives. The |p_t|^2 porosity term is handled by the loss.
struct ResidualParts {
  double r = 0.0;
  double d_v = 0.0, d_vx = 0.0, d_vt = 0.0;
  double d_p = 0.0, d_px = 0.0;
};

/// Subdomain-1 residual in the network's own variables.
///   conservative:            v_t + f(v, p)_x
///   conservative rescaled:   d2*v_t + f(v, d1/d2*p)_x
///   non-conservative:        p*v_t + g(v)_x
///   non-conservative rescaled: d1*d2*p*v_t + f(v, p/d2)_x
/// The conservative rescaled row is an exact algebraic identity with the
/// physical residual under (u, phi) = (d2*v, d1*p); the non-conservative
/// rescaled row is its own equation, not a substitution of the plain one.
inline ResidualParts sd1_residual(Form form, bool rescaled, double d1,
                                  double d2, double v, double vx, double vt,
                                  double p, double px, const Mobility& M) {
  ResidualParts out;
  if (form == Form::Conservative) {
    const double k = rescaled ? d1 / d2 : 1.0;
    const double w = rescaled ? d2 : 1.0;
    const double q = k * p;
    const double fu = flux_f_u(v, q, M), fp = flux_f_phi(v, q, M);
    out.r = w * vt + fu * vx + k * fp * px;
    out.d_v = flux_f_uu(v, q, M) * vx + k * flux_f_uphi(v, q, M) * px;
    out.d_vx = fu;
    out.d_vt = w;
    out.d_p = k * flux_f_uphi(v, q, M) * vx +
              k * k * flux_f_phiphi(v, q, M) * px;
    out.d_px = k * fp;
  } else if (!rescaled) {
    const double gp = flux_g_u(v, M);
    out.r = p * vt + gp * vx;
    out.d_v = flux_g_uu(v, M) * vx;
    out.d_vx = gp;
    out.d_vt = p;
    out.d_p = vt;
  } else {
    const double q = p / d2;
    const double fu = flux_f_u(v, q, M), fp = flux_f_phi(v, q, M);
    const double tau = d1 * d2 * p;
    out.r = tau * vt + fu * vx + fp / d2 * px;
    out.d_v = flux_f_uu(v, q, M) * vx + flux_f_uphi(v, q, M) / d2 * px;
    out.d_vx = fu;
    out.d_vt = tau;
    out.d_p = d1 * d2 * vt + flux_f_uphi(v, q, M) / d2 * vx +
              flux_f_phiphi(v, q, M) / (d2 * d2) * px;
    out.d_px = fp / d2;
  }
  return out;
}

/// Subdomain-2 residual tau*v_t + S(v)*v_x with the entropy-corrected speed
/// S; d_v carries dS/dv * v_x. Sensitivities as in ResidualParts, minus the
/// porosity channel (subdomain 2 has none).
struct TransportParts {
  double r = 0.0;
  double d_v = 0.0, d_vx = 0.0, d_vt = 0.0;
};

/// The non-conservative rows compose the entropy speed with u = phi_R * v;
/// the rescaled non-conservative row pairs the equation's own flux
/// derivative with a transport speed matched to the conservative one, so
/// both forms move the learned shock at speed s in physical coordinates.
inline TransportParts sd2_residual(Form form, const EntropyContext& ctx,
                                   double phi_R, double v, double vx,
                                   double vt, const Mobility& M) {
  TransportParts out;
  double tau, S, dS;
  if (form == Form::Conservative) {
    tau = 1.0;
    const double pb = phi_R / ctx.delta1;  // barred porosity (phi_R if plain)
    S = detail::eflux_slope(v, ctx, pb, M);
    dS = detail::eflux_curv(v, ctx, pb, M);
  } else if (ctx.delta2 == 1.0 && ctx.delta1 == 1.0) {
    tau = phi_R;
    const double u = phi_R * v;
    S = detail::eflux_slope(u, ctx, phi_R, M) * phi_R;
    dS = detail::eflux_curv(u, ctx, phi_R, M) * phi_R * phi_R;
  } else {
    tau = ctx.delta2 * phi_R;
    const double u_phys = phi_R * ctx.delta2 * v;
    const bool shock = (ctx.branch == 1 || ctx.branch == 3) ||
                       (u_phys >= ctx.shock_lo && u_phys <= ctx.shock_hi);
    const double q = phi_R / (ctx.delta1 * ctx.delta2);
    S = shock ? ctx.s * phi_R : flux_f_u(v, q, M);
    dS = shock ? 0.0 : flux_f_uu(v, q, M);
  }
  out.r = tau * vt + S * vx;
  out.d_v = dS * vx;
  out.d_vx = S;
  out.d_vt = tau;
  return out;
}

// ---------------------------------------------------------------------------
// Interface coupling

struct InterfaceTerms {
  double mse_flux = 0.0;
  double mse_avg1 = 0.0;  // subdomain-1 side average penalty
  double mse_avg2 = 0.0;  // subdomain-2 side average penalty
};

/// Flux-continuity and trace-averaging penalties over shared interface
/// points. Inputs are physical conservative traces; the subdomain-2
/// porosity is identically phi_R. Both average penalties measure the same
/// distances to the shared midpoints, so their values coincide; they are
/// kept separate because each belongs to a different loss.
inline InterfaceTerms interface_terms(const std::vector<double>& u1,
                                      const std::vector<double>& phi1,
                                      const std::vector<double>& u2,
                                      double phi_R, const Mobility& M) {
  if (u1.size() != phi1.size() || u1.size() != u2.size())
    throw ShapeMismatch("interface traces must share one point set");
  InterfaceTerms out;
  const double n = static_cast<double>(u1.size());
  for (std::size_t i = 0; i < u1.size(); ++i) {
    const double dF = flux_f(u1[i], phi1[i], M) - flux_f(u2[i], phi_R, M);
    const double au = 0.5 * (u1[i] - u2[i]);
    const double ap = 0.5 * (phi1[i] - phi_R);
    out.mse_flux += dF * dF / n;
    out.mse_avg1 += (au * au + ap * ap) / n;
    out.mse_avg2 += (au * au + ap * ap) / n;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model

/// Sigmoid outputs are stretched by fixed factors so rescaled variables
/// (which can exceed 1) stay representable: 1.2x headroom over the largest
/// barred state the subdomain must produce, never below 1.
struct OutputScales {
  double u1 = 1.0, phi1 = 1.0, u2 = 1.0;
};

inline OutputScales output_scales(const CaseConfig& c) {
  OutputScales s;
  if (!c.rescale) return s;
  const RescaleParams& r = *c.rescale;
  const double u_M = middle_state(c.riemann());
  const bool cons = c.form == Form::Conservative;
  auto headroom = [](double v) { return std::max(1.0, 1.2 * v); };
  if (r.subdomain == 1) {
    // Subdomain 1 sees the left state and, right of the porosity jump, the
    // middle state on phi_R.
    const double a = cons ? c.u_L : c.u_L / c.phi_L;
    const double b = cons ? u_M : u_M / c.phi_R;
    s.u1 = headroom(std::max(a, b) / r.delta2);
    s.phi1 = headroom(std::max(c.phi_L, c.phi_R) / r.delta1);
  } else {
    const double a = cons ? u_M : u_M / c.phi_R;
    const double b = cons ? c.u_R : c.u_R / c.phi_R;
    s.u2 = headroom(std::max(a, b) / r.delta2);
  }
  return s;
}

struct SubdomainScale {
  bool rescaled = false;
  double d1 = 1.0, d2 = 1.0;
};

inline SubdomainScale subdomain_scale(const CaseConfig& c, int which) {
  if (c.rescale && c.rescale->subdomain == which)
    return {true, c.rescale->delta1, c.rescale->delta2};
  return {};
}

/// Trained subdomain pair with everything needed to evaluate it: routing by
/// the interface abscissa, output stretching, and inverse rescaling back to
/// physical conservative variables. Immutable after training; safe to share
/// across readers.
struct CpinnModel {
  CaseConfig c;
  double x_I = kInterfaceX;
  EntropyContext ctx;
  OutputScales scales;
  SubdomainScale sub1, sub2;
  DenseNet sd1, sd2;

  /// Physical state at (x, t); the interface line belongs to subdomain 1.
  State predict(double x, double t) const {
    if (x <= x_I) {
      const Vec o = forward(sd1, x, t);
      const double v = scales.u1 * o(0) * (sub1.rescaled ? sub1.d2 : 1.0);
      const double phi = scales.phi1 * o(1) * (sub1.rescaled ? sub1.d1 : 1.0);
      return {c.form == Form::Conservative ? v : phi * v, phi};
    }
    const Vec o = forward(sd2, x, t);
    const double v = scales.u2 * o(0) * (sub2.rescaled ? sub2.d2 : 1.0);
    return {c.form == Form::Conservative ? v : c.phi_R * v, c.phi_R};
  }

  double predict_tilde(double x, double t) const {
    const State s = predict(x, t);
    return s.u / s.phi;
  }

  SolutionField eval_field(std::uint64_t seed) const {
    SolutionField out{c.name, "cpinn", seed, {}};
    for (double t : c.eval.times)
      for (double x : eval_xs(c)) {
        const State s = predict(x, t);
        out.samples.push_back({x, t, s.u, s.phi});
      }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Training

struct LossBreakdown {
  double mse_u = 0.0, mse_f = 0.0, mse_flux = 0.0, mse_avg = 0.0;
  double total = 0.0;
};

struct TrainOptions {
  double omega_u = 1.0, omega_f = 1.0, omega_if = 1.0;
  double lr0 = 1e-3;
  long log_every = 100;
  long checkpoint_every = 5000;
  std::string out_dir;            // empty: no CSV or checkpoints
  std::vector<int> arch1, arch2;  // empty: the default architectures
};

struct TrainRow {
  long epoch = 0;
  double loss1 = 0.0, loss2 = 0.0, l2 = 0.0, lr = 0.0;
};

struct TrainOutcome {
  std::uint64_t seed = 0;
  long epochs = 0;
  std::vector<TrainRow> curve;
  double final_loss1 = 0.0, final_loss2 = 0.0, final_l2 = 0.0;
};

/// Joint trainer for one case and one seed. RNG draw order is pinned:
/// sample set first, then subdomain-1 init, then subdomain-2 init; training
/// itself is full-batch and consumes no randomness, so identical seeds
/// replay identical loss curves. Loss reduction is fixed-order over sample
/// points; the two subdomain losses share interface traces but each network
/// receives only its own loss gradient.
class Trainer {
 public:
  Trainer(const CaseConfig& c, const TrainBudget& budget, std::uint64_t seed,
          TrainOptions opt = {})
      : c_(c), budget_(budget), seed_(seed), opt_(std::move(opt)), rng_(seed) {
    model_.c = c;
    model_.ctx = make_entropy_context(c);
    model_.scales = output_scales(c);
    model_.sub1 = subdomain_scale(c, 1);
    model_.sub2 = subdomain_scale(c, 2);
    pts_ = sample_points(c, budget, rng_);
    model_.sd1 = DenseNet::make(
        opt_.arch1.empty() ? default_arch1() : opt_.arch1, rng_);
    model_.sd2 = DenseNet::make(
        opt_.arch2.empty() ? default_arch2() : opt_.arch2, rng_);
    adam1_ = AdamState::like(model_.sd1);
    adam2_ = AdamState::like(model_.sd2);
    adam1_.lr0 = adam2_.lr0 = opt_.lr0;
    exact_ = exact_field(c);
    build_inputs();
  }

  static std::vector<int> default_arch1() {
    return {2, 40, 40, 40, 40, 40, 40, 40, 40, 2};
  }
  static std::vector<int> default_arch2() {
    return {2, 40, 40, 40, 40, 40, 40, 40, 40, 40, 40, 1};
  }

  CpinnModel& model() { return model_; }
  const SampleSet& samples() const { return pts_; }

  /// Both loss breakdowns at the current parameters. When grads are given,
  /// accumulates d(loss1)/d(theta1) into g1 and d(loss2)/d(theta2) into g2.
  std::pair<LossBreakdown, LossBreakdown> eval_losses(NetGrads* g1,
                                                      NetGrads* g2) {
    const Mobility M(c_.M);
    const bool cons = c_.form == Form::Conservative;
    const double su = model_.scales.u1, sp = model_.scales.phi1,
                 sv = model_.scales.u2;
    const SubdomainScale& r1 = model_.sub1;
    const double U1 = r1.rescaled ? r1.d2 : 1.0;
    const double P1 = r1.rescaled ? r1.d1 : 1.0;
    const double U2 = model_.sub2.rescaled ? model_.sub2.d2 : 1.0;
    const double C2 = (cons ? 1.0 : c_.phi_R) * U2;  // net output to physical
    const double wu = opt_.omega_u, wf = opt_.omega_f, wi = opt_.omega_if;

    Tape t_u1 = forward_tangent(model_.sd1, X_u1_);
    Tape t_f1 = forward_tangent(model_.sd1, X_f1_);
    Tape t_i1 = forward_tangent(model_.sd1, X_if_);
    Tape t_u2 = forward_tangent(model_.sd2, X_u2_);
    Tape t_f2 = forward_tangent(model_.sd2, X_f2_);
    Tape t_i2 = forward_tangent(model_.sd2, X_if_);

    auto zeros = [](const Mat& X, int cols) {
      return Mat::Zero(X.rows(), cols).eval();
    };
    Mat vb_u1 = zeros(X_u1_, 2), xb_u1 = zeros(X_u1_, 2),
        tb_u1 = zeros(X_u1_, 2);
    Mat vb_f1 = zeros(X_f1_, 2), xb_f1 = zeros(X_f1_, 2),
        tb_f1 = zeros(X_f1_, 2);
    Mat vb_i1 = zeros(X_if_, 2), xb_i1 = zeros(X_if_, 2),
        tb_i1 = zeros(X_if_, 2);
    Mat vb_u2 = zeros(X_u2_, 1), xb_u2 = zeros(X_u2_, 1),
        tb_u2 = zeros(X_u2_, 1);
    Mat vb_f2 = zeros(X_f2_, 1), xb_f2 = zeros(X_f2_, 1),
        tb_f2 = zeros(X_f2_, 1);
    Mat vb_i2 = zeros(X_if_, 1), xb_i2 = zeros(X_if_, 1),
        tb_i2 = zeros(X_if_, 1);

    LossBreakdown L1, L2;

    {  // subdomain-1 data term, physical variables
      const auto a = t_u1.values();
      const double n = static_cast<double>(X_u1_.rows());
      for (int i = 0; i < X_u1_.rows(); ++i) {
        const double v = su * a(i, 0), p = sp * a(i, 1);
        const double phi = P1 * p;
        double u, du_dv, du_dp;
        if (cons) {
          u = U1 * v;
          du_dv = U1;
          du_dp = 0.0;
        } else {
          u = phi * U1 * v;
          du_dv = phi * U1;
          du_dp = P1 * U1 * v;
        }
        const double ru = u - pts_.u1_u[i];
        const double rp = phi - pts_.u1_phi[i];
        L1.mse_u += (ru * ru + rp * rp) / n;
        vb_u1(i, 0) += wu * 2.0 * ru * du_dv / n;
        vb_u1(i, 1) += wu * (2.0 * ru * du_dp + 2.0 * rp * P1) / n;
      }
    }

    {  // subdomain-2 data term
      const auto a = t_u2.values();
      const double n = static_cast<double>(X_u2_.rows());
      for (int i = 0; i < X_u2_.rows(); ++i) {
        const double u = C2 * sv * a(i, 0);
        const double ru = u - pts_.u2_u[i];
        L2.mse_u += ru * ru / n;
        vb_u2(i, 0) += wu * 2.0 * ru * C2 / n;
      }
    }

    {  // subdomain-1 interior residual plus porosity time term
      const auto a = t_f1.values();
      const auto ax = t_f1.ddx();
      const auto at = t_f1.ddt();
      const double n = static_cast<double>(X_f1_.rows());
      for (int i = 0; i < X_f1_.rows(); ++i) {
        const double v = su * a(i, 0), p = sp * a(i, 1);
        const double vx = su * ax(i, 0), px = sp * ax(i, 1);
        const double vt = su * at(i, 0), pt = sp * at(i, 1);
        const ResidualParts q = sd1_residual(c_.form, r1.rescaled, r1.d1,
                                             r1.d2, v, vx, vt, p, px, M);
        L1.mse_f += (q.r * q.r + pt * pt) / n;
        vb_f1(i, 0) += wf * 2.0 * q.r * q.d_v / n;
        xb_f1(i, 0) += wf * 2.0 * q.r * q.d_vx / n;
        tb_f1(i, 0) += wf * 2.0 * q.r * q.d_vt / n;
        vb_f1(i, 1) += wf * 2.0 * q.r * q.d_p / n;
        xb_f1(i, 1) += wf * 2.0 * q.r * q.d_px / n;
        tb_f1(i, 1) += wf * 2.0 * pt / n;
      }
    }

    {  // subdomain-2 interior residual
      const auto a = t_f2.values();
      const auto ax = t_f2.ddx();
      const auto at = t_f2.ddt();
      const double n = static_cast<double>(X_f2_.rows());
      for (int i = 0; i < X_f2_.rows(); ++i) {
        const double v = sv * a(i, 0);
        const double vx = sv * ax(i, 0), vt = sv * at(i, 0);
        const TransportParts q =
            sd2_residual(c_.form, model_.ctx, c_.phi_R, v, vx, vt, M);
        L2.mse_f += q.r * q.r / n;
        vb_f2(i, 0) += wf * 2.0 * q.r * q.d_v / n;
        xb_f2(i, 0) += wf * 2.0 * q.r * q.d_vx / n;
        tb_f2(i, 0) += wf * 2.0 * q.r * q.d_vt / n;
      }
    }

    {  // interface terms in physical traces
      const auto a1 = t_i1.values();
      const auto a2 = t_i2.values();
      const double n = static_cast<double>(X_if_.rows());
      for (int i = 0; i < X_if_.rows(); ++i) {
        const double v1 = su * a1(i, 0), p1 = sp * a1(i, 1);
        const double v2 = sv * a2(i, 0);
        const double phi1 = P1 * p1;
        double u1, du1_dv, du1_dp;
        if (cons) {
          u1 = U1 * v1;
          du1_dv = U1;
          du1_dp = 0.0;
        } else {
          u1 = phi1 * U1 * v1;
          du1_dv = phi1 * U1;
          du1_dp = P1 * U1 * v1;
        }
        const double u2 = C2 * v2;
        const double dF = flux_f(u1, phi1, M) - flux_f(u2, c_.phi_R, M);
        const double f1u = flux_f_u(u1, phi1, M);
        const double f1p = flux_f_phi(u1, phi1, M);
        const double f2u = flux_f_u(u2, c_.phi_R, M);
        const double au = 0.5 * (u1 - u2);
        const double ap = 0.5 * (phi1 - c_.phi_R);
        L1.mse_flux += dF * dF / n;
        L1.mse_avg += (au * au + ap * ap) / n;
        vb_i1(i, 0) += wi * (2.0 * dF * f1u + au) * du1_dv / n;
        vb_i1(i, 1) += wi *
                       ((2.0 * dF * f1u + au) * du1_dp +
                        (2.0 * dF * f1p + ap) * P1) /
                       n;
        vb_i2(i, 0) += wi * (-2.0 * dF * f2u - au) * C2 / n;
      }
      L2.mse_flux = L1.mse_flux;
      L2.mse_avg = L1.mse_avg;
    }

    L1.total = wu * L1.mse_u + wf * L1.mse_f + wi * (L1.mse_flux + L1.mse_avg);
    L2.total = wu * L2.mse_u + wf * L2.mse_f + wi * (L2.mse_flux + L2.mse_avg);

    if (g1) {
      for (Mat* m : {&vb_u1, &xb_u1, &tb_u1, &vb_f1, &xb_f1, &tb_f1, &vb_i1,
                     &xb_i1, &tb_i1}) {
        m->col(0) *= su;
        m->col(1) *= sp;
      }
      backward(model_.sd1, t_u1, vb_u1, xb_u1, tb_u1, *g1);
      backward(model_.sd1, t_f1, vb_f1, xb_f1, tb_f1, *g1);
      backward(model_.sd1, t_i1, vb_i1, xb_i1, tb_i1, *g1);
    }
    if (g2) {
      for (Mat* m : {&vb_u2, &xb_u2, &tb_u2, &vb_f2, &xb_f2, &tb_f2, &vb_i2,
                     &xb_i2, &tb_i2})
        *m *= sv;
      backward(model_.sd2, t_u2, vb_u2, xb_u2, tb_u2, *g2);
      backward(model_.sd2, t_f2, vb_f2, xb_f2, tb_f2, *g2);
      backward(model_.sd2, t_i2, vb_i2, xb_i2, tb_i2, *g2);
    }
    return {L1, L2};
  }

  double current_l2() {
    const SolutionField pred = model_.eval_field(seed_);
    return relative_l2(pred, exact_, c_.form == Form::NonConservative);
  }

  TrainOutcome run() {
    const long total = budget_.epochs;
    TrainOutcome out;
    out.seed = seed_;
    out.epochs = total;
    NetGrads g1 = NetGrads::zeros_like(model_.sd1);
    NetGrads g2 = NetGrads::zeros_like(model_.sd2);
    std::ofstream csv;
    if (!opt_.out_dir.empty()) {
      std::filesystem::create_directories(opt_.out_dir);
      csv.open(artifact_path("training", ".csv"));
      csv << "epoch,loss_sd1,loss_sd2,l2_vs_exact,lr\n";
    }
    auto log_row = [&](long e, double l1, double l2) {
      const TrainRow row{e, l1, l2, current_l2(),
                         lr_linear(opt_.lr0, e, total)};
      out.curve.push_back(row);
      if (csv.is_open()) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g\n",
                      row.epoch, row.loss1, row.loss2, row.l2, row.lr);
        csv << buf;
      }
    };
    for (long e = 0; e < total; ++e) {
      g1.set_zero();
      g2.set_zero();
      std::pair<LossBreakdown, LossBreakdown> L;
      try {
        L = eval_losses(&g1, &g2);
      } catch (const DegenerateState& ex) {
        // A collapsed sigmoid (both outputs at exactly zero) starves the
        // flux denominators; treat as a diverged run, not caller misuse.
        save_checkpoints(e);
        throw DivergenceDetected("epoch " + std::to_string(e) + ": " +
                                 ex.what());
      }
      if (!std::isfinite(L.first.total) || !std::isfinite(L.second.total)) {
        save_checkpoints(e);
        throw DivergenceDetected("non-finite loss at epoch " +
                                 std::to_string(e));
      }
      if (e % opt_.log_every == 0) log_row(e, L.first.total, L.second.total);
      adam_step(adam1_, model_.sd1, g1, e, total);
      adam_step(adam2_, model_.sd2, g2, e, total);
      if (!opt_.out_dir.empty() && opt_.checkpoint_every > 0 &&
          (e + 1) % opt_.checkpoint_every == 0)
        save_checkpoints(e + 1);
    }
    const auto L = eval_losses(nullptr, nullptr);
    out.final_loss1 = L.first.total;
    out.final_loss2 = L.second.total;
    log_row(total, out.final_loss1, out.final_loss2);
    out.final_l2 = out.curve.back().l2;
    if (!opt_.out_dir.empty()) save_checkpoints(total);
    return out;
  }

 private:
  std::string artifact_path(const std::string& stem,
                            const std::string& ext) const {
    return opt_.out_dir + "/" + c_.name + "_seed" + std::to_string(seed_) +
           "_" + stem + ext;
  }

  void save_checkpoints(long epoch) {
    if (opt_.out_dir.empty()) return;
    std::filesystem::create_directories(opt_.out_dir);
    save_checkpoint_file(artifact_path("sd1", ".ckpt"), model_.sd1, adam1_,
                         rng_, epoch);
    save_checkpoint_file(artifact_path("sd2", ".ckpt"), model_.sd2, adam2_,
                         rng_, epoch);
  }

  void build_inputs() {
    auto points = [](const std::vector<double>& xs,
                     const std::vector<double>& ts) {
      Mat X(xs.size(), 2);
      for (std::size_t i = 0; i < xs.size(); ++i) {
        X(static_cast<int>(i), 0) = xs[i];
        X(static_cast<int>(i), 1) = ts[i];
      }
      return X;
    };
    const std::vector<double> zero1(pts_.u1_x.size(), 0.0);
    const std::vector<double> zero2(pts_.u2_x.size(), 0.0);
    const std::vector<double> xi(pts_.if_t.size(), model_.x_I);
    X_u1_ = points(pts_.u1_x, zero1);
    X_u2_ = points(pts_.u2_x, zero2);
    X_f1_ = points(pts_.f1_x, pts_.f1_t);
    X_f2_ = points(pts_.f2_x, pts_.f2_t);
    X_if_ = points(xi, pts_.if_t);
  }

  CaseConfig c_;
  TrainBudget budget_;
  std::uint64_t seed_;
  TrainOptions opt_;
  std::mt19937_64 rng_;
  CpinnModel model_;
  SampleSet pts_;
  AdamState adam1_, adam2_;
  SolutionField exact_;
  Mat X_u1_, X_u2_, X_f1_, X_f2_, X_if_;
};

struct CaseTrainSummary {
  std::string case_name;
  BudgetKind budget = BudgetKind::Desk;
  std::vector<TrainOutcome> runs;
  std::vector<SolutionField> fields;  // per-seed predictions on the eval grid
  double l2_mean = 0.0;
};

/// Trains one case over the budget's seed list and averages the relative L2.
inline CaseTrainSummary train_case(const CaseConfig& c, BudgetKind k,
                                   TrainOptions opt = {}) {
  const TrainBudget b = budget_for(c, k);
  if (static_cast<std::size_t>(b.n_seeds) > c.seeds.size())
    throw Error("case " + c.name + " configures too few seeds");
  CaseTrainSummary out;
  out.case_name = c.name;
  out.budget = k;
  for (int i = 0; i < b.n_seeds; ++i) {
    Trainer tr(c, b, c.seeds[static_cast<std::size_t>(i)], opt);
    out.runs.push_back(tr.run());
    out.fields.push_back(tr.model().eval_field(out.runs.back().seed));
    out.l2_mean += out.runs.back().final_l2 / b.n_seeds;
  }
  return out;
}

}  // namespace gbl
