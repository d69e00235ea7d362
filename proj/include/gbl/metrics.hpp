#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "gbl/cases.hpp"
#include "gbl/errors.hpp"
#include "gbl/riemann.hpp"

namespace gbl {

struct Sample {
  double x = 0.0, t = 0.0, u = 0.0, phi = 0.0;
};

// Profile samples for one method on one case; rows are t-major, then x.
struct SolutionField {
  std::string case_name;
  std::string method;  // exact | weno5 | cpinn
  std::uint64_t seed = 0;
  std::vector<Sample> samples;
};

inline std::vector<double> eval_xs(const CaseConfig& c) {
  std::vector<double> xs(c.eval.nx);
  for (int i = 0; i < c.eval.nx; ++i)
    xs[i] = c.domain.x_min +
            (c.domain.x_max - c.domain.x_min) * i / (c.eval.nx - 1.0);
  return xs;
}

inline SolutionField exact_field(const CaseConfig& c) {
  SolutionField out{c.name, "exact", 0, {}};
  const RiemannFan fan = solve_riemann(c.riemann());
  for (double t : c.eval.times)
    for (double x : eval_xs(c)) {
      const State s = evaluate_fan(fan, x, t);
      out.samples.push_back({x, t, s.u, s.phi});
    }
  return out;
}

// Relative L2 over the shared evaluation set. Non-conservative comparisons
// pass tilde=true to compare u/phi instead of u.
inline double relative_l2(const SolutionField& pred, const SolutionField& exact,
                          bool tilde = false) {
  if (pred.samples.size() != exact.samples.size())
    throw GridMismatch("sample counts differ: " + std::to_string(pred.samples.size()) +
                       " vs " + std::to_string(exact.samples.size()));
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < pred.samples.size(); ++i) {
    const Sample& p = pred.samples[i];
    const Sample& e = exact.samples[i];
    if (p.x != e.x || p.t != e.t)
      throw GridMismatch("sample coordinates differ at index " + std::to_string(i));
    const double pv = tilde ? p.u / p.phi : p.u;
    const double ev = tilde ? e.u / e.phi : e.u;
    num += (pv - ev) * (pv - ev);
    den += ev * ev;
  }
  return std::sqrt(num) / std::sqrt(den);
}

struct MetricsRow {
  std::string case_name;
  std::string method;
  Form form = Form::Conservative;
  bool rescaled = false;
  double l2 = 0.0;
  int seeds = 1;
};

namespace detail {
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
inline void write_text(const std::string& path, const std::string& text) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw Error("cannot open for writing: " + path);
  std::fwrite(text.data(), 1, text.size(), f);
  std::fclose(f);
}
}  // namespace detail

// Schema: x,t,u,phi (native solver output, one file per field).
inline void write_field_csv(const std::string& path, const SolutionField& f) {
  std::string s = "x,t,u,phi\n";
  for (const Sample& a : f.samples)
    s += detail::fmt(a.x) + "," + detail::fmt(a.t) + "," + detail::fmt(a.u) + "," +
         detail::fmt(a.phi) + "\n";
  detail::write_text(path, s);
}

// Schema: x,t,u,phi,method,case,seed (cross-method profile table).
inline void write_profiles_csv(const std::string& path,
                               const std::vector<SolutionField>& fields) {
  std::string s = "x,t,u,phi,method,case,seed\n";
  for (const SolutionField& f : fields)
    for (const Sample& a : f.samples)
      s += detail::fmt(a.x) + "," + detail::fmt(a.t) + "," + detail::fmt(a.u) + "," +
           detail::fmt(a.phi) + "," + f.method + "," + f.case_name + "," +
           std::to_string(f.seed) + "\n";
  detail::write_text(path, s);
}

// Schema: case,method,form,rescaled,l2,seeds.
inline void write_metrics_csv(const std::string& path,
                              const std::vector<MetricsRow>& rows) {
  std::string s = "case,method,form,rescaled,l2,seeds\n";
  for (const MetricsRow& r : rows)
    s += r.case_name + "," + r.method + "," +
         (r.form == Form::Conservative ? "conservative" : "non-conservative") + "," +
         (r.rescaled ? "1" : "0") + "," + detail::fmt(r.l2) + "," +
         std::to_string(r.seeds) + "\n";
  detail::write_text(path, s);
}

}  // namespace gbl
