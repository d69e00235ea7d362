#pragma once

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gbl/cases.hpp"
#include "gbl/cpinn.hpp"
#include "gbl/errors.hpp"
#include "gbl/metrics.hpp"
#include "gbl/svg_plot.hpp"
#include "gbl/weno5.hpp"

namespace gbl {

/// A configuration file or flag value could not be interpreted.
struct ConfigError : Error { using Error::Error; };

// ---------------------------------------------------------------------------
// Environment defaults

inline std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("GBL_SEED");
  if (!s || !*s) return std::nullopt;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (end == s || *end != '\0')
    throw ConfigError(std::string("GBL_SEED is not an integer: ") + s);
  return static_cast<std::uint64_t>(v);
}

inline std::string env_out_root() {
  const char* s = std::getenv("GBL_OUT");
  return (s && *s) ? s : "runs";
}

// ---------------------------------------------------------------------------
// Config files: line-oriented key/value with braced nesting.
//
//   u_L = 0.6            # comment
//   domain {
//     x_max = 10
//   }
//
// Nested keys flatten to dotted paths ("domain.x_max"). Later assignments of
// the same key win, which is what lets CLI flags override file values.

struct Config {
  std::map<std::string, std::string> kv;

  bool has(const std::string& key) const { return kv.count(key) > 0; }
  void set(const std::string& key, const std::string& value) {
    kv[key] = value;
  }
  const std::string& at(const std::string& key) const {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("missing config key: " + key);
    return it->second;
  }

  static Config parse(std::istream& is, const std::string& what) {
    Config out;
    std::string line, prefix;
    std::vector<std::string> stack;
    int line_no = 0;
    auto fail = [&](const std::string& msg) {
      throw ConfigError(what + ":" + std::to_string(line_no) + ": " + msg);
    };
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(is, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line == "}") {
        if (stack.empty()) fail("unmatched '}'");
        stack.pop_back();
      } else if (line.back() == '{') {
        const std::string name = trim(line.substr(0, line.size() - 1));
        if (name.empty() || name.find('=') != std::string::npos)
          fail("malformed section header");
        stack.push_back(name);
      } else {
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail("empty key");
        std::string full;
        for (const std::string& s : stack) full += s + ".";
        out.kv[full + key] = value;
      }
    }
    if (!stack.empty())
      throw ConfigError(what + ": unterminated section '" + stack.back() + "'");
    return out;
  }

  static Config load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file: " + path);
    return parse(is, path);
  }
};

namespace detail {

inline double cfg_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError(key + " is not a number: " + v);
  return x;
}

inline long cfg_long(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const long x = std::strtol(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError(key + " is not an integer: " + v);
  return x;
}

inline std::vector<std::string> split_csv(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(v);
  while (std::getline(is, item, ',')) {
    const auto a = item.find_first_not_of(" \t");
    const auto b = item.find_last_not_of(" \t");
    if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
  }
  return out;
}

}  // namespace detail

// Keys the runner itself consumes before the case sees the config, plus
// derived values a manifest records but no one can set.
inline const std::set<std::string>& run_level_keys() {
  static const std::set<std::string> keys{
      "case",      "budget",    "out",          "methods",  "seed",
      "plots",     "interface_x", "scales.u1",  "scales.phi1",
      "scales.u2"};
  return keys;
}

/// Overlays config values onto a case. Unknown keys are rejected so typos
/// surface instead of silently running the default.
inline CaseConfig apply_config(CaseConfig c, const Config& cfg) {
  using detail::cfg_double;
  using detail::cfg_long;
  RescaleParams rescale = c.rescale.value_or(RescaleParams{});
  bool touched_rescale = false;
  for (const auto& [key, value] : cfg.kv) {
    if (run_level_keys().count(key)) continue;
    if (key == "name") c.name = value;
    else if (key == "form") {
      if (value == "conservative") c.form = Form::Conservative;
      else if (value == "non-conservative") c.form = Form::NonConservative;
      else throw ConfigError("form must be conservative or non-conservative");
    } else if (key == "u_L") c.u_L = cfg_double(key, value);
    else if (key == "phi_L") c.phi_L = cfg_double(key, value);
    else if (key == "u_R") c.u_R = cfg_double(key, value);
    else if (key == "phi_R") c.phi_R = cfg_double(key, value);
    else if (key == "M") c.M = cfg_double(key, value);
    else if (key == "domain.x_min") c.domain.x_min = cfg_double(key, value);
    else if (key == "domain.x_max") c.domain.x_max = cfg_double(key, value);
    else if (key == "domain.t_max") c.domain.t_max = cfg_double(key, value);
    else if (key == "eval.nx")
      c.eval.nx = static_cast<int>(cfg_long(key, value));
    else if (key == "eval.times") {
      c.eval.times.clear();
      for (const std::string& t : detail::split_csv(value))
        c.eval.times.push_back(cfg_double(key, t));
    } else if (key == "seeds") {
      c.seeds.clear();
      for (const std::string& s : detail::split_csv(value))
        c.seeds.push_back(
            static_cast<std::uint64_t>(cfg_long(key, s)));
    } else if (key == "train.epochs") c.full_epochs = cfg_long(key, value);
    else if (key == "train.n_u1")
      c.n_u1 = static_cast<int>(cfg_long(key, value));
    else if (key == "train.n_u2")
      c.n_u2 = static_cast<int>(cfg_long(key, value));
    else if (key == "train.n_f1")
      c.n_f1 = static_cast<int>(cfg_long(key, value));
    else if (key == "train.n_f2")
      c.n_f2 = static_cast<int>(cfg_long(key, value));
    else if (key == "train.n_if")
      c.n_if = static_cast<int>(cfg_long(key, value));
    else if (key == "rescale.delta1") {
      rescale.delta1 = cfg_double(key, value);
      touched_rescale = true;
    } else if (key == "rescale.delta2") {
      rescale.delta2 = cfg_double(key, value);
      touched_rescale = true;
    } else if (key == "rescale.subdomain") {
      rescale.subdomain = static_cast<int>(cfg_long(key, value));
      touched_rescale = true;
    } else {
      throw ConfigError("unknown config key: " + key);
    }
  }
  if (touched_rescale) c.rescale = rescale;
  return c;
}

// ---------------------------------------------------------------------------
// Run directories and manifests

inline std::string utc_stamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

/// Creates (and returns) a fresh directory under root. Timestamped names get
/// a numeric suffix on collision so two runs in one second stay separate.
inline std::string make_run_dir(const std::string& root,
                                const std::string& label, bool timestamped) {
  namespace fs = std::filesystem;
  if (!timestamped) {
    const fs::path p = fs::path(root) / label;
    fs::create_directories(p);
    return p.string();
  }
  const std::string base = label + "-" + utc_stamp();
  for (int k = 1;; ++k) {
    const fs::path p =
        fs::path(root) / (k == 1 ? base : base + "-" + std::to_string(k));
    if (!fs::exists(p)) {
      fs::create_directories(p);
      return p.string();
    }
  }
}

/// Everything needed to replay the run, in the config-file syntax, so a
/// manifest can be fed straight back through Config::parse. Contains no
/// timestamps or absolute paths; bytes depend only on (config, seed).
inline std::string render_manifest(const CaseConfig& c,
                                   const std::string& budget_name,
                                   const TrainBudget& b,
                                   const std::vector<std::uint64_t>& seeds,
                                   const std::vector<std::string>& methods) {
  using detail::fmt;
  std::string s;
  s += "name = " + c.name + "\n";
  s += std::string("form = ") +
       (c.form == Form::Conservative ? "conservative" : "non-conservative") +
       "\n";
  s += "u_L = " + fmt(c.u_L) + "\n";
  s += "phi_L = " + fmt(c.phi_L) + "\n";
  s += "u_R = " + fmt(c.u_R) + "\n";
  s += "phi_R = " + fmt(c.phi_R) + "\n";
  s += "M = " + fmt(c.M) + "\n";
  s += "interface_x = " + fmt(kInterfaceX) + "\n";
  s += "domain {\n";
  s += "  x_min = " + fmt(c.domain.x_min) + "\n";
  s += "  x_max = " + fmt(c.domain.x_max) + "\n";
  s += "  t_max = " + fmt(c.domain.t_max) + "\n";
  s += "}\n";
  s += "eval {\n";
  s += "  nx = " + std::to_string(c.eval.nx) + "\n";
  std::string times;
  for (double t : c.eval.times) times += (times.empty() ? "" : ",") + fmt(t);
  s += "  times = " + times + "\n";
  s += "}\n";
  if (c.rescale) {
    s += "rescale {\n";
    s += "  delta1 = " + fmt(c.rescale->delta1) + "\n";
    s += "  delta2 = " + fmt(c.rescale->delta2) + "\n";
    s += "  subdomain = " + std::to_string(c.rescale->subdomain) + "\n";
    s += "}\n";
  }
  const OutputScales sc = output_scales(c);
  s += "scales {\n";
  s += "  u1 = " + fmt(sc.u1) + "\n";
  s += "  phi1 = " + fmt(sc.phi1) + "\n";
  s += "  u2 = " + fmt(sc.u2) + "\n";
  s += "}\n";
  s += "budget = " + budget_name + "\n";
  s += "train {\n";
  s += "  epochs = " + std::to_string(b.epochs) + "\n";
  s += "  n_u1 = " + std::to_string(b.n_u1) + "\n";
  s += "  n_u2 = " + std::to_string(b.n_u2) + "\n";
  s += "  n_f1 = " + std::to_string(b.n_f1) + "\n";
  s += "  n_f2 = " + std::to_string(b.n_f2) + "\n";
  s += "  n_if = " + std::to_string(b.n_if) + "\n";
  s += "}\n";
  std::string sd;
  for (std::uint64_t v : seeds) sd += (sd.empty() ? "" : ",") + std::to_string(v);
  s += "seeds = " + sd + "\n";
  std::string ms;
  for (const std::string& m : methods) ms += (ms.empty() ? "" : ",") + m;
  s += "methods = " + ms + "\n";
  return s;
}

// ---------------------------------------------------------------------------
// Reference errors and verdicts

/// Published relative-L2 results this harness reproduces. Comparisons allow a
/// x3 band; rows above the breakdown floor are documented failure modes and
/// are reproduced as failures rather than matched.
struct ReferenceError {
  const char* case_name;
  const char* method;
  double l2;
};

inline const std::vector<ReferenceError>& reference_errors() {
  static const std::vector<ReferenceError> table{
      {"case1", "weno5", 1.85e-3},    {"case2", "weno5", 2.9e-3},
      {"case3a", "weno5", 6.93e-3},   {"case3b", "weno5", 6.93e-3},
      {"case4a", "weno5", 1.61e-1},   {"case4b", "weno5", 2.53e-1},
      {"case5a", "weno5", 2.25e-1},   {"case5b", "weno5", 3.16e-1},
      {"case1", "cpinn", 8.96e-3},    {"case2", "cpinn", 1.11e-2},
      {"case3a", "cpinn", 3.33e-1},   {"case3b", "cpinn", 1.73e-2},
      {"case4a", "cpinn", 7.2e-2},    {"case4b", "cpinn", 8.82e-2},
      {"case5a", "cpinn", 7.87e-2},   {"case5b", "cpinn", 7.91e-2},
      {"case1-nc", "cpinn", 6.05e-3}, {"case2-nc", "cpinn", 8.82e-3},
      {"case3a-nc", "cpinn", 1.54e-2}, {"case3b-nc", "cpinn", 2.21e-2},
      {"case4a-nc", "cpinn", 6.09e-2}, {"case4b-nc", "cpinn", 5.99e-2},
      {"case5a-nc", "cpinn", 8.94e-2}, {"case5b-nc", "cpinn", 6.57e-2},
  };
  return table;
}

inline std::optional<double> reference_error(const std::string& case_name,
                                             const std::string& method) {
  for (const ReferenceError& r : reference_errors())
    if (case_name == r.case_name && method == r.method) return r.l2;
  return std::nullopt;
}

constexpr double kReferenceFactor = 3.0;  // accepted band around a reference
constexpr double kBreakdownFloor = 5e-2;  // a documented failure stays a failure
constexpr double kNoRescaleFloor = 1e-1;  // near-vacuum training without rescaling

/// Relaxed single-seed gates for the short training budget; cases without an
/// entry are reported without a verdict.
inline std::optional<double> desk_threshold(const CaseConfig& c) {
  if (c.form != Form::Conservative) return std::nullopt;
  if (c.name == "case1") return 5e-2;
  if (c.name == "case2") return 6e-2;
  if (c.name == "case3b") return 1e-1;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Case runner

struct HarnessOptions {
  std::string out_root = "runs";
  bool timestamped = true;
  bool plots = true;
  BudgetKind budget = BudgetKind::Desk;
  std::optional<std::uint64_t> seed;   // overrides the case's seed list
  std::optional<TrainBudget> budget_override;
  TrainOptions train;                  // architecture/logging knobs
};

struct RunResult {
  std::string dir;
  std::vector<MetricsRow> rows;
  std::vector<SolutionField> fields;
  std::vector<std::string> artifacts;  // file names relative to dir
};

namespace detail {

inline std::string budget_name(BudgetKind k) {
  return k == BudgetKind::Desk ? "desk" : "full";
}

inline void write_case_plots(RunResult& out, const CaseConfig& c) {
  auto note = [&](const std::string& name) {
    for (const std::string& a : out.artifacts)
      if (a == name) return;
    out.artifacts.push_back(name);
  };
  auto series_at = [&](const SolutionField& f, double t) {
    PlotSeries s;
    s.label = f.method + (f.method == "cpinn"
                              ? " s" + std::to_string(f.seed)
                              : "");
    for (const Sample& a : f.samples)
      if (a.t == t) {
        s.x.push_back(a.x);
        s.y.push_back(a.u);
      }
    return s;
  };
  std::vector<PlotSeries> overlay;
  for (double t : c.eval.times) {
    std::vector<PlotSeries> per_time;
    for (const SolutionField& f : out.fields) {
      PlotSeries s = series_at(f, t);
      PlotSeries o = s;
      o.label += " t=" + svg_num(t);
      overlay.push_back(std::move(o));
      per_time.push_back(std::move(s));
    }
    const std::string name = c.name + "_t" + svg_num(t) + ".svg";
    write_text(out.dir + "/" + name,
               render_line_plot(c.name + " at t=" + svg_num(t), "x", "u",
                                per_time));
    note(name);
  }
  const std::string name = c.name + "_overlay.svg";
  write_text(out.dir + "/" + name,
             render_line_plot(c.name + " all output times", "x", "u",
                              overlay));
  note(name);
}

}  // namespace detail

/// Runs the requested methods on one case into a fresh run directory:
/// per-method field CSVs, a cross-method profile table, metrics rows, profile
/// plots, and a replayable manifest. Artifacts are flushed as each method
/// completes, so a late solver error leaves earlier results on disk.
inline RunResult run_case(const CaseConfig& c0,
                          const std::vector<std::string>& methods,
                          const HarnessOptions& opt = {}) {
  for (const std::string& m : methods)
    if (m != "exact" && m != "weno5" && m != "cpinn")
      throw Error("unknown method: " + m);
  CaseConfig c = c0;
  if (opt.seed) c.seeds = {*opt.seed};
  TrainBudget budget =
      opt.budget_override ? *opt.budget_override : budget_for(c, opt.budget);
  budget.n_seeds =
      std::min<int>(budget.n_seeds, static_cast<int>(c.seeds.size()));
  const bool wants_cpinn =
      std::find(methods.begin(), methods.end(), "cpinn") != methods.end();
  const bool nc = c.form == Form::NonConservative;

  RunResult out;
  out.dir = make_run_dir(opt.out_root, c.name, opt.timestamped);
  const std::vector<std::uint64_t> seeds_used(
      c.seeds.begin(),
      c.seeds.begin() + (wants_cpinn ? budget.n_seeds : 0));
  detail::write_text(out.dir + "/manifest.txt",
                     render_manifest(c, detail::budget_name(opt.budget),
                                     budget, seeds_used, methods));
  out.artifacts.push_back("manifest.txt");

  const SolutionField exact = exact_field(c);
  auto flush = [&] {
    write_metrics_csv(out.dir + "/metrics.csv", out.rows);
    write_profiles_csv(out.dir + "/profiles.csv", out.fields);
    for (const char* a : {"metrics.csv", "profiles.csv"})
      if (std::find(out.artifacts.begin(), out.artifacts.end(), a) ==
          out.artifacts.end())
        out.artifacts.push_back(a);
    if (opt.plots) detail::write_case_plots(out, c);
  };
  auto add_field = [&](const SolutionField& f, const std::string& name) {
    out.fields.push_back(f);
    write_field_csv(out.dir + "/" + name, f);
    out.artifacts.push_back(name);
  };

  for (const std::string& m : methods) {
    if (m == "exact") {
      add_field(exact, c.name + "_exact.csv");
      detail::write_text(out.dir + "/" + c.name + "_fan.json",
                         fan_to_json(solve_riemann(c.riemann())).dump(2) +
                             "\n");
      out.artifacts.push_back(c.name + "_fan.json");
      out.rows.push_back({c.name, "exact", c.form, false,
                          relative_l2(exact, exact, nc), 1});
      flush();
    } else if (m == "weno5") {
      const WenoRun w = solve_weno(c);
      add_field(w.eval_field, c.name + "_weno5.csv");
      write_field_csv(out.dir + "/" + c.name + "_weno5_native.csv", w.native);
      out.artifacts.push_back(c.name + "_weno5_native.csv");
      out.rows.push_back({c.name, "weno5", c.form, false,
                          relative_l2(w.eval_field, exact, nc), 1});
      flush();
    } else {
      double l2_sum = 0.0;
      for (int i = 0; i < budget.n_seeds; ++i) {
        const std::uint64_t seed = c.seeds[static_cast<std::size_t>(i)];
        TrainOptions topt = opt.train;
        topt.out_dir = out.dir;
        Trainer tr(c, budget, seed, topt);
        const TrainOutcome o = tr.run();
        out.artifacts.push_back(c.name + "_seed" + std::to_string(seed) +
                                "_training.csv");
        add_field(tr.model().eval_field(seed),
                  c.name + "_cpinn_seed" + std::to_string(seed) + ".csv");
        l2_sum += relative_l2(out.fields.back(), exact, nc);
        flush();
      }
      out.rows.push_back({c.name, "cpinn", c.form, c.rescale.has_value(),
                          l2_sum / budget.n_seeds, budget.n_seeds});
      flush();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Table reproduction

struct TableVerdict {
  MetricsRow row;
  std::string budget;
  std::optional<double> reference;
  std::string verdict;  // pass | FAIL | breakdown | info
};

struct TableReport {
  std::string dir;
  std::vector<TableVerdict> rows;
  std::string text;
  bool all_pass = true;
};

namespace detail {

inline TableVerdict judge(const MetricsRow& r, BudgetKind k,
                          const CaseConfig& c) {
  TableVerdict v{r, budget_name(k), reference_error(r.case_name, r.method),
                 "info"};
  if (r.method == "exact") {
    v.verdict = r.l2 == 0.0 ? "pass" : "FAIL";
  } else if (r.method == "weno5") {
    if (v.reference && *v.reference > kBreakdownFloor)
      v.verdict = r.l2 > kBreakdownFloor ? "breakdown" : "FAIL";
    else if (v.reference)
      v.verdict = r.l2 <= kReferenceFactor * *v.reference ? "pass" : "FAIL";
  } else if (r.method == "cpinn") {
    const bool no_rescale_failure =
        c.name == "case3a" && c.form == Form::Conservative;
    if (no_rescale_failure) {
      v.verdict = r.l2 > kNoRescaleFloor ? "breakdown" : "FAIL";
    } else if (k == BudgetKind::Desk) {
      if (const auto gate = desk_threshold(c))
        v.verdict = r.l2 < *gate ? "pass" : "FAIL";
    } else if (v.reference) {
      v.verdict = r.l2 <= kReferenceFactor * *v.reference ? "pass" : "FAIL";
    }
  }
  return v;
}

inline std::string render_table(const std::vector<TableVerdict>& rows) {
  std::string s;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s %-6s %-16s %-8s %-6s %-12s %-12s %s\n",
                "case", "method", "form", "rescaled", "budget", "l2",
                "reference", "verdict");
  s += buf;
  s += std::string(86, '-') + "\n";
  for (const TableVerdict& v : rows) {
    char ref[24];
    if (v.reference)
      std::snprintf(ref, sizeof ref, "%.3g", *v.reference);
    else
      std::snprintf(ref, sizeof ref, "-");
    std::snprintf(buf, sizeof buf, "%-10s %-6s %-16s %-8s %-6s %-12.4g %-12s %s\n",
                  v.row.case_name.c_str(), v.row.method.c_str(),
                  v.row.form == Form::Conservative ? "conservative"
                                                   : "non-conservative",
                  v.row.rescaled ? "yes" : "no", v.budget.c_str(), v.row.l2,
                  ref, v.verdict.c_str());
    s += buf;
  }
  return s;
}

}  // namespace detail

/// Runs the registry (optionally filtered) under one budget and renders a
/// verdict table against the reference errors. The finite-difference method
/// is skipped, not refused, on non-conservative twins. Sub-runs land in
/// per-case directories under the report directory.
inline TableReport reproduce_tables(
    BudgetKind k, HarnessOptions opt = {},
    const std::vector<std::string>& only_cases = {},
    const std::vector<std::string>& methods = {"exact", "weno5", "cpinn"}) {
  TableReport report;
  report.dir = make_run_dir(opt.out_root,
                            "tables-" + detail::budget_name(k),
                            opt.timestamped);
  opt.budget = k;
  opt.out_root = report.dir;
  opt.timestamped = false;
  std::vector<MetricsRow> all_rows;
  for (const CaseConfig& c : case_registry()) {
    if (!only_cases.empty() &&
        std::find(only_cases.begin(), only_cases.end(), c.name) ==
            only_cases.end())
      continue;
    std::vector<std::string> ms;
    for (const std::string& m : methods)
      if (m != "weno5" || c.form == Form::Conservative) ms.push_back(m);
    const RunResult r = run_case(c, ms, opt);
    for (const MetricsRow& row : r.rows) {
      report.rows.push_back(detail::judge(row, k, c));
      all_rows.push_back(row);
      if (report.rows.back().verdict == "FAIL") report.all_pass = false;
    }
  }
  report.text = detail::render_table(report.rows);
  detail::write_text(report.dir + "/report.txt", report.text);
  write_metrics_csv(report.dir + "/metrics.csv", all_rows);
  return report;
}

}  // namespace gbl
