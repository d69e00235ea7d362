// Command-line front end: runs cases, trains models, and reproduces the
// published comparison tables. Resolution order for every setting is
// CLI flag > config file > environment > built-in default.

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gbl/harness.hpp"

namespace {

using namespace gbl;

struct CommonArgs {
  std::string case_name;
  std::string config_path;
  std::string out;
  std::string budget;
  std::string methods;
  std::optional<std::uint64_t> seed;
  bool no_plots = false;
  bool flat = false;  // skip the timestamp suffix on the run directory
};

void add_common(CLI::App* cmd, CommonArgs& a, bool wants_case) {
  if (wants_case)
    cmd->add_option("case", a.case_name, "registry case name")->required();
  cmd->add_option("--config", a.config_path,
                  "config file overlaid on the case; flags win");
  cmd->add_option("--out", a.out, "output root (default $GBL_OUT or runs)");
  cmd->add_flag("--no-plots", a.no_plots, "skip SVG profile plots");
  cmd->add_flag("--flat", a.flat, "no timestamp suffix on the run directory");
}

Config load_config(const CommonArgs& a) {
  return a.config_path.empty() ? Config{} : Config::load(a.config_path);
}

// Assembles the effective case and runner options from one parsed command.
struct Resolved {
  CaseConfig c;
  HarnessOptions opt;
};

Resolved resolve(const CommonArgs& a, const Config& cfg) {
  Resolved r{apply_config(find_case(a.case_name.empty() && cfg.has("case")
                                        ? cfg.at("case")
                                        : a.case_name),
                          cfg),
             {}};
  r.opt.out_root = !a.out.empty()    ? a.out
                   : cfg.has("out") ? cfg.at("out")
                                    : env_out_root();
  const std::string budget = !a.budget.empty()      ? a.budget
                             : cfg.has("budget")    ? cfg.at("budget")
                                                    : "desk";
  if (budget == "desk") r.opt.budget = BudgetKind::Desk;
  else if (budget == "full") r.opt.budget = BudgetKind::Full;
  else throw ConfigError("budget must be desk or full: " + budget);
  r.opt.seed = a.seed              ? a.seed
               : cfg.has("seed")   ? std::optional<std::uint64_t>(
                                         detail::cfg_long("seed", cfg.at("seed")))
                                   : env_seed();
  if (a.no_plots) r.opt.plots = false;
  else if (cfg.has("plots")) r.opt.plots = cfg.at("plots") != "false";
  r.opt.timestamped = !a.flat;
  return r;
}

std::vector<std::string> resolve_methods(const CommonArgs& a,
                                         const Config& cfg,
                                         const std::string& fallback) {
  const std::string joined = !a.methods.empty()    ? a.methods
                             : cfg.has("methods")  ? cfg.at("methods")
                                                   : fallback;
  const std::vector<std::string> out = detail::split_csv(joined);
  if (out.empty()) throw ConfigError("no methods requested");
  return out;
}

void print_rows(const RunResult& r) {
  std::printf("run directory: %s\n", r.dir.c_str());
  for (const MetricsRow& m : r.rows)
    std::printf("%-10s %-6s l2 %.6g  (%d seed%s)\n", m.case_name.c_str(),
                m.method.c_str(), m.l2, m.seeds, m.seeds == 1 ? "" : "s");
}

int run_command(const CommonArgs& a, const std::string& fallback_methods) {
  const Config cfg = load_config(a);
  const Resolved r = resolve(a, cfg);
  print_rows(run_case(r.c, resolve_methods(a, cfg, fallback_methods), r.opt));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"generalized Buckley-Leverett laboratory"};
  app.require_subcommand(1);

  CommonArgs exact_a, weno_a, train_a, eval_a, tables_a;
  std::string list_filter;

  CLI::App* exact = app.add_subcommand("exact", "exact Riemann solution");
  add_common(exact, exact_a, true);

  CLI::App* weno = app.add_subcommand("weno", "finite-difference reference");
  add_common(weno, weno_a, true);

  CLI::App* train = app.add_subcommand("train", "train the two-network model");
  add_common(train, train_a, true);
  train->add_option("--budget", train_a.budget, "desk or full");
  train->add_option("--seed", train_a.seed, "single seed override");

  CLI::App* eval = app.add_subcommand("eval", "compare methods on one case");
  add_common(eval, eval_a, true);
  eval->add_option("--methods", eval_a.methods,
                   "comma list of exact,weno5,cpinn")
      ->required();
  eval->add_option("--budget", eval_a.budget, "desk or full");
  eval->add_option("--seed", eval_a.seed, "single seed override");

  CLI::App* tables =
      app.add_subcommand("tables", "reproduce the comparison tables");
  add_common(tables, tables_a, false);
  tables->add_option("--budget", tables_a.budget, "desk or full");
  tables->add_option("--cases", tables_a.case_name,
                     "comma list restricting the registry");
  tables->add_option("--methods", tables_a.methods,
                     "comma list of exact,weno5,cpinn");

  CLI::App* list = app.add_subcommand("list-cases", "print the case registry");
  list->add_option("filter", list_filter, "substring filter");

  CLI11_PARSE(app, argc, argv);

  try {
    if (list->parsed()) {
      for (const gbl::CaseConfig& c : gbl::case_registry()) {
        if (!list_filter.empty() &&
            c.name.find(list_filter) == std::string::npos)
          continue;
        std::printf(
            "%-10s %-16s uL %-8g phiL %-5g uR %-8g phiR %-5g %s\n",
            c.name.c_str(),
            c.form == gbl::Form::Conservative ? "conservative"
                                              : "non-conservative",
            c.u_L, c.phi_L, c.u_R, c.phi_R,
            c.rescale ? "rescaled" : "");
      }
      return 0;
    }
    if (exact->parsed()) return run_command(exact_a, "exact");
    if (weno->parsed()) return run_command(weno_a, "exact,weno5");
    if (train->parsed()) return run_command(train_a, "exact,cpinn");
    if (eval->parsed()) return run_command(eval_a, "");
    // tables
    const gbl::Config cfg = load_config(tables_a);
    CommonArgs a = tables_a;
    a.case_name.clear();  // --cases is a filter, not a registry name
    gbl::HarnessOptions opt;
    opt.out_root = !a.out.empty()     ? a.out
                   : cfg.has("out")  ? cfg.at("out")
                                     : gbl::env_out_root();
    opt.timestamped = !a.flat;
    if (a.no_plots) opt.plots = false;
    const std::string budget = !tables_a.budget.empty() ? tables_a.budget
                               : cfg.has("budget")      ? cfg.at("budget")
                                                        : "desk";
    if (budget != "desk" && budget != "full")
      throw gbl::ConfigError("budget must be desk or full: " + budget);
    const gbl::BudgetKind k =
        budget == "desk" ? gbl::BudgetKind::Desk : gbl::BudgetKind::Full;
    const std::vector<std::string> cases =
        gbl::detail::split_csv(tables_a.case_name);
    const std::vector<std::string> methods =
        tables_a.methods.empty() && !cfg.has("methods")
            ? std::vector<std::string>{"exact", "weno5", "cpinn"}
            : gbl::detail::split_csv(tables_a.methods.empty()
                                         ? cfg.at("methods")
                                         : tables_a.methods);
    const gbl::TableReport rep = gbl::reproduce_tables(k, opt, cases, methods);
    std::printf("%s", rep.text.c_str());
    std::printf("report directory: %s\n", rep.dir.c_str());
    return rep.all_pass ? 0 : 1;
  } catch (const gbl::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
