#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gbl/harness.hpp"

using namespace gbl;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.is_open());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  return p;
}

SolutionField constant_field(const CaseConfig& c, double u, double phi) {
  SolutionField f{c.name, "exact", 0, {}};
  for (double t : c.eval.times)
    for (double x : eval_xs(c)) f.samples.push_back({x, t, u, phi});
  return f;
}

}  // namespace

TEST_CASE("registry values are frozen", "[harness][registry]") {
  CHECK(registry_checksum() == 2669894799912158269ull);
  const std::vector<CaseConfig> reg = case_registry();
  CHECK(reg.size() == 16);

  const CaseConfig c1 = find_case("case1");
  CHECK(c1.u_L == 0.6);
  CHECK(c1.phi_L == 0.7);
  CHECK(c1.u_R == 0.3);
  CHECK(c1.phi_R == 0.6);
  CHECK(c1.domain.x_max == 10.0);
  CHECK(c1.domain.t_max == 3.0);
  CHECK_FALSE(c1.rescale.has_value());

  // the porosity-weighted twin shares physical data; its saturation ratio
  // on the left is 6/7
  const CaseConfig c1n = find_case("case1-nc");
  CHECK(c1n.form == Form::NonConservative);
  CHECK(c1n.u_L / c1n.phi_L == Catch::Approx(6.0 / 7.0).epsilon(1e-15));

  const CaseConfig c3b = find_case("case3b");
  REQUIRE(c3b.rescale.has_value());
  CHECK(c3b.rescale->delta1 == 1e-2);
  CHECK(c3b.rescale->delta2 == 1e-4);
  CHECK(c3b.rescale->subdomain == 1);

  const CaseConfig c5n = find_case("case5b-nc");
  REQUIRE(c5n.rescale.has_value());
  CHECK(c5n.rescale->delta1 == 1.0);
  CHECK(c5n.rescale->delta2 == 0.4);
  CHECK(c5n.rescale->subdomain == 2);

  const CaseConfig c4 = find_case("case4a");
  CHECK(c4.domain.x_max == 25.0);
  CHECK(c4.n_f2 == 17500);

  CHECK(find_case("case2").seeds == std::vector<std::uint64_t>{1, 2, 3});
  CHECK_THROWS_AS(find_case("case9"), Error);
}

TEST_CASE("relative l2 is a norm ratio", "[harness][metrics][property]") {
  const CaseConfig c = find_case("case1");
  const SolutionField e = exact_field(c);

  SECTION("identity and scaling") {
    CHECK(relative_l2(e, e) == 0.0);
    SolutionField twice = e;
    for (Sample& s : twice.samples) s.u *= 2.0;
    CHECK(relative_l2(twice, e) == Catch::Approx(1.0).epsilon(1e-14));
  }

  SECTION("triangle inequality on random fields") {
    std::mt19937_64 rng(3);
    SolutionField a = e, b = e, diff = e;
    for (std::size_t i = 0; i < e.samples.size(); ++i) {
      a.samples[i].u += 0.2 * unit_uniform(rng) - 0.1;
      b.samples[i].u += 0.2 * unit_uniform(rng) - 0.1;
      diff.samples[i].u =
          a.samples[i].u - b.samples[i].u + e.samples[i].u;
    }
    CHECK(relative_l2(a, e) <=
          relative_l2(diff, e) + relative_l2(b, e) + 1e-14);
  }

  SECTION("tilde comparison divides by porosity") {
    const SolutionField p = constant_field(c, 0.42, 0.6);
    const SolutionField q = constant_field(c, 0.21, 0.3);
    CHECK(relative_l2(p, q, true) == 0.0);
    CHECK(relative_l2(p, q, false) > 0.0);
  }

  SECTION("grid mismatches are rejected") {
    SolutionField shorter = e;
    shorter.samples.pop_back();
    CHECK_THROWS_AS(relative_l2(shorter, e), GridMismatch);
    SolutionField shifted = e;
    shifted.samples[0].x += 1e-9;
    CHECK_THROWS_AS(relative_l2(shifted, e), GridMismatch);
  }
}

TEST_CASE("config files parse into dotted keys", "[harness][config]") {
  std::istringstream is(
      "# run configuration\n"
      "case = case1\n"
      "u_L = 0.55   # inline comment\n"
      "domain {\n"
      "  x_max = 12\n"
      "  t_max = 2.5\n"
      "}\n"
      "train {\n"
      "  n_f1 = 100\n"
      "}\n"
      "u_L = 0.56\n");
  const Config cfg = Config::parse(is, "test");
  CHECK(cfg.at("case") == "case1");
  CHECK(cfg.at("u_L") == "0.56");  // later assignment wins
  CHECK(cfg.at("domain.x_max") == "12");
  CHECK(cfg.at("domain.t_max") == "2.5");
  CHECK(cfg.at("train.n_f1") == "100");
  CHECK_FALSE(cfg.has("domain.x_min"));
  CHECK_THROWS_AS(cfg.at("nope"), ConfigError);

  SECTION("syntax errors carry the line") {
    std::istringstream bad("a = 1\nbogus line\n");
    CHECK_THROWS_WITH(Config::parse(bad, "f"),
                      Catch::Matchers::ContainsSubstring("f:2"));
    std::istringstream unmatched("}\n");
    CHECK_THROWS_AS(Config::parse(unmatched, "f"), ConfigError);
    std::istringstream open("domain {\n x = 1\n");
    CHECK_THROWS_AS(Config::parse(open, "f"), ConfigError);
  }
}

TEST_CASE("config overlays onto a case", "[harness][config]") {
  Config cfg;
  cfg.set("u_L", "0.5");
  cfg.set("domain.x_max", "15");
  cfg.set("eval.nx", "64");
  cfg.set("eval.times", "1.0, 2.0");
  cfg.set("seeds", "4,5");
  cfg.set("train.epochs", "123");
  cfg.set("train.n_f2", "2000");
  cfg.set("form", "non-conservative");
  const CaseConfig c = apply_config(find_case("case1"), cfg);
  CHECK(c.u_L == 0.5);
  CHECK(c.domain.x_max == 15.0);
  CHECK(c.eval.nx == 64);
  CHECK(c.eval.times == std::vector<double>{1.0, 2.0});
  CHECK(c.seeds == std::vector<std::uint64_t>{4, 5});
  CHECK(c.full_epochs == 123);
  CHECK(c.n_f2 == 2000);
  CHECK(c.form == Form::NonConservative);

  SECTION("rescale keys engage rescaling on a plain case") {
    Config r;
    r.set("rescale.delta2", "0.5");
    r.set("rescale.subdomain", "2");
    const CaseConfig cr = apply_config(find_case("case1"), r);
    REQUIRE(cr.rescale.has_value());
    CHECK(cr.rescale->delta1 == 1.0);
    CHECK(cr.rescale->delta2 == 0.5);
    CHECK(cr.rescale->subdomain == 2);
  }

  SECTION("runner keys pass through untouched") {
    Config r;
    r.set("budget", "full");
    r.set("methods", "exact,weno5");
    CHECK_NOTHROW(apply_config(find_case("case1"), r));
  }

  SECTION("junk is rejected") {
    Config bad;
    bad.set("u_LL", "0.5");
    CHECK_THROWS_WITH(apply_config(find_case("case1"), bad),
                      Catch::Matchers::ContainsSubstring("u_LL"));
    Config nan;
    nan.set("u_L", "zero");
    CHECK_THROWS_AS(apply_config(find_case("case1"), nan), ConfigError);
    Config form;
    form.set("form", "weak");
    CHECK_THROWS_AS(apply_config(find_case("case1"), form), ConfigError);
  }
}

TEST_CASE("environment supplies defaults", "[harness][config]") {
  unsetenv("GBL_SEED");
  unsetenv("GBL_OUT");
  CHECK_FALSE(env_seed().has_value());
  CHECK(env_out_root() == "runs");
  setenv("GBL_SEED", "42", 1);
  setenv("GBL_OUT", "/tmp/elsewhere", 1);
  CHECK(env_seed() == 42ull);
  CHECK(env_out_root() == "/tmp/elsewhere");
  setenv("GBL_SEED", "4x", 1);
  CHECK_THROWS_AS(env_seed(), ConfigError);
  unsetenv("GBL_SEED");
  unsetenv("GBL_OUT");
}

TEST_CASE("manifests replay through the parser", "[harness][config]") {
  const CaseConfig c = find_case("case3b");
  const TrainBudget b = budget_for(c, BudgetKind::Desk);
  const std::string m1 =
      render_manifest(c, "desk", b, {1}, {"exact", "cpinn"});
  const std::string m2 =
      render_manifest(c, "desk", b, {1}, {"exact", "cpinn"});
  CHECK(m1 == m2);  // no timestamps or other nondeterminism

  std::istringstream is(m1);
  const Config cfg = Config::parse(is, "manifest");
  CHECK(cfg.at("name") == "case3b");
  CHECK(cfg.at("budget") == "desk");
  CHECK(cfg.at("methods") == "exact,cpinn");
  CHECK(cfg.at("seeds") == "1");
  CHECK(cfg.at("rescale.delta2") == "0.0001");
  CHECK(cfg.at("scales.u1") == "12");
  CHECK(cfg.at("scales.phi1") == "60");
  CHECK(cfg.at("train.epochs") == "20000");
  CHECK(cfg.at("train.n_f1") == "750");
  // a manifest is a valid config for the same case
  CHECK_NOTHROW(apply_config(find_case("case3b"), cfg));
}

TEST_CASE("run directories", "[harness][artifacts]") {
  const fs::path root = fresh_dir("gbl_harness_dirs");
  const std::string fixed = make_run_dir(root.string(), "case1", false);
  CHECK(fixed == (root / "case1").string());
  CHECK(fs::is_directory(fixed));
  const std::string stamped = make_run_dir(root.string(), "case1", true);
  CHECK(fs::is_directory(stamped));
  CHECK(stamped != fixed);
  const std::string name = fs::path(stamped).filename().string();
  CHECK(name.rfind("case1-", 0) == 0);
  CHECK(name.size() == std::string("case1-YYYYMMDDTHHMMSSZ").size());
  fs::remove_all(root);
}

TEST_CASE("run_case writes rows and artifacts", "[harness][runner]") {
  const fs::path root = fresh_dir("gbl_harness_run");
  HarnessOptions opt;
  opt.out_root = root.string();
  opt.timestamped = false;

  const RunResult r = run_case(find_case("case2"), {"exact", "weno5"}, opt);
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[0].method == "exact");
  CHECK(r.rows[0].l2 == 0.0);
  CHECK(r.rows[1].method == "weno5");
  CHECK(r.rows[1].l2 < 3.0 * 2.9e-3);
  CHECK(r.rows[1].l2 > 0.0);
  CHECK(r.rows[1].seeds == 1);

  for (const char* name :
       {"manifest.txt", "metrics.csv", "profiles.csv", "case2_exact.csv",
        "case2_fan.json", "case2_weno5.csv", "case2_weno5_native.csv",
        "case2_t0.75.svg", "case2_overlay.svg"})
    CHECK(fs::exists(fs::path(r.dir) / name));

  const std::string metrics = slurp(fs::path(r.dir) / "metrics.csv");
  CHECK(metrics.rfind("case,method,form,rescaled,l2,seeds\n", 0) == 0);
  CHECK(metrics.find("case2,exact,conservative,0,0,1\n") != std::string::npos);
  CHECK(metrics.find("case2,weno5,") != std::string::npos);

  const std::string profiles = slurp(fs::path(r.dir) / "profiles.csv");
  CHECK(profiles.rfind("x,t,u,phi,method,case,seed\n", 0) == 0);
  CHECK(profiles.find(",exact,case2,0\n") != std::string::npos);
  CHECK(profiles.find(",weno5,case2,0\n") != std::string::npos);

  const std::string svg = slurp(fs::path(r.dir) / "case2_t3.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("weno5") != std::string::npos);

  CHECK_THROWS_AS(run_case(find_case("case1"), {"simpson"}, opt), Error);
  fs::remove_all(root);
}

TEST_CASE("run_case trains when asked", "[harness][runner]") {
  const fs::path root = fresh_dir("gbl_harness_train");
  HarnessOptions opt;
  opt.out_root = root.string();
  opt.timestamped = false;
  opt.seed = 5;
  opt.budget_override = TrainBudget{30, 12, 15, 20, 25, 7, 1};
  opt.train.arch1 = {2, 8, 8, 2};
  opt.train.arch2 = {2, 8, 8, 1};
  opt.train.log_every = 10;

  const RunResult r = run_case(find_case("case1"), {"exact", "cpinn"}, opt);
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[1].method == "cpinn");
  CHECK(r.rows[1].seeds == 1);
  CHECK(std::isfinite(r.rows[1].l2));
  CHECK(r.rows[1].l2 < 1.0);
  for (const char* name :
       {"case1_seed5_training.csv", "case1_cpinn_seed5.csv",
        "case1_seed5_sd1.ckpt", "case1_seed5_sd2.ckpt"})
    CHECK(fs::exists(fs::path(r.dir) / name));
  const std::string manifest = slurp(fs::path(r.dir) / "manifest.txt");
  CHECK(manifest.find("seeds = 5\n") != std::string::npos);
  fs::remove_all(root);
}

TEST_CASE("solver refusals keep earlier artifacts", "[harness][runner]") {
  const fs::path root = fresh_dir("gbl_harness_partial");
  HarnessOptions opt;
  opt.out_root = root.string();
  opt.timestamped = false;
  CHECK_THROWS_AS(run_case(find_case("case1-nc"), {"exact", "weno5"}, opt),
                  NonConservativeUnsupported);
  const fs::path dir = root / "case1-nc";
  CHECK(fs::exists(dir / "case1-nc_exact.csv"));
  const std::string metrics = slurp(dir / "metrics.csv");
  CHECK(metrics.find("case1-nc,exact,non-conservative,0,0,1\n") !=
        std::string::npos);
  fs::remove_all(root);
}

TEST_CASE("artifacts replay byte for byte", "[harness][artifacts][property]") {
  const fs::path root = fresh_dir("gbl_harness_repro");
  HarnessOptions opt;
  opt.out_root = (root / "a").string();
  opt.timestamped = false;
  opt.seed = 9;
  opt.budget_override = TrainBudget{20, 10, 12, 14, 16, 5, 1};
  opt.train.arch1 = {2, 6, 5, 2};
  opt.train.arch2 = {2, 6, 5, 1};
  const RunResult ra = run_case(find_case("case2"), {"exact", "cpinn"}, opt);
  opt.out_root = (root / "b").string();
  const RunResult rb = run_case(find_case("case2"), {"exact", "cpinn"}, opt);
  REQUIRE(ra.artifacts == rb.artifacts);
  for (const std::string& name : ra.artifacts) {
    INFO(name);
    CHECK(slurp(fs::path(ra.dir) / name) == slurp(fs::path(rb.dir) / name));
  }
  fs::remove_all(root);
}

TEST_CASE("verdicts gate measured rows", "[harness][tables][property]") {
  auto judge_one = [](const char* name, const char* method, double l2,
                      BudgetKind k) {
    const CaseConfig c = find_case(name);
    MetricsRow r{c.name, method, c.form, false, l2, 1};
    return detail::judge(r, k, c).verdict;
  };
  // accurate finite-difference rows sit inside the x3 band
  CHECK(judge_one("case1", "weno5", 4.8e-3, BudgetKind::Desk) == "pass");
  CHECK(judge_one("case1", "weno5", 6e-3, BudgetKind::Desk) == "FAIL");
  // near-vacuum rows reproduce the documented breakdown
  CHECK(judge_one("case4a", "weno5", 0.63, BudgetKind::Desk) == "breakdown");
  CHECK(judge_one("case4a", "weno5", 0.01, BudgetKind::Desk) == "FAIL");
  // short-budget gates
  CHECK(judge_one("case1", "cpinn", 4.9e-2, BudgetKind::Desk) == "pass");
  CHECK(judge_one("case1", "cpinn", 6.0e-2, BudgetKind::Desk) == "FAIL");
  CHECK(judge_one("case2", "cpinn", 5.5e-2, BudgetKind::Desk) == "pass");
  CHECK(judge_one("case3b", "cpinn", 9e-2, BudgetKind::Desk) == "pass");
  CHECK(judge_one("case4b", "cpinn", 0.5, BudgetKind::Desk) == "info");
  // full-budget rows compare against the reference
  CHECK(judge_one("case1", "cpinn", 2.5e-2, BudgetKind::Full) == "pass");
  CHECK(judge_one("case1", "cpinn", 3e-2, BudgetKind::Full) == "FAIL");
  CHECK(judge_one("case1-nc", "cpinn", 1.5e-2, BudgetKind::Full) == "pass");
  // training without rescaling must stay broken
  CHECK(judge_one("case3a", "cpinn", 0.3, BudgetKind::Full) == "breakdown");
  CHECK(judge_one("case3a", "cpinn", 0.05, BudgetKind::Full) == "FAIL");
  CHECK(judge_one("case3a", "cpinn", 0.3, BudgetKind::Desk) == "breakdown");
  // the exact baseline must agree with itself
  CHECK(judge_one("case1", "exact", 0.0, BudgetKind::Desk) == "pass");
}

TEST_CASE("reproduce_tables renders a verdict report", "[harness][tables]") {
  const fs::path root = fresh_dir("gbl_harness_tables");
  HarnessOptions opt;
  opt.out_root = root.string();
  opt.timestamped = false;
  const TableReport rep = reproduce_tables(
      BudgetKind::Desk, opt, {"case1", "case2"}, {"exact", "weno5"});
  CHECK(rep.dir == (root / "tables-desk").string());
  REQUIRE(rep.rows.size() == 4);
  for (const TableVerdict& v : rep.rows) {
    CHECK(v.budget == "desk");
    CHECK((v.verdict == "pass" || v.verdict == "breakdown"));
  }
  CHECK(rep.all_pass);
  CHECK(rep.rows[1].row.method == "weno5");
  CHECK(rep.rows[1].reference == 1.85e-3);
  CHECK(rep.text.find("case1") != std::string::npos);
  CHECK(rep.text.find("verdict") != std::string::npos);
  CHECK(fs::exists(fs::path(rep.dir) / "report.txt"));
  CHECK(fs::exists(fs::path(rep.dir) / "metrics.csv"));
  CHECK(fs::exists(fs::path(rep.dir) / "case1" / "case1_exact.csv"));
  CHECK(slurp(fs::path(rep.dir) / "report.txt") == rep.text);
  fs::remove_all(root);
}

TEST_CASE("plots stay inside the drawing box", "[harness][plots]") {
  PlotSeries s;
  s.label = "probe";
  for (int i = 0; i <= 10; ++i) {
    s.x.push_back(i);
    s.y.push_back(std::sin(0.5 * i));
  }
  const std::string svg = render_line_plot("title", "x", "u", {s});
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("probe") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);
  CHECK(svg.find("nan") == std::string::npos);
  // identical inputs render identical bytes
  CHECK(render_line_plot("title", "x", "u", {s}) == svg);
  PlotSeries bad;
  bad.label = "bad";
  bad.x = {1.0};
  CHECK_THROWS_AS(render_line_plot("t", "x", "y", {bad}), ShapeMismatch);
}
