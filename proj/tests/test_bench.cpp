#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "svf/bench.hpp"

using namespace svf;
namespace fs = std::filesystem;

namespace {

SolveReport report_at(std::vector<double> x, std::vector<double> y, double F, double f) {
  SolveReport r;
  r.x = std::move(x);
  r.y = std::move(y);
  r.F = F;
  r.f = f;
  r.wall_time = 0.5;
  return r;
}

fs::path temp_dir(const std::string& tag) {
  fs::path d = fs::temp_directory_path() / ("svf_bench_" + tag);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("metrics of an exact solution") {
  Reference ref{{0}, {-2, 0}, -6, 6.640625};
  Metrics m = evaluate_metrics(report_at({0}, {-2, 0}, -6, 6.640625), ref);
  CHECK(m.eps_x == 0.0);
  CHECK(m.eps_f == 0.0);
  CHECK(m.omega == 0.0);
  CHECK(m.success);
  CHECK(m.obj_success);
  CHECK(m.sol_success);
  CHECK(m.time == 0.5);
}

TEST_CASE("success threshold is closed") {
  Reference ref{{0}, {-2, 0}, -6, 6.640625};
  Metrics m = evaluate_metrics(report_at({0.001}, {-2, 0}, 5e-3, 1), ref);
  CHECK(m.eps_x == 0.001);
  CHECK(m.sol_success);
  CHECK(m.success);
  CHECK_FALSE(m.obj_success);
  Metrics off = evaluate_metrics(report_at({0.0011}, {-2, 0}, -6, 6.640625), ref);
  CHECK_FALSE(off.sol_success);
  CHECK(off.success);  // objectives exact
}

TEST_CASE("objective success without solution success") {
  BilevelProblem p = load_problem(SVF_CORPUS_DIR "/Mirrlees1999.blp");
  Reference ref = *reference_from_meta(p);
  Metrics m = evaluate_metrics(report_at({ref.x[0] + 1.54e-2}, ref.y, ref.F + 9.18e-4, ref.f), ref);
  CHECK(m.eps_x == doctest::Approx(1.54e-2));
  CHECK(m.eps_f == doctest::Approx(9.18e-4));
  CHECK(m.obj_success);
  CHECK_FALSE(m.sol_success);
  CHECK(m.success);
  CHECK(m.omega <= m.eps_x);
  CHECK(m.omega <= m.eps_f);
}

TEST_CASE("reference values fall back to evaluation at the reference point") {
  BilevelProblem p = parse_problem(
      "var x[1]; var y[1];\nupper { minimize (x[1]-1)^2 + y[1]^2; }\n"
      "lower { minimize (y[1]-x[1])^2; }\nmeta { xref=[0.5]; yref=[0.5]; }\n");
  auto ref = reference_from_meta(p);
  REQUIRE(ref);
  CHECK(ref->F == doctest::Approx(0.5));
  CHECK(ref->f == 0.0);
  BilevelProblem q = parse_problem(
      "var x[1]; var y[1];\nupper { minimize x[1]^2; }\nlower { minimize y[1]^2; }\n");
  CHECK_FALSE(reference_from_meta(q));
}

TEST_CASE("accuracy ratio branches") {
  CHECK(accuracy_ratio(1e-4, 1e-5) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(accuracy_ratio(0.0, 0.0) == 0.0);
  CHECK(accuracy_ratio(1e-4, 0.0) == 50.0);
  CHECK(accuracy_ratio(0.01, 1e-5) == 100.0);
  CHECK(accuracy_ratio(0.01, 0.0) == 100.0);
  CHECK(accuracy_ratio(1e-3, 1e-3) == 0.0);
  CHECK(time_ratios({2.0, 2.0, 20.0}, {true, true, true}) == std::vector<double>{0, 0, 1});
  CHECK(time_ratios({1.0, 2.0}, {false, true}) == std::vector<double>{100, 0});
}

TEST_CASE("randomized ratio tables hit a zero on every solvable problem") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ex(-9, 0);
  std::uniform_int_distribution<int> pick(0, 4);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> w(3);
    for (double& v : w) {
      const int k = pick(rng);
      v = k == 0 ? 0.0 : k == 1 ? 1e-5 : std::pow(10.0, ex(rng));
    }
    const auto r = accuracy_ratios(w);
    const double wmin = *std::min_element(w.begin(), w.end());
    const bool any_success = wmin <= kSuccessThreshold;
    int zeros = 0;
    for (std::size_t s = 0; s < w.size(); ++s) {
      CHECK(r[s] >= 0.0);
      if (r[s] == 0.0) {
        ++zeros;
        CHECK(w[s] == wmin);
      }
      if (w[s] > kSuccessThreshold) CHECK(r[s] == 100.0);
      if (w[s] == wmin && any_success) CHECK(r[s] == 0.0);
    }
    if (any_success) CHECK(zeros >= 1);
    else CHECK(zeros == 0);
  }
}

TEST_CASE("profile curves") {
  SUBCASE("single solver with ratio 0") {
    auto c = profile_curve({{0.0}});
    CHECK(c.size() == 2001);
    CHECK(c.front().gamma == 0.0);
    CHECK(c.back().gamma == doctest::Approx(100.0));
    for (const auto& pt : c) CHECK(pt.fraction[0] == 1.0);
  }
  SUBCASE("two solvers") {
    auto c = profile_curve({{0.0, 1.0}});
    CHECK(c[0].fraction == std::vector<double>{1.0, 0.0});
    CHECK(c[19].fraction[1] == 0.0);
    CHECK(c[20].gamma == doctest::Approx(1.0));
    CHECK(c[20].fraction[1] == 1.0);
  }
  SUBCASE("monotone and bounded on random tables") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 120);
    std::vector<std::vector<double>> t(17, std::vector<double>(3));
    for (auto& row : t)
      for (double& v : row) v = u(rng) < 60 ? u(rng) : 100.0;
    auto c = profile_curve(t);
    for (std::size_t k = 0; k < c.size(); ++k)
      for (std::size_t s = 0; s < 3; ++s) {
        CHECK(c[k].fraction[s] >= 0.0);
        CHECK(c[k].fraction[s] <= 1.0);
        if (k > 0) CHECK(c[k].fraction[s] >= c[k - 1].fraction[s]);
      }
    CHECK_THROWS(profile_curve({}));
  }
}

TEST_CASE("CSV round trip is exact") {
  BenchReport r;
  r.solvers = {"svf-sbal", "kp-sbal"};
  r.problems = {"A", "B"};
  r.rows.push_back({"A", "svf-sbal", 0.1 + 0.2, 1e-300, 1e-300, true, true, false, 1.0 / 3, 1, 42});
  r.rows.push_back({"A", "kp-sbal", HUGE_VAL, 2.5, 2.5, false, false, false, 0.0, 0, 42});
  r.rows.push_back({"B", "svf-sbal", 5e-324, 0, 0, true, true, true, 12.75, 3, 18446744073709551615ull});
  r.rows.push_back({"B", "kp-sbal", 0.001, 0.001, 0.001, true, true, true, 1e-7, 4, 7});
  const std::string csv = to_csv(r);
  CHECK(csv.rfind("problem,solver,eps_x,eps_f,omega,success,obj_success,sol_success,time_s,criterion,seed\n", 0) == 0);
  BenchReport back = report_from_csv(csv);
  CHECK(back.rows == r.rows);
  CHECK(back.solvers == r.solvers);
  CHECK(back.problems == r.problems);
  CHECK(to_csv(back) == csv);
  CHECK_THROWS(report_from_csv("wrong,header\n"));
}

TEST_CASE("summary counts and SVG output") {
  BenchReport r;
  r.solvers = {"svf-sbal", "kp-sbal"};
  r.problems = {"A", "B"};
  r.rows.push_back({"A", "svf-sbal", 1e-5, 1e-4, 1e-5, true, true, true, 1.0, 1, 42});
  r.rows.push_back({"A", "kp-sbal", 1.0, 1e-4, 1e-4, true, true, false, 2.0, 1, 42});
  r.rows.push_back({"B", "svf-sbal", 1e-6, 1.0, 1e-6, true, false, true, 1.0, 1, 42});
  r.rows.push_back({"B", "kp-sbal", 1.0, 1.0, 1.0, false, false, false, 0.5, 2, 42});
  auto s = summarize(r);
  REQUIRE(s.size() == 2);
  CHECK(s[0].success == 2);
  CHECK(s[0].obj_success == 1);
  CHECK(s[0].sol_success == 2);
  CHECK(s[0].time_s == 2.0);
  CHECK(s[1].success == 1);
  CHECK(s[1].sol_success == 0);

  auto acc = ratio_table(r, ProfileMetric::success);
  CHECK(acc[0] == std::vector<double>{0.0, 1.0});
  CHECK(acc[1] == std::vector<double>{0.0, 100.0});
  auto tim = ratio_table(r, ProfileMetric::time);
  CHECK(tim[1] == std::vector<double>{0.0, 100.0});

  fs::path dir = temp_dir("svg");
  auto paths = write_profile_svgs(r, (dir / "profile").string());
  REQUIRE(paths.size() == 4);
  for (const auto& p : paths) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str().rfind("<svg", 0) == 0);
    CHECK(ss.str().find("polyline") != std::string::npos);
    CHECK(ss.str().find("kp-sbal") != std::string::npos);
  }
  CHECK(fs::exists(dir / "profile_time.svg"));
}

TEST_CASE("suite on a small corpus") {
  fs::path dir = temp_dir("suite");
  for (const char* name : {"QuadraticHalfLine", "Bard1988Ex1"})
    fs::copy_file(fs::path(SVF_CORPUS_DIR) / (std::string(name) + ".blp"),
                  dir / (std::string(name) + ".blp"));
  const std::vector<std::string> solvers{"svf-sbal", "kp-sbal", "kp-rlx"};
  BenchReport a = run_suite(dir.string(), solvers, 42, 1);
  BenchReport b = run_suite(dir.string(), solvers, 42, 1);
  BenchReport c = run_suite(dir.string(), solvers, 42, 3);
  REQUIRE(a.rows.size() == 6);
  CHECK(a.problems == std::vector<std::string>{"Bard1988Ex1", "QuadraticHalfLine"});
  CHECK(a.rows[0].solver == "svf-sbal");
  CHECK(a.rows[2].solver == "kp-rlx");
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    BenchRow x = a.rows[i], y = b.rows[i], z = c.rows[i];
    x.time_s = y.time_s = z.time_s = 0.0;
    CHECK(x == y);
    CHECK(x == z);
    CHECK(a.rows[i].success);
  }
  CHECK_THROWS(run_suite(dir.string(), {"newton"}, 42, 1));
}
