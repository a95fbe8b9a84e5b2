#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <json.hpp>

#include "svf/bench.hpp"
#include "svf/driver.hpp"

using namespace svf;

namespace {

BilevelProblem load(const std::string& name) {
  return load_problem(std::string(SVF_CORPUS_DIR) + "/" + name + ".blp");
}

Metrics metrics(const BilevelProblem& p, const SolveReport& r) {
  return evaluate_metrics(r, *reference_from_meta(p));
}

std::string without_time(const SolveReport& r) {
  auto j = nlohmann::json::parse(to_json(r));
  j.erase("wall_time");
  return j.dump();
}

}  // namespace

TEST_CASE("continuation schedule") {
  ScheduleParams sp;
  const double r[] = {1, 0.1, 0.01, 0.001}, rho[] = {1, 0.1, 0.01, 0.01};
  for (int k = 0; k < 4; ++k) {
    CHECK(sp.r(k) == doctest::Approx(r[k]).epsilon(1e-15));
    CHECK(sp.rho(k) == doctest::Approx(rho[k]).epsilon(1e-15));
  }
  CHECK(sp.rho(40) == 0.01);
  CHECK(sp.r(40) == kMinR);

  ScheduleParams bad;
  bad.delta = 1.0;
  CHECK_THROWS(bad.validate());
  bad = {};
  bad.r0 = 0.0;
  CHECK_THROWS(bad.validate());
  bad = {};
  bad.rho_bar = -1;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("stopping criteria and their precedence") {
  std::vector<double> t(31, 1.0);
  t.back() = 1e-5;
  CHECK(stopping_criterion(t, 50) == 1);  // 4 also holds at k = 30
  t.back() = 4e-4;
  CHECK(stopping_criterion(t, 50) == 4);
  t.back() = 1.0;
  CHECK(stopping_criterion(t, 50) == 3);  // flat trace
  t.back() = 0.5;
  CHECK(stopping_criterion(t, 50) == 0);
  CHECK(stopping_criterion(t, 30) == 2);
  std::vector<double> early(11, 1e-3);
  CHECK(stopping_criterion(early, 50) == 0);
  early.back() = 5e-5;
  CHECK(stopping_criterion(early, 50) == 1);
  std::vector<double> flat(21, 2e-3);
  CHECK(stopping_criterion(flat, 50) == 3);
  flat.pop_back();
  CHECK(stopping_criterion(flat, 50) == 0);
  CHECK(stopping_criterion({}, 50) == 0);
}

TEST_CASE("initial multipliers") {
  auto a = initial_multipliers(1000, 42), b = initial_multipliers(1000, 42);
  CHECK(a == b);
  CHECK(initial_multipliers(1000, 43) != a);
  for (double v : a) {
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
  double mean = 0;
  for (double v : a) mean += v / a.size();
  CHECK(std::abs(mean - 0.5) < 0.05);
  CHECK(initial_multipliers(0, 1).empty());
}

TEST_CASE("start point from metadata") {
  BilevelProblem p = load("Example21");
  StartPoint s = default_start(p);
  CHECK(s.x == std::vector<double>{0.5});
  CHECK(s.y == std::vector<double>{-1.5, 0.5});
}

TEST_CASE("zero decrease factor clamps r") {
  BilevelProblem p = load("QuadraticHalfLine");
  ScheduleParams sp;
  sp.delta = 0.0;
  SolveReport r = solve_svf_sbal(p, default_start(p), sp);
  REQUIRE(r.r_trace.size() >= 2);
  CHECK(r.r_trace[0] == 1.0);
  CHECK(r.r_trace[1] == kMinR);
  CHECK(r.rho_trace[1] == sp.rho_bar);
  CHECK(r.r_clamped);
  SolveReport plain = solve_svf_sbal(p, default_start(p));
  CHECK_FALSE(plain.r_clamped);
}

TEST_CASE("seeded runs are reproducible") {
  BilevelProblem p = load("ShimizuEtal1997a");
  SolveReport a = solve_svf_sbal(p, default_start(p), {}, 42);
  SolveReport b = solve_svf_sbal(p, default_start(p), {}, 42);
  CHECK(without_time(a) == without_time(b));
  SolveReport k1 = solve_kp_rlx(p, default_start(p), {}, 7);
  SolveReport k2 = solve_kp_rlx(p, default_start(p), {}, 7);
  CHECK(without_time(k1) == without_time(k2));
  CHECK(a.seed == 42);
  CHECK(k1.seed == 7);
}

TEST_CASE("report JSON round trip") {
  BilevelProblem p = load("Bard1988Ex1");
  SolveReport a = solve_svf_sbal(p, default_start(p));
  SolveReport b = report_from_json(to_json(a));
  CHECK(to_json(a) == to_json(b));
  CHECK(b.x == a.x);
  CHECK(b.residual_trace == a.residual_trace);
  CHECK(b.strategy == a.strategy);
  CHECK(b.criterion == a.criterion);
  CHECK(b.outer_iterations() == static_cast<int>(a.residual_trace.size()) - 1);
}

TEST_CASE("the example: SVF finds the global solution, KKT-based solvers do not") {
  BilevelProblem p = load("Example21");
  SolveReport svf = solve_svf_sbal(p, default_start(p));
  CHECK(svf.criterion == 1);
  CHECK(metrics(p, svf).omega <= 1e-3);
  CHECK(svf.strategy == U0Strategy::neg_y0);
  CHECK_FALSE(svf.notes.empty());
  CHECK(svf.residual_trace.size() == svf.r_trace.size() + 1);

  SolveReport kp = solve_kp_sbal(p, default_start(p));
  CHECK(metrics(p, kp).omega > 1e-3);
  CHECK(kp.strategy == U0Strategy::none);
  CHECK(kp.u.empty());
  SolveReport rlx = solve_kp_rlx(p, default_start(p));
  CHECK(metrics(p, rlx).omega > 1e-3);
}

TEST_CASE("relaxation schedule and final complementarity") {
  for (const char* name : {"Example21", "Bard1988Ex1", "ShimizuEtal1997a"}) {
    CAPTURE(name);
    BilevelProblem p = load(name);
    SolveReport r = solve_kp_rlx(p, default_start(p));
    REQUIRE(r.r_trace.size() >= 3);
    CHECK(r.r_trace[0] == 1.0);
    CHECK(r.r_trace[1] == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(r.r_trace[2] == doctest::Approx(0.01).epsilon(1e-15));
    double sg = 0.0;
    for (int i = 0; i < p.m(); ++i) sg += r.s[i] * evaluate(p.g[i], Point{r.x, r.y, {}, {}});
    CHECK(std::abs(sg) <= r.r_trace.back() + r.subproblem_tol.back());
  }
}

TEST_CASE("lower level without constraints") {
  BilevelProblem p = load("Mirrlees1999");
  REQUIRE(p.m() == 0);
  SolveReport kp = solve_kp_sbal(p, default_start(p));
  CHECK(kp.criterion == 1);
  CHECK(kp.s.empty());
  SolveReport svf = solve_svf_sbal(p, default_start(p));
  CHECK(svf.criterion == 1);
}

TEST_CASE("KP and SVF agree on convex lower levels") {
  for (const char* name : {"ShimizuEtal1997a", "LiuHart1994"}) {
    CAPTURE(name);
    BilevelProblem p = load(name);
    SolveReport a = solve_svf_sbal(p, default_start(p));
    SolveReport b = solve_kp_sbal(p, default_start(p));
    CHECK(a.strategy == U0Strategy::y0);
    double d = 0.0;
    for (std::size_t i = 0; i < a.x.size(); ++i) d = std::max(d, std::abs(a.x[i] - b.x[i]));
    for (std::size_t i = 0; i < a.y.size(); ++i) d = std::max(d, std::abs(a.y[i] - b.y[i]));
    CHECK(d <= 1e-3);
    CHECK(std::abs(a.F - b.F) <= 1e-3);
  }
}

TEST_CASE("smoothed complementarity tracks r across the corpus") {
  // Dempe1992b has no lower-level KKT point at x = 0, so its multipliers s grow
  // without bound and the gap at the last steps is dominated by rounding in s*g.
  for (const auto& e : std::filesystem::directory_iterator(SVF_CORPUS_DIR)) {
    BilevelProblem p = load_problem(e.path().string());
    CAPTURE(p.meta.name);
    SolveReport r = solve_svf_sbal(p, default_start(p));
    REQUIRE(r.smoothing_gap.size() == r.subproblem_tol.size());
    if (p.meta.name == "Dempe1992b") {
      CHECK(*std::max_element(r.s.begin(), r.s.end()) > 1e6);
      continue;
    }
    for (std::size_t k = 0; k < r.smoothing_gap.size(); ++k) {
      CAPTURE(k);
      CHECK(r.smoothing_gap[k] <= 10 * r.subproblem_tol[k]);
    }
  }
}
