#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <json.hpp>
#include <random>

#include "svf/mpec.hpp"

using namespace svf;

namespace {

BilevelProblem example21() { return load_problem(SVF_CORPUS_DIR "/Example21.blp"); }

const std::vector<double> kX{0}, kY{-2, 0}, kU{2.5, 1.5}, kS{0.625, 0, 0};

}  // namespace

TEST_CASE("SVF instance of the example") {
  BilevelProblem p = example21();
  MpecInstance inst = build_svf(p);
  CHECK(inst.kind == MpecKind::svf);
  CHECK(inst.n == 8);
  REQUIRE(inst.equalities.size() == 2);
  CHECK(inst.comp_pairs.size() == 3);
  CHECK(inst.inequalities.size() == 1 + 3 + 3 + 2 + 3);
  CHECK(depends_on(inst.inequalities[0], Block::y));
  CHECK(depends_on(inst.inequalities[0], Block::u));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-3, 3);
  for (int k = 0; k < 50; ++k) {
    double x = U(rng), u1 = U(rng), u2 = U(rng), s1 = U(rng), s2 = U(rng), s3 = U(rng);
    std::vector<double> w = inst.pack(std::vector<double>{x}, std::vector<double>{U(rng), U(rng)},
                                      std::vector<double>{u1, u2}, std::vector<double>{s1, s2, s3});
    Point pt = inst.split(w);
    double h1 = u1 - x + 5.0 / 8 - 2 * s1 * u1 + 2 * s2 * (u1 - 1);
    double h2 = u2 - 27.0 / 8 + 2 * s1 * u2 + 2 * s2 * u2 + s3;
    CHECK(evaluate(inst.equalities[0], pt) == doctest::Approx(h1).epsilon(1e-14));
    CHECK(evaluate(inst.equalities[1], pt) == doctest::Approx(h2).epsilon(1e-14));
  }
}

TEST_CASE("stationary point is SVF feasible") {
  BilevelProblem p = example21();
  MpecInstance inst = build_svf(p);
  ResidualBreakdown r = mpec_residual(inst, inst.pack(kX, kY, kU, kS));
  CHECK(r.equality_inf_norm <= 1e-12);
  CHECK(r.inequality_violation_inf_norm <= 1e-12);
  CHECK(r.complementarity_inf_norm <= 1e-12);
  CHECK(r.dominance_violation <= 1e-12);
  CHECK(r.feasible(1e-12));

  std::vector<double> s = kS;
  s[0] += 0.1;
  ResidualBreakdown r2 = mpec_residual(inst, inst.pack(kX, kY, kU, s));
  CHECK(r2.equality_inf_norm == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("unconstrained lower level") {
  BilevelProblem p = parse_problem(
      "var x[1]; var y[1]; upper{ minimize x[1]^2 + y[1]^2; } lower{ minimize (y[1]-x[1]-1)^2; }");
  MpecInstance inst = build_svf(p);
  CHECK(inst.n == 3);
  CHECK(inst.comp_pairs.empty());
  REQUIRE(inst.equalities.size() == 1);
  ResidualBreakdown r = mpec_residual(inst, std::vector<double>(3, 0.0));
  CHECK(r.dominance_violation == 0.0);
  CHECK(r.equality_inf_norm == 2.0);
  CHECK(r.complementarity_inf_norm == 0.0);

  MpecInstance kp = build_kp(p);
  CHECK(kp.n == 2);
  CHECK(kp.equalities.size() == 1);
  CHECK(kp.inequalities.empty());
}

TEST_CASE("KP instance of the example rejects the global solution") {
  BilevelProblem p = example21();
  MpecInstance kp = build_kp(p);
  CHECK(kp.kind == MpecKind::kp);
  CHECK(kp.n == 6);
  CHECK_FALSE(kp.layout.has(Block::u));
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0, 100);
  double worst = 1e300;
  for (int k = 0; k < 1000; ++k) {
    // g3 is inactive at the point, so its multiplier is zero on the active set.
    std::vector<double> s{U(rng), U(rng), 0.0};
    ResidualBreakdown r = mpec_residual(kp, kp.pack(kX, kY, {}, s));
    worst = std::min(worst, r.equality_inf_norm);
  }
  CHECK(worst >= 27.0 / 8 - 1e-9);
}

TEST_CASE("KP residual vanishes at a lower-level KKT pair") {
  BilevelProblem p = example21();
  MpecInstance kp = build_kp(p);
  ResidualBreakdown r = mpec_residual(kp, kp.pack(kX, kU, {}, kS));
  CHECK(r.max() <= 1e-12);
}

TEST_CASE("complementarity residual ignores y") {
  BilevelProblem p = example21();
  MpecInstance inst = build_svf(p);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-3, 3);
  for (int k = 0; k < 100; ++k) {
    std::vector<double> x{U(rng)}, u{U(rng), U(rng)}, s{U(rng), U(rng), U(rng)};
    double a = mpec_residual(inst, inst.pack(x, std::vector<double>{U(rng), U(rng)}, u, s))
                   .complementarity_inf_norm;
    double b = mpec_residual(inst, inst.pack(x, std::vector<double>{U(rng), U(rng)}, u, s))
                   .complementarity_inf_norm;
    CHECK(a == b);
    double expect = 0.0;
    Point pt = inst.split(inst.pack(x, u, u, s));
    for (int i = 0; i < 3; ++i)
      expect = std::max(expect, std::fabs(s[i] * evaluate(p.g[i], Point{x, u, {}, {}})));
    (void)pt;
    CHECK(a == expect);
  }
}

TEST_CASE("residuals invariant under permuting lower constraints") {
  BilevelProblem p = example21();
  BilevelProblem q = p;
  std::swap(q.g[0], q.g[2]);
  MpecInstance a = build_svf(p), b = build_svf(q);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(-3, 3);
  for (int k = 0; k < 100; ++k) {
    std::vector<double> x{U(rng)}, y{U(rng), U(rng)}, u{U(rng), U(rng)},
        s{U(rng), U(rng), U(rng)};
    std::vector<double> sp{s[2], s[1], s[0]};
    ResidualBreakdown ra = mpec_residual(a, a.pack(x, y, u, s));
    ResidualBreakdown rb = mpec_residual(b, b.pack(x, y, u, sp));
    CHECK(ra.equality_inf_norm == doctest::Approx(rb.equality_inf_norm).epsilon(1e-14));
    CHECK(ra.inequality_violation_inf_norm == rb.inequality_violation_inf_norm);
    CHECK(ra.complementarity_inf_norm == rb.complementarity_inf_norm);
    CHECK(ra.dominance_violation == rb.dominance_violation);
  }
}

TEST_CASE("SVF with u := y reproduces KP rows") {
  BilevelProblem p = example21();
  MpecInstance svf = build_svf(p), kp = build_kp(p);
  REQUIRE(svf.equalities.size() == kp.equalities.size());
  for (std::size_t j = 0; j < kp.equalities.size(); ++j)
    CHECK(structurally_equal(substitute_block(svf.equalities[j], Block::u, Block::y),
                             kp.equalities[j]));
  // KP inequalities are the SVF rows other than the dominance row and one copy of g.
  std::vector<Expr> rows;
  for (std::size_t k = 0; k < svf.inequalities.size(); ++k)
    if (svf.roles[k] != RowRole::dominance && svf.roles[k] != RowRole::lower_at_u)
      rows.push_back(svf.inequalities[k]);
  REQUIRE(rows.size() == kp.inequalities.size());
  for (std::size_t k = 0; k < rows.size(); ++k)
    CHECK(structurally_equal(rows[k], kp.inequalities[k]));
  for (std::size_t i = 0; i < kp.comp_pairs.size(); ++i) {
    Expr su = svf.inequalities[svf.comp_pairs[i].row];
    CHECK(structurally_equal(substitute_block(su, Block::u, Block::y),
                             kp.inequalities[kp.comp_pairs[i].row]));
  }
}

TEST_CASE("JSON dump") {
  MpecInstance inst = build_svf(example21());
  auto j = nlohmann::json::parse(to_json(inst));
  CHECK(j["kind"] == "SVF");
  CHECK(j["n"] == 8);
  CHECK(j["blocks"]["u"]["offset"] == 3);
  CHECK(j["comp_pairs"].size() == 3);
  CHECK(j["inequalities"][0]["role"] == "dominance");
}
