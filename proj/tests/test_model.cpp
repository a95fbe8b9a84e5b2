#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "svf/problem.hpp"

using namespace svf;

namespace {

const char* kMinimal =
    "var x[1]; var y[1]; upper{ minimize x[1]^2 + y[1]^2; } lower{ minimize (y[1]-x[1])^2; }";

BilevelProblem example21() { return load_problem(SVF_CORPUS_DIR "/Example21.blp"); }

double eval_xy(const Expr& e, std::vector<double> x, std::vector<double> y) {
  return evaluate(e, Point{x, y, {}, {}});
}

// Random smooth expressions over x[1..2], y[1..2], built so evaluation never
// leaves the domain of the builtins.
struct ExprGen {
  std::mt19937_64 rng;
  explicit ExprGen(std::uint64_t seed) : rng(seed) {}

  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }

  Expr leaf() {
    switch (pick(3)) {
      case 0: return Expr::constant(std::uniform_real_distribution<double>(-2, 2)(rng));
      case 1: return Expr::variable(Block::x, pick(2));
      default: return Expr::variable(Block::y, pick(2));
    }
  }

  Expr gen(int depth) {
    if (depth == 0 || pick(4) == 0) return leaf();
    Expr a = gen(depth - 1);
    switch (pick(10)) {
      case 0: return a + gen(depth - 1);
      case 1: return a - gen(depth - 1);
      case 2: return a * gen(depth - 1);
      case 3: return a / (Expr::constant(1.5) + pow(gen(depth - 1), 2));
      case 4: return pow(a, 1 + pick(3));
      case 5: return sin(a);
      case 6: return cos(a);
      case 7: return exp(Expr::constant(0.3) * sin(a));
      case 8: return log(Expr::constant(1) + pow(a, 2));
      default: return sqrt(Expr::constant(0.5) + pow(a, 2));
    }
  }
};

}  // namespace

TEST_CASE("minimal model parses") {
  BilevelProblem p = parse_problem(kMinimal);
  CHECK(p.d == 1);
  CHECK(p.l == 1);
  CHECK(p.m() == 0);
  CHECK(p.p() == 0);
  CHECK(eval_xy(p.F, {2}, {3}) == 13.0);
}

TEST_CASE("example file dimensions and lower objective") {
  BilevelProblem p = example21();
  CHECK(p.d == 1);
  CHECK(p.l == 2);
  CHECK(p.m() == 3);
  CHECK(p.p() == 2);
  CHECK(p.meta.name == "Example21");
  CHECK_FALSE(p.meta.lower_convex);
  CHECK(eval_xy(p.f, {0}, {-2, 0}) == 6.640625);
  CHECK(eval_xy(p.f, {0}, {2.5, 1.5}) == 6.640625);
  CHECK(eval_xy(p.f, {0.3}, {1, 1}) == doctest::Approx(0.5 * (std::pow(1 - 0.3 + 0.625, 2) +
                                                             std::pow(1 - 3.375, 2))));
  REQUIRE(p.meta.F_star);
  CHECK(*p.meta.F_star == -6.0);
}

TEST_CASE("parse errors") {
  SUBCASE("dimension mismatch") {
    try {
      parse_problem("var x[1]; var y[2]; upper{ minimize y[3]; } lower{ minimize y[1]; }");
      FAIL("expected error");
    } catch (const ParseError& e) {
      CHECK(e.kind() == ParseError::Kind::dimension_mismatch);
      CHECK(e.line() == 1);
      CHECK(e.column() == 39);
    }
  }
  SUBCASE("undeclared variable") {
    try {
      parse_problem("var x[1]; var y[1];\nupper{ minimize z[1]; } lower{ minimize y[1]; }");
      FAIL("expected error");
    } catch (const ParseError& e) {
      CHECK(e.kind() == ParseError::Kind::undeclared_variable);
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("objective missing") {
    try {
      parse_problem("var x[1]; var y[1]; upper{ x[1] <= 0; } lower{ minimize y[1]; }");
      FAIL("expected error");
    } catch (const ParseError& e) {
      CHECK(e.kind() == ParseError::Kind::missing_objective);
    }
    CHECK_THROWS_AS(parse_problem("var x[1]; var y[1]; upper{ minimize x[1]; }"), ParseError);
  }
  SUBCASE("syntax") {
    try {
      parse_problem("var x[1]; var y[1];\n upper{ minimize x[1] +; } lower{ minimize y[1]; }");
      FAIL("expected error");
    } catch (const ParseError& e) {
      CHECK(e.kind() == ParseError::Kind::syntax);
      CHECK(e.line() == 2);
      CHECK(e.column() == 24);
    }
    CHECK_THROWS_AS(parse_problem("var x[1]; var y[1]; upper{ minimize x[1]^y[1]; } "
                                  "lower{ minimize y[1]; }"),
                    ParseError);
  }
}

TEST_CASE("constraints are normalized to e <= 0") {
  BilevelProblem p = parse_problem(
      "var x[1]; var y[1]; upper{ minimize x[1]; x[1] >= 2; } "
      "lower{ minimize y[1]; y[1] <= x[1] + 1; }");
  REQUIRE(p.p() == 1);
  REQUIRE(p.m() == 1);
  CHECK(eval_xy(p.G[0], {5}, {0}) == -3.0);
  CHECK(eval_xy(p.g[0], {1}, {4}) == 2.0);
}

TEST_CASE("constant subtrees are folded") {
  BilevelProblem p = parse_problem(
      "var x[1]; var y[1]; upper{ minimize 3.5; } lower{ minimize (2*3 - 1)^2 * y[1]; }");
  CHECK(p.F.is_constant(3.5));
  CHECK(eval_xy(p.F, {100}, {-7}) == 3.5);
  CHECK(to_string(p.f) == "(25 * y[1])");
}

TEST_CASE("evaluation domain errors name the node") {
  Expr e = log(Expr::variable(Block::y, 0));
  CHECK_THROWS_AS(eval_xy(e, {0}, {-1}), DomainError);
  try {
    eval_xy(Expr::constant(1) / Expr::variable(Block::x, 0), {0}, {0});
    FAIL("expected error");
  } catch (const DomainError& err) {
    CHECK(err.node().find("x[1]") != std::string::npos);
  }
  CHECK_THROWS_AS(eval_xy(sqrt(Expr::variable(Block::x, 0)), {-1}, {0}), DomainError);
}

TEST_CASE("gradient blocks of the example") {
  BilevelProblem p = example21();
  auto gf = gradient_block(p.f, Block::y, p.l);
  CHECK(eval_xy(gf[0], {0}, {2.5, 1.5}) == 25.0 / 8);
  CHECK(eval_xy(gf[1], {0}, {2.5, 1.5}) == -15.0 / 8);
  auto gg = gradient_block(p.g[0], Block::y, p.l);
  CHECK(eval_xy(gg[0], {0}, {-2, 0}) == 4.0);
  CHECK(eval_xy(gg[1], {0}, {-2, 0}) == 0.0);
  for (const Expr& e : gradient_block(Expr::constant(7), Block::x, 3)) CHECK(e.is_constant(0));
}

TEST_CASE("hessian blocks of the example") {
  BilevelProblem p = example21();
  auto h = hessian_block(p.f, Block::y, 2, Block::y, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(eval_xy(h[i][j], {0.7}, {0.1, -3}) == (i == j ? 1.0 : 0.0));
  auto hg = hessian_block(p.g[0], Block::y, 2, Block::y, 2);
  CHECK(hg[0][0].is_constant(-2));
  CHECK(hg[1][1].is_constant(2));
  CHECK(hg[0][1].is_constant(0));
  auto hl = hessian_block(p.g[2], Block::y, 2, Block::y, 2);
  for (auto& row : hl)
    for (auto& e : row) CHECK(e.is_constant(0));
  auto h21 = hessian_block(p.f, Block::y, 2, Block::x, 1);
  CHECK(eval_xy(h21[0][0], {0}, {0, 0}) == -1.0);
  CHECK(h21[1][0].is_constant(0));
}

TEST_CASE("round trip through the printer") {
  BilevelProblem p = example21();
  BilevelProblem q = parse_problem(to_source(p));
  CHECK(structurally_equal(p.F, q.F));
  CHECK(structurally_equal(p.f, q.f));
  REQUIRE(q.g.size() == p.g.size());
  for (std::size_t i = 0; i < p.g.size(); ++i) CHECK(structurally_equal(p.g[i], q.g[i]));
  REQUIRE(q.G.size() == p.G.size());
  for (std::size_t i = 0; i < p.G.size(); ++i) CHECK(structurally_equal(p.G[i], q.G[i]));
  CHECK(q.meta.y_ref == p.meta.y_ref);
  CHECK(*q.meta.f_star == *p.meta.f_star);
  CHECK(q.meta.y_box->lo == p.meta.y_box->lo);
}

TEST_CASE("random expressions: derivatives, folding, round trip") {
  ExprGen gen(2024);
  std::uniform_real_distribution<double> pt(-1.0, 1.0);
  double worst1 = 0.0, worst2 = 0.0;
  for (int model = 0; model < 1000; ++model) {
    Expr e = gen.gen(4);
    std::string src = "var x[2]; var y[2]; upper{ minimize " + to_string(e) +
                      "; } lower{ minimize y[1]; }";
    BilevelProblem p = parse_problem(src);
    REQUIRE(structurally_equal(p.F, fold(e)));
    REQUIRE(to_string(parse_problem("var x[2]; var y[2]; upper{ minimize " + to_string(p.F) +
                                    "; } lower{ minimize y[1]; }")
                          .F) == to_string(p.F));

    auto grad = gradient_block(e, Block::y, 2);
    auto hess = hessian_block(e, Block::y, 2, Block::x, 2);
    for (int k = 0; k < 10; ++k) {
      std::vector<double> x{pt(gen.rng), pt(gen.rng)}, y{pt(gen.rng), pt(gen.rng)};
      CHECK(eval_xy(fold(e), x, y) == eval_xy(e, x, y));
      const double h1 = 1e-6, h2 = 1e-4;
      for (int i = 0; i < 2; ++i) {
        auto yp = y, ym = y;
        yp[i] += h1;
        ym[i] -= h1;
        double fd = (eval_xy(e, x, yp) - eval_xy(e, x, ym)) / (2 * h1);
        double a = eval_xy(grad[i], x, y);
        worst1 = std::max(worst1, std::fabs(a - fd) / std::max(1.0, std::fabs(a)));
        for (int j = 0; j < 2; ++j) {
          auto xp = x, xm = x;
          xp[j] += h2;
          xm[j] -= h2;
          double fd2 = (eval_xy(grad[i], xp, y) - eval_xy(grad[i], xm, y)) / (2 * h2);
          double b = eval_xy(hess[i][j], x, y);
          worst2 = std::max(worst2, std::fabs(b - fd2) / std::max(1.0, std::fabs(b)));
        }
      }
    }
  }
  CHECK(worst1 <= 1e-6);
  CHECK(worst2 <= 1e-5);
}

TEST_CASE("same-block hessian is symmetric") {
  ExprGen gen(7);
  for (int model = 0; model < 200; ++model) {
    Expr e = gen.gen(4);
    auto h = hessian_block(e, Block::y, 2, Block::y, 2);
    std::vector<double> x{0.3, -0.2}, y{0.5, 0.1};
    double a = eval_xy(h[0][1], x, y), b = eval_xy(h[1][0], x, y);
    CHECK(std::fabs(a - b) <= 1e-12 * std::max(1.0, std::fabs(a)));
  }
}

TEST_CASE("compiled functions agree with tree evaluation") {
  BilevelProblem p = example21();
  BlockLayout lay = p.layout();
  CompiledFunction cf(p.f, lay);
  std::vector<double> w{0.2, -1.5, 0.4};
  CHECK(cf.value(w) == eval_xy(p.f, {0.2}, {-1.5, 0.4}));
  std::vector<double> g(3, 0.0);
  cf.add_gradient(w, 1.0, g);
  auto gy = gradient_block(p.f, Block::y, 2);
  auto gx = gradient_block(p.f, Block::x, 1);
  CHECK(g[0] == eval_xy(gx[0], {0.2}, {-1.5, 0.4}));
  CHECK(g[1] == eval_xy(gy[0], {0.2}, {-1.5, 0.4}));
  CHECK(g[2] == eval_xy(gy[1], {0.2}, {-1.5, 0.4}));
}
