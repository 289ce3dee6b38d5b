#include <cmath>
#include <random>
#include <vector>

#include "ast_gen.hpp"
#include "doctest.h"
#include "hybstab/expr.hpp"

using namespace hybstab;

namespace {

const char* kQuintic = "-15/8*v + 5/4*v^3 - 3/8*v^5";

double eval1(const Expression& e, const std::string& var, double v) {
  return e.evaluate({{var, v}});
}

}  // namespace

TEST_CASE("parse basic forms") {
  CHECK(parse_expression("v").node().kind == ExprKind::Variable);
  CHECK(parse_expression("v").node().name == "v");

  const Expression q = parse_expression(kQuintic);
  CHECK(q.free_variables() == std::set<std::string>{"v"});
  CHECK(eval1(q, "v", 1.0) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(eval1(q, "v", -1.0) == doctest::Approx(1.0).epsilon(1e-15));

  const Expression theta = parse_expression("9.8*cos(pi/2 + atan(-x))");
  // cos(pi/2 + atan(-x)) = x / sqrt(1 + x^2); at x = 1 this is 1/sqrt(2)
  CHECK(eval1(theta, "x", 1.0) == doctest::Approx(9.8 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("parse precedence and associativity") {
  // ^ over * over +, left associativity, unary minus below ^
  CHECK(parse_expression("2+3*4").evaluate({}) == 14.0);
  CHECK(parse_expression("2*3^2").evaluate({}) == 18.0);
  CHECK(parse_expression("8-3-2").evaluate({}) == 3.0);
  CHECK(parse_expression("8/4/2").evaluate({}) == 1.0);
  CHECK(parse_expression("-2^2").evaluate({}) == -4.0);
  CHECK(parse_expression("2*-3").evaluate({}) == -6.0);
  CHECK(parse_expression("1e-3").evaluate({}) == 1e-3);
  CHECK(parse_expression(" ( x ) ").node().kind == ExprKind::Variable);
}

TEST_CASE("parse errors carry offsets") {
  CHECK_THROWS_AS(parse_expression("1 + "), ParseError);
  CHECK_THROWS_AS(parse_expression("foo(2)"), ParseError);
  CHECK_THROWS_AS(parse_expression("sin"), ParseError);
  CHECK_THROWS_AS(parse_expression("sin(x, y)"), ParseError);
  CHECK_THROWS_AS(parse_expression("x ^ y"), ParseError);
  CHECK_THROWS_AS(parse_expression("x ^ (2)"), ParseError);
  CHECK_THROWS_AS(parse_expression("2 2"), ParseError);
  try {
    parse_expression("1 + @");
  } catch (const ParseError& err) {
    CHECK(err.offset() == 4);
  }
}

TEST_CASE("evaluate edge cases") {
  CHECK(parse_expression("x*y").evaluate({{"x", 0.0}, {"y", 7.0}}) == 0.0);
  CHECK_THROWS_AS(parse_expression("x").evaluate({}), EvalError);
  CHECK_THROWS_AS(parse_expression("ln(x)").evaluate({{"x", 0.0}}), DomainError);
  CHECK_THROWS_AS(parse_expression("ln(x)").evaluate({{"x", -2.0}}), DomainError);
  CHECK_THROWS_AS(parse_expression("sqrt(x)").evaluate({{"x", -1.0}}), DomainError);
  CHECK_THROWS_AS(parse_expression("1/x").evaluate({{"x", 0.0}}), DomainError);
  CHECK_THROWS_AS(parse_expression("x^0.5").evaluate({{"x", -1.0}}), DomainError);
}

TEST_CASE("differentiate: quintic wall map") {
  const Expression q = parse_expression(kQuintic);
  const Expression d1 = q.differentiate("v");
  CHECK(eval1(d1, "v", 1.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(eval1(d1, "v", -1.0) == doctest::Approx(0.0).epsilon(1e-15));
  const Expression d2 = d1.differentiate("v");
  CHECK(eval1(d2, "v", 1.0) == doctest::Approx(0.0).epsilon(1e-15));
  const Expression d3 = d2.differentiate("v");
  // phi'''(v) = 15/2 - 45/2 v^2
  CHECK(eval1(d3, "v", 1.0) == doctest::Approx(-15.0).epsilon(1e-14));

  CHECK(parse_expression("x").differentiate("x").evaluate({}) == 1.0);
}

TEST_CASE("differentiate abs away from zero") {
  const Expression d = parse_expression("abs(x)").differentiate("x");
  CHECK(eval1(d, "x", 2.5) == 1.0);
  CHECK(eval1(d, "x", -2.5) == -1.0);
  CHECK_THROWS_AS(eval1(d, "x", 0.0), DomainError);
}

TEST_CASE("differentiate node budget") {
  Expression e = parse_expression("sin(x*x + exp(x))");
  CHECK_THROWS_AS(
      [&] {
        for (int i = 0; i < 12; ++i) e = e.differentiate("x", 2000);
        return e;
      }(),
      ResourceError);
}

TEST_CASE("taylor coefficients") {
  const Expression q = parse_expression(kQuintic);
  const auto c = taylor_coefficients(q, "v", 1.0, 5);
  REQUIRE(c.size() == 6);
  CHECK(c[0] == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(c[1] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(c[2] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(c[3] == doctest::Approx(-2.5).epsilon(1e-13));
  CHECK(c[4] == doctest::Approx(-1.875).epsilon(1e-13));
  CHECK(c[5] == doctest::Approx(-0.375).epsilon(1e-13));

  const auto ident = taylor_coefficients(parse_expression("t"), "t", 0.0, 3);
  CHECK(ident[0] == 0.0);
  CHECK(ident[1] == 1.0);
  CHECK(ident[2] == 0.0);

  const auto ex = taylor_coefficients(parse_expression("exp(x)"), "x", 0.0, 3);
  CHECK(ex[0] == doctest::Approx(1.0));
  CHECK(ex[1] == doctest::Approx(1.0));
  CHECK(ex[2] == doctest::Approx(0.5));
  CHECK(ex[3] == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("taylor of a polynomial is exact") {
  std::mt19937 rng(20240817);
  std::uniform_real_distribution<double> coeff(-3.0, 3.0);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<double> cs(6);
    for (auto& c : cs) c = coeff(rng);
    // build sum c_k x^k explicitly
    Expression e = Expression::constant(0.0);
    for (int k = 0; k < 6; ++k) {
      Expression term = Expression::mul(Expression::constant(std::fabs(cs[k])),
                                        Expression::pow(Expression::variable("x"), k));
      if (cs[k] < 0) term = Expression::neg(term);
      e = Expression::add(e, term);
    }
    const auto got = taylor_coefficients(e, "x", 0.0, 8);
    for (int k = 0; k <= 8; ++k) {
      const double want = k < 6 ? cs[k] : 0.0;
      CHECK(std::fabs(got[k] - want) <= 1e-12);
    }
  }
}

TEST_CASE("print/parse round-trip on 500 random ASTs") {
  std::mt19937 rng(987654321);
  for (int i = 0; i < 500; ++i) {
    const Expression e = random_ast(rng, 5);
    const std::string text = e.str();
    Expression back = parse_expression(text);
    INFO("text: " << text);
    CHECK(back.structurally_equal(e));
  }
}

TEST_CASE("symbolic derivative matches central finite differences") {
  std::mt19937 rng(13371337);
  std::uniform_real_distribution<double> point(0.2, 2.0);
  int done = 0;
  int generated = 0;
  while (done < 100 && generated < 4000) {
    ++generated;
    const Expression e = random_ast(rng, 4);
    Expression de;
    try {
      de = e.differentiate("x");
    } catch (const Error&) {
      continue;
    }
    bool used = false;
    for (int attempt = 0; attempt < 20 && !used; ++attempt) {
      const double x = point(rng), y = point(rng);
      const double h = 1e-5;
      try {
        const double fp = e.evaluate({{"x", x + h}, {"y", y}});
        const double fm = e.evaluate({{"x", x - h}, {"y", y}});
        const double f0 = e.evaluate({{"x", x}, {"y", y}});
        const double sym = de.evaluate({{"x", x}, {"y", y}});
        if (!std::isfinite(fp) || !std::isfinite(fm) || !std::isfinite(sym)) continue;
        if (std::fabs(f0) > 1e5 || std::fabs(sym) > 1e5) continue;
        const double fd = (fp - fm) / (2 * h);
        CHECK(std::fabs(sym - fd) <= 1e-5 * (1.0 + std::fabs(sym)));
        used = true;
      } catch (const Error&) {
        continue;
      }
    }
    if (used) ++done;
  }
  CHECK(done == 100);
}

TEST_CASE("differentiation is linear") {
  std::mt19937 rng(777);
  std::uniform_real_distribution<double> point(0.3, 1.7);
  std::uniform_real_distribution<double> scale(-2.0, 2.0);
  int done = 0;
  while (done < 40) {
    const Expression e1 = random_ast(rng, 3);
    const Expression e2 = random_ast(rng, 3);
    const double a = scale(rng);
    const Expression combo =
        Expression::add(Expression::mul(Expression::constant(std::fabs(a)), e1), e2);
    const Expression lhs =
        (a < 0 ? Expression::sub(e2, Expression::mul(Expression::constant(-a), e1)) : combo)
            .differentiate("x");
    try {
      const double x = point(rng), y = point(rng);
      const std::map<std::string, double> at{{"x", x}, {"y", y}};
      const double want = a * e1.differentiate("x").evaluate(at) + e2.differentiate("x").evaluate(at);
      const double got = lhs.evaluate(at);
      if (!std::isfinite(want) || std::fabs(want) > 1e8) continue;
      CHECK(std::fabs(got - want) <= 1e-12 * (1.0 + std::fabs(want)));
      ++done;
    } catch (const Error&) {
      continue;
    }
  }
}

TEST_CASE("compiled expressions agree with tree evaluation") {
  std::mt19937 rng(555);
  std::uniform_real_distribution<double> point(0.2, 1.8);
  int done = 0;
  while (done < 60) {
    const Expression e = random_ast(rng, 4);
    const CompiledExpr ce(e, {"x", "y"});
    try {
      const double x = point(rng), y = point(rng);
      const double a = e.evaluate({{"x", x}, {"y", y}});
      const double b = ce.eval(x, y);
      CHECK(a == b);
      ++done;
    } catch (const Error&) {
      continue;
    }
  }
}
