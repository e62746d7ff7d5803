#include <cmath>
#include <random>

#include "doctest.h"
#include "spmsens/expr.hpp"

using namespace spm;

namespace {

Expr random_expr(std::mt19937_64& rng, int depth) {
    std::uniform_int_distribution<int> pick(0, 9);
    std::uniform_int_distribution<int> var(0, 2);
    std::uniform_real_distribution<double> num(0.25, 3.0);
    if (depth == 0) {
        if (pick(rng) < 4) return constant(std::round(num(rng) * 4.0) / 4.0);
        return variable(static_cast<Var>(var(rng)));
    }
    Expr l = random_expr(rng, depth - 1);
    switch (pick(rng)) {
        case 0: return l + random_expr(rng, depth - 1);
        case 1: return l - random_expr(rng, depth - 1);
        case 2: return l * random_expr(rng, depth - 1);
        case 3: return l / (constant(2.0) + apply(Op::Exp, random_expr(rng, depth - 1)));
        case 4: return pow(l, 2.0);
        case 5: return apply(Op::Sin, l);
        case 6: return apply(Op::Cos, l);
        case 7: return apply(Op::Tanh, l);
        case 8: return apply(Op::Sqrt, constant(1.0) + l * l);
        default: return apply(Op::Exp, constant(0.25) * apply(Op::Sin, l));
    }
}

}  // namespace

TEST_CASE("parse and evaluate literals") {
    CHECK(parse_expr("1 + h").eval({0, 0, 0.25}) == doctest::Approx(1.25));
    CHECK(parse_expr("exp(-x^2)").eval({0, 0, 0}) == 1.0);
    CHECK(parse_expr("2^3").eval({}) == 8.0);
    CHECK(parse_expr("-x").eval({3, 0, 0}) == -3.0);
    CHECK(parse_expr("2*x - y/4").eval({1.5, 2, 0}) == doctest::Approx(2.5));
    CHECK_THROWS_AS(parse_expr("x^2^1"), ParseError);  // exponents are plain numbers
}

TEST_CASE("parse errors carry an offset") {
    for (const char* bad : {"", "1 +", "(x", "foo(x)", "z", "x ^ y", "1 2", "exp x"}) {
        CAPTURE(bad);
        CHECK_THROWS_AS(parse_expr(bad), ParseError);
    }
    try {
        parse_expr("x + * 2");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 4);
    }
}

TEST_CASE("symbolic derivatives on known cases") {
    CHECK(differentiate(parse_expr("x*y"), Var::Y) == parse_expr("x"));
    CHECK(differentiate(parse_expr("x^2"), Var::X).eval({3, 0, 0}) == doctest::Approx(6.0));
    Expr affine = parse_expr("exp(-x) + h*(1 + x^2)");
    Expr dh = differentiate(affine, Var::H);
    CHECK(dh == parse_expr("1 + x^2"));
    CHECK_FALSE(dh.depends_on(Var::H));
    // centred difference at x = 1 with step 1e-6: -0.36787944...
    CHECK(differentiate(parse_expr("exp(-x)"), Var::X).eval({1, 0, 0}) == doctest::Approx(-0.367879441171).epsilon(1e-10));
    CHECK(differentiate(parse_expr("3 + 2*h"), Var::X).is_const(0.0));
}

TEST_CASE("constructors fold constants") {
    Expr x = variable(Var::X), y = variable(Var::Y);
    Expr e = constant(0.0) * x + constant(1.0) * y;
    CHECK(e == y);
    CHECK_FALSE(e.depends_on(Var::X));
    CHECK((apply(Op::Exp, constant(0.0)) + constant(2.0) * constant(3.0)).is_const(7.0));
    CHECK((x - x).op() == Op::Sub);  // no simplification beyond constants
    // the parser keeps the tree as written
    CHECK(parse_expr("0*x").op() == Op::Mul);
}

TEST_CASE("compiled evaluation matches tree evaluation") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 200; ++i) {
        Expr e = random_expr(rng, 4);
        CompiledExpr c(e);
        Point p{u(rng), u(rng), u(rng)};
        double a = e.eval(p), b = c(p);
        if (std::isfinite(a)) CHECK(b == doctest::Approx(a).epsilon(1e-14));
    }
}

TEST_CASE("property: symbolic derivative matches centred differences") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> ux(0.0, 3.0), uh(-0.5, 0.5);
    int checked = 0;
    for (int i = 0; i < 60; ++i) {
        Expr e = random_expr(rng, 3);
        std::vector<Point> pts;
        for (int j = 0; j < 100; ++j) pts.push_back({ux(rng), ux(rng), uh(rng)});
        for (Var v : {Var::X, Var::Y, Var::H}) {
            auto issues = check_derivative(e, v, pts, 1e-5, 1e-5);
            CAPTURE(to_string(e));
            CHECK(issues.empty());
            ++checked;
        }
    }
    CHECK(checked == 180);
}

TEST_CASE("property: parse of printed form is the same tree") {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 300; ++i) {
        Expr e = random_expr(rng, 4);
        std::string s = to_string(e);
        CAPTURE(s);
        CHECK(parse_expr(s) == e);
    }
    for (const char* src : {"1 + h", "-(x - y)", "x / (y * h)", "(x - 1)^2", "-x^2", "sqrt(x) - log(1 + y)",
                            "2 - (3 - x)", "x / y / h", "exp(-(x - y)^2)"}) {
        Expr e = parse_expr(src);
        CAPTURE(src);
        CHECK(parse_expr(to_string(e)) == e);
    }
}
