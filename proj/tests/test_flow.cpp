#include <cmath>
#include <random>

#include "doctest.h"
#include "spmsens/flow.hpp"

using namespace spm;

TEST_CASE("closed-form flows") {
    FlowResult r = integrate_flow(ModelTriple::parse("0", "1+h", "0"), 0.2, 0.0, 3.0);
    CHECK(r.X == doctest::Approx(3.6).epsilon(1e-13));
    CHECK(r.dX_dx == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(r.dX_dh == doctest::Approx(3.0).epsilon(1e-13));

    // X' = X from 1: X = e^s, X_x = e^s
    r = integrate_flow(ModelTriple::parse("0", "x", "0"), 0.3, 1.0, 1.0);
    CHECK(r.X == doctest::Approx(std::exp(1.0)).epsilon(1e-8));
    CHECK(r.dX_dx == doctest::Approx(std::exp(1.0)).epsilon(1e-8));
    CHECK(r.dX_dh == 0.0);

    r = integrate_flow(ModelTriple::parse("0", "tanh(x)+2+h", "0"), 0.1, 0.7, 0.0);
    CHECK(r.X == 0.7);
    CHECK(r.dX_dx == 1.0);
    CHECK(r.dX_dh == 0.0);
    CHECK(default_flow_steps(0.1) == 16);
    CHECK(default_flow_steps(2.0) == 128);
}

TEST_CASE("backward characteristic clamps at the boundary") {
    ModelCoefficients k(ModelTriple::parse("0", "2", "0"), 0.0);
    BackwardResult b = integrate_backward(k, 3.0, 1.0);
    CHECK_FALSE(b.hit_boundary);
    CHECK(b.X == doctest::Approx(1.0));
    b = integrate_backward(k, 1.0, 1.0);
    CHECK(b.hit_boundary);
    CHECK(b.X == 0.0);
    CHECK(b.crossing_time == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("property: semigroup, variational equations, order") {
    ModelTriple m = ModelTriple::parse("0", "tanh(x) + 2 + h*(1 + 0.5*sin(x))", "0");
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ux(0.0, 5.0), us(0.05, 1.5), uh(-0.4, 0.4);
    for (int i = 0; i < 100; ++i) {
        const double x = ux(rng), s = us(rng), t = us(rng), h = uh(rng);
        const int per_unit = 256;
        auto steps = [&](double d) { return std::max(1, static_cast<int>(std::ceil(d * per_unit))); };
        double direct = integrate_flow(m, h, x, s + t, steps(s + t)).X;
        double two = integrate_flow(m, h, integrate_flow(m, h, x, s, steps(s)).X, t, steps(t)).X;
        CHECK(two == doctest::Approx(direct).epsilon(1e-8));

        FlowResult r = integrate_flow(m, h, x, s);
        const double e = 1e-5;
        double fd_x = (integrate_flow(m, h, x + e, s).X - integrate_flow(m, h, x - e, s).X) / (2 * e);
        double fd_h = (integrate_flow(m, h + e, x, s).X - integrate_flow(m, h - e, x, s).X) / (2 * e);
        CHECK(r.dX_dx == doctest::Approx(fd_x).epsilon(1e-5));
        CHECK(r.dX_dh == doctest::Approx(fd_h).epsilon(1e-5));

        double y = x + 0.1 * ux(rng) + 1e-3;
        CHECK(integrate_flow(m, h, y, s).X > r.X);
    }
}

TEST_CASE("flow path samples agree with single integrations") {
    ModelCoefficients k(ModelTriple::parse("0", "1 + 0.5*sin(x) + h", "0"), 0.2);
    FlowPath p = flow_path(k, 0.4, 1.0, 8, 16);
    REQUIRE(p.X.size() == 9);
    CHECK(p.X[0] == 0.4);
    for (int j = 1; j <= 8; ++j) {
        FlowResult r = integrate_flow(k, 0.4, j / 8.0, 16 * j);
        CHECK(p.X[j] == doctest::Approx(r.X).epsilon(1e-12));
        CHECK(p.X_h[j] == doctest::Approx(r.dX_dh).epsilon(1e-12));
    }
}

TEST_CASE("regularity report") {
    auto find = [](const RegularityReport& r, const std::string& n) {
        for (const auto& b : r.bounds)
            if (b.name == n) return b;
        FAIL("missing bound " << n);
        return RegularityBound{};
    };
    RegularityReport tr = check_flow_regularity(ModelTriple::parse("0", "1+h", "0"), 1.0, 32);
    CHECK(tr.passed());
    CHECK(find(tr, "holder_h_of_dXdh").max_ratio.back() == doctest::Approx(0.0).scale(1e-9));

    RegularityReport unit = check_flow_regularity(ModelTriple::parse("0", "1", "0"), 1.0, 32);
    CHECK(find(unit, "lipschitz_y").max_ratio.back() == doctest::Approx(1.0).epsilon(1e-10));

    RegularityReport th = check_flow_regularity(ModelTriple::parse("0", "tanh(x)+2+h", "0"), 1.0, 32, 0.75, 9);
    CHECK(th.passed());
    CHECK(th.bounds.size() == 6);
    for (const auto& b : th.bounds) {
        CHECK(b.samples == std::vector<int>{32, 64, 128});
        for (double v : b.max_ratio) CHECK(std::isfinite(v));
    }
    CHECK(th.csv() == check_flow_regularity(ModelTriple::parse("0", "tanh(x)+2+h", "0"), 1.0, 32, 0.75, 9).csv());
}
