#include <cmath>

#include "doctest.h"
#include "spmsens/distances.hpp"
#include "spmsens/nonlinear.hpp"

using namespace spm;

namespace {

KernelModel logistic_kernel_model() {
    KernelModel m;
    m.a = KernelNonlinearity::parse("0.5", "0", "0", "0");
    m.b = KernelNonlinearity::parse("1 + 0.2*y", "exp(-(x-y)^2)", "0.5", "0");
    m.c = KernelNonlinearity::parse("1 - y", "exp(-(x-y)^2)", "1", "0");
    return m;
}

NonlinearProblem logistic_problem() {
    NonlinearProblem p;
    p.model = logistic_kernel_model();
    p.mu0 = DiscreteMeasure{{0.5, 0.5}, {1.5, 0.5}};
    p.T = 1.0;
    return p;
}

// a = 0, b = 1, c = r - <1, mu>
NonlinearProblem mass_logistic(double r) {
    NonlinearProblem p;
    p.model.b = KernelNonlinearity::parse("1", "0", "0", "0");
    p.model.c = KernelNonlinearity::parse(std::to_string(r) + " - y", "1", "0", "0");
    p.mu0 = DiscreteMeasure{{0.2, 0.1}, {1.0, 0.2}};
    p.T = 1.0;
    return p;
}

}  // namespace

TEST_CASE("nonlinearity evaluation") {
    KernelNonlinearity k0 = KernelNonlinearity::parse("1 + x + y", "0", "x", "0");
    DiscreteMeasure mu{{1, 2}, {3, 1}};
    CHECK(eval_nonlinearity(k0, 0.5, 2.0, mu) == doctest::Approx(3.0 + 0.5 * 2.0));
    KernelNonlinearity mass = KernelNonlinearity::parse("y", "1", "0", "0");
    CHECK(eval_nonlinearity(mass, 0.0, 0.7, mu) == 3.0);
    KernelNonlinearity peak = KernelNonlinearity::parse("y", "exp(-(x-y)^2)", "0", "0");
    CHECK(eval_nonlinearity(peak, 0.0, 2.0, DiscreteMeasure::dirac(2.0)) == 1.0);
    // with a cutoff below the mass the value is damped
    CHECK(eval_nonlinearity(mass, 0.0, 0.7, mu, 2.0) == doctest::Approx(3.0 * std::exp(-1.0)));
    CHECK(eval_nonlinearity(mass, 0.0, 0.7, mu, 5.0) == 3.0);
}

TEST_CASE("cutoff threshold") {
    NonlinearProblem p = logistic_problem();
    // sup|a| = 0.5, sup|c| over |y| <= 10 is 11 + 0.5
    CHECK(default_cutoff_threshold(p) == doctest::Approx(1.0 * std::exp((0.5 + 11.5) * 2.0)));
}

TEST_CASE("frozen coefficients: tables agree with direct evaluation") {
    KernelModel m = logistic_kernel_model();
    DiscreteMeasure mu;
    for (int i = 0; i < 80; ++i) mu.atoms.push_back({0.05 * i, 0.01 + 0.001 * i});
    FrozenCoefficients direct(m, 0.2, mu, 0.9);
    FrozenCoefficients table(m, 0.2, mu, 0.9, 6.0);
    for (int i = 0; i <= 500; ++i) {
        double x = 7.0 * i / 500;  // includes points past the table range
        for (auto f : {&LinearCoefficients::a, &LinearCoefficients::b, &LinearCoefficients::c}) {
            CoefSample d = (direct.*f)(x), t = (table.*f)(x);
            CHECK(t.v == doctest::Approx(d.v).epsilon(1e-7).scale(1.0));
            CHECK(t.dx == doctest::Approx(d.dx).epsilon(1e-5).scale(1.0));
            CHECK(t.dh == doctest::Approx(d.dh).epsilon(1e-7).scale(1.0));
        }
    }
    // direct values against the definition
    for (double x : {0.0, 1.3, 4.0}) {
        CHECK(direct.c(x).v == doctest::Approx(0.9 * eval_nonlinearity(m.c, 0.2, x, mu)));
        CHECK(direct.b(x).dh == doctest::Approx(0.9 * 0.5));
    }
}

TEST_CASE("measure-independent kernels: every level is the linear solution") {
    NonlinearProblem p;
    p.model.a = KernelNonlinearity::parse("0.5", "0", "0", "0");
    p.model.b = KernelNonlinearity::parse("1 + 0.5*tanh(x)", "0", "0", "0");
    p.model.c = KernelNonlinearity::parse("-0.2", "0", "0", "0");
    p.mu0 = DiscreteMeasure{{0.5, 1.0}};
    const double dt = 1.0 / 256;
    DiscreteMeasure ref = solve_dyadic(p, 0, dt).trajectory.final();
    for (int k : {1, 3, 5}) CHECK(flat_distance(solve_dyadic(p, k, dt).trajectory.final(), ref).value <= 1e-6);
    CHECK(cross_level_distance(p, 2, 1.0, dt) <= 1e-6);
}

TEST_CASE("mass-driven transport") {
    NonlinearProblem p;
    p.model.b = KernelNonlinearity::parse("1 + y", "0", "0", "0");
    p.mu0 = DiscreteMeasure::dirac(0.0);
    p.T = 1.5;
    DyadicLevel l = solve_dyadic(p, 3);
    REQUIRE(l.mesh.size() == 9);
    REQUIRE(l.trajectory.final().size() == 1);
    CHECK(l.trajectory.final().atoms[0].position == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(l.trajectory.times.back() == 1.5);
}

TEST_CASE("logistic mass recursion at the mesh scale") {
    const double r = 2.0;
    NonlinearProblem p = mass_logistic(r);
    for (int k : {2, 4, 6}) {
        DyadicLevel l = solve_dyadic(p, k);
        const double H = 1.0 / (1 << k);
        double M = 0.3;
        for (int m = 0; m < (1 << k); ++m) {
            CHECK(total_mass(l.trajectory.at(m * H)) == doctest::Approx(M).epsilon(1e-10));
            M *= std::exp((r - M) * H);
        }
        CHECK(total_mass(l.trajectory.final()) == doctest::Approx(M).epsilon(1e-10));
    }
    // and the recursion tracks the ODE M' = (r - M) M
    auto exact = [&](double t) { return r * 0.3 * std::exp(r * t) / (r + 0.3 * (std::exp(r * t) - 1.0)); };
    CHECK(total_mass(solve_dyadic(p, 10).trajectory.final()) == doctest::Approx(exact(1.0)).epsilon(2e-3));
}

TEST_CASE("cross-level distance") {
    NonlinearProblem p = logistic_problem();
    CHECK(cross_level_distance(p, 2, 0.0) == 0.0);
    double d2 = cross_level_distance(p, 2, 1.0, 1.0 / 256), d3 = cross_level_distance(p, 3, 1.0, 1.0 / 256);
    CHECK(d2 > 0.0);
    CHECK(d3 < d2);
}

TEST_CASE("property: weights stay nonnegative and TV is bounded across levels") {
    NonlinearProblem p = logistic_problem();
    double prev = 0.0;
    for (int k = 1; k <= 5; ++k) {
        DyadicLevel l = solve_dyadic(p, k, 1.0 / 256);
        double mx = 0.0;
        for (const auto& m : l.trajectory.measures) {
            for (const Atom& a : m.atoms) CHECK(a.weight >= 0.0);
            mx = std::max(mx, tv_norm(m));
        }
        if (k >= 2) CHECK(mx <= prev * (1 + 1e-3));
        prev = mx;
    }
}

TEST_CASE("h-Lipschitz scan") {
    NonlinearProblem flat = logistic_problem();
    flat.model.b.pert = KernelPart();
    flat.model.c.pert = KernelPart();
    HLipschitzReport z = h_lipschitz_scan(flat, 2, 1.0, {0.1, -0.1, 0.05}, 1.0 / 64);
    for (const auto& r : z.rows) CHECK(r.ratio == 0.0);

    // b = 1 + h from the origin: distance min(t dh, 2), ratio t
    NonlinearProblem tr;
    tr.model.b = KernelNonlinearity::parse("1", "0", "1", "0");
    tr.mu0 = DiscreteMeasure::dirac(0.0);
    tr.T = 1.5;
    HLipschitzReport r = h_lipschitz_scan(tr, 2, 1.5, {0.25, 0.125, -0.0625}, 1.0 / 64);
    for (const auto& row : r.rows) CHECK(row.ratio == doctest::Approx(1.5).epsilon(1e-9));
    CHECK(r.refinement_stable);
    CHECK(r.finite);
    CHECK(r.csv().rfind("dh,distance,ratio\n", 0) == 0);
    CHECK_THROWS(h_lipschitz_scan(tr, 2, 1.5, {0.75}, 1.0 / 64));
}

TEST_CASE("argument and assumption checks") {
    NonlinearProblem p = logistic_problem();
    CHECK_THROWS(solve_dyadic(p, -1));
    CHECK_THROWS(solve_dyadic(p, 25));
    CHECK_THROWS(solve_dyadic(p, 2, 0.3));
    NonlinearProblem neg = p;
    neg.mu0 = DiscreteMeasure{{1, -1}};
    CHECK_THROWS(solve_dyadic(neg, 2));
    // b(0, mu) = 1 - mass turns negative once the mass passes 1
    NonlinearProblem bad;
    bad.model.b = KernelNonlinearity::parse("1 - y", "1", "0", "0");
    bad.model.c = KernelNonlinearity::parse("3", "0", "0", "0");
    bad.mu0 = DiscreteMeasure::dirac(0.5, 0.5);
    CHECK_THROWS_AS(solve_dyadic(bad, 3), FrozenModelError);
    CHECK(default_inner_dt(1.0, 3) == 1.0 / 1024);
    CHECK(default_inner_dt(2.0, 12) == 2.0 / 4096);
}
