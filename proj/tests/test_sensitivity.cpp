#include <cmath>

#include "doctest.h"
#include "spmsens/sensitivity.hpp"

using namespace spm;

namespace {

LinearProblem transport(double T = 2.0) {
    return LinearProblem{ModelTriple::parse("0", "1+h", "0"), 0.0, DiscreteMeasure::dirac(0.0), T};
}

LinearProblem smooth() {
    return LinearProblem{ModelTriple::parse("0.5 + 0.2*h", "1 + h + 0.1*h^2", "-0.3 + 0.2*h*x/(1 + x)"), 0.0,
                         DiscreteMeasure{{0.3, 1.0}, {1.2, 0.5}}, 1.0};
}

std::vector<double> pm_steps(int from, int to) {
    std::vector<double> d;
    for (int e = from; e <= to; ++e) {
        d.push_back(std::ldexp(1.0, -e));
        d.push_back(-std::ldexp(1.0, -e));
    }
    return d;
}

}  // namespace

TEST_CASE("backend labels") {
    CHECK(Backend::parse("linear-dual").kind == Backend::Kind::LinearDual);
    CHECK(Backend::parse("linear-particles").kind == Backend::Kind::LinearParticles);
    Backend d = Backend::parse("dyadic(5)");
    CHECK(d.kind == Backend::Kind::Dyadic);
    CHECK(d.k == 5);
    CHECK(d.label() == "dyadic(5)");
    for (const char* bad : {"dyadic", "dyadic(x)", "dyadic(-1)", "dual", ""}) CHECK_THROWS(Backend::parse(bad));
    CHECK_THROWS(measure_solver(transport(), 1.0, d));
    CHECK_THROWS(measure_solver(transport(), 1.0, Backend{})(0.75));
}

TEST_CASE("quotients") {
    LinearProblem flat{ModelTriple::parse("1", "1", "0"), 0.0, DiscreteMeasure::dirac(0.5), 1.0};
    QuotientSet z = quotient_measures(measure_solver(flat, 1.0, Backend{}), 0.0, {0.25, -0.125});
    for (const auto& q : z.q) CHECK(canonicalize(q).empty());

    QuotientSet t = quotient_measures(measure_solver(transport(), 2.0, Backend{}), 0.1, {0.25, -0.125}, 2.0, "dual");
    REQUIRE(t.q.size() == 2);
    CHECK(t.dh[0] == 0.25);
    DiscreteMeasure q = canonicalize(t.q[0]);
    REQUIRE(q.size() == 2);
    CHECK(q.atoms[0].position == doctest::Approx(2.2));
    CHECK(q.atoms[0].weight == doctest::Approx(-4.0));
    CHECK(q.atoms[1].position == doctest::Approx(2.7));
    CHECK(q.atoms[1].weight == doctest::Approx(4.0));
    QuotientPair p = t.pair(0, 1);
    CHECK(p.dh1 == 0.25);
    CHECK(p.dh2 == -0.125);
    CHECK(p.backend == "dual");
    // before canonicalization the quotient is the plain atom list
    CHECK(quotient(DiscreteMeasure::dirac(1.0), DiscreteMeasure::dirac(1.0), 0.5).size() == 2);
}

TEST_CASE("Cauchy diagnostic on the transport example") {
    QuotientSet set = quotient_measures(measure_solver(transport(), 2.0, Backend{}), 0.0, pm_steps(4, 8), 2.0);
    CauchyDiagnostic flat = cauchy_diagnostic(set, NormBudget::flat());
    REQUIRE(flat.trend.size() == 5);
    for (double v : flat.trend) CHECK(v == doctest::Approx(4.0));
    CHECK(flat.divergent);
    CHECK(flat.witness.value >= 2 * 2.0 - 0.05);
    CHECK(witness_violation(flat.witness.witness, NormBudget::flat()) <= 1e-9);

    CauchyDiagnostic z = cauchy_diagnostic(set, NormBudget::calpha(0.75));
    CHECK_FALSE(z.divergent);
    CHECK(z.monotone);
    CHECK(z.trend.back() <= 0.1);
    CHECK(z.csv().rfind("dh1,dh2,distance\n", 0) == 0);

    // identical quotients
    QuotientSet same = set;
    same.q[1] = same.q[0];
    CHECK(distance(same.q[0], same.q[1], NormBudget::calpha(0.75)).value == 0.0);
}

TEST_CASE("property: antisymmetric quotients converge on a smooth model") {
    HSolver s = measure_solver(smooth(), 1.0, Backend{});
    QuotientSet set = quotient_measures(s, 0.0, pm_steps(3, 6));
    std::vector<double> d;
    for (std::size_t i = 0; i + 1 < set.q.size(); i += 2)
        d.push_back(distance(set.q[i], set.q[i + 1], NormBudget::calpha(0.9)).value);
    for (std::size_t i = 1; i < d.size(); ++i) {
        CAPTURE(i);
        CHECK(d[i - 1] / d[i] >= 2.0 * 0.75);
        CHECK(d[i - 1] / d[i] <= 2.0 * 1.25);
    }
}

TEST_CASE("property: dual and particle backends give the same quotients") {
    for (const LinearProblem& p : {transport(1.0), smooth()}) {
        QuotientSet a = quotient_measures(measure_solver(p, 1.0, Backend::parse("linear-dual")), 0.0, {0.0625, -0.0625});
        QuotientSet b =
            quotient_measures(measure_solver(p, 1.0, Backend::parse("linear-particles")), 0.0, {0.0625, -0.0625});
        for (std::size_t i = 0; i < a.q.size(); ++i)
            CHECK(distance(a.q[i], b.q[i], NormBudget::calpha(0.75)).value <= 2e-3);
    }
}

TEST_CASE("derivative estimates") {
    for (double t : {0.5, 1.0, 2.0}) {
        DerivativeEstimate e = derivative_estimate(measure_solver(transport(), t, Backend{}), 0.0, 1.0 / 64,
                                                   NormBudget::calpha(0.75));
        REQUIRE(e.table.size() == standard_test_bank().size());
        CHECK(e.table[1].first == "x");
        CHECK(e.table[1].second == doctest::Approx(t).epsilon(1e-3));
        CHECK(e.table[0].second == doctest::Approx(0.0).scale(1e-9));
    }
    LinearProblem flat{ModelTriple::parse("1", "1", "0"), 0.0, DiscreteMeasure::dirac(0.5), 1.0};
    DerivativeEstimate z = derivative_estimate(measure_solver(flat, 1.0, Backend{}), 0.0, 0.125, NormBudget::flat());
    CHECK(z.representation.empty());
    CHECK(z.error_bar == 0.0);
    for (const auto& [name, v] : z.table) CHECK(v == 0.0);

    // the error bar covers the gap between the table and a finer estimate
    DerivativeEstimate c = derivative_estimate(measure_solver(smooth(), 1.0, Backend{}), 0.0, 0.125,
                                               NormBudget::calpha(0.75));
    DerivativeEstimate f = derivative_estimate(measure_solver(smooth(), 1.0, Backend{}), 0.0, 1.0 / 64,
                                               NormBudget::calpha(0.75));
    for (std::size_t i = 0; i < c.table.size(); ++i)
        CHECK(std::abs(c.table[i].second - f.table[i].second) <= 2.0 * c.error_bar + 1e-9);
}

TEST_CASE("test bank") {
    auto bank = standard_test_bank();
    CHECK(bank.size() == 11);
    for (const auto& b : bank)
        for (double x : {0.1, 0.7, 1.3, 2.2, 2.9}) {
            double e = 1e-6;
            CAPTURE(b.name);
            CHECK(b.df(x) == doctest::Approx((b.f(x + e) - b.f(x - e)) / (2 * e)).epsilon(1e-6).scale(1.0));
        }
}

TEST_CASE("Hölder scan") {
    LinearProblem renewal{ModelTriple::parse("1", "1", "0"), 0.0, DiscreteMeasure::dirac(0.5), 1.0};
    HolderScan c = holder_scan(measure_solver(renewal, 1.0, Backend{}), {0.0, 0.0625, 0.125, 0.25}, 1.0 / 256,
                               NormBudget::calpha(0.75));
    CHECK(c.constant_derivative);
    CHECK_FALSE(c.fit.valid);

    LinearProblem q{ModelTriple::parse("0", "1 + h + 0.1*h^2", "0"), 0.0, DiscreteMeasure::dirac(0.0), 1.0};
    HolderScan s = holder_scan(measure_solver(q, 1.0, Backend{}), {0.0, 1.0 / 32, 1.0 / 16, 0.125, 0.25}, 1.0 / 256,
                               NormBudget::calpha(0.75));
    CHECK_FALSE(s.constant_derivative);
    CHECK(s.fit.valid);
    CHECK(s.fit.slope >= 0.75 - 0.15);
    CHECK(s.rows.size() == 10);
    CHECK(s.csv().rfind("h1,h2,distance\n", 0) == 0);

    HolderScan dup = holder_scan(measure_solver(q, 1.0, Backend{}), {0.0, 0.0, 0.125, 0.25}, 1.0 / 256,
                                 NormBudget::calpha(0.75));
    CHECK(dup.rows[0].distance == 0.0);
    CHECK_THROWS(holder_scan(measure_solver(q, 1.0, Backend{}), {0.0, 0.1, 0.2}, 0.01, NormBudget::flat()));
}

TEST_CASE("log-log fits") {
    std::vector<double> x{-3, -4, -5, -6}, v;
    for (double e : x) v.push_back(3.0 * std::exp2(0.7 * e));
    RateFit f = fit_log2(x, v);
    CHECK(f.valid);
    CHECK(f.slope == doctest::Approx(0.7));
    CHECK(f.rate() == doctest::Approx(-0.7));
    CHECK(f.intercept == doctest::Approx(std::log2(3.0)));
    CHECK(f.residual < 1e-12);
    v[1] = 0.0;
    RateFit g = fit_log2(x, v);
    CHECK(g.skipped == 1);
    CHECK(g.slope == doctest::Approx(0.7));
    CHECK_FALSE(fit_log2({1.0}, {2.0}).valid);
}

TEST_CASE("Δ study on problems without measure feedback") {
    NonlinearProblem p;
    p.model.a = KernelNonlinearity::parse("0.5", "0", "0", "0");
    p.model.b = KernelNonlinearity::parse("1", "0", "1", "0");
    p.mu0 = DiscreteMeasure{{0.5, 1.0}};
    DeltaKtStudy s = delta_kt_study(p, 1.0, {1, 2, 3}, {0.125, -0.125}, 0.75, 129, 1.0 / 64);
    REQUIRE(s.delta_hat.size() == 3);
    for (double d : s.delta_hat) CHECK(d <= 1e-6);
    CHECK(s.target_rate == doctest::Approx(0.5));
    CHECK(s.delta_csv().rfind("k,delta_hat\n", 0) == 0);
    CHECK(s.csv().rfind("k,dh,metric,value\n", 0) == 0);

    DeltaKtStudy zero = delta_kt_study(p, 0.0, {1, 2}, {0.125}, 0.75, 129, 1.0 / 64);
    for (double d : zero.delta_hat) CHECK(d == 0.0);
    CHECK(default_dh_list().size() == 12);
}

TEST_CASE("Taylor remainder bound") {
    std::vector<double> hg, dl;
    for (int i = -8; i <= 8; ++i) hg.push_back(i / 16.0);
    for (int e = 1; e <= 8; ++e) {
        dl.push_back(std::ldexp(1.0, -e));
        dl.push_back(-std::ldexp(1.0, -e));
    }
    TaylorGap q = taylor_gap_check([](double h) { return h * h; }, 2.0, 1.0, hg, dl);
    CHECK(q.samples > 0);
    CHECK(q.worst_ratio <= 1.0 + 1e-12);
    CHECK(taylor_gap_check([](double h) { return 3 * h - 1; }, 1.0, 0.5, hg, dl).worst_lhs <= 1e-12);
    TaylorGap same = taylor_gap_check([](double h) { return std::sin(h); }, 1.0, 1.0, {0.2}, {0.1});
    CHECK(same.worst_lhs == 0.0);
    for (double a : {0.3, 0.5, 0.9}) {
        // |h|^(1+a) has derivative (1+a) sign(h)|h|^a, Hölder constant (1+a) 2^(1-a)
        auto f = [a](double h) { return std::pow(std::abs(h), 1 + a); };
        CHECK(taylor_gap_check(f, (1 + a) * std::pow(2.0, 1 - a), a, hg, dl).worst_ratio <= 1.0 + 1e-12);
    }
}
