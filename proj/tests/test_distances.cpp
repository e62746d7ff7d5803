#include <cmath>
#include <random>

#include "doctest.h"
#include "spmsens/distances.hpp"
#include "spmsens/lp.hpp"

using namespace spm;

namespace {

DiscreteMeasure random_measure(std::mt19937_64& rng, int max_atoms, double span = 5.0) {
    std::uniform_int_distribution<int> n(1, max_atoms);
    std::uniform_real_distribution<double> pos(0.0, span), w(-2.0, 2.0);
    DiscreteMeasure m;
    int k = n(rng);
    for (int i = 0; i < k; ++i) m.atoms.push_back({pos(rng), w(rng)});
    return m;
}

// sup <f, d> over |f| <= 1 with every pairwise Lipschitz constraint written out.
double flat_all_pairs(const DiscreteMeasure& input) {
    DiscreteMeasure d = canonicalize(input);
    const int n = static_cast<int>(d.size());
    if (n == 0) return 0.0;
    lp::DenseLP p;
    p.num_vars = n;
    p.free.assign(n, true);
    for (const Atom& a : d.atoms) p.c.push_back(a.weight);
    for (int i = 0; i < n; ++i) {
        std::vector<double> row(n, 0.0);
        row[i] = 1;
        p.add_le(row, 1);
        row[i] = -1;
        p.add_le(row, 1);
        for (int j = i + 1; j < n; ++j) {
            std::vector<double> r(n, 0.0);
            double gap = d.atoms[j].position - d.atoms[i].position;
            r[i] = 1;
            r[j] = -1;
            p.add_le(r, gap);
            r[i] = -1;
            r[j] = 1;
            p.add_le(r, gap);
        }
    }
    lp::SimplexResult s = lp::simplex(p);
    REQUIRE(s.status == lp::Status::Optimal);
    return s.objective;
}

}  // namespace

TEST_CASE("flat metric closed forms") {
    CHECK(flat_distance(DiscreteMeasure::dirac(0), DiscreteMeasure::dirac(1)).value == 1.0);
    CHECK(flat_distance(DiscreteMeasure::dirac(0), DiscreteMeasure::dirac(5)).value == 2.0);
    for (double d : {0.5, 1.0, 3.0, 10.0})
        CHECK(flat_distance(DiscreteMeasure::dirac(0), DiscreteMeasure::dirac(d)).value == std::min(d, 2.0));
    DiscreteMeasure m{{0.5, 1}, {2, -0.25}};
    CHECK(flat_distance(m, m).value == 0.0);
    CHECK(flat_distance(DiscreteMeasure::dirac(3), DiscreteMeasure::dirac(3, 0.5)).value == 0.5);
    CHECK(flat_norm(DiscreteMeasure{}).value == 0.0);
}

TEST_CASE("property: flat metric equals the all-pairs LP") {
    std::mt19937_64 rng(31);
    for (int i = 0; i < 200; ++i) {
        DiscreteMeasure d = random_measure(rng, 6);
        CHECK(flat_norm(d).value == doctest::Approx(flat_all_pairs(d)).epsilon(1e-9).scale(1.0));
    }
}

TEST_CASE("property: flat metric axioms") {
    std::mt19937_64 rng(32);
    for (int i = 0; i < 200; ++i) {
        DiscreteMeasure a = random_measure(rng, 8), b = random_measure(rng, 8), c = random_measure(rng, 8);
        double ab = flat_distance(a, b).value, ba = flat_distance(b, a).value;
        CHECK(ab == ba);
        CHECK(flat_distance(a, c).value <= ab + flat_distance(b, c).value + 1e-9);
        if (!canonicalize(difference(a, b)).empty()) CHECK(ab > 0.0);
        CHECK(flat_distance(a, a).value == 0.0);
    }
}

TEST_CASE("property: flat metric is at most W1 for equal masses and at most TV") {
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> pos(0.0, 4.0), w(0.1, 1.0);
    for (int i = 0; i < 100; ++i) {
        DiscreteMeasure a, b;
        double ma = 0, mb = 0;
        for (int k = 0; k < 4; ++k) {
            a.atoms.push_back({pos(rng), w(rng)});
            ma += a.atoms.back().weight;
            b.atoms.push_back({pos(rng), w(rng)});
            mb += b.atoms.back().weight;
        }
        for (auto& x : b.atoms) x.weight *= ma / mb;
        double f = flat_distance(a, b).value;
        CHECK(f <= wasserstein1(a, b) + 1e-9);
        CHECK(f <= tv_norm(difference(a, b)) + 1e-9);
    }
}

TEST_CASE("flat witness is feasible") {
    std::mt19937_64 rng(34);
    for (int i = 0; i < 50; ++i) {
        DistanceResult r = flat_norm(random_measure(rng, 10));
        CHECK(witness_violation(r.witness, NormBudget::flat()) <= 1e-9);
    }
}

TEST_CASE("Z norm of a single atom is its weight") {
    for (double w : {1.0, -2.5, 0.125})
        for (double x : {0.0, 1.0, 7.3}) {
            DistanceResult r = z_norm(DiscreteMeasure::dirac(x, w), NormBudget::calpha(0.75));
            CHECK(r.value == doctest::Approx(std::abs(w)).epsilon(1e-8).scale(1.0));
        }
    CHECK(z_distance(DiscreteMeasure::dirac(2), DiscreteMeasure::dirac(2), NormBudget::calpha(0.5)).value == 0.0);
}

TEST_CASE("Z norm matches frozen HiGHS values on the same grid") {
    // tests/oracles/z_grid_oracle.py
    DiscreteMeasure d02{{0, 1}, {2, -1}};
    for (int nodes : {17, 33, 257})
        CHECK(z_norm(d02, NormBudget::calpha(0.5, nodes)).value == doctest::Approx(0.8).epsilon(1e-8).scale(1.0));
    DiscreteMeasure three{{0.3, 0.7}, {1.1, -1.2}, {1.9, 0.4}};
    CHECK(z_norm(three, NormBudget::calpha(0.75, 129)).value ==
          doctest::Approx(0.2084664023807997).epsilon(1e-8).scale(1.0));

    DiscreteMeasure stiff{{2, 112}, {2.015625, -128}, {2.125, 16}};
    CHECK(z_norm(stiff, NormBudget::calpha(0.4)).value == doctest::Approx(0.43947945326202165).epsilon(1e-8));
    CHECK(z_norm(stiff, NormBudget::calpha(0.75)).value == doctest::Approx(0.1887886335791994).epsilon(1e-8));
    CHECK(z_norm(stiff, NormBudget::calpha(1.0)).value == doctest::Approx(0.10260807813735152).epsilon(1e-8));
    DiscreteMeasure spread{{3.508370424219673, -1.8879953671886263},
                           {0.39052231749110217, -0.29327003624570525},
                           {1.3200362196276858, 1.0951420887066892}};
    CHECK(z_norm(spread, NormBudget::calpha(0.75)).value == doctest::Approx(1.0861233147276423).epsilon(1e-8));
}

TEST_CASE("Z norm on a 2049-node windowed grid" * doctest::timeout(120)) {
    DistanceResult r = z_norm(DiscreteMeasure{{0, 1}, {2, -1}}, NormBudget::calpha(0.5, 2049));
    CHECK(r.window == 64);
    CHECK(r.value == doctest::Approx(0.825103707192498).epsilon(1e-8).scale(1.0));
    CHECK(r.value <= flat_distance(DiscreteMeasure::dirac(0), DiscreteMeasure::dirac(2)).value);
}

TEST_CASE("property: Z <= flat <= TV, witnesses feasible") {
    std::mt19937_64 rng(35);
    std::uniform_real_distribution<double> al(0.3, 1.0);
    for (int i = 0; i < 60; ++i) {
        DiscreteMeasure d = random_measure(rng, 6);
        NormBudget b = NormBudget::calpha(al(rng), 129);
        DistanceResult z = z_norm(d, b);
        double f = flat_norm(d).value;
        CHECK(z.value <= f + 1e-9);
        CHECK(f <= tv_norm(canonicalize(d)) + 1e-12);
        CHECK(witness_violation(z.witness, b) <= 1e-9);
        // the witness attains the value
        CHECK(pair(d, [&](double x) { return z.witness(x); }) == doctest::Approx(z.value).epsilon(1e-7).scale(1.0));
    }
}

TEST_CASE("property: Z norm does not decrease when the grid is refined") {
    std::mt19937_64 rng(36);
    for (int i = 0; i < 20; ++i) {
        DiscreteMeasure d = random_measure(rng, 5);
        double prev = 0.0;
        for (int nodes : {33, 65, 129, 257}) {
            double v = z_norm(d, NormBudget::calpha(0.6, nodes)).value;
            CHECK(v >= prev - 1e-10);
            prev = v;
        }
    }
}

TEST_CASE("grid span") {
    GridSpec g;
    g.nodes = 5;
    auto t = z_grid(DiscreteMeasure{{20, 1}, {10, -1}}, g);  // unsorted input
    REQUIRE(t.size() == 5);
    CHECK(t.front() == doctest::Approx(9.0));
    CHECK(t.back() == doctest::Approx(21.0));
    t = z_grid(DiscreteMeasure{{0.2, 1}}, g);
    CHECK(t.front() == 0.0);
    CHECK(t.back() == doctest::Approx(1.2));
    CHECK(GridSpec{}.effective_window() == 256);
}
