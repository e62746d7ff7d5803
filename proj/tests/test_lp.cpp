#include <cmath>
#include <random>

#include "doctest.h"
#include "spmsens/lp.hpp"

using namespace spm::lp;

TEST_CASE("simplex: small textbook problem") {
    DenseLP lp;
    lp.num_vars = 2;
    lp.c = {3, 5};
    lp.add_le({1, 0}, 4);
    lp.add_le({0, 2}, 12);
    lp.add_le({3, 2}, 18);
    SimplexResult r = simplex(lp);
    REQUIRE(r.status == Status::Optimal);
    CHECK(r.objective == doctest::Approx(36.0));
    CHECK(r.x[0] == doctest::Approx(2.0));
    CHECK(r.x[1] == doctest::Approx(6.0));
}

TEST_CASE("simplex: Beale's cycling example terminates under Bland's rule") {
    DenseLP lp;
    lp.num_vars = 4;
    lp.c = {0.75, -150, 0.02, -6};
    lp.add_le({0.25, -60, -0.04, 9}, 0);
    lp.add_le({0.5, -90, -0.02, 3}, 0);
    lp.add_le({0, 0, 1, 0}, 1);
    SimplexResult r = simplex(lp);
    REQUIRE(r.status == Status::Optimal);
    CHECK(r.objective == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("simplex: infeasible, unbounded, equalities, free variables") {
    DenseLP inf;
    inf.num_vars = 1;
    inf.c = {1};
    inf.add_le({1}, 1);
    inf.add_le({-1}, -2);
    CHECK(simplex(inf).status == Status::Infeasible);

    DenseLP unb;
    unb.num_vars = 2;
    unb.c = {1, 1};
    unb.add_le({1, -1}, 1);
    CHECK(simplex(unb).status == Status::Unbounded);

    // max x - y, x + y = 1, x free, y >= 0, x <= 3  -> x = 3, y = ... infeasible y = -2; so x = 1, y = 0
    DenseLP eq;
    eq.num_vars = 2;
    eq.c = {1, -1};
    eq.add_eq({1, 1}, 1);
    eq.add_le({1, 0}, 3);
    eq.free = {true, false};
    SimplexResult r = simplex(eq);
    REQUIRE(r.status == Status::Optimal);
    CHECK(r.objective == doctest::Approx(1.0));

    // free variable driven negative: max -x, x >= -2.5
    DenseLP fr;
    fr.num_vars = 1;
    fr.c = {-1};
    fr.add_le({-1}, 2.5);
    fr.free = {true};
    r = simplex(fr);
    REQUIRE(r.status == Status::Optimal);
    CHECK(r.x[0] == doctest::Approx(-2.5));
}

TEST_CASE("property: interior point agrees with simplex on random bounded LPs") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 2 + trial % 5, m = 3 + trial % 7;
        DenseLP lp;
        lp.num_vars = n;
        lp.free.assign(n, true);
        Eigen::VectorXd c(n);
        SparseRowOperator G(n);
        std::vector<double> hv;
        for (int j = 0; j < n; ++j) {
            c[j] = u(rng);
            lp.c.push_back(-c[j]);  // simplex maximizes
        }
        auto add = [&](std::vector<double> row, double rhs) {
            std::vector<int> idx;
            std::vector<double> val;
            for (int j = 0; j < n; ++j)
                if (row[j] != 0.0) {
                    idx.push_back(j);
                    val.push_back(row[j]);
                }
            G.add_row(idx, val);
            hv.push_back(rhs);
            lp.add_le(std::move(row), rhs);
        };
        for (int i = 0; i < m; ++i) {
            std::vector<double> row(n);
            for (auto& v : row) v = u(rng);
            add(row, 0.5 + std::abs(u(rng)));  // x = 0 stays feasible
        }
        for (int j = 0; j < n; ++j) {
            std::vector<double> row(n, 0.0);
            row[j] = 1;
            add(row, 2);
            row[j] = -1;
            add(row, 2);
        }
        Eigen::VectorXd h = Eigen::Map<Eigen::VectorXd>(hv.data(), hv.size());
        SimplexResult s = simplex(lp);
        IpmResult r = interior_point(c, G, h);
        REQUIRE(s.status == Status::Optimal);
        REQUIRE(r.status == Status::Optimal);
        CHECK(r.primal_objective == doctest::Approx(-s.objective).epsilon(1e-8).scale(1.0));
        CHECK(r.dual_objective == doctest::Approx(r.primal_objective).epsilon(1e-8).scale(1.0));
        Eigen::VectorXd gx;
        G.multiply(r.x, gx);
        CHECK((gx - h).maxCoeff() <= 1e-8);
        CHECK(r.z.minCoeff() >= 0.0);
    }
}

TEST_CASE("sparse operator products are consistent") {
    SparseRowOperator G(3);
    G.add_row({0, 2}, {1.0, -2.0});
    G.add_row({1}, {3.0});
    Eigen::VectorXd x(3), y(2), gx, gty;
    x << 1, 2, 3;
    y << 0.5, -1;
    G.multiply(x, gx);
    G.multiply_transpose(y, gty);
    CHECK(gx[0] == -5.0);
    CHECK(gx[1] == 6.0);
    CHECK(y.dot(gx) == doctest::Approx(x.dot(gty)));
    Eigen::VectorXd w(2);
    w << 2, 1;
    Eigen::MatrixXd H;
    G.normal_matrix(w, H);
    CHECK(H(0, 0) == 2.0);
    CHECK(H(2, 0) == -4.0);
    CHECK(H(2, 2) == 8.0);
    CHECK(H(1, 1) == 9.0);
}
