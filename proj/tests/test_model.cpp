#include <cmath>

#include "doctest.h"
#include "spmsens/model.hpp"

using namespace spm;

TEST_CASE("transport example passes validation") {
    ValidationReport r = validate_model(ModelTriple::parse("0", "1+h", "0"));
    CHECK(r.passed());
    CHECK(r.failures().empty());
    CHECK(r.csv().rfind("assumption,pass,worst_value,x,y,h,detail\n", 0) == 0);
}

TEST_CASE("sign violations are reported with a witness") {
    ValidationReport neg = validate_model(ModelTriple::parse("-1", "1", "0"));
    CHECK_FALSE(neg.passed());
    REQUIRE(neg.find("A2 a>=0") != nullptr);
    CHECK_FALSE(neg.find("A2 a>=0")->pass);
    CHECK(neg.find("A2 a>=0")->worst_value == -1.0);

    ValidationReport inflow = validate_model(ModelTriple::parse("0", "x", "0"));
    REQUIRE(inflow.find("A3 b(h,0)>0") != nullptr);
    CHECK_FALSE(inflow.find("A3 b(h,0)>0")->pass);
    CHECK(inflow.find("A3 b(h,0)>0")->worst.x == 0.0);

    // b(0) = 1 + h vanishes at h = -1
    ModelTriple m = ModelTriple::parse("0", "1+h", "0");
    m.h_min = -1.0;
    CHECK_FALSE(validate_model(m).find("A3 b(h,0)>0")->pass);
}

TEST_CASE("non-finite coefficients fail validation") {
    ValidationReport r = validate_model(ModelTriple::parse("0", "1", "log(x)"));
    CHECK_FALSE(r.passed());
    CHECK_FALSE(r.find("finite")->pass);
}

TEST_CASE("kernel model validation") {
    KernelModel m;
    m.a = KernelNonlinearity::parse("0.5", "0", "0", "0");
    m.b = KernelNonlinearity::parse("1 + 0.2*y", "exp(-(x-y)^2)", "0.5", "0");
    m.c = KernelNonlinearity::parse("1 - y", "exp(-(x-y)^2)", "1", "0");
    CHECK(validate_model(m).passed());
    m.b = KernelNonlinearity::parse("1 - y", "1", "0", "0");  // b(0, mu) < 0 once the mass exceeds 1
    CHECK_FALSE(validate_model(m).find("N3 b(0,mu)>0")->pass);
    m.b = KernelNonlinearity::parse("1", "0", "0", "0");
    m.a = KernelNonlinearity::parse("y - 1", "1", "0", "0");
    CHECK_FALSE(validate_model(m).find("N4 a>=0")->pass);
}

TEST_CASE("property: validation is deterministic") {
    ModelTriple m = ModelTriple::parse("0.5 + 0.2*h", "1 + h + 0.1*h^2", "-0.3 + 0.2*h*x/(1 + x)");
    CHECK(validate_model(m).csv() == validate_model(m).csv());
    ValidationGrid g;
    g.x_points = 17;
    g.h_points = 5;
    CHECK(validate_model(m, g).csv() == validate_model(m, g).csv());
}

TEST_CASE("model files") {
    ModelFile f = load_model(KeyValueFile::parse("b = 1 + h\nx_max = 4\n", "t"));
    REQUIRE(f.linear);
    CHECK_FALSE(f.kernel);
    CHECK(f.linear->x_max == 4.0);
    CHECK(f.linear->a.expr.is_const(0.0));
    CHECK(f.linear->depends_on_h());
    CHECK(f.linear->b.affine_in_h);
    CHECK_FALSE(ModelTriple::parse("0", "1 + h^2", "0").b.affine_in_h);

    ModelFile k = load_model(KeyValueFile::parse("F_b = 1 + y\nK_b = 1\n", "t"));
    REQUIRE(k.kernel);
    CHECK_THROWS_AS(load_model(KeyValueFile::parse("a = 1\n", "t")), ModelError);
    CHECK_THROWS_AS(load_model(KeyValueFile::parse("b = 1\nF_a = 1\n", "t")), ModelError);
    CHECK_THROWS_AS(load_model(KeyValueFile::parse("b = 1\nh_min = 1\nh_max = 0\n", "t")), ModelError);
    CHECK_THROWS(load_model(KeyValueFile::parse("b = 1 +\n", "t")));
}

TEST_CASE("model function partials") {
    ModelFunction f = ModelFunction::parse("exp(-x) + h*(1 + x^2)");
    Point p{1.0, 0.0, 0.3};
    CHECK(f.value(p) == doctest::Approx(std::exp(-1.0) + 0.6));
    CHECK(f.dx(p) == doctest::Approx(-std::exp(-1.0) + 0.6));
    CHECK(f.dh(p) == doctest::Approx(2.0));
}

TEST_CASE("total-variation cutoff") {
    CHECK(cutoff_factor(3.0, 3.0) == 1.0);
    CHECK(cutoff_factor(4.0, 3.0) == doctest::Approx(std::exp(-1.0)));
    CHECK(cutoff_factor(0.0, 3.0) == 1.0);
    MeasureFunction f = [](double x, const DiscreteMeasure&) { return 2.0 + x; };
    MeasureFunction g = tv_cutoff_wrap(f, 1.0);
    CHECK(g(1.0, DiscreteMeasure{}) == 3.0);
    CHECK(g(1.0, DiscreteMeasure{{0, 1}, {1, -1}}) == doctest::Approx(3.0 * std::exp(-1.0)));
}
