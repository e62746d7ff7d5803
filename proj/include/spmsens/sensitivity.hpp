#pragma once

#include <functional>
#include <string>
#include <vector>

#include "spmsens/distances.hpp"
#include "spmsens/linear.hpp"
#include "spmsens/nonlinear.hpp"

namespace spm {

// How mu_t^h is computed for a given h.
struct Backend {
    enum class Kind { LinearDual, LinearParticles, Dyadic };
    Kind kind = Kind::LinearDual;
    int k = 0;        // dyadic level
    double dt = 0.0;  // particle / inner step; 0 selects the default
    int N = 0;        // dual grid; 0 selects the default

    // "linear-dual", "linear-particles", "dyadic(k)"
    std::string label() const;
    static Backend parse(const std::string& s);
};

using HSolver = std::function<DiscreteMeasure(double h)>;

// mu_t^h as a function of h.  Throws when h leaves the model h-range.
HSolver measure_solver(const LinearProblem& p, double t, const Backend& b);
HSolver measure_solver(const NonlinearProblem& p, double t, const Backend& b);

struct QuotientPair {
    double dh1 = 0.0, dh2 = 0.0;
    DiscreteMeasure q1, q2;
    double h = 0.0, t = 0.0;
    std::string backend;
};

// (mu^{h+dh} - mu^h)/dh for each dh, as signed atom lists.
struct QuotientSet {
    double h = 0.0, t = 0.0;
    std::string backend;
    std::vector<double> dh;
    std::vector<DiscreteMeasure> q;

    QuotientPair pair(std::size_t i, std::size_t j) const;
};

DiscreteMeasure quotient(const DiscreteMeasure& plus, const DiscreteMeasure& base, double dh);

QuotientSet quotient_measures(const HSolver& solve, double h, const std::vector<double>& dh_list, double t = 0.0,
                              const std::string& backend = "");

struct CauchyDiagnostic {
    std::vector<double> dh;
    std::vector<std::vector<double>> matrix;
    // Per step magnitude (descending): distance between the +s and -s
    // quotients, or between consecutive steps when no such pair exists.
    std::vector<double> steps;
    std::vector<double> trend;
    double max_smallest3 = 0.0;
    bool monotone = true;
    bool divergent = false;  // smallest-step trend >= half the largest-step trend
    DistanceResult witness;  // for the smallest-step trend entry
    std::string csv() const;  // dh1,dh2,distance
};

CauchyDiagnostic cauchy_diagnostic(const QuotientSet& set, const NormBudget& metric);

struct BankFunction {
    std::string name;
    std::function<double(double)> f;
    std::function<double(double)> df;
};

// 1, x, x^2, exp(-x), sin(x) and smooth bumps centred on 0.5, 1, ..., 3.
std::vector<BankFunction> standard_test_bank();

struct DerivativeEstimate {
    DiscreteMeasure representation;  // Richardson combination of symmetric quotients
    double dh_used = 0.0;
    double error_bar = 0.0;  // metric distance of the two symmetric quotients
    std::vector<std::pair<std::string, double>> table;
    std::string csv() const;  // xi,value
};

DerivativeEstimate derivative_estimate(const HSolver& solve, double h, double dh0, const NormBudget& metric,
                                       const std::vector<BankFunction>& bank = standard_test_bank());

// Least squares fit of log2(value) = intercept + slope * x.  Non-positive
// values are skipped and counted.
struct RateFit {
    std::vector<double> x;
    std::vector<double> values;
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;  // root mean square in log2 units
    int skipped = 0;
    bool valid = false;  // at least two usable points

    double rate() const { return -slope; }
};

RateFit fit_log2(const std::vector<double>& x, const std::vector<double>& values);

struct HolderScan {
    struct Row {
        double h1, h2, distance;
    };
    std::vector<Row> rows;
    RateFit fit;  // slope = fitted exponent against log2 |h1 - h2|
    bool constant_derivative = false;
    std::string csv() const;  // h1,h2,distance
};

HolderScan holder_scan(const HSolver& solve, const std::vector<double>& h_grid, double dh0, const NormBudget& metric);

// Z-norm Cauchy differences ||q(s) - q(-s)|| for s in steps, fitted against log2 s.
RateFit cauchy_rate(const HSolver& solve, double h, const std::vector<double>& steps, const NormBudget& metric);

struct DeltaKtStudy {
    struct Row {
        int k;
        double dh;
        double value;
    };
    double alpha = 0.0;
    std::vector<Row> rows;
    std::vector<int> k;
    std::vector<double> delta_hat;
    RateFit fit;
    double target_rate = 0.0;  // 2 alpha - 1
    std::string csv() const;        // k,dh,metric,value
    std::string delta_csv() const;  // k,delta_hat
};

std::vector<double> default_dh_list();  // +-2^-3 .. +-2^-8

DeltaKtStudy delta_kt_study(const NonlinearProblem& p, double t, const std::vector<int>& k_range,
                            const std::vector<double>& dh_list, double alpha, int nodes = 257,
                            double dt_inner = 0.0);
// Several alphas sharing the level solves.
std::vector<DeltaKtStudy> delta_kt_study(const NonlinearProblem& p, double t, const std::vector<int>& k_range,
                                         const std::vector<double>& dh_list, const std::vector<double>& alphas,
                                         int nodes = 257, double dt_inner = 0.0);

struct TaylorGap {
    double worst_ratio = 0.0;
    double worst_lhs = 0.0;
    int samples = 0;
};

// |(f(h1+d1)-f(h1))/d1 - (f(h2+d2)-f(h2))/d2| against
// L ((|d1|^a + |d2|^a)/(1+a) + |h1-h2|^a) with L the Hölder constant of f'.
TaylorGap taylor_gap_check(const std::function<double(double)>& f, double holder_constant, double alpha,
                           const std::vector<double>& h_grid, const std::vector<double>& dh_list);

}  // namespace spm
