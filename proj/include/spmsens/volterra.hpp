#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "spmsens/coefficients.hpp"

namespace spm {

class VolterraError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Test function xi(x, h) with its partials.
struct TestFn {
    std::function<double(double, double)> f, f_x, f_h;

    double operator()(double x, double h = 0.0) const { return f(x, h); }
    static TestFn from_expr(const Expr& e);
    static TestFn from_source(const std::string& source);
    static TestFn of(std::function<double(double)> f, std::function<double(double)> df);
};

// Samples of the kernel functions along one characteristic, on the uniform
// grid u_m = m * duration / n, m = 0..n:
//   P[m] = p(t - u_m, x) and Q[m] = q(u_m, x).
// P_h and Q_h are the h-derivatives (filled when requested and available).
struct PQSamples {
    std::vector<double> P, Q, P_h, Q_h;
};

struct VolterraData {
    double t = 0.0;
    int N = 0;  // s-grid s_j = j t / N
    bool has_h_derivatives = false;
    std::function<void(double x, double duration, int n, bool with_h, PQSamples& out)> sample;

    double step() const { return t / N; }
};

// p(s,x) = xi(X(t-s,x)) exp(int_0^{t-s} c(X(u,x)) du),
// q(u,x) = a(X(u,x)) exp(int_0^u c(X(v,x)) dv), trapezoid in time on the solver grid.
VolterraData build_pq(std::shared_ptr<const LinearCoefficients> k, const TestFn& xi, double h, double t, int N);
VolterraData build_pq(const ModelTriple& m, const TestFn& xi, double h, double t, int N);

// Generic kernels given directly as p(s, x) and q(u, x).
VolterraData volterra_from_functions(std::function<double(double, double)> p, std::function<double(double, double)> q,
                                     double t, int N);

// Default grid: 1024 intervals per unit time (at least 16).
int default_volterra_nodes(double t);

struct DualSolution {
    VolterraData data;
    std::vector<double> phi0;  // phi(s_j, 0), j = 0..N
    double max_residual = 0.0;
    double h = 0.0;

    double t() const { return data.t; }
    double trace_at(double s) const;  // linear interpolation
    std::string csv() const;          // s,phi0
};

DualSolution solve_boundary_trace(const VolterraData& d, double h = 0.0);

// phi(s, x) from the solved boundary trace.
double evaluate_dual(const DualSolution& sol, double s, double x);

// Solution f_h of the differentiated equation, with the same grid as phi.
struct DhDual {
    DualSolution phi;              // at h
    std::vector<double> fh0;       // f_h(s_j, 0)
    double max_quotient_deviation = 0.0;  // vs (phi^{h+dh} - phi^{h-dh}) / (2 dh)
    double evaluate(double s, double x) const;
};

DhDual dh_dual(const ModelTriple& m, const TestFn& xi, double h, double t, double dh, int N = 0);

// max over sampled x of |phi(0,x) - xi(x)| + |d/dx phi(0,x) - xi'(x)|.
double kicked_continuity_check(const ModelTriple& m, const TestFn& xi, double h, double t_small, double x_max = 5.0,
                               int x_samples = 33);

}  // namespace spm
