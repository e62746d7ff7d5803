#include "spmsens/volterra.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spmsens/flow.hpp"
#include "spmsens/io.hpp"

namespace spm {

TestFn TestFn::from_expr(const Expr& e) {
    if (e.depends_on(Var::Y)) throw std::invalid_argument("test functions depend on x and h only");
    auto f = std::make_shared<CompiledExpr>(e);
    auto fx = std::make_shared<CompiledExpr>(differentiate(e, Var::X));
    auto fh = std::make_shared<CompiledExpr>(differentiate(e, Var::H));
    TestFn t;
    t.f = [f](double x, double h) { return (*f)(x, 0.0, h); };
    t.f_x = [fx](double x, double h) { return (*fx)(x, 0.0, h); };
    t.f_h = [fh](double x, double h) { return (*fh)(x, 0.0, h); };
    return t;
}

TestFn TestFn::from_source(const std::string& source) { return from_expr(parse_expr(source)); }

TestFn TestFn::of(std::function<double(double)> f, std::function<double(double)> df) {
    TestFn t;
    t.f = [f](double x, double) { return f(x); };
    t.f_x = [df](double x, double) { return df(x); };
    t.f_h = [](double, double) { return 0.0; };
    return t;
}

int default_volterra_nodes(double t) { return std::max(16, static_cast<int>(std::ceil(1024.0 * t))); }

VolterraData build_pq(std::shared_ptr<const LinearCoefficients> k, const TestFn& xi, double h, double t, int N) {
    if (N < 2) throw VolterraError("Volterra grid needs N >= 2");
    VolterraData d;
    d.t = t;
    d.N = N;
    d.has_h_derivatives = true;
    d.sample = [k, xi, h](double x, double duration, int n, bool with_h, PQSamples& out) {
        const double du = duration / n;
        const int substeps = std::max(1, static_cast<int>(std::ceil(64.0 * du - 1e-12)));
        FlowPath path = flow_path(*k, x, duration, n, substeps);
        out.P.resize(n + 1);
        out.Q.resize(n + 1);
        if (with_h) {
            out.P_h.resize(n + 1);
            out.Q_h.resize(n + 1);
        }
        double I = 0.0, J = 0.0, c_prev = 0.0, ch_prev = 0.0;
        for (int m = 0; m <= n; ++m) {
            const double X = path.X[m];
            CoefSample a = k->a(X), c = k->c(X);
            const double chx = c.dh + c.dx * path.X_h[m];
            if (m > 0) {
                I += 0.5 * du * (c_prev + c.v);
                J += 0.5 * du * (ch_prev + chx);
            }
            c_prev = c.v;
            ch_prev = chx;
            const double E = std::exp(I);
            out.P[m] = xi.f(X, h) * E;
            out.Q[m] = a.v * E;
            if (with_h) {
                out.P_h[m] = (xi.f_x(X, h) * path.X_h[m] + xi.f_h(X, h)) * E + out.P[m] * J;
                out.Q_h[m] = (a.dh + a.dx * path.X_h[m]) * E + out.Q[m] * J;
            }
        }
    };
    return d;
}

VolterraData build_pq(const ModelTriple& m, const TestFn& xi, double h, double t, int N) {
    return build_pq(std::make_shared<ModelCoefficients>(m, h), xi, h, t, N);
}

VolterraData volterra_from_functions(std::function<double(double, double)> p, std::function<double(double, double)> q,
                                     double t, int N) {
    if (N < 2) throw VolterraError("Volterra grid needs N >= 2");
    VolterraData d;
    d.t = t;
    d.N = N;
    d.sample = [p, q, t](double x, double duration, int n, bool, PQSamples& out) {
        out.P.resize(n + 1);
        out.Q.resize(n + 1);
        for (int m = 0; m <= n; ++m) {
            double u = duration * m / n;
            out.P[m] = p(t - u, x);
            out.Q[m] = q(u, x);
        }
    };
    return d;
}

namespace {

// Backward march for phi_j = rhs_j + int_0^{t-s_j} q(u,0) phi(s_j+u) du on the node grid.
std::vector<double> march(const std::vector<double>& rhs, const std::vector<double>& Q, double dt, double* residual) {
    const int N = static_cast<int>(rhs.size()) - 1;
    const double diag = 1.0 - 0.5 * dt * Q[0];
    if (!(diag > 0.0))
        throw VolterraError("diagonal coefficient 1 - dt/2 q(0,0) = " + format_double(diag) +
                            " is not positive; use a finer grid");
    std::vector<double> phi(N + 1);
    phi[N] = rhs[N];
    for (int j = N - 1; j >= 0; --j) {
        const int L = N - j;
        double acc = 0.5 * Q[L] * phi[N];
        for (int m = 1; m < L; ++m) acc += Q[m] * phi[j + m];
        phi[j] = (rhs[j] + dt * acc) / diag;
    }
    if (residual) {
        double r = 0.0;
        for (int j = 0; j <= N; ++j) {
            const int L = N - j;
            double integral = 0.0;
            if (L > 0) {
                integral = 0.5 * Q[0] * phi[j] + 0.5 * Q[L] * phi[N];
                for (int m = 1; m < L; ++m) integral += Q[m] * phi[j + m];
                integral *= dt;
            }
            r = std::max(r, std::abs(phi[j] - rhs[j] - integral));
        }
        *residual = r;
    }
    return phi;
}

double lerp_trace(const std::vector<double>& v, double t, double s) {
    const int N = static_cast<int>(v.size()) - 1;
    double pos = s / t * N;
    int j = std::clamp(static_cast<int>(std::floor(pos)), 0, N - 1);
    double w = pos - j;
    return (1.0 - w) * v[j] + w * v[j + 1];
}

int sub_intervals(const VolterraData& d, double duration) {
    return std::max(1, static_cast<int>(std::ceil(duration / d.step() - 1e-9)));
}

void check_s(const VolterraData& d, double s) {
    if (!(s >= -1e-12 * d.t && s <= d.t * (1.0 + 1e-12)))
        throw VolterraError("s = " + format_double(s) + " outside [0, " + format_double(d.t) + "]");
}

}  // namespace

double DualSolution::trace_at(double s) const { return lerp_trace(phi0, data.t, s); }

std::string DualSolution::csv() const {
    std::ostringstream os;
    os << "s,phi0\n";
    for (int j = 0; j <= data.N; ++j) os << format_double(data.t * j / data.N) << ',' << format_double(phi0[j]) << '\n';
    return os.str();
}

DualSolution solve_boundary_trace(const VolterraData& d, double h) {
    if (d.N < 2) throw VolterraError("Volterra grid needs N >= 2");
    PQSamples smp;
    d.sample(0.0, d.t, d.N, false, smp);
    std::vector<double> rhs(d.N + 1);
    for (int j = 0; j <= d.N; ++j) rhs[j] = smp.P[d.N - j];
    DualSolution sol;
    sol.data = d;
    sol.h = h;
    sol.phi0 = march(rhs, smp.Q, d.step(), &sol.max_residual);
    return sol;
}

double evaluate_dual(const DualSolution& sol, double s, double x) {
    const VolterraData& d = sol.data;
    check_s(d, s);
    s = std::clamp(s, 0.0, d.t);
    const double D = d.t - s;
    const int n = sub_intervals(d, D);
    PQSamples smp;
    d.sample(x, D, n, false, smp);
    if (D <= 0.0) return smp.P[n];
    const double du = D / n;
    double acc = 0.5 * (smp.Q[0] * sol.trace_at(s) + smp.Q[n] * sol.phi0.back());
    for (int m = 1; m < n; ++m) acc += smp.Q[m] * sol.trace_at(s + m * du);
    return smp.P[n] + du * acc;
}

double DhDual::evaluate(double s, double x) const {
    const VolterraData& d = phi.data;
    check_s(d, s);
    s = std::clamp(s, 0.0, d.t);
    const double D = d.t - s;
    const int n = sub_intervals(d, D);
    PQSamples smp;
    d.sample(x, D, n, true, smp);
    if (D <= 0.0) return smp.P_h[n];
    const double du = D / n;
    double acc = 0.0;
    for (int m = 0; m <= n; ++m) {
        double u = s + m * du;
        double w = (m == 0 || m == n) ? 0.5 : 1.0;
        acc += w * (smp.Q_h[m] * phi.trace_at(u) + smp.Q[m] * lerp_trace(fh0, d.t, u));
    }
    return smp.P_h[n] + du * acc;
}

DhDual dh_dual(const ModelTriple& m, const TestFn& xi, double h, double t, double dh, int N) {
    if (N <= 0) N = default_volterra_nodes(t);
    DhDual out;
    VolterraData d = build_pq(m, xi, h, t, N);
    out.phi = solve_boundary_trace(d, h);
    PQSamples smp;
    d.sample(0.0, t, N, true, smp);
    const double dt = d.step();
    std::vector<double> rhs(N + 1);
    for (int j = 0; j <= N; ++j) {
        const int L = N - j;
        double integral = 0.0;
        if (L > 0) {
            integral = 0.5 * (smp.Q_h[0] * out.phi.phi0[j] + smp.Q_h[L] * out.phi.phi0[N]);
            for (int k = 1; k < L; ++k) integral += smp.Q_h[k] * out.phi.phi0[j + k];
            integral *= dt;
        }
        rhs[j] = smp.P_h[L] + integral;
    }
    out.fh0 = march(rhs, smp.Q, dt, nullptr);

    if (dh > 0.0) {
        DualSolution plus = solve_boundary_trace(build_pq(m, xi, h + dh, t, N), h + dh);
        DualSolution minus = solve_boundary_trace(build_pq(m, xi, h - dh, t, N), h - dh);
        double dev = 0.0;
        for (int j = 0; j <= N; ++j)
            dev = std::max(dev, std::abs((plus.phi0[j] - minus.phi0[j]) / (2.0 * dh) - out.fh0[j]));
        for (double x : {0.5, 1.0, 2.0}) {
            double q = (evaluate_dual(plus, 0.0, x) - evaluate_dual(minus, 0.0, x)) / (2.0 * dh);
            dev = std::max(dev, std::abs(q - out.evaluate(0.0, x)));
        }
        out.max_quotient_deviation = dev;
    }
    return out;
}

double kicked_continuity_check(const ModelTriple& m, const TestFn& xi, double h, double t_small, double x_max,
                               int x_samples) {
    if (t_small <= 0.0) return 0.0;
    const int N = std::max(64, static_cast<int>(std::ceil(1024.0 * t_small)));
    DualSolution sol = solve_boundary_trace(build_pq(m, xi, h, t_small, N), h);
    const double e = 1e-4;
    double worst = 0.0;
    for (int i = 0; i < x_samples; ++i) {
        const double x = x_samples > 1 ? x_max * i / (x_samples - 1) : 0.0;
        const double v = evaluate_dual(sol, 0.0, x);
        double d;
        if (x >= e) {
            d = (evaluate_dual(sol, 0.0, x + e) - evaluate_dual(sol, 0.0, x - e)) / (2.0 * e);
        } else {
            d = (-3.0 * v + 4.0 * evaluate_dual(sol, 0.0, x + e) - evaluate_dual(sol, 0.0, x + 2.0 * e)) / (2.0 * e);
        }
        worst = std::max(worst, std::abs(v - xi.f(x, h)) + std::abs(d - xi.f_x(x, h)));
    }
    return worst;
}

}  // namespace spm
