#include "spmsens/flow.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>

#include "spmsens/io.hpp"

namespace spm {

namespace {

using State = std::array<double, 3>;  // X, X_x, X_h

State rhs(const LinearCoefficients& k, const State& y, double sign) {
    CoefSample b = k.b(y[0]);
    return {sign * b.v, sign * b.dx * y[1], sign * (b.dh + b.dx * y[2])};
}

State rk4(const LinearCoefficients& k, const State& y, double dt, double sign = 1.0) {
    auto axpy = [](const State& a, double s, const State& b) {
        return State{a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]};
    };
    State k1 = rhs(k, y, sign);
    State k2 = rhs(k, axpy(y, 0.5 * dt, k1), sign);
    State k3 = rhs(k, axpy(y, 0.5 * dt, k2), sign);
    State k4 = rhs(k, axpy(y, dt, k3), sign);
    State out;
    for (int i = 0; i < 3; ++i) out[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

void check_finite(const State& y, int step) {
    if (!std::isfinite(y[0]) || !std::isfinite(y[1]) || !std::isfinite(y[2]))
        throw FlowError("flow state is not finite at step " + std::to_string(step), step);
}

}  // namespace

int default_flow_steps(double s) { return std::max(16, static_cast<int>(std::ceil(64.0 * s))); }

FlowResult integrate_flow(const LinearCoefficients& k, double x0, double s, int steps) {
    if (!(s >= 0.0)) throw std::invalid_argument("flow time must be nonnegative");
    if (steps < 1) throw std::invalid_argument("flow needs at least one step");
    FlowResult r;
    r.s = s;
    r.x0 = x0;
    State y{x0, 1.0, 0.0};
    if (s > 0.0) {
        const double dt = s / steps;
        for (int i = 0; i < steps; ++i) {
            y = rk4(k, y, dt);
            check_finite(y, i + 1);
        }
    }
    r.X = y[0];
    r.dX_dx = y[1];
    r.dX_dh = y[2];
    return r;
}

FlowResult integrate_flow(const ModelTriple& m, double h, double x0, double s, int steps) {
    ModelCoefficients k(m, h);
    FlowResult r = integrate_flow(k, x0, s, steps > 0 ? steps : default_flow_steps(s));
    r.h = h;
    return r;
}

FlowPath flow_path(const LinearCoefficients& k, double x0, double duration, int n, int substeps) {
    if (n < 1 || substeps < 1) throw std::invalid_argument("flow path needs n >= 1 and substeps >= 1");
    FlowPath p;
    p.X.resize(n + 1);
    p.X_x.resize(n + 1);
    p.X_h.resize(n + 1);
    State y{x0, 1.0, 0.0};
    p.X[0] = x0;
    p.X_x[0] = 1.0;
    p.X_h[0] = 0.0;
    const double dt = duration / n / substeps;
    for (int j = 1; j <= n; ++j) {
        for (int q = 0; q < substeps; ++q) y = rk4(k, y, dt);
        check_finite(y, j * substeps);
        p.X[j] = y[0];
        p.X_x[j] = y[1];
        p.X_h[j] = y[2];
    }
    return p;
}

BackwardResult integrate_backward(const LinearCoefficients& k, double x, double s, int steps) {
    if (steps <= 0) steps = default_flow_steps(s);
    BackwardResult r;
    State y{x, 1.0, 0.0};
    const double dt = s / steps;
    for (int i = 0; i < steps; ++i) {
        State next = rk4(k, y, dt, -1.0);
        check_finite(next, i + 1);
        if (next[0] <= 0.0) {
            double frac = y[0] > 0.0 ? y[0] / (y[0] - next[0]) : 0.0;
            r.hit_boundary = true;
            r.crossing_time = (i + frac) * dt;
            r.X = 0.0;
            return r;
        }
        y = next;
    }
    r.X = y[0];
    return r;
}

// ---------------------------------------------------------- regularity

bool RegularityReport::passed() const {
    return std::all_of(bounds.begin(), bounds.end(), [](const RegularityBound& b) { return b.pass; });
}

std::string RegularityReport::csv() const {
    std::ostringstream os;
    os << "bound,samples,max_ratio\n";
    for (const auto& b : bounds)
        for (std::size_t i = 0; i < b.samples.size(); ++i)
            os << b.name << ',' << b.samples[i] << ',' << format_double(b.max_ratio[i]) << '\n';
    return os.str();
}

RegularityReport check_flow_regularity(const ModelTriple& m, double T, int samples, double alpha,
                                       std::uint64_t seed) {
    static const char* names[6] = {"lipschitz_h", "lipschitz_y", "holder_h_of_dXdh",
                                   "holder_h_of_dXdy", "holder_y_of_dXdy", "holder_y_of_dXdh"};
    RegularityReport rep;
    rep.alpha = alpha;
    rep.bounds.resize(6);
    for (int b = 0; b < 6; ++b) rep.bounds[b].name = names[b];

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uh(m.h_min, m.h_max), uy(0.0, m.x_max), us(0.0, T);
    double running[6] = {0, 0, 0, 0, 0, 0};
    int drawn = 0;
    for (int level = 0; level < 3; ++level) {
        const int target = samples << level;
        // Samples accumulate: each level reuses the previous draws and adds more.
        for (; drawn < target; ++drawn) {
            double h1 = uh(rng), h2 = uh(rng), y1 = uy(rng), y2 = uy(rng), s = us(rng);
            if (h1 == h2 || y1 == y2) continue;
            FlowResult a = integrate_flow(m, h1, y1, s);
            FlowResult b = integrate_flow(m, h2, y1, s);
            FlowResult c = integrate_flow(m, h1, y2, s);
            const double dh = std::abs(h1 - h2), dy = std::abs(y1 - y2);
            double r[6] = {
                std::abs(a.X - b.X) / dh,
                std::abs(a.X - c.X) / dy,
                std::abs(a.dX_dh - b.dX_dh) / std::pow(dh, alpha),
                std::abs(a.dX_dx - b.dX_dx) / std::pow(dh, alpha),
                std::abs(a.dX_dx - c.dX_dx) / std::pow(dy, alpha),
                std::abs(a.dX_dh - c.dX_dh) / std::pow(dy, alpha),
            };
            for (int k = 0; k < 6; ++k) running[k] = std::isfinite(r[k]) ? std::max(running[k], r[k]) : r[k];
        }
        for (int k = 0; k < 6; ++k) {
            rep.bounds[k].samples.push_back(target);
            rep.bounds[k].max_ratio.push_back(running[k]);
        }
    }
    for (auto& b : rep.bounds) {
        bool finite = std::all_of(b.max_ratio.begin(), b.max_ratio.end(), [](double v) { return std::isfinite(v); });
        bool growing = b.max_ratio[1] > 2.0 * b.max_ratio[0] && b.max_ratio[2] > 2.0 * b.max_ratio[1];
        b.pass = finite && !growing;
    }
    return rep;
}

}  // namespace spm
