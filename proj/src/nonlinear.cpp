#include "spmsens/nonlinear.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spmsens/distances.hpp"
#include "spmsens/io.hpp"

namespace spm {

namespace {

double kernel_integral(const KernelPart& p, double x, const DiscreteMeasure& mu) {
    double s = 0.0;
    for (const Atom& a : mu.atoms) s += a.weight * p.k(x, a.position, 0.0);
    return s;
}


bool needs_table(const KernelNonlinearity& f) {
    auto dep = [](const KernelPart& p) { return !p.trivial() && p.K.depends_on(Var::X) && p.F.depends_on(Var::Y); };
    return dep(f.base) || dep(f.pert);
}

}  // namespace

double eval_nonlinearity(const KernelNonlinearity& f, double h, double x, const DiscreteMeasure& mu,
                         std::optional<double> cutoff) {
    double v = f.base.f(x, kernel_integral(f.base, x, mu), 0.0);
    if (!f.pert.trivial()) v += h * f.pert.f(x, kernel_integral(f.pert, x, mu), 0.0);
    if (cutoff) v *= cutoff_factor(tv_norm(mu), *cutoff);
    if (!std::isfinite(v)) throw ModelError("nonlinearity is not finite at x = " + format_double(x));
    return v;
}

double default_cutoff_threshold(const NonlinearProblem& p) {
    const KernelModel& m = p.model;
    const double tv0 = tv_norm(p.mu0);
    const double hmax = std::max(std::abs(m.h_min), std::abs(m.h_max));
    // Kernel integrals are bracketed by |y| <= mass_bound * sup|K|, sampled on [-M, M].
    auto sup = [&](const KernelNonlinearity& f) {
        double s = 0.0;
        const int nx = 129, ny = 33;
        const double M = std::max(m.mass_bound, tv0);
        for (int i = 0; i < nx; ++i) {
            const double x = m.x_max * i / (nx - 1);
            for (int j = 0; j < ny; ++j) {
                const double y = -M + 2.0 * M * j / (ny - 1);
                double v = std::abs(f.base.f(x, y, 0.0));
                if (!f.pert.trivial()) v += hmax * std::abs(f.pert.f(x, y, 0.0));
                s = std::max(s, v);
            }
        }
        return s;
    };
    return tv0 * std::exp((sup(m.a) + sup(m.c)) * 2.0 * p.T);
}

// ------------------------------------------------------- frozen coefficients

FrozenCoefficients::FrozenCoefficients(const KernelModel& m, double h, const DiscreteMeasure& mu, double factor,
                                       double x_hi)
    : m_(m), h_(h), mu_(mu), factor_(factor) {
    const KernelNonlinearity* fs[3] = {&m_.a, &m_.b, &m_.c};
    // Integrals of kernels that do not depend on x (or are ignored by F) are constants.
    for (int w = 0; w < 3; ++w) {
        const KernelPart* parts[2] = {&fs[w]->base, &fs[w]->pert};
        for (int j = 0; j < 2; ++j) {
            PartCache& c = cache_[w][j];
            if (!parts[j]->F.depends_on(Var::Y)) {
                c.constant = true;
            } else if (!parts[j]->K.depends_on(Var::X)) {
                c.constant = true;
                c.I = kernel_integral(*parts[j], 0.0, mu_);
            }
        }
    }
    if (mu_.size() <= 32 || x_hi <= 0.0) return;
    bool any = false;
    for (const auto* f : fs) any = any || needs_table(*f);
    if (!any) return;
    lo_ = 0.0;
    const int n = std::max(64, static_cast<int>(std::ceil(32.0 * x_hi)));
    step_ = x_hi / n;
    for (int w = 0; w < 3; ++w) {
        if (!needs_table(*fs[w])) continue;
        table_[w].resize(n + 1);
        for (int i = 0; i <= n; ++i) table_[w][i] = direct(w, lo_ + i * step_);
    }
}

// F(x, I(x)) with its x-derivative, I(x) = sum_i w_i K(x, y_i).
std::pair<double, double> FrozenCoefficients::part_value(const KernelPart& p, const PartCache& c, double x) const {
    if (p.trivial()) return {0.0, 0.0};
    double I = c.I, Ix = 0.0;
    if (!c.constant) {
        I = 0.0;
        for (const Atom& a : mu_.atoms) {
            I += a.weight * p.k(x, a.position, 0.0);
            Ix += a.weight * p.k_x(x, a.position, 0.0);
        }
    }
    return {p.f(x, I, 0.0), p.f_x(x, I, 0.0) + p.f_y(x, I, 0.0) * Ix};
}

CoefSample FrozenCoefficients::direct(int which, double x) const {
    const KernelNonlinearity& f = which == 0 ? m_.a : which == 1 ? m_.b : m_.c;
    auto [v, dx] = part_value(f.base, cache_[which][0], x);
    CoefSample s{v, dx, 0.0};
    if (!f.pert.trivial()) {
        auto [pv, pdx] = part_value(f.pert, cache_[which][1], x);
        s.v += h_ * pv;
        s.dx += h_ * pdx;
        s.dh = pv;
    }
    s.v *= factor_;
    s.dx *= factor_;
    s.dh *= factor_;
    return s;
}

CoefSample FrozenCoefficients::sample(int which, double x) const {
    const auto& t = table_[which];
    if (t.empty()) return direct(which, x);
    const double pos = (x - lo_) / step_;
    const int n = static_cast<int>(t.size()) - 1;
    if (!(pos >= 0.0 && pos <= n)) return direct(which, x);
    const int i = std::min(n - 1, static_cast<int>(pos));
    const double s = pos - i;
    const CoefSample &p = t[i], &q = t[i + 1];
    // Cubic Hermite for the value and its x-derivative, linear for dh.
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s, h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
    CoefSample out;
    out.v = h00 * p.v + h10 * step_ * p.dx + h01 * q.v + h11 * step_ * q.dx;
    out.dx = (6 * s2 - 6 * s) * (p.v - q.v) / step_ + (3 * s2 - 4 * s + 1) * p.dx + (3 * s2 - 2 * s) * q.dx;
    out.dh = (1 - s) * p.dh + s * q.dh;
    return out;
}

// ------------------------------------------------------------- dyadic scheme

double default_inner_dt(double T, int k) { return std::min(T / std::ldexp(1.0, k), T / 1024.0); }

namespace {

void check_frozen(const FrozenCoefficients& fc, double x_max, int node) {
    const int n = 129;
    for (int i = 0; i < n; ++i) {
        const double x = x_max * i / (n - 1);
        const double a = fc.a(x).v;
        if (!(a >= 0.0))
            throw FrozenModelError("frozen model violates a >= 0 at mesh node " + std::to_string(node) + " (x = " +
                                       format_double(x) + ", a = " + format_double(a) + ")",
                                   node);
    }
    const double b0 = fc.b(0.0).v;
    if (!(b0 > 0.0))
        throw FrozenModelError("frozen model violates b(0) > 0 at mesh node " + std::to_string(node) +
                                   " (b(0) = " + format_double(b0) + ")",
                               node);
}

double support_max(const DiscreteMeasure& mu) {
    double m = 0.0;
    for (const Atom& a : mu.atoms) m = std::max(m, a.position);
    return m;
}

}  // namespace

DyadicLevel solve_dyadic(const NonlinearProblem& p, int k, double dt_inner) {
    if (k < 0 || k > 24) throw std::invalid_argument("dyadic level must be in [0, 24]");
    if (!(p.T > 0.0)) throw std::invalid_argument("horizon must be positive");
    for (const Atom& a : p.mu0.atoms)
        if (a.weight < 0.0) throw std::invalid_argument("initial measure must be nonnegative");
    const long intervals = 1L << k;
    const double H = p.T / intervals;
    if (dt_inner <= 0.0) dt_inner = default_inner_dt(p.T, k);
    if (dt_inner > H * (1.0 + 1e-12)) throw std::invalid_argument("inner step exceeds the dyadic mesh width");
    const double ratio = H / dt_inner;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
        throw std::invalid_argument("inner step must divide the dyadic mesh width");

    DyadicLevel lvl;
    lvl.k = k;
    lvl.mesh.resize(intervals + 1);
    for (long m = 0; m <= intervals; ++m) lvl.mesh[m] = p.T * m / intervals;
    lvl.trajectory.dt = dt_inner;
    lvl.trajectory.birth_policy = "one cohort per inner step at X(dt/2, 0); coefficients frozen per dyadic interval";

    DiscreteMeasure mu = canonicalize(p.mu0);
    lvl.trajectory.times.push_back(0.0);
    lvl.trajectory.measures.push_back(mu);
    for (long m = 0; m < intervals; ++m) {
        const double factor = p.cutoff ? cutoff_factor(tv_norm(mu), *p.cutoff) : 1.0;
        // Table range: current support pushed by a generous speed bound.
        FrozenCoefficients probe(p.model, p.h, mu, factor);
        const double speed = std::abs(probe.b(support_max(mu)).v) + std::abs(probe.b(0.0).v) + 1.0;
        const double x_hi = support_max(mu) + 2.0 * speed * H + 1.0;
        FrozenCoefficients fc(p.model, p.h, mu, factor, x_hi);
        check_frozen(fc, std::max(p.model.x_max, x_hi), static_cast<int>(m));
        MeasureTrajectory piece = particle_steps(fc, mu, lvl.mesh[m], H, dt_inner);
        for (std::size_t i = 1; i < piece.times.size(); ++i) {
            lvl.trajectory.times.push_back(piece.times[i]);
            lvl.trajectory.measures.push_back(std::move(piece.measures[i]));
        }
        mu = lvl.trajectory.measures.back();
    }
    // Mesh nodes land on exact dyadic times.
    lvl.trajectory.times.back() = p.T;
    return lvl;
}

double cross_level_distance(const NonlinearProblem& p, int k, double t, double dt_inner) {
    if (!(t >= 0.0 && t <= p.T * (1.0 + 1e-12))) throw std::invalid_argument("t outside [0, T]");
    if (t == 0.0) return 0.0;
    if (dt_inner <= 0.0) dt_inner = default_inner_dt(p.T, k + 1);
    DyadicLevel a = solve_dyadic(p, k, dt_inner);
    DyadicLevel b = solve_dyadic(p, k + 1, dt_inner);
    return flat_distance(a.trajectory.at(t), b.trajectory.at(t)).value;
}

std::string HLipschitzReport::csv() const {
    std::ostringstream os;
    os << "dh,distance,ratio\n";
    for (const auto& r : rows) os << format_double(r.dh) << ',' << format_double(r.distance) << ',' << format_double(r.ratio) << '\n';
    return os.str();
}

HLipschitzReport h_lipschitz_scan(const NonlinearProblem& p, int k, double t, const std::vector<double>& dh_list,
                                  double dt_inner) {
    for (double dh : dh_list) {
        if (dh == 0.0) throw std::invalid_argument("dh must be nonzero");
        const double hh = p.h + dh;
        if (hh < p.model.h_min - 1e-12 || hh > p.model.h_max + 1e-12)
            throw std::invalid_argument("h + dh = " + format_double(hh) + " outside the model h-range");
    }
    HLipschitzReport rep;
    DyadicLevel base = solve_dyadic(p, k, dt_inner);
    for (const auto& m : base.trajectory.measures) rep.max_tv = std::max(rep.max_tv, tv_norm(m));
    const DiscreteMeasure& mt = base.trajectory.at(t);
    for (double dh : dh_list) {
        NonlinearProblem q = p;
        q.h = p.h + dh;
        DyadicLevel lv = solve_dyadic(q, k, dt_inner);
        HLipschitzRow row;
        row.dh = dh;
        row.distance = flat_distance(lv.trajectory.at(t), mt).value;
        row.ratio = row.distance / std::abs(dh);
        rep.finite = rep.finite && std::isfinite(row.ratio);
        rep.rows.push_back(row);
    }
    if (!std::isfinite(rep.max_tv)) rep.finite = false;
    if (rep.rows.size() >= 2) {
        std::vector<HLipschitzRow> sorted = rep.rows;
        std::sort(sorted.begin(), sorted.end(),
                  [](const HLipschitzRow& a, const HLipschitzRow& b) { return std::abs(a.dh) < std::abs(b.dh); });
        const double r1 = sorted[0].ratio, r2 = sorted[1].ratio;
        const double scale = std::max(r1, r2);
        rep.refinement_stable = scale == 0.0 || std::abs(r1 - r2) <= 0.2 * scale;
    }
    return rep;
}

}  // namespace spm
