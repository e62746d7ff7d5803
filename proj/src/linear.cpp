#include "spmsens/linear.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "spmsens/distances.hpp"
#include "spmsens/flow.hpp"
#include "spmsens/io.hpp"
#include "spmsens/parallel.hpp"

namespace spm {

const DiscreteMeasure& MeasureTrajectory::at(double t) const {
    auto it = std::lower_bound(times.begin(), times.end(), t - 1e-9 * std::max(dt, 1e-300));
    if (it == times.end() || std::abs(*it - t) > 1e-9 * std::max(dt, 1.0))
        throw std::out_of_range("time " + format_double(t) + " is not a saved time of the trajectory");
    return measures[static_cast<std::size_t>(it - times.begin())];
}

// ------------------------------------------------------------------ dual

double solve_linear_dual(std::shared_ptr<const LinearCoefficients> k, const DiscreteMeasure& mu0, const TestFn& xi,
                         double h, double t, int N) {
    if (t <= 0.0) return pair(mu0, [&](double x) { return xi.f(x, h); });
    if (N <= 0) N = default_volterra_nodes(t);
    DualSolution sol = solve_boundary_trace(build_pq(std::move(k), xi, h, t, N), h);
    std::vector<double> vals = parallel_map<double>(mu0.size(), [&](std::size_t i) {
        return mu0.atoms[i].weight * evaluate_dual(sol, 0.0, mu0.atoms[i].position);
    });
    double s = 0.0;
    for (double v : vals) s += v;
    return s;
}

double solve_linear_dual(const LinearProblem& p, const TestFn& xi, double t, int N) {
    if (t < 0.0 || t > p.T * (1.0 + 1e-12)) throw std::invalid_argument("t outside [0, T]");
    return solve_linear_dual(std::make_shared<ModelCoefficients>(p.model, p.h), p.mu0, xi, p.h, t, N);
}

// ------------------------------------------------------------ particles

namespace {

double advance(const LinearCoefficients& k, double x, double duration, int substeps) {
    const double dt = duration / substeps;
    for (int i = 0; i < substeps; ++i) {
        double k1 = k.b(x).v;
        double k2 = k.b(x + 0.5 * dt * k1).v;
        double k3 = k.b(x + 0.5 * dt * k2).v;
        double k4 = k.b(x + dt * k3).v;
        x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return x;
}

int step_count(double duration, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    double r = duration / dt;
    long n = std::lround(r);
    if (n < 1 || std::abs(r - static_cast<double>(n)) > 1e-9 * std::max(1.0, r))
        throw std::invalid_argument("dt = " + format_double(dt) + " does not divide the horizon " +
                                    format_double(duration));
    return static_cast<int>(n);
}

}  // namespace

MeasureTrajectory particle_steps(const LinearCoefficients& k, const DiscreteMeasure& start, double t0,
                                 double duration, double dt, const ParticleOptions& opt) {
    const int n = step_count(duration, dt);
    const int substeps = std::max(1, static_cast<int>(std::ceil(32.0 * dt - 1e-12)));
    MeasureTrajectory traj;
    traj.dt = dt;
    DiscreteMeasure mu = canonicalize(start);
    traj.times.push_back(t0);
    traj.measures.push_back(mu);
    const double newborn_x = advance(k, 0.0, 0.5 * dt, substeps);
    for (int step = 1; step <= n; ++step) {
        double births = 0.0;
        for (const Atom& a : mu.atoms) births += a.weight * k.a(a.position).v;
        DiscreteMeasure next;
        next.atoms.reserve(mu.size() + 1);
        next.atoms.push_back({newborn_x, dt * births});
        for (const Atom& a : mu.atoms) {
            double xm = advance(k, a.position, 0.5 * dt, substeps);
            double w = a.weight * std::exp(k.c(xm).v * dt);
            double xe = advance(k, xm, 0.5 * dt, substeps);
            if (!std::isfinite(w) || !std::isfinite(xe))
                throw std::runtime_error("particle state is not finite at step " + std::to_string(step));
            next.atoms.push_back({std::max(0.0, xe), w});
        }
        mu = canonicalize(next);
        if (opt.compact_eps > 0.0) mu = compact(mu, opt.compact_eps);
        if (step % std::max(1, opt.save_every) == 0 || step == n) {
            traj.times.push_back(t0 + duration * step / n);
            traj.measures.push_back(mu);
        }
    }
    return traj;
}

MeasureTrajectory solve_linear_particles(const LinearProblem& p, double dt, const ParticleOptions& opt) {
    for (const Atom& a : p.mu0.atoms)
        if (a.weight < 0.0) throw std::invalid_argument("initial measure must be nonnegative");
    ModelCoefficients k(p.model, p.h);
    return particle_steps(k, p.mu0, 0.0, p.T, dt, opt);
}

// ------------------------------------------------------- dual measure

DiscreteMeasure linear_dual_measure(const LinearCoefficients& k, const DiscreteMeasure& mu0, double t, int N) {
    DiscreteMeasure m0 = canonicalize(mu0);
    if (t <= 0.0) return m0;
    if (N < 2) throw std::invalid_argument("dual measure grid needs N >= 2");
    const double dt = t / N;
    const int substeps = std::max(1, static_cast<int>(std::ceil(64.0 * dt - 1e-12)));

    // Survivors and the first-generation birth rate g(tau) = sum_i w_i q(tau, x_i).
    std::vector<double> g(N + 1, 0.0);
    DiscreteMeasure out;
    for (const Atom& atom : m0.atoms) {
        FlowPath path = flow_path(k, atom.position, t, N, substeps);
        double I = 0.0, cprev = k.c(path.X[0]).v;
        g[0] += atom.weight * k.a(path.X[0]).v;
        for (int j = 1; j <= N; ++j) {
            double cv = k.c(path.X[j]).v;
            I += 0.5 * dt * (cprev + cv);
            cprev = cv;
            g[j] += atom.weight * k.a(path.X[j]).v * std::exp(I);
        }
        out.atoms.push_back({path.X[N], atom.weight * std::exp(I)});
    }

    // Characteristic from the boundary on the half-step grid.
    FlowPath b = flow_path(k, 0.0, t, 2 * N, std::max(1, substeps / 2));
    std::vector<double> E(2 * N + 1, 1.0);
    {
        double I = 0.0, cprev = k.c(b.X[0]).v;
        for (int j = 1; j <= 2 * N; ++j) {
            double cv = k.c(b.X[j]).v;
            I += 0.25 * dt * (cprev + cv);
            cprev = cv;
            E[j] = std::exp(I);
        }
    }
    std::vector<double> q0(N + 1);
    for (int j = 0; j <= N; ++j) q0[j] = k.a(b.X[2 * j]).v * E[2 * j];

    // Renewal equation B = g + int_0^tau q(tau - sigma, 0) B(sigma) dsigma, forward trapezoid march.
    std::vector<double> B(N + 1);
    const double diag = 1.0 - 0.5 * dt * q0[0];
    if (!(diag > 0.0)) throw VolterraError("renewal grid too coarse for the birth kernel");
    B[0] = g[0];
    for (int j = 1; j <= N; ++j) {
        double acc = 0.5 * q0[j] * B[0];
        for (int m = 1; m < j; ++m) acc += q0[j - m] * B[m];
        B[j] = (g[j] + dt * acc) / diag;
    }
    // Cohort born around sigma_{j+1/2} sits at X(t - sigma, 0) with growth E(t - sigma).
    for (int j = 0; j < N; ++j) {
        const int idx = 2 * (N - j) - 1;
        const double w = dt * 0.5 * (B[j] + B[j + 1]) * E[idx];
        if (w != 0.0) out.atoms.push_back({b.X[idx], w});
    }
    return canonicalize(out);
}

DiscreteMeasure linear_dual_measure(const LinearProblem& p, double t, int N) {
    ModelCoefficients k(p.model, p.h);
    return linear_dual_measure(k, p.mu0, t, N > 0 ? N : default_volterra_nodes(t));
}

// ---------------------------------------------------------- inequalities

CoefficientNorms coefficient_norms(const ModelTriple& m, double h, int points) {
    CoefficientNorms n;
    double ax = 0, bx = 0, cx = 0;
    for (int i = 0; i < points; ++i) {
        Point p{m.x_max * i / (points - 1), 0.0, h};
        n.a_inf = std::max(n.a_inf, std::abs(m.a.value(p)));
        n.b_inf = std::max(n.b_inf, std::abs(m.b.value(p)));
        n.c_inf = std::max(n.c_inf, std::abs(m.c.value(p)));
        ax = std::max(ax, std::abs(m.a.dx(p)));
        bx = std::max(bx, std::abs(m.b.dx(p)));
        cx = std::max(cx, std::abs(m.c.dx(p)));
    }
    n.a_w = n.a_inf + ax;
    n.b_w = n.b_inf + bx;
    n.c_w = n.c_inf + cx;
    return n;
}

double coefficient_distance(const ModelTriple& m, double h, const ModelTriple& n, double hn, int points) {
    double da = 0, db = 0, dc = 0;
    const double xmax = std::max(m.x_max, n.x_max);
    for (int i = 0; i < points; ++i) {
        double x = xmax * i / (points - 1);
        da = std::max(da, std::abs(m.a(x, h) - n.a(x, hn)));
        db = std::max(db, std::abs(m.b(x, h) - n.b(x, hn)));
        dc = std::max(dc, std::abs(m.c(x, h) - n.c(x, hn)));
    }
    return da + db + dc;
}

int InequalityReport::violations() const {
    return static_cast<int>(std::count_if(rows.begin(), rows.end(), [](const InequalityRow& r) { return !r.pass; }));
}

std::string InequalityReport::csv() const {
    std::ostringstream os;
    os << "name,t,lhs,rhs,pass,note\n";
    for (const auto& r : rows)
        os << r.name << ',' << format_double(r.t) << ',' << format_double(r.lhs) << ',' << format_double(r.rhs) << ','
           << (r.pass ? "pass" : "FAIL") << ',' << r.note << '\n';
    return os.str();
}

InequalityReport check_linear_inequalities(const LinearProblem& p, const LinearProblem& q, double dt, int check_times) {
    if (std::abs(p.T - q.T) > 1e-12 * std::max(1.0, p.T)) throw std::invalid_argument("problems must share T");
    const MeasureTrajectory mu = solve_linear_particles(p, dt);
    const MeasureTrajectory nu = solve_linear_particles(q, dt);
    const CoefficientNorms np = coefficient_norms(p.model, p.h), nq = coefficient_norms(q.model, q.h);
    const double W = std::max(np.a_w, nq.a_w) + std::max(np.b_w, nq.b_w) + std::max(np.c_w, nq.c_w);
    const double Wp = np.a_w + np.b_w + np.c_w;
    const double eps = coefficient_distance(p.model, p.h, q.model, q.h);
    const double pf0 = flat_distance(p.mu0, q.mu0).value;
    const double tv0 = tv_norm(canonicalize(p.mu0));
    const bool same_initial = tv_norm(difference(p.mu0, q.mu0)) == 0.0;
    const bool same_model = eps == 0.0;

    InequalityReport rep;
    auto add = [&](const std::string& name, double t, double lhs, double rhs, std::string note) {
        InequalityRow r{name, t, lhs, rhs, lhs <= rhs * (1.0 + 1e-9) + 1e-12, std::move(note)};
        rep.rows.push_back(std::move(r));
    };
    const int steps = static_cast<int>(mu.times.size()) - 1;
    for (int c = 1; c <= check_times; ++c) {
        const int idx = std::max(1, static_cast<int>(std::lround(static_cast<double>(steps) * c / check_times)));
        const double t = mu.times[idx];
        const double d = flat_distance(mu.measures[idx], nu.measures[idx]).value;
        if (same_initial) {
            const double C = 3.0 * W;
            std::string note = "C=3*sum W1inf=" + format_double(C);
            if (d > 0.0 && eps > 0.0 && tv0 > 0.0)
                note += "; smallest admissible C=" + format_double(std::max(0.0, std::log(d / (t * tv0 * eps)) / t));
            add("cont_model", t, d, t * std::exp(C * t) * tv0 * eps, note);
        }
        if (same_model) add("cont_initial", t, d, pf0 * std::exp(3.0 * Wp * t), "");
        if (!same_initial && !same_model) {
            const double C = 3.0 * W;
            add("cont_model+cont_initial", t, d, std::exp(C * t) * (pf0 + t * tv0 * eps), "C=" + format_double(C));
        }
        for (int which = 0; which < 2; ++which) {
            const MeasureTrajectory& tr = which ? nu : mu;
            const CoefficientNorms& n = which ? nq : np;
            if (idx >= static_cast<int>(tr.times.size()) - 1) {
                // Step back so that t + dt is still on the trajectory.
                const double a = flat_distance(tr.measures[idx - 1], tr.measures[idx]).value;
                const double C = (n.a_inf + n.b_inf + n.c_inf) * std::exp(n.c_inf * dt);
                add(which ? "cont_time(q)" : "cont_time(p)", tr.times[idx - 1], a, C * dt * tv_norm(tr.measures[idx - 1]),
                    "C=" + format_double(C));
            } else {
                const double a = flat_distance(tr.measures[idx], tr.measures[idx + 1]).value;
                const double C = (n.a_inf + n.b_inf + n.c_inf) * std::exp(n.c_inf * dt);
                add(which ? "cont_time(q)" : "cont_time(p)", t, a, C * dt * tv_norm(tr.measures[idx]),
                    "C=" + format_double(C));
            }
        }
        add("stability(p)", t, tv_norm(mu.measures[idx]), std::exp(2.0 * (np.a_inf + np.c_inf) * t) * tv0, "");
    }
    // Mass bound at every step of both trajectories.
    double worst = 0.0, worst_t = 0.0;
    for (int which = 0; which < 2; ++which) {
        const MeasureTrajectory& tr = which ? nu : mu;
        const CoefficientNorms& n = which ? nq : np;
        const double m0 = tv_norm(tr.measures.front());
        for (std::size_t i = 0; i < tr.times.size(); ++i) {
            const double bound = std::exp(2.0 * (n.a_inf + n.c_inf) * tr.times[i]) * m0;
            const double ratio = bound > 0.0 ? tv_norm(tr.measures[i]) / bound : 0.0;
            if (ratio > worst) {
                worst = ratio;
                worst_t = tr.times[i];
            }
        }
    }
    add("stability_all_steps", worst_t, worst, 1.0, "max TV / bound over both trajectories");
    return rep;
}

// ---------------------------------------------------------------- export

std::vector<std::string> write_trajectory(const std::string& dir, const std::string& prefix,
                                          const MeasureTrajectory& traj, int k, int every) {
    std::filesystem::create_directories(dir);
    std::vector<std::string> files;
    std::ostringstream index;
    index << (k >= 0 ? "k,t,filename,tv_norm\n" : "t,filename,tv_norm\n");
    const std::size_t n = traj.times.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (i % std::max(1, every) != 0 && i + 1 != n) continue;
        char name[64];
        std::snprintf(name, sizeof name, "%s_%05zu.csv", prefix.c_str(), i);
        write_measure_csv((std::filesystem::path(dir) / name).string(), traj.measures[i]);
        files.push_back(name);
        if (k >= 0) index << k << ',';
        index << format_double(traj.times[i]) << ',' << name << ',' << format_double(tv_norm(traj.measures[i])) << '\n';
    }
    const std::string index_name = prefix + "_index.csv";
    write_text((std::filesystem::path(dir) / index_name).string(), index.str());
    files.push_back(index_name);
    return files;
}

}  // namespace spm
