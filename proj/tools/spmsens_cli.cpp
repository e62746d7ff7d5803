// spmsens: config-driven experiments for structured population models.
//
// Exit codes: 0 success, 2 configuration error, 3 model validation failure,
// 4 solver failure.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "spmsens/distances.hpp"
#include "spmsens/flow.hpp"
#include "spmsens/io.hpp"
#include "spmsens/linear.hpp"
#include "spmsens/model.hpp"
#include "spmsens/nonlinear.hpp"
#include "spmsens/parallel.hpp"
#include "spmsens/sensitivity.hpp"

namespace fs = std::filesystem;
using namespace spm;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ValidationFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Runs f, turning any failure into a configuration error.
template <class F>
auto config_stage(F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
}

class Run {
public:
    Run(KeyValueFile kv, fs::path config_dir, fs::path out, std::uint64_t seed)
        : kv_(std::move(kv)), dir_(std::move(config_dir)), out_(std::move(out)), seed_(seed) {}

    const KeyValueFile& kv() const { return kv_; }
    std::uint64_t seed() const { return seed_; }

    void allow(std::initializer_list<const char*> keys) {
        for (const char* k : keys) allowed_.insert(k);
    }
    void check_keys() const {
        for (const auto& [k, v] : kv_.values)
            if (!allowed_.count(k))
                throw ConfigError(kv_.source + ":" + std::to_string(kv_.lines.at(k)) + ": unknown key '" + k + "'");
    }

    std::string path(const std::string& key) const {
        fs::path p = kv_.get(key);
        if (p.is_relative()) p = dir_ / p;
        if (!fs::exists(p)) throw ConfigError(kv_.source + ": " + key + " refers to missing file " + p.string());
        return p.string();
    }
    double num(const std::string& key, double fallback) const { return kv_.get_double_or(key, fallback); }
    double num(const std::string& key) const { return kv_.get_double(key); }
    int integer(const std::string& key, long fallback) const { return static_cast<int>(kv_.get_int_or(key, fallback)); }
    std::vector<double> list(const std::string& key, const std::vector<double>& fallback) const {
        return kv_.get_double_list_or(key, fallback);
    }
    std::vector<int> int_list(const std::string& key, const std::vector<int>& fallback) const {
        if (!kv_.has(key)) return fallback;
        std::vector<int> out;
        for (double v : kv_.get_double_list_or(key, {})) {
            if (v != std::floor(v)) throw ConfigError(kv_.source + ": " + key + " must hold integers");
            out.push_back(static_cast<int>(v));
        }
        return out;
    }
    std::string text(const std::string& key, const std::string& fallback) const { return kv_.get_or(key, fallback); }

    void write(const std::string& name, const std::string& content) {
        fs::create_directories(out_);
        write_text((out_ / name).string(), content);
        files_.push_back(name);
    }
    void adopt(const std::vector<std::string>& names) { files_.insert(files_.end(), names.begin(), names.end()); }
    const fs::path& out() const { return out_; }

    std::ostringstream summary;
    void check(const std::string& name, bool pass, const std::string& detail) {
        summary << (pass ? "PASS " : "FAIL ") << name << ": " << detail << '\n';
    }

    void finish() {
        write("summary.txt", summary.str());
        std::ostringstream m;
        m << "file,sha256,bytes\n";
        std::vector<std::string> sorted = files_;
        std::sort(sorted.begin(), sorted.end());
        for (const auto& f : sorted) {
            std::string body = read_text((out_ / f).string());
            m << f << ',' << sha256_hex(body) << ',' << body.size() << '\n';
        }
        fs::create_directories(out_);
        write_text((out_ / "manifest.csv").string(), m.str());
        std::cout << summary.str();
    }

private:
    KeyValueFile kv_;
    fs::path dir_;
    fs::path out_;
    std::uint64_t seed_;
    std::set<std::string> allowed_{"run.kind", "run.seed", "run.out"};
    std::vector<std::string> files_;
};

std::string fmt(double v) { return format_double(v); }

std::string fit_line(const std::string& what, const RateFit& f) {
    if (!f.valid) return what + ": no fit (fewer than two positive values)";
    return what + ": slope " + fmt(f.slope) + " residual " + fmt(f.residual) + " over " +
           std::to_string(f.x.size() - f.skipped) + " points";
}

NormBudget metric_from(const Run& r) {
    const std::string m = r.text("numerics.metric", "z");
    if (m == "flat") return NormBudget::flat();
    if (m != "z") throw ConfigError("numerics.metric must be 'flat' or 'z'");
    NormBudget b = NormBudget::calpha(r.num("numerics.alpha", 0.75), r.integer("numerics.nodes", 257));
    b.grid.window = r.integer("numerics.window", 0);
    if (!(b.alpha > 0.0 && b.alpha <= 1.0)) throw ConfigError("numerics.alpha must lie in (0, 1]");
    if (b.grid.nodes < 3) throw ConfigError("numerics.nodes must be at least 3");
    return b;
}

struct Loaded {
    std::optional<LinearProblem> linear;
    std::optional<NonlinearProblem> kernel;
};

Loaded load_problem(Run& r, bool need_mu0) {
    return config_stage([&] {
        Loaded out;
        ModelFile mf = load_model_file(r.path("problem.model"));
        DiscreteMeasure mu0;
        if (need_mu0 || r.kv().has("problem.mu0")) mu0 = read_measure_csv(r.path("problem.mu0"));
        const double T = r.num("problem.T", 1.0);
        const double h = r.num("problem.h", 0.0);
        if (!(T > 0.0)) throw ConfigError("problem.T must be positive");
        if (mf.linear) {
            out.linear = LinearProblem{*mf.linear, h, mu0, T};
            if (h < mf.linear->h_min || h > mf.linear->h_max) throw ConfigError("problem.h outside the model h-range");
        } else {
            NonlinearProblem p;
            p.model = *mf.kernel;
            p.h = h;
            p.mu0 = mu0;
            p.T = T;
            const std::string cut = r.text("numerics.cutoff", "off");
            if (cut == "auto") {
                p.cutoff = default_cutoff_threshold(p);
            } else if (cut != "off") {
                p.cutoff = parse_double(cut, "numerics.cutoff");
            }
            if (h < p.model.h_min || h > p.model.h_max) throw ConfigError("problem.h outside the model h-range");
            out.kernel = std::move(p);
        }
        for (const Atom& a : mu0.atoms)
            if (a.weight < 0.0) throw ConfigError("problem.mu0 must be nonnegative");
        return out;
    });
}

void validate_stage(Run& r, const Loaded& p) {
    if (r.text("numerics.validate", "true") == "false") return;
    ValidationReport rep = p.linear ? validate_model(p.linear->model) : validate_model(p.kernel->model);
    r.write("validation.csv", rep.csv());
    if (!rep.passed()) throw ValidationFailure("model validation failed:\n" + rep.failures());
}

// ---------------------------------------------------------------- commands

void cmd_validate(Run& r) {
    r.allow({"problem.model", "problem.mu0", "problem.T", "problem.h", "numerics.samples", "numerics.regularity_T"});
    r.check_keys();
    Loaded p = load_problem(r, false);
    const int samples = config_stage([&] { return r.integer("numerics.samples", 64); });
    ValidationReport rep = p.linear ? validate_model(p.linear->model) : validate_model(p.kernel->model);
    r.write("validation.csv", rep.csv());
    for (const auto& c : rep.checks) r.check(c.name, c.pass, c.detail);
    if (p.linear && samples > 0) {
        RegularityReport reg = check_flow_regularity(p.linear->model, r.num("numerics.regularity_T", 1.0), samples,
                                                     1.0, r.seed());
        r.write("regularity.csv", reg.csv());
        for (const auto& b : reg.bounds)
            r.check("flow " + b.name, b.pass, "max ratio " + fmt(b.max_ratio.back()) + " at " +
                                                  std::to_string(b.samples.back()) + " samples");
    }
    if (!rep.passed()) {
        r.finish();
        throw ValidationFailure("model validation failed:\n" + rep.failures());
    }
}

void cmd_solve_linear(Run& r) {
    r.allow({"problem.model", "problem.mu0", "problem.T", "problem.h", "numerics.dt", "numerics.N",
             "numerics.save_every", "numerics.validate", "numerics.check_times", "compare.model", "compare.mu0",
             "compare.h"});
    r.check_keys();
    Loaded p = load_problem(r, true);
    if (!p.linear) throw ConfigError("solve-linear needs a linear model (keys a, b, c)");
    const double dt = config_stage([&] { return r.num("numerics.dt", 1.0 / 1024); });
    const int every = config_stage([&] { return r.integer("numerics.save_every", 64); });
    const int N = config_stage([&] { return r.integer("numerics.N", 0); });
    std::optional<LinearProblem> other;
    if (r.kv().has("compare.model")) {
        other = config_stage([&] {
            ModelFile mf = load_model_file(r.path("compare.model"));
            if (!mf.linear) throw ConfigError("compare.model must be linear");
            DiscreteMeasure mu = r.kv().has("compare.mu0") ? read_measure_csv(r.path("compare.mu0")) : p.linear->mu0;
            return LinearProblem{*mf.linear, r.num("compare.h", p.linear->h), mu, p.linear->T};
        });
    }
    validate_stage(r, p);

    ParticleOptions opt;
    opt.save_every = 1;
    MeasureTrajectory traj = solve_linear_particles(*p.linear, dt, opt);
    r.adopt(write_trajectory(r.out().string(), "mu", traj, -1, every));

    // Pairings of the final measure with the test bank, particles vs the dual route.
    std::ostringstream os;
    os << "xi,particles,dual,relative_error\n";
    double worst = 0.0;
    for (const auto& b : standard_test_bank()) {
        const double part = pair(traj.final(), b.f);
        const double dual = solve_linear_dual(*p.linear, TestFn::of(b.f, b.df), p.linear->T, N);
        const double rel = std::abs(part - dual) / std::max(1e-12, std::abs(dual));
        if (std::abs(dual) > 1e-8) worst = std::max(worst, rel);
        os << b.name << ',' << fmt(part) << ',' << fmt(dual) << ',' << fmt(rel) << '\n';
    }
    r.write("pairings.csv", os.str());
    r.summary << "final TV " << fmt(tv_norm(traj.final())) << ", atoms " << traj.final().size() << '\n';
    r.check("particle/dual agreement", worst <= 1e-3, "worst relative error " + fmt(worst) + " (tolerance 1e-3)");

    InequalityReport ineq = check_linear_inequalities(*p.linear, other ? *other : *p.linear, dt,
                                                      r.integer("numerics.check_times", 8));
    r.write("inequalities.csv", ineq.csv());
    r.check("stability inequalities", ineq.violations() == 0, std::to_string(ineq.violations()) + " violations");
}

void cmd_solve_nonlinear(Run& r) {
    r.allow({"problem.model", "problem.mu0", "problem.T", "problem.h", "numerics.k", "numerics.k_range",
             "numerics.dt_inner", "numerics.cutoff", "numerics.validate", "numerics.save_every", "numerics.t",
             "numerics.dh_list"});
    r.check_keys();
    Loaded p = load_problem(r, true);
    if (!p.kernel) throw ConfigError("solve-nonlinear needs a kernel model (keys F_*, K_*)");
    const NonlinearProblem& np = *p.kernel;
    std::vector<int> ks = config_stage([&] { return r.int_list("numerics.k_range", {r.integer("numerics.k", 4)}); });
    const double t = config_stage([&] { return r.num("numerics.t", np.T); });
    const int every = config_stage([&] { return r.integer("numerics.save_every", 64); });
    std::vector<double> dh_list = config_stage([&] { return r.list("numerics.dh_list", {}); });
    double dt_inner = config_stage([&] { return r.num("numerics.dt_inner", 0.0); });
    if (ks.empty()) throw ConfigError("numerics.k_range is empty");
    for (std::size_t i = 1; i < ks.size(); ++i)
        if (ks[i] != ks[i - 1] + 1) throw ConfigError("numerics.k_range must hold consecutive levels");
    for (double dh : dh_list)
        if (dh == 0.0 || np.h + dh < np.model.h_min || np.h + dh > np.model.h_max)
            throw ConfigError("numerics.dh_list: h + dh must stay inside the model h-range");
    if (dt_inner <= 0.0) dt_inner = default_inner_dt(np.T, *std::max_element(ks.begin(), ks.end()) + 1);
    validate_stage(r, p);
    if (np.cutoff) r.summary << "cutoff threshold " << fmt(*np.cutoff) << '\n';

    std::vector<int> levels = ks;
    if (ks.size() > 1) levels.push_back(ks.back() + 1);
    auto sol = parallel_map<DyadicLevel>(levels.size(), [&](std::size_t i) { return solve_dyadic(np, levels[i], dt_inner); });
    std::ostringstream tv;
    tv << "k,max_tv\n";
    for (const auto& lv : sol) {
        r.adopt(write_trajectory(r.out().string(), "level" + std::to_string(lv.k), lv.trajectory, lv.k, every));
        double m = 0.0;
        for (const auto& mu : lv.trajectory.measures) m = std::max(m, tv_norm(mu));
        tv << lv.k << ',' << fmt(m) << '\n';
    }
    r.write("level_tv.csv", tv.str());
    if (ks.size() > 1) {
        std::ostringstream os;
        os << "k,distance\n";
        std::vector<double> x, d;
        for (std::size_t i = 0; i < ks.size(); ++i) {
            const double v = flat_distance(sol[i].trajectory.at(t), sol[i + 1].trajectory.at(t)).value;
            os << ks[i] << ',' << fmt(v) << '\n';
            x.push_back(ks[i]);
            d.push_back(v);
        }
        r.write("cross_level.csv", os.str());
        RateFit f = fit_log2(x, d);
        r.summary << fit_line("cross-level p_F vs k", f) << '\n';
        r.check("cross-level decay rate", f.valid && f.rate() >= 0.8, "rate " + fmt(f.rate()) + " (threshold 0.8)");
    }
    if (!dh_list.empty()) {
        HLipschitzReport hl = h_lipschitz_scan(np, ks.front(), t, dh_list, dt_inner);
        r.write("h_lipschitz.csv", hl.csv());
        r.check("h-Lipschitz ratios", hl.finite && hl.refinement_stable,
                std::string(hl.refinement_stable ? "refinement stable" : "refinement divergent") +
                    ", max TV " + fmt(hl.max_tv));
    }
}

void distance_command(Run& r, bool z) {
    if (z)
        r.allow({"inputs.a", "inputs.b", "numerics.alpha", "numerics.nodes", "numerics.window", "numerics.metric"});
    else
        r.allow({"inputs.a", "inputs.b"});
    r.check_keys();
    auto [a, b, budget] = config_stage([&] {
        DiscreteMeasure a = read_measure_csv(r.path("inputs.a"));
        DiscreteMeasure b = read_measure_csv(r.path("inputs.b"));
        NormBudget budget = z ? metric_from(r) : NormBudget::flat();
        if (z && budget.kind != NormBudget::Kind::CAlphaDual) throw ConfigError("z-distance needs metric = z");
        return std::tuple{a, b, budget};
    });
    DistanceResult d = distance(a, b, budget);
    std::ostringstream os;
    os << "metric,value\n" << (z ? "z" : "flat") << ',' << fmt(d.value) << '\n';
    r.write("distance.csv", os.str());
    r.write("witness.csv", d.witness.csv());
    std::cout << fmt(d.value) << '\n';
    r.summary << budget.describe() << " distance " << fmt(d.value) << '\n';
    if (z)
        r.summary << "grid [" << fmt(d.grid_lo) << ", " << fmt(d.grid_hi) << "], " << d.grid_nodes << " nodes, window "
                  << d.window << ", duality gap " << fmt(d.duality_gap) << '\n';
}

HSolver solver_from(Run& r, const Loaded& p, double t) {
    Backend b = config_stage([&] {
        Backend b = Backend::parse(r.text("numerics.backend", p.linear ? "linear-dual" : "dyadic(4)"));
        b.dt = r.num("numerics.dt", 0.0);
        b.N = r.integer("numerics.N", 0);
        return b;
    });
    if (p.linear) return measure_solver(*p.linear, t, b);
    return measure_solver(*p.kernel, t, b);
}

void cmd_sensitivity(Run& r) {
    r.allow({"problem.model", "problem.mu0", "problem.T", "problem.h", "numerics.t", "numerics.dh_list",
             "numerics.metric", "numerics.alpha", "numerics.nodes", "numerics.window", "numerics.backend",
             "numerics.dt", "numerics.N", "numerics.dh0", "numerics.validate", "numerics.cutoff"});
    r.check_keys();
    Loaded p = load_problem(r, true);
    const double T = p.linear ? p.linear->T : p.kernel->T;
    const double h = p.linear ? p.linear->h : p.kernel->h;
    const double t = config_stage([&] { return r.num("numerics.t", T); });
    NormBudget metric = config_stage([&] { return metric_from(r); });
    std::vector<double> dh = config_stage([&] { return r.list("numerics.dh_list", default_dh_list()); });
    const double dh0 = config_stage([&] { return r.num("numerics.dh0", 0.0); });
    HSolver solve = config_stage([&] { return solver_from(r, p, t); });
    validate_stage(r, p);

    r.summary << "metric " << metric.describe() << ", t = " << fmt(t) << ", h = " << fmt(h) << '\n';
    if (dh.size() >= 2) {
        QuotientSet set = quotient_measures(solve, h, dh, t);
        CauchyDiagnostic c = cauchy_diagnostic(set, metric);
        r.write("cauchy.csv", c.csv());
        std::ostringstream tr;
        tr << "step,distance\n";
        for (std::size_t i = 0; i < c.trend.size(); ++i) tr << fmt(c.steps[i]) << ',' << fmt(c.trend[i]) << '\n';
        r.write("trend.csv", tr.str());
        r.write("witness.csv", c.witness.witness.csv());
        r.summary << (c.divergent ? "DIVERGENT" : "CONVERGENT") << ": smallest-step distance "
                  << fmt(c.trend.empty() ? 0.0 : c.trend.back()) << ", largest-step distance "
                  << fmt(c.trend.empty() ? 0.0 : c.trend.front()) << ", witness value " << fmt(c.witness.value)
                  << ", monotone " << (c.monotone ? "yes" : "no") << ", max among 3 smallest steps "
                  << fmt(c.max_smallest3) << '\n';
    } else {
        r.summary << "fewer than two steps: no Cauchy diagnostic (0 rows)\n";
    }
    if (dh0 > 0.0) {
        DerivativeEstimate e = derivative_estimate(solve, h, dh0, metric);
        r.write("derivative.csv", e.csv());
        write_text((r.out() / "derivative_measure.csv").string(), measure_csv(e.representation));
        r.adopt({"derivative_measure.csv"});
        r.summary << "derivative estimate at dh0 = " << fmt(dh0) << ", error bar " << fmt(e.error_bar) << '\n';
    }
}

void cmd_delta_kt(Run& r) {
    r.allow({"problem.model", "problem.mu0", "problem.T", "problem.h", "numerics.t", "numerics.k_range",
             "numerics.dh_list", "numerics.alpha", "numerics.nodes", "numerics.dt_inner", "numerics.validate",
             "numerics.cutoff"});
    r.check_keys();
    Loaded p = load_problem(r, true);
    if (!p.kernel) throw ConfigError("delta-kt needs a kernel model");
    const NonlinearProblem& np = *p.kernel;
    const double t = config_stage([&] { return r.num("numerics.t", np.T); });
    std::vector<int> ks = config_stage([&] { return r.int_list("numerics.k_range", {2, 3, 4, 5, 6}); });
    std::vector<double> dh = config_stage([&] { return r.list("numerics.dh_list", default_dh_list()); });
    std::vector<double> alphas = config_stage([&] { return r.list("numerics.alpha", {0.9}); });
    const int nodes = config_stage([&] { return r.integer("numerics.nodes", 257); });
    const double dt_inner = config_stage([&] { return r.num("numerics.dt_inner", 0.0); });
    for (double a : alphas)
        if (!(a > 0.0 && a <= 1.0)) throw ConfigError("numerics.alpha values must lie in (0, 1]");
    validate_stage(r, p);
    if (ks.empty() || dh.empty() || alphas.empty()) {
        r.summary << "empty study: 0 rows\n";
        r.write("delta_kt.csv", "k,dh,metric,value\n");
        return;
    }
    auto studies = delta_kt_study(np, t, ks, dh, alphas, nodes, dt_inner);
    std::string rows = "k,dh,metric,value\n";
    for (const auto& s : studies) {
        std::string body = s.csv();
        rows += body.substr(body.find('\n') + 1);
        r.write("delta_hat_alpha" + fmt(s.alpha) + ".csv", s.delta_csv());
        r.summary << fit_line("alpha " + fmt(s.alpha) + " log2 delta_hat vs k", s.fit) << '\n';
        if (s.alpha > 0.5) {
            const double need = s.target_rate - 0.4;
            r.check("delta_kt rate alpha " + fmt(s.alpha), s.fit.valid && s.fit.rate() >= need,
                    "rate " + fmt(s.fit.rate()) + " (threshold " + fmt(need) + ", asymptotic " + fmt(s.target_rate) +
                        ")");
        } else {
            r.summary << "REPORT delta_kt rate alpha " << fmt(s.alpha) << ": rate " << fmt(s.fit.rate())
                      << " (no gate for alpha <= 1/2)\n";
        }
    }
    r.write("delta_kt.csv", rows);
}

void cmd_holder_scan(Run& r) {
    r.allow({"problem.model", "problem.mu0", "problem.T", "problem.h", "numerics.t", "numerics.h_grid",
             "numerics.dh0", "numerics.metric", "numerics.alpha", "numerics.nodes", "numerics.window",
             "numerics.backend", "numerics.dt", "numerics.N", "numerics.validate", "numerics.cutoff"});
    r.check_keys();
    Loaded p = load_problem(r, true);
    const double T = p.linear ? p.linear->T : p.kernel->T;
    const double t = config_stage([&] { return r.num("numerics.t", T); });
    std::vector<double> hg = config_stage([&] { return r.list("numerics.h_grid", {0.0, 0.03125, 0.0625, 0.125, 0.25}); });
    const double dh0 = config_stage([&] { return r.num("numerics.dh0", 1.0 / 256); });
    NormBudget metric = config_stage([&] { return metric_from(r); });
    HSolver solve = config_stage([&] { return solver_from(r, p, t); });
    if (hg.size() < 4) throw ConfigError("numerics.h_grid needs at least 4 values");
    validate_stage(r, p);
    HolderScan s = holder_scan(solve, hg, dh0, metric);
    r.write("holder.csv", s.csv());
    if (s.constant_derivative) {
        r.summary << "constant derivative: all distances <= 1e-10, exponent undefined\n";
        return;
    }
    r.summary << fit_line("log2 distance vs log2 |h1 - h2|", s.fit) << '\n';
    if (metric.kind == NormBudget::Kind::CAlphaDual)
        r.check("Hölder exponent", s.fit.valid && s.fit.slope >= metric.alpha - 0.15,
                "exponent " + fmt(s.fit.slope) + " (threshold " + fmt(metric.alpha - 0.15) + ")");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sensitivity experiments for structured population models"};
    app.require_subcommand(1);
    std::string config, out;
    long long seed = -1;
    int threads = 0;
    struct Cmd {
        const char* name;
        const char* help;
        void (*fn)(Run&);
    };
    const Cmd cmds[] = {
        {"validate", "check model assumptions on a grid", cmd_validate},
        {"solve-linear", "particle solution of a linear model, checked against the dual route", cmd_solve_linear},
        {"solve-nonlinear", "dyadic splitting levels of a kernel model", cmd_solve_nonlinear},
        {"flat-distance", "flat metric between two measure files", [](Run& r) { distance_command(r, false); }},
        {"z-distance", "Hölder-dual norm distance between two measure files", [](Run& r) { distance_command(r, true); }},
        {"sensitivity", "difference quotients in h and their Cauchy diagnostic", cmd_sensitivity},
        {"delta-kt", "cross-level quotient study for kernel models", cmd_delta_kt},
        {"holder-scan", "Hölder continuity of the h-derivative", cmd_holder_scan},
    };
    for (const Cmd& c : cmds) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("--config", config, "experiment config (INI)")->required();
        sub->add_option("--out", out, "output directory (default: run.out from the config, else ./out)");
        sub->add_option("--seed", seed, "seed for randomized sampling (default: run.seed, else 1)");
        sub->add_option("--threads", threads, "worker threads (default: hardware concurrency)");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    const CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();

    try {
        KeyValueFile kv = config_stage([&] { return KeyValueFile::load(config); });
        if (kv.has("run.kind") && kv.get("run.kind") != name)
            throw ConfigError(config + ": run.kind = " + kv.get("run.kind") + " does not match subcommand " + name);
        fs::path dir = fs::path(config).parent_path();
        fs::path out_dir = !out.empty() ? fs::path(out) : fs::path(kv.get_or("run.out", "out"));
        if (out.empty() && out_dir.is_relative()) out_dir = dir / out_dir;
        const std::uint64_t s = config_stage([&] {
            return seed >= 0 ? static_cast<std::uint64_t>(seed) : static_cast<std::uint64_t>(kv.get_int_or("run.seed", 1));
        });
        set_thread_count(threads > 0 ? threads : std::max(1u, std::thread::hardware_concurrency()));
        Run run(std::move(kv), dir, out_dir, s);
        run.summary << "spmsens " << name << " (config " << config << ", seed " << s << ")\n";
        for (const Cmd& c : cmds)
            if (name == c.name) c.fn(run);
        run.finish();
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const ValidationFailure& e) {
        std::cerr << e.what();
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "solver error: " << e.what() << '\n';
        return 4;
    }
}
