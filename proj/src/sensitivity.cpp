#include "spmsens/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "spmsens/io.hpp"
#include "spmsens/parallel.hpp"

namespace spm {

// ------------------------------------------------------------------ backends

std::string Backend::label() const {
    switch (kind) {
        case Kind::LinearDual: return "linear-dual";
        case Kind::LinearParticles: return "linear-particles";
        case Kind::Dyadic: return "dyadic(" + std::to_string(k) + ")";
    }
    return "";
}

Backend Backend::parse(const std::string& s) {
    Backend b;
    if (s == "linear-dual") {
        b.kind = Kind::LinearDual;
    } else if (s == "linear-particles") {
        b.kind = Kind::LinearParticles;
    } else if (s.rfind("dyadic(", 0) == 0 && s.size() > 8 && s.back() == ')') {
        b.kind = Kind::Dyadic;
        std::size_t used = 0;
        const std::string inner = s.substr(7, s.size() - 8);
        b.k = std::stoi(inner, &used);
        if (used != inner.size() || b.k < 0) throw std::invalid_argument("bad dyadic level in '" + s + "'");
    } else {
        throw std::invalid_argument("unknown backend '" + s + "' (linear-dual, linear-particles, dyadic(k))");
    }
    return b;
}

namespace {

void check_h(double h, double lo, double hi) {
    if (!(h >= lo - 1e-12 && h <= hi + 1e-12))
        throw std::invalid_argument("h = " + format_double(h) + " outside [" + format_double(lo) + ", " +
                                    format_double(hi) + "]");
}

}  // namespace

HSolver measure_solver(const LinearProblem& p, double t, const Backend& b) {
    if (!(t >= 0.0)) throw std::invalid_argument("t must be nonnegative");
    switch (b.kind) {
        case Backend::Kind::LinearDual:
            return [p, t, b](double h) {
                check_h(h, p.model.h_min, p.model.h_max);
                ModelCoefficients k(p.model, h);
                return linear_dual_measure(k, p.mu0, t, b.N > 0 ? b.N : default_volterra_nodes(t));
            };
        case Backend::Kind::LinearParticles:
            return [p, t, b](double h) {
                check_h(h, p.model.h_min, p.model.h_max);
                if (t == 0.0) return canonicalize(p.mu0);
                ModelCoefficients k(p.model, h);
                return particle_steps(k, p.mu0, 0.0, t, b.dt > 0.0 ? b.dt : 1.0 / 1024.0).final();
            };
        case Backend::Kind::Dyadic: break;
    }
    throw std::invalid_argument("the dyadic backend needs a kernel model");
}

HSolver measure_solver(const NonlinearProblem& p, double t, const Backend& b) {
    if (b.kind != Backend::Kind::Dyadic) throw std::invalid_argument("kernel models use the dyadic backend");
    if (!(t >= 0.0 && t <= p.T * (1.0 + 1e-12))) throw std::invalid_argument("t outside [0, T]");
    return [p, t, b](double h) {
        check_h(h, p.model.h_min, p.model.h_max);
        NonlinearProblem q = p;
        q.h = h;
        return solve_dyadic(q, b.k, b.dt).trajectory.at(t);
    };
}

// ----------------------------------------------------------------- quotients

QuotientPair QuotientSet::pair(std::size_t i, std::size_t j) const {
    return {dh.at(i), dh.at(j), q.at(i), q.at(j), h, t, backend};
}

DiscreteMeasure quotient(const DiscreteMeasure& plus, const DiscreteMeasure& base, double dh) {
    if (dh == 0.0) throw std::invalid_argument("dh must be nonzero");
    DiscreteMeasure q;
    q.atoms.reserve(plus.size() + base.size());
    for (const Atom& a : plus.atoms) q.atoms.push_back({a.position, a.weight / dh});
    for (const Atom& a : base.atoms) q.atoms.push_back({a.position, -a.weight / dh});
    return q;
}

QuotientSet quotient_measures(const HSolver& solve, double h, const std::vector<double>& dh_list, double t,
                              const std::string& backend) {
    QuotientSet s;
    s.h = h;
    s.t = t;
    s.backend = backend;
    s.dh = dh_list;
    for (double dh : dh_list)
        if (dh == 0.0) throw std::invalid_argument("dh must be nonzero");
    // Index 0 is the base solution.
    auto m = parallel_map<DiscreteMeasure>(dh_list.size() + 1,
                                           [&](std::size_t i) { return solve(i == 0 ? h : h + dh_list[i - 1]); });
    for (std::size_t i = 0; i < dh_list.size(); ++i) s.q.push_back(quotient(m[i + 1], m[0], dh_list[i]));
    return s;
}

// ----------------------------------------------------------------- diagnostic

std::string CauchyDiagnostic::csv() const {
    std::ostringstream os;
    os << "dh1,dh2,distance\n";
    for (std::size_t i = 0; i < dh.size(); ++i)
        for (std::size_t j = i + 1; j < dh.size(); ++j)
            os << format_double(dh[i]) << ',' << format_double(dh[j]) << ',' << format_double(matrix[i][j]) << '\n';
    return os.str();
}

CauchyDiagnostic cauchy_diagnostic(const QuotientSet& set, const NormBudget& metric) {
    const std::size_t n = set.q.size();
    if (n < 2) throw std::invalid_argument("the Cauchy diagnostic needs at least two quotients");
    CauchyDiagnostic d;
    d.dh = set.dh;
    d.matrix.assign(n, std::vector<double>(n, 0.0));
    std::vector<std::pair<std::size_t, std::size_t>> jobs;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) jobs.emplace_back(i, j);
    auto vals = parallel_map<double>(jobs.size(), [&](std::size_t r) {
        return distance(set.q[jobs[r].first], set.q[jobs[r].second], metric).value;
    });
    for (std::size_t r = 0; r < jobs.size(); ++r)
        d.matrix[jobs[r].first][jobs[r].second] = d.matrix[jobs[r].second][jobs[r].first] = vals[r];

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(set.dh[a]) > std::abs(set.dh[b]); });
    {
        std::vector<std::size_t> small(order.end() - std::min<std::size_t>(3, n), order.end());
        for (std::size_t a : small)
            for (std::size_t b : small) d.max_smallest3 = std::max(d.max_smallest3, d.matrix[a][b]);
    }

    // Group by magnitude; use +s/-s pairs when every magnitude has one.
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t i : order) {
        if (!groups.empty() && std::abs(std::abs(set.dh[groups.back()[0]]) - std::abs(set.dh[i])) <=
                                   1e-12 * std::abs(set.dh[i]))
            groups.back().push_back(i);
        else
            groups.push_back({i});
    }
    auto signed_pair = [&](const std::vector<std::size_t>& g) -> std::pair<long, long> {
        long pos = -1, neg = -1;
        for (std::size_t i : g) (set.dh[i] > 0 ? pos : neg) = static_cast<long>(i);
        return {pos, neg};
    };
    bool antisym = std::all_of(groups.begin(), groups.end(), [&](const auto& g) {
        auto [p, q] = signed_pair(g);
        return p >= 0 && q >= 0;
    });
    std::vector<std::pair<std::size_t, std::size_t>> trend_pairs;
    if (antisym) {
        for (const auto& g : groups) {
            auto [p, q] = signed_pair(g);
            d.steps.push_back(std::abs(set.dh[p]));
            trend_pairs.emplace_back(p, q);
        }
    } else {
        for (std::size_t r = 0; r + 1 < groups.size(); ++r) {
            d.steps.push_back(std::abs(set.dh[groups[r + 1][0]]));
            trend_pairs.emplace_back(groups[r][0], groups[r + 1][0]);
        }
    }
    for (auto [a, b] : trend_pairs) d.trend.push_back(d.matrix[a][b]);
    for (std::size_t r = 1; r < d.trend.size(); ++r)
        if (d.trend[r] > d.trend[r - 1] * (1.0 + 1e-9) + 1e-12) d.monotone = false;
    if (d.trend.size() >= 2) d.divergent = d.trend.front() > 1e-12 && d.trend.back() >= 0.5 * d.trend.front();
    if (!trend_pairs.empty()) {
        auto [a, b] = trend_pairs.back();
        d.witness = distance(set.q[a], set.q[b], metric);
    }
    return d;
}

// ---------------------------------------------------------------- test bank

std::vector<BankFunction> standard_test_bank() {
    std::vector<BankFunction> bank = {
        {"1", [](double) { return 1.0; }, [](double) { return 0.0; }},
        {"x", [](double x) { return x; }, [](double) { return 1.0; }},
        {"x^2", [](double x) { return x * x; }, [](double x) { return 2.0 * x; }},
        {"exp(-x)", [](double x) { return std::exp(-x); }, [](double x) { return -std::exp(-x); }},
        {"sin(x)", [](double x) { return std::sin(x); }, [](double x) { return std::cos(x); }},
    };
    const double width = 0.5;
    for (int i = 1; i <= 6; ++i) {
        const double c = 0.5 * i;
        auto f = [c, width](double x) {
            const double u = (x - c) / width;
            return std::abs(u) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - u * u)) : 0.0;
        };
        auto df = [c, width](double x) {
            const double u = (x - c) / width;
            if (std::abs(u) >= 1.0) return 0.0;
            const double s = 1.0 - u * u;
            return std::exp(1.0 - 1.0 / s) * (-2.0 * u / (s * s)) / width;
        };
        bank.push_back({"bump(x-" + format_double(c) + ")", f, df});
    }
    return bank;
}

// ---------------------------------------------------------------- derivative

std::string DerivativeEstimate::csv() const {
    std::ostringstream os;
    os << "xi,value\n";
    for (const auto& [name, v] : table) os << name << ',' << format_double(v) << '\n';
    return os.str();
}

DerivativeEstimate derivative_estimate(const HSolver& solve, double h, double dh0, const NormBudget& metric,
                                       const std::vector<BankFunction>& bank) {
    if (!(dh0 > 0.0)) throw std::invalid_argument("dh0 must be positive");
    const double steps[4] = {h + dh0, h - dh0, h + 0.5 * dh0, h - 0.5 * dh0};
    std::vector<DiscreteMeasure> m(4);
    for (int i = 0; i < 4; ++i) m[i] = solve(steps[i]);
    DiscreteMeasure s1 = quotient(m[0], m[1], 2.0 * dh0);
    DiscreteMeasure s2 = quotient(m[2], m[3], dh0);
    DerivativeEstimate e;
    e.dh_used = dh0;
    e.representation = combine(s2, 4.0 / 3.0, s1, -1.0 / 3.0);
    e.error_bar = distance(s1, s2, metric).value;
    for (const auto& b : bank) e.table.emplace_back(b.name, pair(e.representation, b.f));
    return e;
}

// ---------------------------------------------------------------------- fits

RateFit fit_log2(const std::vector<double>& x, const std::vector<double>& values) {
    if (x.size() != values.size()) throw std::invalid_argument("fit needs matching abscissae and values");
    RateFit f;
    f.x = x;
    f.values = values;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (values[i] > 0.0 && std::isfinite(values[i])) {
            xs.push_back(x[i]);
            ys.push_back(std::log2(values[i]));
        } else {
            ++f.skipped;
        }
    }
    if (xs.size() < 2) return f;
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx == 0.0) return f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (f.intercept + f.slope * xs[i]);
        ss += r * r;
    }
    f.residual = std::sqrt(ss / n);
    f.valid = true;
    return f;
}

std::string HolderScan::csv() const {
    std::ostringstream os;
    os << "h1,h2,distance\n";
    for (const auto& r : rows) os << format_double(r.h1) << ',' << format_double(r.h2) << ',' << format_double(r.distance) << '\n';
    return os.str();
}

HolderScan holder_scan(const HSolver& solve, const std::vector<double>& h_grid, double dh0, const NormBudget& metric) {
    if (h_grid.size() < 4) throw std::invalid_argument("the Hölder scan needs at least 4 h values");
    const std::vector<BankFunction> none;
    auto est = parallel_map<DerivativeEstimate>(
        h_grid.size(), [&](std::size_t i) { return derivative_estimate(solve, h_grid[i], dh0, metric, none); });
    HolderScan s;
    std::vector<std::pair<std::size_t, std::size_t>> jobs;
    for (std::size_t i = 0; i < h_grid.size(); ++i)
        for (std::size_t j = i + 1; j < h_grid.size(); ++j) jobs.emplace_back(i, j);
    auto vals = parallel_map<double>(jobs.size(), [&](std::size_t r) {
        if (h_grid[jobs[r].first] == h_grid[jobs[r].second]) return 0.0;
        return distance(est[jobs[r].first].representation, est[jobs[r].second].representation, metric).value;
    });
    std::vector<double> x, y;
    s.constant_derivative = true;
    for (std::size_t r = 0; r < jobs.size(); ++r) {
        const double h1 = h_grid[jobs[r].first], h2 = h_grid[jobs[r].second];
        s.rows.push_back({h1, h2, vals[r]});
        if (vals[r] > 1e-10) s.constant_derivative = false;
        if (h1 != h2) {
            x.push_back(std::log2(std::abs(h1 - h2)));
            y.push_back(vals[r]);
        }
    }
    if (!s.constant_derivative) s.fit = fit_log2(x, y);
    return s;
}

RateFit cauchy_rate(const HSolver& solve, double h, const std::vector<double>& steps, const NormBudget& metric) {
    std::vector<double> dh;
    for (double s : steps) {
        if (!(s > 0.0)) throw std::invalid_argument("steps must be positive");
        dh.push_back(s);
        dh.push_back(-s);
    }
    QuotientSet set = quotient_measures(solve, h, dh);
    auto vals = parallel_map<double>(steps.size(), [&](std::size_t i) {
        return distance(set.q[2 * i], set.q[2 * i + 1], metric).value;
    });
    std::vector<double> x;
    for (double s : steps) x.push_back(std::log2(s));
    return fit_log2(x, vals);
}

// ------------------------------------------------------------------ delta kt

std::vector<double> default_dh_list() {
    std::vector<double> v;
    for (int e = 3; e <= 8; ++e) {
        v.push_back(std::ldexp(1.0, -e));
        v.push_back(-std::ldexp(1.0, -e));
    }
    return v;
}

namespace {

std::string metric_label(double alpha) { return "z(alpha=" + format_double(alpha) + ")"; }

}  // namespace

std::string DeltaKtStudy::csv() const {
    std::ostringstream os;
    os << "k,dh,metric,value\n";
    for (const auto& r : rows)
        os << r.k << ',' << format_double(r.dh) << ',' << metric_label(alpha) << ',' << format_double(r.value) << '\n';
    return os.str();
}

std::string DeltaKtStudy::delta_csv() const {
    std::ostringstream os;
    os << "k,delta_hat\n";
    for (std::size_t i = 0; i < k.size(); ++i) os << k[i] << ',' << format_double(delta_hat[i]) << '\n';
    return os.str();
}

std::vector<DeltaKtStudy> delta_kt_study(const NonlinearProblem& p, double t, const std::vector<int>& k_range,
                                         const std::vector<double>& dh_list, const std::vector<double>& alphas,
                                         int nodes, double dt_inner) {
    if (k_range.empty() || dh_list.empty()) throw std::invalid_argument("delta study needs levels and steps");
    for (std::size_t i = 1; i < k_range.size(); ++i)
        if (k_range[i] <= k_range[i - 1]) throw std::invalid_argument("k_range must be ascending");
    for (double dh : dh_list) {
        if (dh == 0.0) throw std::invalid_argument("dh must be nonzero");
        check_h(p.h + dh, p.model.h_min, p.model.h_max);
    }
    std::vector<int> levels;
    for (int k : k_range) {
        levels.push_back(k);
        levels.push_back(k + 1);
    }
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    if (dt_inner <= 0.0) dt_inner = default_inner_dt(p.T, levels.back());

    // Solutions at (level, h) and (level, h + dh), all at time t.
    const std::size_t nh = dh_list.size() + 1;
    auto sol = parallel_map<DiscreteMeasure>(levels.size() * nh, [&](std::size_t idx) {
        NonlinearProblem q = p;
        const std::size_t j = idx % nh;
        q.h = j == 0 ? p.h : p.h + dh_list[j - 1];
        return solve_dyadic(q, levels[idx / nh], dt_inner).trajectory.at(t);
    });
    auto level_index = [&](int k) {
        return static_cast<std::size_t>(std::lower_bound(levels.begin(), levels.end(), k) - levels.begin());
    };
    std::vector<DiscreteMeasure> diffs;
    std::vector<std::pair<int, double>> keys;
    for (int k : k_range) {
        const std::size_t a = level_index(k), b = level_index(k + 1);
        for (std::size_t j = 0; j < dh_list.size(); ++j) {
            DiscreteMeasure qa = quotient(sol[a * nh + j + 1], sol[a * nh], dh_list[j]);
            DiscreteMeasure qb = quotient(sol[b * nh + j + 1], sol[b * nh], dh_list[j]);
            diffs.push_back(combine(qb, 1.0, qa, -1.0));
            keys.emplace_back(k, dh_list[j]);
        }
    }
    std::vector<DeltaKtStudy> out;
    for (double alpha : alphas) {
        DeltaKtStudy s;
        s.alpha = alpha;
        s.target_rate = 2.0 * alpha - 1.0;
        const NormBudget budget = NormBudget::calpha(alpha, nodes);
        auto vals = parallel_map<double>(diffs.size(), [&](std::size_t i) { return z_norm(diffs[i], budget).value; });
        for (std::size_t i = 0; i < diffs.size(); ++i) s.rows.push_back({keys[i].first, keys[i].second, vals[i]});
        std::vector<double> x;
        for (int k : k_range) {
            double m = 0.0;
            for (const auto& r : s.rows)
                if (r.k == k) m = std::max(m, r.value);
            s.k.push_back(k);
            s.delta_hat.push_back(m);
            x.push_back(k);
        }
        s.fit = fit_log2(x, s.delta_hat);
        out.push_back(std::move(s));
    }
    return out;
}

DeltaKtStudy delta_kt_study(const NonlinearProblem& p, double t, const std::vector<int>& k_range,
                            const std::vector<double>& dh_list, double alpha, int nodes, double dt_inner) {
    return delta_kt_study(p, t, k_range, dh_list, std::vector<double>{alpha}, nodes, dt_inner).front();
}

// ---------------------------------------------------------------- taylor gap

TaylorGap taylor_gap_check(const std::function<double(double)>& f, double holder_constant, double alpha,
                           const std::vector<double>& h_grid, const std::vector<double>& dh_list) {
    TaylorGap g;
    for (double h1 : h_grid)
        for (double h2 : h_grid)
            for (double d1 : dh_list)
                for (double d2 : dh_list) {
                    if (d1 == 0.0 || d2 == 0.0) continue;
                    const double lhs = std::abs((f(h1 + d1) - f(h1)) / d1 - (f(h2 + d2) - f(h2)) / d2);
                    const double rhs =
                        holder_constant * ((std::pow(std::abs(d1), alpha) + std::pow(std::abs(d2), alpha)) / (1.0 + alpha) +
                                           std::pow(std::abs(h1 - h2), alpha));
                    ++g.samples;
                    g.worst_lhs = std::max(g.worst_lhs, lhs);
                    if (rhs > 0.0) g.worst_ratio = std::max(g.worst_ratio, lhs / rhs);
                }
    return g;
}

}  // namespace spm
