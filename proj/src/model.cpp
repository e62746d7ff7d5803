#include "spmsens/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace spm {

namespace {

Expr parse_keyed(const std::string& key, const std::string& source) {
    try {
        return parse_expr(source);
    } catch (const ParseError& e) {
        throw ModelError(key + ": " + e.what() + " (offset " + std::to_string(e.offset()) + ")");
    }
}

std::vector<double> linspace(double lo, double hi, int n) {
    if (n <= 1 || lo == hi) return {lo};
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
    v.back() = hi;
    return v;
}

std::string point_text(const Point& p) {
    std::ostringstream os;
    os << "x=" << format_double(p.x) << " y=" << format_double(p.y) << " h=" << format_double(p.h);
    return os.str();
}

// Running minimum / maximum with the arg point.
struct Extremum {
    double value;
    Point at;
    bool lower;
    explicit Extremum(bool lower_)
        : value(lower_ ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity()),
          lower(lower_) {}
    void add(double v, const Point& p) {
        if (lower ? v < value : v > value) {
            value = v;
            at = p;
        }
    }
};

struct FiniteScan {
    bool ok = true;
    Point at;
    std::string what;
    void add(double v, const Point& p, const std::string& name) {
        if (ok && !std::isfinite(v)) {
            ok = false;
            at = p;
            what = name;
        }
    }
};

AssumptionCheck finite_check(const FiniteScan& s) {
    AssumptionCheck c;
    c.name = "finite";
    c.pass = s.ok;
    c.worst = s.at;
    c.detail = s.ok ? "all evaluations finite" : s.what + " is not finite at " + point_text(s.at);
    if (!s.ok) c.worst_value = std::numeric_limits<double>::quiet_NaN();
    return c;
}

void derivative_issues(const std::string& name, const Expr& e, Var v, const std::vector<Point>& pts,
                       AssumptionCheck& check) {
    if (!check.pass) return;
    auto issues = check_derivative(e, v, pts);
    if (issues.empty()) return;
    check.pass = false;
    check.worst = issues.front().at;
    check.worst_value = issues.front().symbolic;
    std::ostringstream os;
    os << "d" << name << "/d" << var_name(v) << " at " << point_text(issues.front().at) << ": symbolic "
       << format_double(issues.front().symbolic) << ", finite difference "
       << format_double(issues.front().finite_difference);
    check.detail = os.str();
}

}  // namespace

// ------------------------------------------------------------ functions

ModelFunction::ModelFunction(const Expr& e)
    : expr(e), d_x(differentiate(e, Var::X)), d_h(differentiate(e, Var::H)), value(e), dx(d_x), dh(d_h) {
    affine_in_h = differentiate(d_h, Var::H).is_const(0.0);
}

ModelFunction ModelFunction::parse(const std::string& source) { return ModelFunction(parse_expr(source)); }

ModelTriple ModelTriple::parse(const std::string& a, const std::string& b, const std::string& c) {
    ModelTriple m;
    const std::pair<const char*, const std::string*> src[] = {{"a", &a}, {"b", &b}, {"c", &c}};
    ModelFunction* dst[] = {&m.a, &m.b, &m.c};
    for (int i = 0; i < 3; ++i) {
        Expr e = parse_keyed(src[i].first, *src[i].second);
        if (e.depends_on(Var::Y)) throw ModelError(std::string(src[i].first) + ": y is not a variable of a, b, c");
        *dst[i] = ModelFunction(e);
    }
    return m;
}

bool ModelTriple::depends_on_h() const {
    return a.expr.depends_on(Var::H) || b.expr.depends_on(Var::H) || c.expr.depends_on(Var::H);
}

KernelPart::KernelPart(const Expr& F_, const Expr& K_)
    : F(F_),
      K(K_),
      f(F_),
      f_x(differentiate(F_, Var::X)),
      f_y(differentiate(F_, Var::Y)),
      k(K_),
      k_x(differentiate(K_, Var::X)) {
    Expr kx = differentiate(K_, Var::X);
    Expr ky = differentiate(K_, Var::Y);
    k_xx = differentiate(kx, Var::X);
    k_xy = differentiate(kx, Var::Y);
    k_yy = differentiate(ky, Var::Y);
}

KernelNonlinearity KernelNonlinearity::parse(const std::string& F0, const std::string& K0, const std::string& Fp,
                                             const std::string& Kp) {
    KernelNonlinearity n;
    Expr f0 = parse_keyed("F", F0), k0 = parse_keyed("K", K0), fp = parse_keyed("Fp", Fp),
         kp = parse_keyed("Kp", Kp);
    for (const Expr* e : {&f0, &k0, &fp, &kp})
        if (e->depends_on(Var::H)) throw ModelError("kernel functions must not depend on h (use Fp/Kp)");
    n.base = KernelPart(f0, k0);
    n.pert = KernelPart(fp, kp);
    return n;
}

KernelNonlinearity KernelNonlinearity::constant_in_measure(const Expr& f0, const Expr& fp) {
    KernelNonlinearity n;
    n.base = KernelPart(f0, Expr());
    n.pert = KernelPart(fp, Expr());
    return n;
}

// ---------------------------------------------------------------- files

ModelFile load_model(const KeyValueFile& kv) {
    ModelFile out;
    auto ranges = [&](auto& m) {
        m.h_min = kv.get_double_or("h_min", m.h_min);
        m.h_max = kv.get_double_or("h_max", m.h_max);
        m.x_max = kv.get_double_or("x_max", m.x_max);
        if (!(m.h_min <= m.h_max)) throw ModelError(kv.source + ": h_min > h_max");
        if (!(m.x_max > 0.0)) throw ModelError(kv.source + ": x_max must be positive");
    };
    const bool kernel = kv.has("F_a") || kv.has("F_b") || kv.has("F_c");
    if (kernel) {
        if (kv.has("a") || kv.has("b") || kv.has("c"))
            throw ModelError(kv.source + ": mixes linear keys (a, b, c) with kernel keys (F_*)");
        KernelModel m;
        KernelNonlinearity* dst[] = {&m.a, &m.b, &m.c};
        const char* names[] = {"a", "b", "c"};
        for (int i = 0; i < 3; ++i) {
            std::string n = names[i];
            if (i == 1 && !kv.has("F_b")) throw ModelError(kv.source + ": missing required key 'F_b'");
            *dst[i] = KernelNonlinearity::parse(kv.get_or("F_" + n, "0"), kv.get_or("K_" + n, "0"),
                                                kv.get_or("Fp_" + n, "0"), kv.get_or("Kp_" + n, "0"));
        }
        ranges(m);
        m.mass_bound = kv.get_double_or("mass_bound", m.mass_bound);
        out.kernel = std::move(m);
    } else {
        if (!kv.has("b")) throw ModelError(kv.source + ": missing required key 'b'");
        ModelTriple m = ModelTriple::parse(kv.get_or("a", "0"), kv.get("b"), kv.get_or("c", "0"));
        ranges(m);
        out.linear = std::move(m);
    }
    return out;
}

ModelFile load_model_file(const std::string& path) { return load_model(KeyValueFile::load(path)); }

// ----------------------------------------------------------- validation

bool ValidationReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const AssumptionCheck& c) { return c.pass; });
}

const AssumptionCheck* ValidationReport::find(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

std::string ValidationReport::failures() const {
    std::string out;
    for (const auto& c : checks)
        if (!c.pass) out += c.name + ": " + c.detail + "\n";
    return out;
}

std::string ValidationReport::csv() const {
    std::ostringstream os;
    os << "assumption,pass,worst_value,x,y,h,detail\n";
    for (const auto& c : checks) {
        std::string d = c.detail;
        std::replace(d.begin(), d.end(), ',', ';');
        os << c.name << ',' << (c.pass ? "pass" : "FAIL") << ',' << format_double(c.worst_value) << ','
           << format_double(c.worst.x) << ',' << format_double(c.worst.y) << ',' << format_double(c.worst.h) << ','
           << d << '\n';
    }
    return os.str();
}

ValidationReport validate_model(const ModelTriple& m, const ValidationGrid& grid) {
    const std::vector<double> xs = linspace(0.0, m.x_max, grid.x_points);
    const std::vector<double> hs = linspace(m.h_min, m.h_max, grid.h_points);
    const ModelFunction* fns[] = {&m.a, &m.b, &m.c};
    const char* names[] = {"a", "b", "c"};

    FiniteScan finite;
    Extremum amin(true), b0min(true);
    double sup[3][3] = {};
    for (double h : hs) {
        for (double x : xs) {
            Point p{x, 0.0, h};
            for (int f = 0; f < 3; ++f) {
                double v[3] = {fns[f]->value(p), fns[f]->dx(p), fns[f]->dh(p)};
                const char* part[3] = {"", "_x", "_h"};
                for (int k = 0; k < 3; ++k) {
                    finite.add(v[k], p, std::string(names[f]) + part[k]);
                    if (std::isfinite(v[k])) sup[f][k] = std::max(sup[f][k], std::abs(v[k]));
                }
            }
            amin.add(m.a.value(p), p);
        }
        b0min.add(m.b.value({0.0, 0.0, h}), {0.0, 0.0, h});
    }

    ValidationReport r;
    r.checks.push_back(finite_check(finite));

    AssumptionCheck bounded;
    bounded.name = "B2 bounded";
    bounded.pass = finite.ok;
    {
        std::ostringstream os;
        for (int f = 0; f < 3; ++f)
            os << (f ? " " : "") << "|" << names[f] << "|=" << format_double(sup[f][0]) << " |" << names[f]
               << "_x|=" << format_double(sup[f][1]) << " |" << names[f] << "_h|=" << format_double(sup[f][2]);
        bounded.detail = os.str();
        for (auto& row : sup)
            for (double v : row) bounded.worst_value = std::max(bounded.worst_value, v);
    }
    r.checks.push_back(bounded);

    AssumptionCheck a2;
    a2.name = "A2 a>=0";
    a2.pass = amin.value >= 0.0;
    a2.worst_value = amin.value;
    a2.worst = amin.at;
    a2.detail = "min a = " + format_double(amin.value) + " at " + point_text(amin.at);
    r.checks.push_back(a2);

    AssumptionCheck a3;
    a3.name = "A3 b(h,0)>0";
    a3.pass = b0min.value > 0.0;
    a3.worst_value = b0min.value;
    a3.worst = b0min.at;
    a3.detail = "min b(h,0) = " + format_double(b0min.value) + " at " + point_text(b0min.at);
    r.checks.push_back(a3);

    // Symbolic partials against finite differences on a coarse sub-grid.
    AssumptionCheck deriv;
    deriv.name = "derivatives";
    deriv.detail = "symbolic partials match finite differences";
    std::vector<Point> pts;
    const std::size_t xstride = std::max<std::size_t>(1, xs.size() / 32);
    const std::size_t hstride = std::max<std::size_t>(1, hs.size() / 8);
    for (std::size_t j = 0; j < hs.size(); j += hstride)
        for (std::size_t i = 0; i < xs.size(); i += xstride) pts.push_back({xs[i], 0.0, hs[j]});
    for (int f = 0; f < 3; ++f) {
        derivative_issues(names[f], fns[f]->expr, Var::X, pts, deriv);
        derivative_issues(names[f], fns[f]->expr, Var::H, pts, deriv);
    }
    r.checks.push_back(deriv);
    return r;
}

ValidationReport validate_model(const KernelModel& m, const ValidationGrid& grid) {
    const std::vector<double> xs = linspace(0.0, m.x_max, grid.x_points);
    const std::vector<double> hs = linspace(m.h_min, m.h_max, grid.h_points);
    const std::vector<double> kx = linspace(0.0, m.x_max, std::min(grid.x_points, 129));
    const KernelNonlinearity* fns[] = {&m.a, &m.b, &m.c};
    const char* names[] = {"a", "b", "c"};

    ValidationReport r;
    FiniteScan finite;
    double sup_first = 0.0, sup_second = 0.0;
    // Range of the kernel integral for nonnegative measures of mass <= mass_bound.
    double ylo[3][2], yhi[3][2];
    for (int f = 0; f < 3; ++f) {
        const KernelPart* parts[2] = {&fns[f]->base, &fns[f]->pert};
        for (int q = 0; q < 2; ++q) {
            const KernelPart& kp = *parts[q];
            CompiledExpr kxx(kp.k_xx), kxy(kp.k_xy), kyy(kp.k_yy);
            double kmin = 0.0, kmax = 0.0;
            std::string nm = std::string(q ? "Kp_" : "K_") + names[f];
            for (double x : kx)
                for (double y : kx) {
                    Point p{x, y, 0.0};
                    double v = kp.k(p), d = kp.k_x(p), s[3] = {kxx(p), kxy(p), kyy(p)};
                    finite.add(v, p, nm);
                    finite.add(d, p, nm + "_x");
                    for (double sv : s) finite.add(sv, p, nm + " second partial");
                    if (std::isfinite(v)) {
                        kmin = std::min(kmin, v);
                        kmax = std::max(kmax, v);
                    }
                    if (std::isfinite(d)) sup_first = std::max(sup_first, std::abs(d));
                    for (double sv : s)
                        if (std::isfinite(sv)) sup_second = std::max(sup_second, std::abs(sv));
                }
            ylo[f][q] = m.mass_bound * kmin;
            yhi[f][q] = m.mass_bound * kmax;
        }
    }

    // Per-x minima of F0(x, .) and of h*Fp(x, .) over the admissible ranges.
    auto part_min = [&](int f, int q, double x, double hscale, Point& at) {
        const KernelPart& kp = q ? fns[f]->pert : fns[f]->base;
        double best = std::numeric_limits<double>::infinity();
        for (double y : linspace(ylo[f][q], yhi[f][q], grid.y_points)) {
            Point p{x, y, 0.0};
            double v = kp.f(p), vx = kp.f_x(p), vy = kp.f_y(p);
            std::string nm = std::string(q ? "Fp_" : "F_") + names[f];
            finite.add(v, p, nm);
            finite.add(vx, p, nm + "_x");
            finite.add(vy, p, nm + "_y");
            if (std::isfinite(vx)) sup_first = std::max(sup_first, std::abs(vx));
            if (std::isfinite(vy)) sup_first = std::max(sup_first, std::abs(vy));
            if (std::isfinite(v) && hscale * v < best) {
                best = hscale * v;
                at = p;
            }
        }
        return best;
    };
    auto measure_min = [&](int f, double x, Point& at) {
        Point p0, p1;
        double base = part_min(f, 0, x, 1.0, p0);
        double pert = std::numeric_limits<double>::infinity();
        for (double h : {m.h_min, m.h_max}) {
            Point ph;
            double v = part_min(f, 1, x, h, ph);
            if (v < pert) {
                pert = v;
                p1 = ph;
                p1.h = h;
            }
        }
        at = p0;
        at.h = p1.h;
        return base + pert;
    };

    Extremum amin(true);
    for (double x : xs) {
        Point at;
        double v = measure_min(0, x, at);
        amin.add(v, at);
        Point tmp;
        measure_min(2, x, tmp);  // finiteness and bounds of c
    }
    Point b_at;
    double b0 = measure_min(1, 0.0, b_at);
    for (double x : kx) {
        Point tmp;
        measure_min(1, x, tmp);
    }
    (void)hs;

    r.checks.push_back(finite_check(finite));

    AssumptionCheck n12;
    n12.name = "N1/N2 bounded";
    n12.pass = finite.ok;
    n12.worst_value = std::max(sup_first, sup_second);
    n12.detail = "max first partial " + format_double(sup_first) + ", max kernel second partial " +
                 format_double(sup_second) + " (mass bound " + format_double(m.mass_bound) + ")";
    r.checks.push_back(n12);

    AssumptionCheck n4;
    n4.name = "N4 a>=0";
    n4.pass = amin.value >= 0.0;
    n4.worst_value = amin.value;
    n4.worst = amin.at;
    n4.detail = "lower bound on a = " + format_double(amin.value) + " at " + point_text(amin.at);
    r.checks.push_back(n4);

    AssumptionCheck n3;
    n3.name = "N3 b(0,mu)>0";
    n3.pass = b0 > 0.0;
    n3.worst_value = b0;
    n3.worst = b_at;
    n3.detail = "lower bound on b(0,mu) = " + format_double(b0) + " at " + point_text(b_at);
    r.checks.push_back(n3);

    AssumptionCheck deriv;
    deriv.name = "derivatives";
    deriv.detail = "symbolic partials match finite differences";
    std::vector<Point> pts;
    const std::vector<double> sx = linspace(0.0, m.x_max, 17);
    for (double x : sx)
        for (double y : sx) pts.push_back({x, y, 0.0});
    for (int f = 0; f < 3; ++f) {
        const KernelPart* parts[2] = {&fns[f]->base, &fns[f]->pert};
        for (int q = 0; q < 2; ++q) {
            std::string suffix = std::string(q ? "p_" : "_") + names[f];
            derivative_issues("K" + suffix, parts[q]->K, Var::X, pts, deriv);
            derivative_issues("F" + suffix, parts[q]->F, Var::X, pts, deriv);
            derivative_issues("F" + suffix, parts[q]->F, Var::Y, pts, deriv);
        }
    }
    r.checks.push_back(deriv);
    return r;
}

// --------------------------------------------------------------- cutoff

double cutoff_factor(double tv, double threshold) { return tv <= threshold ? 1.0 : std::exp(-(tv - threshold)); }

MeasureFunction tv_cutoff_wrap(MeasureFunction f, double threshold) {
    if (threshold < 0.0) throw std::invalid_argument("cutoff threshold must be nonnegative");
    return [f = std::move(f), threshold](double x, const DiscreteMeasure& mu) {
        return f(x, mu) * cutoff_factor(tv_norm(mu), threshold);
    };
}

}  // namespace spm
