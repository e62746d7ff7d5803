#include "spmsens/distances.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spmsens/io.hpp"
#include "spmsens/lp.hpp"

namespace spm {

int GridSpec::effective_window() const {
    if (window > 0) return std::min(window, nodes - 1);
    return nodes <= 513 ? nodes - 1 : 64;
}

std::string NormBudget::describe() const {
    if (kind == Kind::Flat) return "flat";
    std::ostringstream os;
    os << "calpha(alpha=" << format_double(alpha) << ",nodes=" << grid.nodes << ",window=" << grid.effective_window()
       << ")";
    return os.str();
}

double TestFunction::operator()(double x) const {
    if (nodes.empty()) return 0.0;
    if (x <= nodes.front()) return f.front() + (g.empty() ? 0.0 : g.front() * (x - nodes.front()));
    if (x >= nodes.back()) return f.back() + (g.empty() ? 0.0 : g.back() * (x - nodes.back()));
    std::size_t i = static_cast<std::size_t>(std::upper_bound(nodes.begin(), nodes.end(), x) - nodes.begin()) - 1;
    double dx = nodes[i + 1] - nodes[i];
    double tau = x - nodes[i];
    if (interpretation == Interpretation::PiecewiseLinear) return f[i] + (f[i + 1] - f[i]) * tau / dx;
    return f[i] + g[i] * tau + (g[i + 1] - g[i]) * tau * tau / (2.0 * dx);
}

std::string TestFunction::csv() const {
    std::ostringstream os;
    os << "node,f,g\n";
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        double gi;
        if (!g.empty()) {
            gi = g[i];
        } else if (i + 1 < nodes.size()) {
            gi = (f[i + 1] - f[i]) / (nodes[i + 1] - nodes[i]);
        } else {
            gi = 0.0;
        }
        os << format_double(nodes[i]) << ',' << format_double(f[i]) << ',' << format_double(gi) << '\n';
    }
    return os.str();
}

// ------------------------------------------------------------------ flat

namespace {

// Concave piecewise-linear function on [-1, 1] given by its breakpoints.
struct ConcavePL {
    std::vector<double> u, v;

    double at(double x) const {
        std::size_t k = static_cast<std::size_t>(std::upper_bound(u.begin(), u.end(), x) - u.begin());
        if (k == 0) return v.front();
        if (k >= u.size()) return v.back();
        double t = (x - u[k - 1]) / (u[k] - u[k - 1]);
        return v[k - 1] + t * (v[k] - v[k - 1]);
    }

    void argmax(std::size_t& p, std::size_t& q) const {
        double best = *std::max_element(v.begin(), v.end());
        double tol = 1e-15 * (1.0 + std::abs(best));
        p = 0;
        while (v[p] < best - tol) ++p;
        q = v.size() - 1;
        while (v[q] < best - tol) --q;
    }
};

ConcavePL window_max_clipped(const ConcavePL& V, double delta) {
    std::size_t p, q;
    V.argmax(p, q);
    ConcavePL W;
    for (std::size_t k = 0; k <= p; ++k) {
        W.u.push_back(V.u[k] - delta);
        W.v.push_back(V.v[k]);
    }
    for (std::size_t k = q; k < V.u.size(); ++k) {
        W.u.push_back(V.u[k] + delta);
        W.v.push_back(V.v[k]);
    }
    ConcavePL out;
    out.u.push_back(-1.0);
    out.v.push_back(W.at(-1.0));
    for (std::size_t k = 0; k < W.u.size(); ++k) {
        if (W.u[k] > -1.0 && W.u[k] < 1.0 && W.u[k] > out.u.back()) {
            out.u.push_back(W.u[k]);
            out.v.push_back(W.v[k]);
        }
    }
    out.u.push_back(1.0);
    out.v.push_back(W.at(1.0));
    return out;
}

}  // namespace

DistanceResult flat_norm(const DiscreteMeasure& input) {
    const DiscreteMeasure d = canonicalize(input);
    DistanceResult res;
    res.witness.interpretation = TestFunction::Interpretation::PiecewiseLinear;
    const std::size_t n = d.size();
    if (n == 0) return res;
    std::vector<double> lo(n), hi(n);
    ConcavePL V{{-1.0, 1.0}, {-d.atoms[0].weight, d.atoms[0].weight}};
    for (std::size_t i = 1; i < n; ++i) {
        std::size_t p, q;
        V.argmax(p, q);
        lo[i - 1] = V.u[p];
        hi[i - 1] = V.u[q];
        V = window_max_clipped(V, d.atoms[i].position - d.atoms[i - 1].position);
        for (std::size_t k = 0; k < V.u.size(); ++k) V.v[k] += d.atoms[i].weight * V.u[k];
    }
    std::size_t p, q;
    V.argmax(p, q);
    std::vector<double> f(n);
    f[n - 1] = std::clamp(0.0, V.u[p], V.u[q]);
    for (std::size_t i = n - 1; i > 0; --i) {
        double delta = d.atoms[i].position - d.atoms[i - 1].position;
        double a = f[i] - delta, b = f[i] + delta;
        double l = lo[i - 1], h = hi[i - 1];
        if (h < a) {
            f[i - 1] = a;
        } else if (l > b) {
            f[i - 1] = b;
        } else {
            f[i - 1] = std::clamp(f[i], std::max(l, a), std::min(h, b));
        }
        f[i - 1] = std::clamp(f[i - 1], -1.0, 1.0);
    }
    double value = 0.0;
    for (std::size_t i = 0; i < n; ++i) value += d.atoms[i].weight * f[i];
    res.value = value;
    for (const Atom& a : d.atoms) res.witness.nodes.push_back(a.position);
    res.witness.f = std::move(f);
    return res;
}

DistanceResult flat_distance(const DiscreteMeasure& m, const DiscreteMeasure& n) {
    return flat_norm(difference(m, n));
}

// ------------------------------------------------------------- Z grid LP

std::vector<double> z_grid(const DiscreteMeasure& d, const GridSpec& spec) {
    if (spec.nodes < 3) throw std::invalid_argument("z grid needs at least 3 nodes");
    double xmin = 0.0, xmax = 0.0;
    if (!d.empty()) {
        auto [lo_it, hi_it] = std::minmax_element(d.atoms.begin(), d.atoms.end(), [](const Atom& a, const Atom& b) {
            return a.position < b.position;
        });
        xmin = lo_it->position;
        xmax = hi_it->position;
    }
    double margin = std::max(spec.min_margin, spec.margin_fraction * (xmax - xmin));
    double lo = spec.lo.value_or(std::max(0.0, xmin - margin));
    double hi = spec.hi.value_or(xmax + margin);
    if (!(hi > lo)) throw std::invalid_argument("z grid span is empty");
    if (!d.empty() && (xmin < lo || xmax > hi))
        throw std::invalid_argument("z grid [" + format_double(lo) + ", " + format_double(hi) +
                                    "] does not cover the support");
    std::vector<double> t(spec.nodes);
    for (int i = 0; i < spec.nodes; ++i) t[i] = lo + (hi - lo) * i / (spec.nodes - 1);
    t.back() = hi;
    return t;
}

namespace {

// Constraint rows of the grid LP in the condensed variables
// [f0, g_0..g_M, c1, c2, c3]; node values f_i are prefix sums of the
// trapezoid increments, so the consistency equations are built in.
class ZOperator : public lp::InequalityOperator {
public:
    ZOperator(std::vector<double> t, double alpha, int window) : t_(std::move(t)) {
        N_ = static_cast<int>(t_.size());
        delta_.resize(N_ - 1);
        for (int i = 0; i + 1 < N_; ++i) delta_[i] = t_[i + 1] - t_[i];
        cc_.resize(N_);
        hd_.resize(N_);
        for (int j = 0; j < N_; ++j) {
            double left = j > 0 ? delta_[j - 1] : 0.0;
            double right = j + 1 < N_ ? delta_[j] : 0.0;
            cc_[j] = 0.5 * (left + right);
            hd_[j] = 0.5 * left;
        }
        for (int i = 0; i < N_; ++i)
            for (int j = i + 1; j < N_ && j - i <= window; ++j) {
                pi_.push_back(i);
                pj_.push_back(j);
                pw_.push_back(std::pow(t_[j] - t_[i], alpha));
            }
        P_ = static_cast<int>(pi_.size());
    }

    int rows() const override { return 4 * N_ + 2 * P_ + 4; }
    int cols() const override { return N_ + 4; }
    int G(int j) const { return 1 + j; }
    int C(int k) const { return N_ + k; }  // k = 1, 2, 3

    void node_values(const Eigen::VectorXd& x, std::vector<double>& F) const {
        F.resize(N_);
        F[0] = x[0];
        for (int i = 0; i + 1 < N_; ++i) F[i + 1] = F[i] + 0.5 * delta_[i] * (x[G(i)] + x[G(i + 1)]);
    }

    void multiply(const Eigen::VectorXd& x, Eigen::VectorXd& out) const override {
        out.resize(rows());
        std::vector<double> F;
        node_values(x, F);
        const double c1 = x[C(1)], c2 = x[C(2)], c3 = x[C(3)];
        for (int i = 0; i < N_; ++i) {
            out[i] = F[i] - c1;
            out[N_ + i] = -F[i] - c1;
            out[2 * N_ + i] = x[G(i)] - c2;
            out[3 * N_ + i] = -x[G(i)] - c2;
        }
        const int base = 4 * N_;
        for (int p = 0; p < P_; ++p) {
            double dg = x[G(pi_[p])] - x[G(pj_[p])];
            out[base + p] = dg - pw_[p] * c3;
            out[base + P_ + p] = -dg - pw_[p] * c3;
        }
        const int tail = base + 2 * P_;
        out[tail] = c1 + c2 + c3;
        out[tail + 1] = -c1;
        out[tail + 2] = -c2;
        out[tail + 3] = -c3;
    }

    void multiply_transpose(const Eigen::VectorXd& y, Eigen::VectorXd& out) const override {
        out.setZero(cols());
        double suffix = 0.0, c1 = 0.0, c2 = 0.0, c3 = 0.0;
        for (int j = N_ - 1; j >= 0; --j) {
            double u = y[j] - y[N_ + j];
            out[0] += u;
            out[G(j)] += cc_[j] * suffix + hd_[j] * u;
            suffix += u;
            c1 -= y[j] + y[N_ + j];
            out[G(j)] += y[2 * N_ + j] - y[3 * N_ + j];
            c2 -= y[2 * N_ + j] + y[3 * N_ + j];
        }
        const int base = 4 * N_;
        for (int p = 0; p < P_; ++p) {
            double v = y[base + p] - y[base + P_ + p];
            out[G(pi_[p])] += v;
            out[G(pj_[p])] -= v;
            c3 -= pw_[p] * (y[base + p] + y[base + P_ + p]);
        }
        const int tail = base + 2 * P_;
        out[C(1)] = c1 + y[tail] - y[tail + 1];
        out[C(2)] = c2 + y[tail] - y[tail + 2];
        out[C(3)] = c3 + y[tail] - y[tail + 3];
    }

    void normal_matrix(const Eigen::VectorXd& w, Eigen::MatrixXd& H) const override {
        const int n = cols();
        if (H.rows() != n || H.cols() != n) H.resize(n, n);
        H.setZero();
        // Node-value rows: sum_i Omega_i phi_i phi_i^T is semiseparable.
        std::vector<double> Om(N_), Dd(N_);
        for (int i = 0; i < N_; ++i) {
            Om[i] = w[i] + w[N_ + i];
            Dd[i] = w[N_ + i] - w[i];
        }
        std::vector<double> om_after(N_ + 1, 0.0), dd_after(N_ + 1, 0.0);
        for (int i = N_ - 1; i >= 0; --i) {
            om_after[i] = om_after[i + 1] + Om[i];
            dd_after[i] = dd_after[i + 1] + Dd[i];
        }
        H(0, 0) += om_after[0];
        H(C(1), C(1)) += om_after[0];
        H(C(1), 0) += dd_after[0];
        for (int k = 0; k < N_; ++k) {
            const double gt = om_after[k + 1];
            H(G(k), 0) += cc_[k] * gt + hd_[k] * Om[k];
            H(C(1), G(k)) += cc_[k] * dd_after[k + 1] + hd_[k] * Dd[k];
            const double tk = hd_[k] * Om[k] + cc_[k] * gt;
            for (int j = 0; j < k; ++j) H(G(k), G(j)) += cc_[j] * tk;
            H(G(k), G(k)) += hd_[k] * hd_[k] * Om[k] + cc_[k] * cc_[k] * gt;
        }
        // Derivative bound rows.
        double sg = 0.0;
        for (int j = 0; j < N_; ++j) {
            double a = w[2 * N_ + j], b = w[3 * N_ + j];
            H(G(j), G(j)) += a + b;
            H(C(2), G(j)) += b - a;
            sg += a + b;
        }
        H(C(2), C(2)) += sg;
        // Hölder rows.
        const int base = 4 * N_;
        double s3 = 0.0;
        for (int p = 0; p < P_; ++p) {
            double a = w[base + p], b = w[base + P_ + p];
            double om = a + b;
            int gi = G(pi_[p]), gj = G(pj_[p]);
            H(gi, gi) += om;
            H(gj, gj) += om;
            H(gj, gi) -= om;
            H(C(3), gi) += pw_[p] * (b - a);
            H(C(3), gj) += pw_[p] * (a - b);
            s3 += pw_[p] * pw_[p] * om;
        }
        H(C(3), C(3)) += s3;
        const int tail = base + 2 * P_;
        const double ws = w[tail];
        for (int a = 1; a <= 3; ++a)
            for (int b = 1; b <= a; ++b) H(C(a), C(b)) += ws;
        H(C(1), C(1)) += w[tail + 1];
        H(C(2), C(2)) += w[tail + 2];
        H(C(3), C(3)) += w[tail + 3];
    }

    // Exact norm of the test function (f0, g): c1 + c2 + c3 at the tightest values.
    double budget_of(const Eigen::VectorXd& x) const {
        std::vector<double> F;
        node_values(x, F);
        double c1 = 0.0, c2 = 0.0, c3 = 0.0;
        for (int i = 0; i < N_; ++i) {
            c1 = std::max(c1, std::abs(F[i]));
            c2 = std::max(c2, std::abs(x[G(i)]));
        }
        for (int p = 0; p < P_; ++p) c3 = std::max(c3, std::abs(x[G(pi_[p])] - x[G(pj_[p])]) / pw_[p]);
        return c1 + c2 + c3;
    }

    int pairs() const { return P_; }

private:
    std::vector<double> t_, delta_, cc_, hd_;
    std::vector<int> pi_, pj_;
    std::vector<double> pw_;
    int N_ = 0, P_ = 0;
};

}  // namespace

DistanceResult z_norm(const DiscreteMeasure& input, const NormBudget& budget) {
    const DiscreteMeasure d = canonicalize(input);
    if (budget.kind != NormBudget::Kind::CAlphaDual) throw std::invalid_argument("z_norm needs a CAlphaDual budget");
    if (!(budget.alpha > 0.0 && budget.alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
    DistanceResult res;
    res.witness.interpretation = TestFunction::Interpretation::PiecewiseLinearDerivative;
    std::vector<double> t = z_grid(d, budget.grid);
    const int N = static_cast<int>(t.size());
    const int window = budget.grid.effective_window();
    res.grid_lo = t.front();
    res.grid_hi = t.back();
    res.grid_nodes = N;
    res.window = window;
    if (d.empty()) {
        res.witness.nodes = t;
        res.witness.f.assign(N, 0.0);
        res.witness.g.assign(N, 0.0);
        return res;
    }

    // Objective over [f0, g, c]: atom values interpolate the piecewise-quadratic f.
    std::vector<double> D(N, 0.0), cg(N, 0.0);
    for (const Atom& a : d.atoms) {
        std::size_t i = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), a.position) - t.begin());
        i = std::min<std::size_t>(std::max<std::size_t>(i, 1), N - 1) - 1;
        double dx = t[i + 1] - t[i];
        double tau = a.position - t[i];
        double q = tau * tau / (2.0 * dx);
        D[i] += a.weight;
        cg[i] += a.weight * (tau - q);
        cg[i + 1] += a.weight * q;
    }
    ZOperator op(t, budget.alpha, window);
    Eigen::VectorXd obj = Eigen::VectorXd::Zero(op.cols());
    double suffix = 0.0;
    for (int j = N - 1; j >= 0; --j) {
        double left = j > 0 ? t[j] - t[j - 1] : 0.0;
        double right = j + 1 < N ? t[j + 1] - t[j] : 0.0;
        obj[op.G(j)] = cg[j] + 0.5 * (left + right) * suffix + 0.5 * left * D[j];
        obj[0] += D[j];
        suffix += D[j];
    }
    const double scale = obj.cwiseAbs().maxCoeff();
    if (!(scale > 0.0)) {
        res.witness.nodes = t;
        res.witness.f.assign(N, 0.0);
        res.witness.g.assign(N, 0.0);
        return res;
    }
    Eigen::VectorXd h = Eigen::VectorXd::Zero(op.rows());
    h[4 * N + 2 * op.pairs()] = 1.0;
    lp::IpmResult ipm = lp::interior_point(-obj / scale, op, h);
    if (ipm.status != lp::Status::Optimal) {
        // Accept a nearly converged iterate; the value below is still a valid lower bound.
        double rel = std::abs(ipm.primal_objective - ipm.dual_objective) / (1.0 + std::abs(ipm.primal_objective));
        if (!(rel < 1e-7)) throw lp::LpError("z-norm LP did not converge (relative gap " + format_double(rel) + ")");
    }

    // Rescale the iterate to an exactly feasible test function.
    Eigen::VectorXd x = ipm.x;
    double norm = op.budget_of(x);
    double raw = obj.dot(x);
    if (!(norm > 0.0) || raw <= 0.0) {
        x.setZero();
        raw = 0.0;
        norm = 1.0;
    }
    x /= norm;
    res.value = raw / norm;
    res.duality_gap = std::max(0.0, -ipm.dual_objective * scale - res.value);
    res.lp_iterations = ipm.iterations;
    std::vector<double> F;
    op.node_values(x, F);
    res.witness.nodes = t;
    res.witness.f = F;
    res.witness.g.resize(N);
    for (int j = 0; j < N; ++j) res.witness.g[j] = x[op.G(j)];
    return res;
}

DistanceResult z_distance(const DiscreteMeasure& m, const DiscreteMeasure& n, const NormBudget& budget) {
    return z_norm(difference(m, n), budget);
}

DistanceResult distance(const DiscreteMeasure& m, const DiscreteMeasure& n, const NormBudget& budget) {
    if (budget.kind == NormBudget::Kind::Flat) return flat_distance(m, n);
    return z_distance(m, n, budget);
}

double witness_violation(const TestFunction& w, const NormBudget& budget) {
    const std::size_t n = w.nodes.size();
    double viol = 0.0;
    if (budget.kind == NormBudget::Kind::Flat) {
        for (std::size_t i = 0; i < n; ++i) {
            viol = std::max(viol, std::abs(w.f[i]) - 1.0);
            if (i + 1 < n) viol = std::max(viol, std::abs(w.f[i + 1] - w.f[i]) - (w.nodes[i + 1] - w.nodes[i]));
        }
        return viol;
    }
    const int window = budget.grid.effective_window();
    double c1 = 0.0, c2 = 0.0, c3 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        c1 = std::max(c1, std::abs(w.f[i]));
        c2 = std::max(c2, std::abs(w.g[i]));
        for (std::size_t j = i + 1; j < n && static_cast<int>(j - i) <= window; ++j)
            c3 = std::max(c3, std::abs(w.g[i] - w.g[j]) / std::pow(w.nodes[j] - w.nodes[i], budget.alpha));
        if (i + 1 < n) {
            double trap = 0.5 * (w.g[i] + w.g[i + 1]) * (w.nodes[i + 1] - w.nodes[i]);
            viol = std::max(viol, std::abs(w.f[i + 1] - w.f[i] - trap));
        }
    }
    return std::max(viol, c1 + c2 + c3 - 1.0);
}

}  // namespace spm
