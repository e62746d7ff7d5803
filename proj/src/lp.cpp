#include "spmsens/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace spm::lp {

// ---------------------------------------------------------------- simplex

namespace {

struct Tableau {
    int m = 0;  // constraint rows
    int n = 0;  // columns excluding rhs
    std::vector<double> t;  // (m+1) x (n+1), last row is the objective (reduced costs), last column rhs
    std::vector<int> basis;

    double& at(int r, int c) { return t[static_cast<std::size_t>(r) * (n + 1) + c]; }

    void pivot(int r, int c) {
        double inv = 1.0 / at(r, c);
        for (int j = 0; j <= n; ++j) at(r, j) *= inv;
        at(r, c) = 1.0;
        for (int i = 0; i <= m; ++i) {
            if (i == r) continue;
            double f = at(i, c);
            if (f == 0.0) continue;
            for (int j = 0; j <= n; ++j) at(i, j) -= f * at(r, j);
            at(i, c) = 0.0;
        }
        basis[r] = c;
    }

    // Maximizes the objective row; columns >= limit are never entered.
    Status run(int limit, double tol, int max_pivots, int& pivots) {
        for (;;) {
            int enter = -1;
            for (int j = 0; j < limit; ++j) {
                if (at(m, j) < -tol) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) return Status::Optimal;
            int leave = -1;
            double best = std::numeric_limits<double>::infinity();
            for (int i = 0; i < m; ++i) {
                double a = at(i, enter);
                if (a <= tol) continue;
                double ratio = at(i, n) / a;
                if (leave < 0 || ratio < best - 1e-12) {
                    best = ratio;
                    leave = i;
                } else if (ratio <= best + 1e-12 && basis[i] < basis[leave]) {
                    best = std::min(best, ratio);
                    leave = i;
                }
            }
            if (leave < 0) return Status::Unbounded;
            pivot(leave, enter);
            if (++pivots > max_pivots) return Status::IterationLimit;
        }
    }
};

}  // namespace

SimplexResult simplex(const DenseLP& lp, double tol, int max_pivots) {
    const int nv = lp.num_vars;
    std::vector<int> col_of(nv), neg_col(nv, -1);
    int ncols = 0;
    for (int j = 0; j < nv; ++j) {
        col_of[j] = ncols++;
        if (!lp.free.empty() && lp.free[j]) neg_col[j] = ncols++;
    }
    const int m_le = static_cast<int>(lp.A.size());
    const int m_eq = static_cast<int>(lp.A_eq.size());
    const int m = m_le + m_eq;
    const int n_struct = ncols;
    const int n_slack = m_le;
    // Artificials for every row whose slack cannot serve as the initial basis.
    std::vector<int> needs_art;
    for (int i = 0; i < m_le; ++i)
        if (lp.b[i] < 0) needs_art.push_back(i);
    for (int i = 0; i < m_eq; ++i) needs_art.push_back(m_le + i);
    const int n_art = static_cast<int>(needs_art.size());

    Tableau T;
    T.m = m;
    T.n = n_struct + n_slack + n_art;
    T.t.assign(static_cast<std::size_t>(m + 1) * (T.n + 1), 0.0);
    T.basis.assign(m, -1);

    auto fill_row = [&](int r, const std::vector<double>& row, double rhs, double sign) {
        for (int j = 0; j < nv; ++j) {
            double a = j < static_cast<int>(row.size()) ? row[j] : 0.0;
            T.at(r, col_of[j]) = sign * a;
            if (neg_col[j] >= 0) T.at(r, neg_col[j]) = -sign * a;
        }
        T.at(r, T.n) = sign * rhs;
    };
    for (int i = 0; i < m_le; ++i) {
        double sign = lp.b[i] < 0 ? -1.0 : 1.0;
        fill_row(i, lp.A[i], lp.b[i], sign);
        T.at(i, n_struct + i) = sign;
        if (sign > 0) T.basis[i] = n_struct + i;
    }
    for (int i = 0; i < m_eq; ++i) {
        double sign = lp.b_eq[i] < 0 ? -1.0 : 1.0;
        fill_row(m_le + i, lp.A_eq[i], lp.b_eq[i], sign);
    }
    for (int k = 0; k < n_art; ++k) {
        int r = needs_art[k];
        int c = n_struct + n_slack + k;
        T.at(r, c) = 1.0;
        T.basis[r] = c;
    }

    SimplexResult res;
    // Phase 1: maximize -(sum of artificials).
    if (n_art > 0) {
        for (int k = 0; k < n_art; ++k) {
            int r = needs_art[k];
            for (int j = 0; j <= T.n; ++j) T.at(m, j) -= T.at(r, j);
            T.at(m, n_struct + n_slack + k) = 0.0;
        }
        Status s = T.run(T.n, tol, max_pivots, res.pivots);
        if (s == Status::IterationLimit) {
            res.status = s;
            return res;
        }
        if (T.at(m, T.n) < -1e-9 * (1.0 + std::abs(T.at(m, T.n)))) {
            res.status = Status::Infeasible;
            return res;
        }
        // Drive zero-level artificials out of the basis where possible.
        for (int r = 0; r < m; ++r) {
            if (T.basis[r] < n_struct + n_slack) continue;
            for (int j = 0; j < n_struct + n_slack; ++j) {
                if (std::abs(T.at(r, j)) > 1e-9) {
                    T.pivot(r, j);
                    break;
                }
            }
        }
    }
    // Phase 2 objective row: reduced costs for maximizing c^T x.
    for (int j = 0; j <= T.n; ++j) T.at(m, j) = 0.0;
    for (int j = 0; j < nv; ++j) {
        double cj = j < static_cast<int>(lp.c.size()) ? lp.c[j] : 0.0;
        T.at(m, col_of[j]) = -cj;
        if (neg_col[j] >= 0) T.at(m, neg_col[j]) = cj;
    }
    for (int r = 0; r < m; ++r) {
        int b = T.basis[r];
        double f = T.at(m, b);
        if (f == 0.0) continue;
        for (int j = 0; j <= T.n; ++j) T.at(m, j) -= f * T.at(r, j);
    }
    Status s = T.run(n_struct + n_slack, tol, max_pivots, res.pivots);
    res.status = s;
    if (s != Status::Optimal) return res;

    std::vector<double> cols(T.n, 0.0);
    for (int r = 0; r < m; ++r) cols[T.basis[r]] = T.at(r, T.n);
    res.x.assign(nv, 0.0);
    for (int j = 0; j < nv; ++j) {
        res.x[j] = cols[col_of[j]];
        if (neg_col[j] >= 0) res.x[j] -= cols[neg_col[j]];
    }
    res.objective = 0.0;
    for (int j = 0; j < nv && j < static_cast<int>(lp.c.size()); ++j) res.objective += lp.c[j] * res.x[j];
    return res;
}

// --------------------------------------------------------- sparse rows

void SparseRowOperator::add_row(std::vector<int> idx, std::vector<double> val) {
    if (idx.size() != val.size()) throw std::invalid_argument("add_row: index/value size mismatch");
    rows_.push_back({std::move(idx), std::move(val)});
}

void SparseRowOperator::multiply(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
    out.resize(rows());
    for (int r = 0; r < rows(); ++r) {
        double s = 0.0;
        for (std::size_t k = 0; k < rows_[r].idx.size(); ++k) s += rows_[r].val[k] * x[rows_[r].idx[k]];
        out[r] = s;
    }
}

void SparseRowOperator::multiply_transpose(const Eigen::VectorXd& y, Eigen::VectorXd& out) const {
    out.setZero(cols_);
    for (int r = 0; r < rows(); ++r)
        for (std::size_t k = 0; k < rows_[r].idx.size(); ++k) out[rows_[r].idx[k]] += rows_[r].val[k] * y[r];
}

void SparseRowOperator::normal_matrix(const Eigen::VectorXd& w, Eigen::MatrixXd& H) const {
    H.setZero(cols_, cols_);
    for (int r = 0; r < rows(); ++r) {
        const Row& row = rows_[r];
        for (std::size_t a = 0; a < row.idx.size(); ++a)
            for (std::size_t b = 0; b < row.idx.size(); ++b) {
                int i = row.idx[a], j = row.idx[b];
                if (i >= j) H(i, j) += w[r] * row.val[a] * row.val[b];
            }
    }
}

// ------------------------------------------------------ interior point

namespace {

double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
    double a = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
    return a;
}

// Factorizes H (lower triangle valid) after symmetric Jacobi scaling, adding
// diagonal regularization until the Cholesky factorization succeeds.
class NormalSolver {
public:
    void factor(Eigen::MatrixXd& H) {
        const Eigen::Index n = H.rows();
        d_.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) d_[i] = H(i, i) > 0.0 ? 1.0 / std::sqrt(H(i, i)) : 1.0;
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = j; i < n; ++i) H(i, j) *= d_[i] * d_[j];
        Eigen::VectorXd diag = H.diagonal();
        double reg = 1e-15;
        for (int attempt = 0; attempt < 12; ++attempt) {
            H.diagonal() = diag.array() + reg;
            llt_.compute(H);
            if (llt_.info() == Eigen::Success) return;
            reg *= 100.0;
        }
        throw LpError("interior point: normal matrix is not positive definite");
    }
    Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
        Eigen::VectorXd y = llt_.solve(b.cwiseProduct(d_));
        return y.cwiseProduct(d_);
    }

private:
    Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt_;
    Eigen::VectorXd d_;
};

}  // namespace

namespace {

enum class Start { Simple, LeastSquares };

IpmResult ipm_attempt(const Eigen::VectorXd& c, const InequalityOperator& G, const Eigen::VectorXd& h,
                      const IpmOptions& opt, Start start, bool separate_steps) {
    const int n = G.cols();
    const int m = G.rows();
    IpmResult res;
    Eigen::VectorXd Gx(m), Gtz(n), rd(n), rp(m), tmp(m), rhs(n), dx(n), Gdx(m), ds(m), dz(m), w(m), refine(n);
    Eigen::VectorXd best_x, best_z;
    double best_merit = std::numeric_limits<double>::infinity();
    int since_best = 0;
    Eigen::MatrixXd H(n, n);
    NormalSolver solver;

    Eigen::VectorXd x(n), s(m), z(m);
    if (start == Start::Simple) {
        x.setZero();
        s = h.cwiseMax(1.0);
        z.setOnes();
    } else {
        // x minimizes ||Gx - h||, z is the least-norm solution of G^T z = -c;
        // both are then shifted into the interior.
        w.setOnes(m);
        G.normal_matrix(w, H);
        solver.factor(H);
        G.multiply_transpose(h, rhs);
        x = solver.solve(rhs);
        G.multiply(x, Gx);
        s = h - Gx;
        z.resize(m);
        G.multiply(solver.solve(-c), z);
        // Mehrotra's shift: make both positive, then balance s^T z.
        s.array() += std::max(0.0, -1.5 * s.minCoeff());
        z.array() += std::max(0.0, -1.5 * z.minCoeff());
        const double sz = s.dot(z);
        if (sz > 0.0) {
            const double ds0 = 0.5 * sz / z.sum(), dz0 = 0.5 * sz / s.sum();
            s.array() += ds0;
            z.array() += dz0;
        }
        if (!(s.minCoeff() > 0.0) || !(z.minCoeff() > 0.0)) {
            s.array() += 1.0;
            z.array() += 1.0;
        }
    }
    const double cnorm = 1.0 + c.cwiseAbs().maxCoeff();
    const double hnorm = 1.0 + h.cwiseAbs().maxCoeff();

    for (int it = 0; it < opt.max_iterations; ++it) {
        G.multiply(x, Gx);
        G.multiply_transpose(z, Gtz);
        rd = Gtz + c;
        rp = Gx + s - h;
        double mu = s.dot(z) / m;
        double pobj = c.dot(x);
        double dobj = -h.dot(z);
        res.iterations = it;
        const double pres = rp.cwiseAbs().maxCoeff() / hnorm;
        const double dres = rd.cwiseAbs().maxCoeff() / cnorm;
        const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj));
        if (pres <= opt.feasibility_tol && dres <= opt.feasibility_tol && gap <= opt.tol) {
            res.status = Status::Optimal;
            res.merit = std::max({pres, dres, gap});
            best_x = x;
            best_z = z;
            break;
        }
        // Rounding eventually stalls the dual residual; keep the best iterate
        // and stop once it has not improved for a few iterations.
        const double merit = std::max({pres, dres, gap});
        res.merit = std::min(res.merit, merit);
        if (merit < best_merit) {
            since_best = 0;
            best_merit = merit;
            best_x = x;
            best_z = z;
        } else if (++since_best >= 5) {
            break;
        }
        w = z.cwiseQuotient(s);
        G.normal_matrix(w, H);
        solver.factor(H);

        auto direction = [&](const Eigen::VectorXd& rc) {
            // rhs = -rd + G^T((rc - z.*rp)./s)
            tmp = (rc - z.cwiseProduct(rp)).cwiseQuotient(s);
            G.multiply_transpose(tmp, rhs);
            rhs -= rd;
            dx = solver.solve(rhs);
            // Two rounds of iterative refinement against the unfactored operator.
            for (int r = 0; r < 2; ++r) {
                G.multiply(dx, Gdx);
                tmp = w.cwiseProduct(Gdx);
                G.multiply_transpose(tmp, refine);
                dx += solver.solve(rhs - refine);
            }
            G.multiply(dx, Gdx);
            ds = -rp - Gdx;
            dz = (-rc - z.cwiseProduct(ds)).cwiseQuotient(s);
        };

        Eigen::VectorXd rc = s.cwiseProduct(z);
        direction(rc);
        double ap = max_step(s, ds);
        double ad = max_step(z, dz);
        double mu_aff = (s + ap * ds).dot(z + ad * dz) / m;
        double sigma = std::pow(mu_aff / mu, 3.0);
        rc += ds.cwiseProduct(dz);
        rc.array() -= sigma * mu;
        direction(rc);
        double sp = std::min(1.0, 0.99 * max_step(s, ds));
        double sd = std::min(1.0, 0.99 * max_step(z, dz));
        if (!separate_steps) sp = sd = std::min(sp, sd);
        x += sp * dx;
        s += sp * ds;
        z += sd * dz;
        if (!x.allFinite() || !z.allFinite()) throw LpError("interior point: non-finite iterate");
    }
    res.x = best_x;
    res.z = best_z;
    res.primal_objective = c.dot(res.x);
    res.dual_objective = -h.dot(res.z);
    return res;
}

}  // namespace

IpmResult interior_point(const Eigen::VectorXd& c, const InequalityOperator& G, const Eigen::VectorXd& h,
                         const IpmOptions& opt) {
    // No single starting rule converges on every grid LP; restart from a
    // different one when an attempt stalls.
    const std::pair<Start, bool> plan[] = {{Start::Simple, false}, {Start::LeastSquares, false}, {Start::Simple, true}};
    IpmResult best;
    int attempts = 0;
    for (auto [start, split] : plan) {
        IpmResult r = ipm_attempt(c, G, h, opt, start, split);
        r.attempts = ++attempts;
        r.iterations += best.iterations;
        if (r.status == Status::Optimal || r.merit <= opt.acceptable_merit) return r;
        if (attempts == 1 || r.merit < best.merit) {
            best = std::move(r);
        } else {
            best.iterations = r.iterations;
            best.attempts = attempts;
        }
    }
    return best;
}

}  // namespace spm::lp
