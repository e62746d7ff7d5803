#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <limits>
#include <vector>

namespace spm::lp {

class LpError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Status { Optimal, Infeasible, Unbounded, IterationLimit };

// maximize c^T x  subject to  A x <= b,  A_eq x = b_eq,  x_j >= 0 unless free[j].
struct DenseLP {
    int num_vars = 0;
    std::vector<double> c;
    std::vector<std::vector<double>> A;
    std::vector<double> b;
    std::vector<std::vector<double>> A_eq;
    std::vector<double> b_eq;
    std::vector<bool> free;  // empty means all nonnegative

    void add_le(std::vector<double> row, double rhs) {
        A.push_back(std::move(row));
        b.push_back(rhs);
    }
    void add_eq(std::vector<double> row, double rhs) {
        A_eq.push_back(std::move(row));
        b_eq.push_back(rhs);
    }
};

struct SimplexResult {
    Status status = Status::IterationLimit;
    double objective = 0.0;
    std::vector<double> x;
    int pivots = 0;
};

// Two-phase tableau simplex with Bland's rule; intended for small problems.
SimplexResult simplex(const DenseLP& lp, double tol = 1e-10, int max_pivots = 200000);

// Linear map G for constraints G x <= h, with a dense normal-matrix builder.
class InequalityOperator {
public:
    virtual ~InequalityOperator() = default;
    virtual int rows() const = 0;
    virtual int cols() const = 0;
    virtual void multiply(const Eigen::VectorXd& x, Eigen::VectorXd& out) const = 0;
    virtual void multiply_transpose(const Eigen::VectorXd& y, Eigen::VectorXd& out) const = 0;
    // H = G^T diag(w) G; only the lower triangle needs to be valid.
    virtual void normal_matrix(const Eigen::VectorXd& w, Eigen::MatrixXd& H) const = 0;
};

// Explicit sparse rows; convenient for tests and small problems.
class SparseRowOperator : public InequalityOperator {
public:
    explicit SparseRowOperator(int cols) : cols_(cols) {}
    void add_row(std::vector<int> idx, std::vector<double> val);
    int rows() const override { return static_cast<int>(rows_.size()); }
    int cols() const override { return cols_; }
    void multiply(const Eigen::VectorXd& x, Eigen::VectorXd& out) const override;
    void multiply_transpose(const Eigen::VectorXd& y, Eigen::VectorXd& out) const override;
    void normal_matrix(const Eigen::VectorXd& w, Eigen::MatrixXd& H) const override;

private:
    struct Row {
        std::vector<int> idx;
        std::vector<double> val;
    };
    int cols_;
    std::vector<Row> rows_;
};

struct IpmOptions {
    double tol = 1e-11;            // relative duality gap
    double feasibility_tol = 1e-9;  // relative primal and dual residuals
    int max_iterations = 150;
    // A stalled attempt at least this close is returned as is instead of
    // being restarted (status stays IterationLimit).
    double acceptable_merit = 1e-8;
};

struct IpmResult {
    Status status = Status::IterationLimit;
    Eigen::VectorXd x;
    Eigen::VectorXd z;  // multipliers of G x <= h
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    int iterations = 0;  // summed over attempts
    int attempts = 0;
    double merit = std::numeric_limits<double>::infinity();  // max of relative residuals and gap
};

// minimize c^T x subject to G x <= h, x free (Mehrotra predictor-corrector,
// restarted from other starting points when an attempt stalls).
IpmResult interior_point(const Eigen::VectorXd& c, const InequalityOperator& G, const Eigen::VectorXd& h,
                         const IpmOptions& opt = {});

}  // namespace spm::lp
