#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spmsens/coefficients.hpp"
#include "spmsens/linear.hpp"
#include "spmsens/model.hpp"

namespace spm {

struct NonlinearProblem {
    KernelModel model;
    double h = 0.0;
    DiscreteMeasure mu0;
    double T = 1.0;
    std::optional<double> cutoff;  // total-variation threshold; unset disables the wrapper
};

// F0(x, <K0(x,.), mu>) + h Fp(x, <Kp(x,.), mu>), times the cutoff factor when set.
double eval_nonlinearity(const KernelNonlinearity& f, double h, double x, const DiscreteMeasure& mu,
                         std::optional<double> cutoff = std::nullopt);

// ||mu0||_TV exp((||a||_inf + ||c||_inf) 2T) with sup norms bracketed on the validation ranges.
double default_cutoff_threshold(const NonlinearProblem& p);

// Coefficients of the nonlinear model frozen at a measure.  Large measures
// are tabulated on a uniform x-grid (cubic Hermite in x).  The model must
// outlive the coefficients.
class FrozenCoefficients : public LinearCoefficients {
public:
    FrozenCoefficients(const KernelModel& m, double h, const DiscreteMeasure& mu, double factor = 1.0,
                       double x_hi = 0.0);
    CoefSample a(double x) const override { return sample(0, x); }
    CoefSample b(double x) const override { return sample(1, x); }
    CoefSample c(double x) const override { return sample(2, x); }

private:
    struct PartCache {
        bool constant = false;  // kernel integral independent of x
        double I = 0.0;
    };
    std::pair<double, double> part_value(const KernelPart& p, const PartCache& c, double x) const;
    CoefSample direct(int which, double x) const;
    CoefSample sample(int which, double x) const;
    const KernelModel& m_;
    double h_;
    DiscreteMeasure mu_;
    double factor_;
    PartCache cache_[3][2];
    // Tables (empty when evaluating directly).
    double lo_ = 0.0, step_ = 0.0;
    std::vector<CoefSample> table_[3];
};

struct DyadicLevel {
    int k = 0;
    std::vector<double> mesh;  // 2^k + 1 nodes
    MeasureTrajectory trajectory;
};

class FrozenModelError : public std::runtime_error {
public:
    FrozenModelError(const std::string& what, int node) : std::runtime_error(what), node_(node) {}
    int node() const { return node_; }

private:
    int node_;
};

// min(T / 2^k, 2^-10 T)
double default_inner_dt(double T, int k);

DyadicLevel solve_dyadic(const NonlinearProblem& p, int k, double dt_inner = 0.0);

// p_F between levels k and k+1 at time t, both run with the same inner step
// (default: the level-(k+1) default).
double cross_level_distance(const NonlinearProblem& p, int k, double t, double dt_inner = 0.0);

struct HLipschitzRow {
    double dh = 0.0;
    double distance = 0.0;
    double ratio = 0.0;
};

struct HLipschitzReport {
    std::vector<HLipschitzRow> rows;
    double max_tv = 0.0;         // along the trajectory at h
    bool finite = true;
    bool refinement_stable = true;  // two smallest |dh| ratios within 20%
    std::string csv() const;        // dh,distance,ratio
};

HLipschitzReport h_lipschitz_scan(const NonlinearProblem& p, int k, double t, const std::vector<double>& dh_list,
                                  double dt_inner = 0.0);

}  // namespace spm
