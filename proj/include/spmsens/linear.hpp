#pragma once

#include <string>
#include <vector>

#include "spmsens/coefficients.hpp"
#include "spmsens/measure.hpp"
#include "spmsens/volterra.hpp"

namespace spm {

struct LinearProblem {
    ModelTriple model;
    double h = 0.0;
    DiscreteMeasure mu0;
    double T = 1.0;
};

struct MeasureTrajectory {
    std::vector<double> times;
    std::vector<DiscreteMeasure> measures;
    double dt = 0.0;
    std::string birth_policy = "one cohort per step at X(dt/2, 0)";

    // Measure saved at time t (must coincide with a saved time up to 1e-9 dt).
    const DiscreteMeasure& at(double t) const;
    const DiscreteMeasure& final() const { return measures.back(); }
};

// Reference evaluation of <xi, mu_t> through the dual representation.
double solve_linear_dual(const LinearProblem& p, const TestFn& xi, double t, int N = 0);
double solve_linear_dual(std::shared_ptr<const LinearCoefficients> k, const DiscreteMeasure& mu0, const TestFn& xi,
                         double h, double t, int N = 0);

struct ParticleOptions {
    int save_every = 1;        // keep every n-th step (the final time is always kept)
    double compact_eps = 1e-12;  // merge atoms closer than this; 0 disables
};

// Birth-cohort particle scheme on [0, T]; dt must divide T.
MeasureTrajectory solve_linear_particles(const LinearProblem& p, double dt, const ParticleOptions& opt = {});

// Same scheme on [t0, t0 + duration] for given coefficients; times are absolute.
MeasureTrajectory particle_steps(const LinearCoefficients& k, const DiscreteMeasure& start, double t0,
                                 double duration, double dt, const ParticleOptions& opt = {});

// mu_t reconstructed from the dual route: surviving atoms transported along
// the flow and boundary cohorts from the renewal equation for the birth rate,
// on a grid of N intervals.
DiscreteMeasure linear_dual_measure(const LinearCoefficients& k, const DiscreteMeasure& mu0, double t, int N);
DiscreteMeasure linear_dual_measure(const LinearProblem& p, double t, int N = 0);

// Grid estimates of ||f||_inf and ||f||_{W^{1,inf}} on [0, x_max].
struct CoefficientNorms {
    double a_inf = 0, b_inf = 0, c_inf = 0;
    double a_w = 0, b_w = 0, c_w = 0;
};
CoefficientNorms coefficient_norms(const ModelTriple& m, double h, int points = 513);
// sup |f - g| over the same grid, summed over a, b, c.
double coefficient_distance(const ModelTriple& m, double h, const ModelTriple& n, double hn, int points = 513);

struct InequalityRow {
    std::string name;
    double t = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
    bool pass = true;
    std::string note;
};

struct InequalityReport {
    std::vector<InequalityRow> rows;
    int violations() const;
    std::string csv() const;  // name,t,lhs,rhs,pass,note
};

InequalityReport check_linear_inequalities(const LinearProblem& p, const LinearProblem& q, double dt,
                                           int check_times = 8);

// One CSV per saved time plus an index `t,filename,tv_norm` (or
// `k,t,filename,tv_norm` when k >= 0).  Returns the written file names.
std::vector<std::string> write_trajectory(const std::string& dir, const std::string& prefix,
                                          const MeasureTrajectory& traj, int k = -1, int every = 1);

}  // namespace spm
