#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "spmsens/coefficients.hpp"

namespace spm {

class FlowError : public std::runtime_error {
public:
    FlowError(const std::string& what, int step) : std::runtime_error(what), step_(step) {}
    int step() const { return step_; }

private:
    int step_;
};

struct FlowResult {
    double X = 0.0;
    double dX_dx = 1.0;
    double dX_dh = 0.0;
    double s = 0.0;
    double x0 = 0.0;
    double h = 0.0;
};

// max(16, ceil(64 s))
int default_flow_steps(double s);

// RK4 on X' = b(X), (X_x)' = b_x(X) X_x, (X_h)' = b_h(X) + b_x(X) X_h.
FlowResult integrate_flow(const LinearCoefficients& k, double x0, double s, int steps);
FlowResult integrate_flow(const ModelTriple& m, double h, double x0, double s, int steps = 0);

// Samples of the flow from x0 at u_j = j * duration / n, j = 0..n, using
// `substeps` RK4 steps per interval.
struct FlowPath {
    std::vector<double> X, X_x, X_h;
};
FlowPath flow_path(const LinearCoefficients& k, double x0, double duration, int n, int substeps = 1);

// Backward characteristic: follows -b from x for time s.  Paths that reach 0
// are clamped there; crossing_time is the backward time at which that happened.
struct BackwardResult {
    double X = 0.0;
    bool hit_boundary = false;
    double crossing_time = 0.0;
};
BackwardResult integrate_backward(const LinearCoefficients& k, double x, double s, int steps = 0);

struct RegularityBound {
    std::string name;
    std::vector<int> samples;       // sample counts n, 2n, 4n
    std::vector<double> max_ratio;  // max observed ratio per sample count
    bool pass = true;
};

struct RegularityReport {
    double alpha = 1.0;
    std::vector<RegularityBound> bounds;
    bool passed() const;
    std::string csv() const;  // bound,samples,max_ratio
};

RegularityReport check_flow_regularity(const ModelTriple& m, double T, int samples, double alpha = 1.0,
                                       std::uint64_t seed = 1);

}  // namespace spm
