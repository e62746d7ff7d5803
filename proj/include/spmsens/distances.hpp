#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spmsens/measure.hpp"

namespace spm {

// Test-function grid for the Hölder-dual LP.
struct GridSpec {
    int nodes = 257;
    // Hölder pairs |i-j| <= window; 0 selects all pairs up to 513 nodes, else 64.
    int window = 0;
    double min_margin = 1.0;
    double margin_fraction = 0.1;
    // Explicit span; when unset the span is derived from the support hull.
    std::optional<double> lo;
    std::optional<double> hi;

    int effective_window() const;
};

struct NormBudget {
    enum class Kind { Flat, CAlphaDual };
    Kind kind = Kind::Flat;
    double alpha = 1.0;
    GridSpec grid;

    static NormBudget flat() { return {}; }
    static NormBudget calpha(double alpha, int nodes = 257) {
        NormBudget b;
        b.kind = Kind::CAlphaDual;
        b.alpha = alpha;
        b.grid.nodes = nodes;
        return b;
    }
    std::string describe() const;
};

struct TestFunction {
    enum class Interpretation { PiecewiseLinear, PiecewiseLinearDerivative };
    Interpretation interpretation = Interpretation::PiecewiseLinear;
    std::vector<double> nodes;
    std::vector<double> f;
    std::vector<double> g;  // derivative samples; empty for piecewise-linear

    double operator()(double x) const;
    std::string csv() const;  // node,f,g
};

struct DistanceResult {
    double value = 0.0;
    TestFunction witness;
    // Grid actually used (CAlphaDual only).
    double grid_lo = 0.0;
    double grid_hi = 0.0;
    int grid_nodes = 0;
    int window = 0;
    int lp_iterations = 0;
    double duality_gap = 0.0;
};

// Exact flat metric between discrete measures.
DistanceResult flat_distance(const DiscreteMeasure& m, const DiscreteMeasure& n);
DistanceResult flat_norm(const DiscreteMeasure& d);

// Grid lower bound of the (C^{1+alpha})* distance.
DistanceResult z_distance(const DiscreteMeasure& m, const DiscreteMeasure& n, const NormBudget& budget);
DistanceResult z_norm(const DiscreteMeasure& d, const NormBudget& budget);

// Dispatches on budget.kind.
DistanceResult distance(const DiscreteMeasure& m, const DiscreteMeasure& n, const NormBudget& budget);

// Max violation of the budget constraints at the witness nodes (0 when feasible).
double witness_violation(const TestFunction& w, const NormBudget& budget);

// Uniform grid over the span chosen for the support of d.
std::vector<double> z_grid(const DiscreteMeasure& d, const GridSpec& spec);

}  // namespace spm
