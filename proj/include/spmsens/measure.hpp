#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace spm {

struct Atom {
    double position = 0.0;
    double weight = 0.0;
};

// Finite signed combination of point masses on the half-line.
struct DiscreteMeasure {
    std::vector<Atom> atoms;

    DiscreteMeasure() = default;
    DiscreteMeasure(std::initializer_list<Atom> a) : atoms(a) {}
    explicit DiscreteMeasure(std::vector<Atom> a) : atoms(std::move(a)) {}

    static DiscreteMeasure dirac(double x, double w = 1.0) { return DiscreteMeasure{{x, w}}; }

    std::size_t size() const { return atoms.size(); }
    bool empty() const { return atoms.empty(); }
};

class MeasureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Sorts atoms, sums coincident positions and drops exact zeros.
DiscreteMeasure canonicalize(const DiscreteMeasure& m);

// Merges neighbouring atoms closer than eps into their weighted position
// (sum of weights, position of the heavier atom).  Input must be canonical.
DiscreteMeasure compact(const DiscreteMeasure& m, double eps);

double pair(const DiscreteMeasure& m, const std::function<double(double)>& xi);
double tv_norm(const DiscreteMeasure& m);
double total_mass(const DiscreteMeasure& m);

// Canonical form of alpha*m + beta*n.
DiscreteMeasure combine(const DiscreteMeasure& m, double alpha, const DiscreteMeasure& n, double beta);
inline DiscreteMeasure difference(const DiscreteMeasure& m, const DiscreteMeasure& n) { return combine(m, 1.0, n, -1.0); }

// Returns +infinity when the total masses differ.
double wasserstein1(const DiscreteMeasure& m, const DiscreteMeasure& n);

DiscreteMeasure read_measure_csv(const std::string& path);
void write_measure_csv(const std::string& path, const DiscreteMeasure& m);
std::string measure_csv(const DiscreteMeasure& m);

}  // namespace spm
