#include "spmsens/measure.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "spmsens/io.hpp"

namespace spm {

DiscreteMeasure canonicalize(const DiscreteMeasure& m) {
    std::vector<Atom> atoms = m.atoms;
    for (const Atom& a : atoms) {
        if (!std::isfinite(a.position)) throw MeasureError("non-finite atom position");
        if (a.position < 0.0) throw MeasureError("negative atom position " + format_double(a.position));
        if (!std::isfinite(a.weight)) throw MeasureError("non-finite atom weight at position " + format_double(a.position));
    }
    std::stable_sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.position < b.position; });
    DiscreteMeasure out;
    out.atoms.reserve(atoms.size());
    for (std::size_t i = 0; i < atoms.size();) {
        double x = atoms[i].position;
        double w = 0.0;
        for (; i < atoms.size() && atoms[i].position == x; ++i) w += atoms[i].weight;
        if (w != 0.0) out.atoms.push_back({x, w});
    }
    return out;
}

DiscreteMeasure compact(const DiscreteMeasure& m, double eps) {
    DiscreteMeasure out;
    for (const Atom& a : m.atoms) {
        if (!out.atoms.empty() && a.position - out.atoms.back().position < eps) {
            Atom& last = out.atoms.back();
            if (std::abs(a.weight) > std::abs(last.weight)) last.position = a.position;
            last.weight += a.weight;
        } else {
            out.atoms.push_back(a);
        }
    }
    std::erase_if(out.atoms, [](const Atom& a) { return a.weight == 0.0; });
    return out;
}

double pair(const DiscreteMeasure& m, const std::function<double(double)>& xi) {
    double s = 0.0;
    for (const Atom& a : m.atoms) {
        double v = xi(a.position);
        if (!std::isfinite(v)) throw MeasureError("test function is not finite at " + format_double(a.position));
        s += a.weight * v;
    }
    return s;
}

double tv_norm(const DiscreteMeasure& m) {
    double s = 0.0;
    for (const Atom& a : m.atoms) s += std::abs(a.weight);
    return s;
}

double total_mass(const DiscreteMeasure& m) {
    double s = 0.0;
    for (const Atom& a : m.atoms) s += a.weight;
    return s;
}

DiscreteMeasure combine(const DiscreteMeasure& m, double alpha, const DiscreteMeasure& n, double beta) {
    DiscreteMeasure all;
    all.atoms.reserve(m.size() + n.size());
    for (const Atom& a : m.atoms) all.atoms.push_back({a.position, alpha * a.weight});
    for (const Atom& a : n.atoms) all.atoms.push_back({a.position, beta * a.weight});
    return canonicalize(all);
}

double wasserstein1(const DiscreteMeasure& m, const DiscreteMeasure& n) {
    DiscreteMeasure d = difference(m, n);
    double tv = tv_norm(m) + tv_norm(n);
    if (std::abs(total_mass(d)) > 1e-12 * (1.0 + tv)) return std::numeric_limits<double>::infinity();
    double cdf = 0.0, w = 0.0;
    for (std::size_t i = 0; i + 1 < d.size(); ++i) {
        cdf += d.atoms[i].weight;
        w += std::abs(cdf) * (d.atoms[i + 1].position - d.atoms[i].position);
    }
    return w;
}

DiscreteMeasure read_measure_csv(const std::string& path) {
    CsvTable t = read_csv(path);
    int ip = t.column("position");
    int iw = t.column("weight");
    DiscreteMeasure m;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        double x = parse_double(t.rows[r][ip], path + ": row " + std::to_string(r + 2) + " position");
        double w = parse_double(t.rows[r][iw], path + ": row " + std::to_string(r + 2) + " weight");
        if (x < 0.0) throw MeasureError(path + ": negative position on row " + std::to_string(r + 2));
        m.atoms.push_back({x, w});
    }
    return m;
}

std::string measure_csv(const DiscreteMeasure& m) {
    std::ostringstream os;
    os << "position,weight\n";
    for (const Atom& a : m.atoms) os << format_double(a.position) << ',' << format_double(a.weight) << '\n';
    return os.str();
}

void write_measure_csv(const std::string& path, const DiscreteMeasure& m) { write_text(path, measure_csv(m)); }

}  // namespace spm
