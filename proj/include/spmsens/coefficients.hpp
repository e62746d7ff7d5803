#pragma once

#include "spmsens/model.hpp"

namespace spm {

struct CoefSample {
    double v = 0.0;
    double dx = 0.0;
    double dh = 0.0;
};

// Coefficients a, b, c of a linear problem at a fixed parameter h, as
// functions of x with their x- and h-partials.
class LinearCoefficients {
public:
    virtual ~LinearCoefficients() = default;
    virtual CoefSample a(double x) const = 0;
    virtual CoefSample b(double x) const = 0;
    virtual CoefSample c(double x) const = 0;
};

class ModelCoefficients : public LinearCoefficients {
public:
    ModelCoefficients(ModelTriple m, double h) : m_(std::move(m)), h_(h) {}
    CoefSample a(double x) const override { return sample(m_.a, x); }
    CoefSample b(double x) const override { return sample(m_.b, x); }
    CoefSample c(double x) const override { return sample(m_.c, x); }
    double h() const { return h_; }

private:
    CoefSample sample(const ModelFunction& f, double x) const {
        Point p{x, 0.0, h_};
        return {f.value(p), f.dx(p), f.dh(p)};
    }
    ModelTriple m_;
    double h_;
};

}  // namespace spm
