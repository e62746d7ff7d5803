#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spmsens/expr.hpp"
#include "spmsens/io.hpp"
#include "spmsens/measure.hpp"

namespace spm {

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// f(x, h) together with its first partials, compiled for evaluation.
struct ModelFunction {
    Expr expr;
    Expr d_x;
    Expr d_h;
    CompiledExpr value;
    CompiledExpr dx;
    CompiledExpr dh;
    bool affine_in_h = true;  // second h-derivative folds to 0

    ModelFunction() : ModelFunction(Expr()) {}
    explicit ModelFunction(const Expr& e);
    static ModelFunction parse(const std::string& source);

    double operator()(double x, double h) const { return value(x, 0.0, h); }
};

struct ModelTriple {
    ModelFunction a, b, c;
    double h_min = -0.5;
    double h_max = 0.5;
    double x_max = 10.0;

    static ModelTriple parse(const std::string& a, const std::string& b, const std::string& c);
    bool depends_on_h() const;
};

// F(x, y) and K(x, y) with the partials the solvers need.
struct KernelPart {
    Expr F, K;
    CompiledExpr f, f_x, f_y, k, k_x;
    Expr k_xx, k_xy, k_yy;

    KernelPart() : KernelPart(Expr(), Expr()) {}
    KernelPart(const Expr& F, const Expr& K);
    bool trivial() const { return F.is_const(0.0); }
};

// f^h(x, mu) = F0(x, <K0(x, .), mu>) + h * Fp(x, <Kp(x, .), mu>).
struct KernelNonlinearity {
    KernelPart base;
    KernelPart pert;

    static KernelNonlinearity parse(const std::string& F0, const std::string& K0, const std::string& Fp,
                                    const std::string& Kp);
    static KernelNonlinearity constant_in_measure(const Expr& f0, const Expr& fp);
};

struct KernelModel {
    KernelNonlinearity a, b, c;
    double h_min = -0.5;
    double h_max = 0.5;
    double x_max = 10.0;
    // Mass bound used to bracket the kernel integrals during validation.
    double mass_bound = 10.0;
};

// Model file: keys a, b, c (linear) or F_a, K_a, Fp_a, Kp_a, ... (kernel),
// plus h_min, h_max, x_max.
struct ModelFile {
    std::optional<ModelTriple> linear;
    std::optional<KernelModel> kernel;
};
ModelFile load_model(const KeyValueFile& kv);
ModelFile load_model_file(const std::string& path);

struct ValidationGrid {
    int x_points = 513;
    int h_points = 33;
    int y_points = 65;  // kernel-argument samples (kernel models only)
};

struct AssumptionCheck {
    std::string name;
    bool pass = true;
    std::string detail;
    double worst_value = 0.0;
    Point worst;  // offending grid point (x, y, h)
};

struct ValidationReport {
    std::vector<AssumptionCheck> checks;

    bool passed() const;
    const AssumptionCheck* find(const std::string& name) const;
    std::string failures() const;  // one line per failed check
    std::string csv() const;       // assumption,pass,worst_value,x,y,h,detail
};

ValidationReport validate_model(const ModelTriple& m, const ValidationGrid& grid = {});
ValidationReport validate_model(const KernelModel& m, const ValidationGrid& grid = {});

// Factor applied by the total-variation cutoff: 1 up to the threshold, then
// exp(-(tv - threshold)).
double cutoff_factor(double tv, double threshold);

using MeasureFunction = std::function<double(double, const DiscreteMeasure&)>;
MeasureFunction tv_cutoff_wrap(MeasureFunction f, double threshold);

}  // namespace spm
