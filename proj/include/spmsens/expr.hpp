#pragma once

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace spm {

enum class Var { X, Y, H };

enum class Op { Const, Variable, Add, Sub, Mul, Div, Neg, Pow, Exp, Log, Sin, Cos, Tanh, Sqrt };

struct Point {
    double x = 0.0;
    double y = 0.0;
    double h = 0.0;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset);
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

struct ExprNode;

// Immutable expression tree over x, y, h.  Copies share structure.
class Expr {
public:
    Expr();  // the constant 0
    explicit Expr(std::shared_ptr<const ExprNode> node) : node_(std::move(node)) {}

    const ExprNode& node() const { return *node_; }
    Op op() const;
    bool is_const() const { return op() == Op::Const; }
    bool is_const(double c) const;
    double const_value() const;

    double eval(const Point& p) const;
    bool depends_on(Var v) const;

    friend bool operator==(const Expr& a, const Expr& b);
    friend bool operator!=(const Expr& a, const Expr& b) { return !(a == b); }

private:
    std::shared_ptr<const ExprNode> node_;
};

struct ExprNode {
    Op op = Op::Const;
    double value = 0.0;  // constant value, or exponent for Pow
    Var var = Var::X;
    Expr lhs{nullptr};  // unused children stay empty
    Expr rhs{nullptr};
};

// Constructors with constant folding.
Expr constant(double c);
Expr variable(Var v);
Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr pow(const Expr& base, double exponent);
Expr apply(Op func, const Expr& arg);

Expr parse_expr(std::string_view source);
std::string to_string(const Expr& e);
Expr differentiate(const Expr& e, Var v);

const char* var_name(Var v);

// Flat stack-machine form for hot evaluation loops.
class CompiledExpr {
public:
    CompiledExpr() = default;
    explicit CompiledExpr(const Expr& e);

    double operator()(const Point& p) const;
    double operator()(double x, double y, double h) const { return (*this)({x, y, h}); }
    bool empty() const { return code_.empty(); }

private:
    struct Instr {
        Op op;
        double value;
        Var var;
    };
    std::vector<Instr> code_;
    std::size_t depth_ = 0;
    void emit(const Expr& e, std::size_t depth);
};

struct DerivativeIssue {
    Point at;
    double symbolic = 0.0;
    double finite_difference = 0.0;
};

// Compares differentiate(e, v) against centered differences at the given points.
// Points where either side is non-finite, or where they disagree beyond
// rel_tol * (1 + |symbolic|), are returned.
std::vector<DerivativeIssue> check_derivative(const Expr& e, Var v, const std::vector<Point>& points,
                                              double step = 1e-5, double rel_tol = 1e-5);

}  // namespace spm
