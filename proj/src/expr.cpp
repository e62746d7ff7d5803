#include "spmsens/expr.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>

namespace spm {

ParseError::ParseError(const std::string& what, std::size_t offset)
    : std::runtime_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}

namespace {

Expr make_node(Op op, double value, Var var, Expr lhs = Expr(), Expr rhs = Expr()) {
    auto n = std::make_shared<ExprNode>();
    n->op = op;
    n->value = value;
    n->var = var;
    n->lhs = std::move(lhs);
    n->rhs = std::move(rhs);
    return Expr(std::move(n));
}

bool is_unary_func(Op op) {
    switch (op) {
        case Op::Exp:
        case Op::Log:
        case Op::Sin:
        case Op::Cos:
        case Op::Tanh:
        case Op::Sqrt:
            return true;
        default:
            return false;
    }
}

double apply_func(Op op, double v) {
    switch (op) {
        case Op::Exp: return std::exp(v);
        case Op::Log: return std::log(v);
        case Op::Sin: return std::sin(v);
        case Op::Cos: return std::cos(v);
        case Op::Tanh: return std::tanh(v);
        case Op::Sqrt: return std::sqrt(v);
        default: return std::nan("");
    }
}

double int_pow(double b, double e) {
    if (e == 2.0) return b * b;
    if (e == 3.0) return b * b * b;
    return std::pow(b, e);
}

Expr fold_or(double v, Expr fallback) {
    if (std::isfinite(v)) return constant(v);
    return fallback;
}

const char* func_name(Op op) {
    switch (op) {
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Sin: return "sin";
        case Op::Cos: return "cos";
        case Op::Tanh: return "tanh";
        case Op::Sqrt: return "sqrt";
        default: return "?";
    }
}

}  // namespace

const char* var_name(Var v) {
    switch (v) {
        case Var::X: return "x";
        case Var::Y: return "y";
        case Var::H: return "h";
    }
    return "?";
}

Expr::Expr() {
    static const std::shared_ptr<const ExprNode> zero = std::make_shared<ExprNode>();
    node_ = zero;
}

Op Expr::op() const { return node_->op; }

bool Expr::is_const(double c) const { return is_const() && node_->value == c; }

double Expr::const_value() const { return node_->value; }

double Expr::eval(const Point& p) const {
    const ExprNode& n = *node_;
    switch (n.op) {
        case Op::Const: return n.value;
        case Op::Variable: return n.var == Var::X ? p.x : (n.var == Var::Y ? p.y : p.h);
        case Op::Add: return n.lhs.eval(p) + n.rhs.eval(p);
        case Op::Sub: return n.lhs.eval(p) - n.rhs.eval(p);
        case Op::Mul: return n.lhs.eval(p) * n.rhs.eval(p);
        case Op::Div: return n.lhs.eval(p) / n.rhs.eval(p);
        case Op::Neg: return -n.lhs.eval(p);
        case Op::Pow: return int_pow(n.lhs.eval(p), n.value);
        default: return apply_func(n.op, n.lhs.eval(p));
    }
}

bool Expr::depends_on(Var v) const {
    const ExprNode& n = *node_;
    switch (n.op) {
        case Op::Const: return false;
        case Op::Variable: return n.var == v;
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div: return n.lhs.depends_on(v) || n.rhs.depends_on(v);
        default: return n.lhs.depends_on(v);
    }
}

bool operator==(const Expr& a, const Expr& b) {
    if (a.node_ == b.node_) return true;
    const ExprNode& x = *a.node_;
    const ExprNode& y = *b.node_;
    if (x.op != y.op) return false;
    switch (x.op) {
        case Op::Const: return x.value == y.value;
        case Op::Variable: return x.var == y.var;
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div: return x.lhs == y.lhs && x.rhs == y.rhs;
        case Op::Pow: return x.value == y.value && x.lhs == y.lhs;
        default: return x.lhs == y.lhs;
    }
}

Expr constant(double c) { return make_node(Op::Const, c, Var::X); }
Expr variable(Var v) { return make_node(Op::Variable, 0.0, v); }

Expr operator+(const Expr& a, const Expr& b) {
    if (a.is_const() && b.is_const()) return fold_or(a.const_value() + b.const_value(), make_node(Op::Add, 0, Var::X, a, b));
    if (a.is_const(0.0)) return b;
    if (b.is_const(0.0)) return a;
    return make_node(Op::Add, 0.0, Var::X, a, b);
}

Expr operator-(const Expr& a, const Expr& b) {
    if (a.is_const() && b.is_const()) return fold_or(a.const_value() - b.const_value(), make_node(Op::Sub, 0, Var::X, a, b));
    if (b.is_const(0.0)) return a;
    if (a.is_const(0.0)) return -b;
    return make_node(Op::Sub, 0.0, Var::X, a, b);
}

Expr operator*(const Expr& a, const Expr& b) {
    if (a.is_const() && b.is_const()) return fold_or(a.const_value() * b.const_value(), make_node(Op::Mul, 0, Var::X, a, b));
    if (a.is_const(0.0) || b.is_const(0.0)) return constant(0.0);
    if (a.is_const(1.0)) return b;
    if (b.is_const(1.0)) return a;
    if (a.is_const(-1.0)) return -b;
    if (b.is_const(-1.0)) return -a;
    return make_node(Op::Mul, 0.0, Var::X, a, b);
}

Expr operator/(const Expr& a, const Expr& b) {
    if (a.is_const() && b.is_const() && b.const_value() != 0.0)
        return fold_or(a.const_value() / b.const_value(), make_node(Op::Div, 0, Var::X, a, b));
    if (a.is_const(0.0) && !(b.is_const(0.0))) return constant(0.0);
    if (b.is_const(1.0)) return a;
    return make_node(Op::Div, 0.0, Var::X, a, b);
}

Expr operator-(const Expr& a) {
    if (a.is_const()) return constant(-a.const_value());
    if (a.op() == Op::Neg) return a.node().lhs;
    return make_node(Op::Neg, 0.0, Var::X, a);
}

Expr pow(const Expr& base, double exponent) {
    if (exponent == 0.0) return constant(1.0);
    if (exponent == 1.0) return base;
    if (base.is_const()) return fold_or(int_pow(base.const_value(), exponent), make_node(Op::Pow, exponent, Var::X, base));
    return make_node(Op::Pow, exponent, Var::X, base);
}

Expr apply(Op func, const Expr& arg) {
    if (!is_unary_func(func)) throw std::invalid_argument("apply: not a unary function");
    if (arg.is_const()) return fold_or(apply_func(func, arg.const_value()), make_node(func, 0.0, Var::X, arg));
    return make_node(func, 0.0, Var::X, arg);
}

// ---------------------------------------------------------------- parser

namespace {

class Parser {
public:
    explicit Parser(std::string_view src) : s_(src) {}

    Expr parse() {
        Expr e = expr();
        skip_ws();
        if (pos_ != s_.size()) throw ParseError(std::string("unexpected '") + s_[pos_] + "'", pos_);
        return e;
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\n' || s_[pos_] == '\r')) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) {
            if (pos_ >= s_.size()) throw ParseError(std::string("expected '") + c + "' but input ended", pos_);
            throw ParseError(std::string("expected '") + c + "'", pos_);
        }
    }

    Expr expr() {
        Expr lhs = term();
        for (;;) {
            if (accept('+')) {
                lhs = make_node(Op::Add, 0, Var::X, lhs, term());
            } else if (accept('-')) {
                lhs = make_node(Op::Sub, 0, Var::X, lhs, term());
            } else {
                return lhs;
            }
        }
    }

    Expr term() {
        Expr lhs = factor();
        for (;;) {
            if (accept('*')) {
                lhs = make_node(Op::Mul, 0, Var::X, lhs, factor());
            } else if (accept('/')) {
                lhs = make_node(Op::Div, 0, Var::X, lhs, factor());
            } else {
                return lhs;
            }
        }
    }

    Expr factor() {
        if (accept('-')) {
            Expr inner = factor();
            if (inner.is_const()) return constant(-inner.const_value());
            return make_node(Op::Neg, 0, Var::X, inner);
        }
        Expr base = atom();
        if (accept('^')) {
            skip_ws();
            std::size_t at = pos_;
            bool neg = accept('-');
            skip_ws();
            if (pos_ >= s_.size() || !(std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.'))
                throw ParseError("exponent must be a numeric literal", at);
            double v = number();
            return make_node(Op::Pow, neg ? -v : v, Var::X, base);
        }
        return base;
    }

    double number() {
        std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) ++pos_;
        if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
            std::size_t save = pos_;
            ++pos_;
            if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
            if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
                while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            } else {
                pos_ = save;
            }
        }
        double v = 0.0;
        auto res = std::from_chars(s_.data() + start, s_.data() + pos_, v);
        if (res.ec != std::errc() || res.ptr != s_.data() + pos_) throw ParseError("malformed number", start);
        return v;
    }

    Expr atom() {
        skip_ws();
        if (pos_ >= s_.size()) throw ParseError("unexpected end of input", pos_);
        char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return constant(number());
        if (c == '(') {
            ++pos_;
            Expr e = expr();
            expect(')');
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
            std::string_view id = s_.substr(start, pos_ - start);
            if (id == "x" || id == "y" || id == "h") {
                skip_ws();
                if (pos_ < s_.size() && s_[pos_] == '(')
                    throw ParseError("variable '" + std::string(id) + "' cannot be called", pos_);
                return variable(id == "x" ? Var::X : (id == "y" ? Var::Y : Var::H));
            }
            static constexpr std::array<std::pair<std::string_view, Op>, 6> funcs{{{"exp", Op::Exp},
                                                                                   {"log", Op::Log},
                                                                                   {"sin", Op::Sin},
                                                                                   {"cos", Op::Cos},
                                                                                   {"tanh", Op::Tanh},
                                                                                   {"sqrt", Op::Sqrt}}};
            for (const auto& [name, op] : funcs) {
                if (id != name) continue;
                skip_ws();
                if (pos_ >= s_.size() || s_[pos_] != '(')
                    throw ParseError("function '" + std::string(id) + "' takes exactly one argument", pos_);
                ++pos_;
                skip_ws();
                if (pos_ < s_.size() && s_[pos_] == ')')
                    throw ParseError("function '" + std::string(id) + "' takes exactly one argument, got 0", pos_);
                Expr arg = expr();
                skip_ws();
                if (pos_ < s_.size() && s_[pos_] == ',')
                    throw ParseError("function '" + std::string(id) + "' takes exactly one argument", pos_);
                expect(')');
                return make_node(op, 0, Var::X, arg);
            }
            throw ParseError("unknown identifier '" + std::string(id) + "'", start);
        }
        throw ParseError(std::string("unexpected '") + c + "'", pos_);
    }
};

std::string format_number(double v) {
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

// Precedence levels: 1 sum, 2 product, 3 unary minus, 4 power, 5 atom.
int precedence(const Expr& e) {
    switch (e.op()) {
        case Op::Const: return e.const_value() < 0 || std::signbit(e.const_value()) ? 3 : 5;
        case Op::Variable: return 5;
        case Op::Add:
        case Op::Sub: return 1;
        case Op::Mul:
        case Op::Div: return 2;
        case Op::Neg: return 3;
        case Op::Pow: return 4;
        default: return 5;
    }
}

void print(const Expr& e, int required, std::string& out) {
    bool paren = precedence(e) < required;
    if (paren) out += '(';
    const ExprNode& n = e.node();
    switch (n.op) {
        case Op::Const: out += format_number(n.value); break;
        case Op::Variable: out += var_name(n.var); break;
        case Op::Add:
        case Op::Sub:
            print(n.lhs, 1, out);
            out += n.op == Op::Add ? " + " : " - ";
            print(n.rhs, 2, out);
            break;
        case Op::Mul:
        case Op::Div:
            print(n.lhs, 2, out);
            out += n.op == Op::Mul ? "*" : "/";
            print(n.rhs, 3, out);
            break;
        case Op::Neg:
            out += '-';
            print(n.lhs, 3, out);
            break;
        case Op::Pow:
            print(n.lhs, 5, out);
            out += '^';
            out += format_number(n.value);
            break;
        default:
            out += func_name(n.op);
            out += '(';
            print(n.lhs, 0, out);
            out += ')';
            break;
    }
    if (paren) out += ')';
}

}  // namespace

Expr parse_expr(std::string_view source) { return Parser(source).parse(); }

std::string to_string(const Expr& e) {
    std::string out;
    print(e, 0, out);
    return out;
}

// ---------------------------------------------------------- derivatives

Expr differentiate(const Expr& e, Var v) {
    const ExprNode& n = e.node();
    switch (n.op) {
        case Op::Const: return constant(0.0);
        case Op::Variable: return constant(n.var == v ? 1.0 : 0.0);
        case Op::Add: return differentiate(n.lhs, v) + differentiate(n.rhs, v);
        case Op::Sub: return differentiate(n.lhs, v) - differentiate(n.rhs, v);
        case Op::Mul: return differentiate(n.lhs, v) * n.rhs + n.lhs * differentiate(n.rhs, v);
        case Op::Div: {
            Expr du = differentiate(n.lhs, v);
            Expr dw = differentiate(n.rhs, v);
            if (dw.is_const(0.0)) return du / n.rhs;
            return (du * n.rhs - n.lhs * dw) / pow(n.rhs, 2.0);
        }
        case Op::Neg: return -differentiate(n.lhs, v);
        case Op::Pow: return constant(n.value) * pow(n.lhs, n.value - 1.0) * differentiate(n.lhs, v);
        case Op::Exp: return e * differentiate(n.lhs, v);
        case Op::Log: return differentiate(n.lhs, v) / n.lhs;
        case Op::Sin: return apply(Op::Cos, n.lhs) * differentiate(n.lhs, v);
        case Op::Cos: return -(apply(Op::Sin, n.lhs) * differentiate(n.lhs, v));
        case Op::Tanh: return (constant(1.0) - pow(e, 2.0)) * differentiate(n.lhs, v);
        case Op::Sqrt: return differentiate(n.lhs, v) / (constant(2.0) * e);
    }
    return constant(0.0);
}

std::vector<DerivativeIssue> check_derivative(const Expr& e, Var v, const std::vector<Point>& points, double step,
                                              double rel_tol) {
    Expr d = differentiate(e, v);
    std::vector<DerivativeIssue> issues;
    for (const Point& p : points) {
        Point lo = p, hi = p;
        double* lo_c = v == Var::X ? &lo.x : (v == Var::Y ? &lo.y : &lo.h);
        double* hi_c = v == Var::X ? &hi.x : (v == Var::Y ? &hi.y : &hi.h);
        *lo_c -= step;
        *hi_c += step;
        double fd = (e.eval(hi) - e.eval(lo)) / (2.0 * step);
        double sym = d.eval(p);
        if (!std::isfinite(sym) || !std::isfinite(fd) || std::abs(sym - fd) > rel_tol * (1.0 + std::abs(sym)))
            issues.push_back({p, sym, fd});
    }
    return issues;
}

// ------------------------------------------------------------- compiled

CompiledExpr::CompiledExpr(const Expr& e) {
    emit(e, 1);
    if (depth_ > 128) throw std::invalid_argument("expression nests too deeply");
}

void CompiledExpr::emit(const Expr& e, std::size_t depth) {
    depth_ = std::max(depth_, depth);
    const ExprNode& n = e.node();
    switch (n.op) {
        case Op::Const:
        case Op::Variable: break;
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div:
            emit(n.lhs, depth);
            emit(n.rhs, depth + 1);
            break;
        default: emit(n.lhs, depth); break;
    }
    code_.push_back({n.op, n.value, n.var});
}

double CompiledExpr::operator()(const Point& p) const {
    std::array<double, 130> st;
    std::size_t sp = 0;
    for (const Instr& in : code_) {
        switch (in.op) {
            case Op::Const: st[sp++] = in.value; break;
            case Op::Variable: st[sp++] = in.var == Var::X ? p.x : (in.var == Var::Y ? p.y : p.h); break;
            case Op::Add: --sp; st[sp - 1] += st[sp]; break;
            case Op::Sub: --sp; st[sp - 1] -= st[sp]; break;
            case Op::Mul: --sp; st[sp - 1] *= st[sp]; break;
            case Op::Div: --sp; st[sp - 1] /= st[sp]; break;
            case Op::Neg: st[sp - 1] = -st[sp - 1]; break;
            case Op::Pow: st[sp - 1] = int_pow(st[sp - 1], in.value); break;
            default: st[sp - 1] = apply_func(in.op, st[sp - 1]); break;
        }
    }
    return sp == 0 ? 0.0 : st[0];
}

}  // namespace spm
