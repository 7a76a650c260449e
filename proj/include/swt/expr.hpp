#ifndef SWT_EXPR_HPP
#define SWT_EXPR_HPP

// A tiny expression language over one real variable `x`, used for the
// amplitude, phase and potential recipes.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          (right associative)
//   primary := number | 'x' | 'pi' | func '(' expr ')' | '(' expr ')'
//   func    := exp | log | tanh | cosh | sin | cos | sqrt

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "swt/error.hpp"

namespace swt {

enum class Op : std::uint8_t {
    number, var, pi,
    neg, add, sub, mul, div, pow,
    exp, log, tanh, cosh, sin, cos, sqrt
};

// Raised when an expression is evaluated outside its domain.
class eval_error : public numeric_error {
public:
    using numeric_error::numeric_error;
};

namespace detail {

inline constexpr bool is_function(Op op) { return op >= Op::exp; }
inline constexpr bool is_binary(Op op) { return op >= Op::add && op <= Op::pow; }

inline const char* function_name(Op op) {
    switch (op) {
    case Op::exp: return "exp";
    case Op::log: return "log";
    case Op::tanh: return "tanh";
    case Op::cosh: return "cosh";
    case Op::sin: return "sin";
    case Op::cos: return "cos";
    case Op::sqrt: return "sqrt";
    default: return "";
    }
}

inline std::string format_double(double v) {
    std::array<char, 32> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

inline double apply_unary(Op op, double a) {
    switch (op) {
    case Op::neg: return -a;
    case Op::exp: return std::exp(a);
    case Op::log:
        if (!(a > 0.0)) throw eval_error("log of non-positive value " + format_double(a));
        return std::log(a);
    case Op::tanh: return std::tanh(a);
    case Op::cosh: return std::cosh(a);
    case Op::sin: return std::sin(a);
    case Op::cos: return std::cos(a);
    case Op::sqrt:
        if (a < 0.0) throw eval_error("sqrt of negative value " + format_double(a));
        return std::sqrt(a);
    default: return a;
    }
}

inline double apply_binary(Op op, double a, double b) {
    switch (op) {
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
    case Op::div:
        if (b == 0.0) throw eval_error("division by zero");
        return a / b;
    case Op::pow: {
        double r = std::pow(a, b);
        if (std::isnan(r) && !std::isnan(a) && !std::isnan(b))
            throw eval_error("pow of negative base " + format_double(a) + " to non-integer power");
        return r;
    }
    default: return 0.0;
    }
}

} // namespace detail

class ExprProgram;

// Immutable expression tree with value semantics; copies share nodes.
class Expr {
public:
    Expr() : Expr(number(0.0)) {}

    static Expr number(double v) { return Expr(std::make_shared<Node>(Node{Op::number, v, {}, {}})); }
    static Expr variable() { return Expr(std::make_shared<Node>(Node{Op::var, 0.0, {}, {}})); }
    static Expr pi() { return Expr(std::make_shared<Node>(Node{Op::pi, 0.0, {}, {}})); }

    // Negating a literal folds into the literal, so "-3" and "(-3)" both
    // parse to number(-3).
    static Expr negate(const Expr& a) {
        if (a.op() == Op::number) return number(-a.value());
        return Expr(std::make_shared<Node>(Node{Op::neg, 0.0, a.node_, {}}));
    }
    static Expr call(Op fn, const Expr& a) { return Expr(std::make_shared<Node>(Node{fn, 0.0, a.node_, {}})); }
    static Expr binary(Op op, const Expr& a, const Expr& b) {
        return Expr(std::make_shared<Node>(Node{op, 0.0, a.node_, b.node_}));
    }

    Op op() const { return node_->op; }
    double value() const { return node_->value; }
    Expr lhs() const { return Expr(node_->lhs); }
    Expr rhs() const { return Expr(node_->rhs); }

    bool depends_on_x() const {
        switch (op()) {
        case Op::var: return true;
        case Op::number:
        case Op::pi: return false;
        default:
            return lhs().depends_on_x() || (detail::is_binary(op()) && rhs().depends_on_x());
        }
    }

    double operator()(double x) const {
        switch (op()) {
        case Op::number: return value();
        case Op::var: return x;
        case Op::pi: return std::numbers::pi;
        default:
            if (detail::is_binary(op())) return detail::apply_binary(op(), lhs()(x), rhs()(x));
            return detail::apply_unary(op(), lhs()(x));
        }
    }

    friend bool operator==(const Expr& a, const Expr& b) {
        if (a.node_ == b.node_) return true;
        if (a.op() != b.op()) return false;
        switch (a.op()) {
        case Op::number: return a.value() == b.value() || (std::isnan(a.value()) && std::isnan(b.value()));
        case Op::var:
        case Op::pi: return true;
        default:
            if (!(a.lhs() == b.lhs())) return false;
            return !detail::is_binary(a.op()) || a.rhs() == b.rhs();
        }
    }

    // Minimal-parenthesis rendering; parse_expression(str()) == *this.
    std::string str() const {
        switch (op()) {
        case Op::number: {
            auto s = detail::format_double(value());
            return value() < 0.0 || std::signbit(value()) ? "(" + s + ")" : s;
        }
        case Op::var: return "x";
        case Op::pi: return "pi";
        case Op::neg: return "-" + lhs().wrapped(lhs().precedence() < 3);
        case Op::add: return lhs().wrapped(lhs().precedence() < 1) + "+" + rhs().wrapped(rhs().precedence() <= 1);
        case Op::sub: return lhs().wrapped(lhs().precedence() < 1) + "-" + rhs().wrapped(rhs().precedence() <= 1);
        case Op::mul: return lhs().wrapped(lhs().precedence() < 2) + "*" + rhs().wrapped(rhs().precedence() <= 2);
        case Op::div: return lhs().wrapped(lhs().precedence() < 2) + "/" + rhs().wrapped(rhs().precedence() <= 2);
        case Op::pow: return lhs().wrapped(lhs().precedence() <= 4) + "^" + rhs().wrapped(rhs().precedence() < 3);
        default: return std::string(detail::function_name(op())) + "(" + lhs().str() + ")";
        }
    }

    // Symbolic d/dx. The language is closed under differentiation
    // (sinh is spelled through exp).
    Expr derivative() const;

    ExprProgram compile() const;

private:
    struct Node {
        Op op;
        double value;
        std::shared_ptr<const Node> lhs, rhs;
    };

    explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

    int precedence() const {
        switch (op()) {
        case Op::add:
        case Op::sub: return 1;
        case Op::mul:
        case Op::div: return 2;
        case Op::neg: return 3;
        case Op::pow: return 4;
        default: return 5;
        }
    }

    std::string wrapped(bool paren) const { return paren ? "(" + str() + ")" : str(); }

    std::shared_ptr<const Node> node_;
};

namespace detail {

// Simplifying constructors used by the differentiator only; the parser
// keeps the tree exactly as written.
inline bool is_const(const Expr& e, double v) { return e.op() == Op::number && e.value() == v; }

inline Expr s_add(const Expr& a, const Expr& b) {
    if (is_const(a, 0.0)) return b;
    if (is_const(b, 0.0)) return a;
    if (a.op() == Op::number && b.op() == Op::number) return Expr::number(a.value() + b.value());
    return Expr::binary(Op::add, a, b);
}
inline Expr s_sub(const Expr& a, const Expr& b) {
    if (is_const(b, 0.0)) return a;
    if (is_const(a, 0.0)) return Expr::negate(b);
    if (a.op() == Op::number && b.op() == Op::number) return Expr::number(a.value() - b.value());
    return Expr::binary(Op::sub, a, b);
}
inline Expr s_mul(const Expr& a, const Expr& b) {
    if (is_const(a, 0.0) || is_const(b, 0.0)) return Expr::number(0.0);
    if (is_const(a, 1.0)) return b;
    if (is_const(b, 1.0)) return a;
    if (a.op() == Op::number && b.op() == Op::number) return Expr::number(a.value() * b.value());
    return Expr::binary(Op::mul, a, b);
}
inline Expr s_div(const Expr& a, const Expr& b) {
    if (is_const(a, 0.0)) return Expr::number(0.0);
    if (is_const(b, 1.0)) return a;
    return Expr::binary(Op::div, a, b);
}
inline Expr s_pow(const Expr& a, const Expr& b) {
    if (is_const(b, 1.0)) return a;
    if (is_const(b, 0.0)) return Expr::number(1.0);
    return Expr::binary(Op::pow, a, b);
}

} // namespace detail

inline Expr Expr::derivative() const {
    using namespace detail;
    const Op o = op();
    if (o == Op::number || o == Op::pi) return number(0.0);
    if (o == Op::var) return number(1.0);

    const Expr u = lhs();
    const Expr du = u.derivative();
    switch (o) {
    case Op::neg: return is_const(du, 0.0) ? du : negate(du);
    case Op::add: return s_add(du, rhs().derivative());
    case Op::sub: return s_sub(du, rhs().derivative());
    case Op::mul: {
        const Expr v = rhs();
        return s_add(s_mul(du, v), s_mul(u, v.derivative()));
    }
    case Op::div: {
        const Expr v = rhs();
        return s_div(s_sub(s_mul(du, v), s_mul(u, v.derivative())), s_pow(v, number(2.0)));
    }
    case Op::pow: {
        const Expr v = rhs();
        if (!v.depends_on_x()) {
            return s_mul(s_mul(v, s_pow(u, s_sub(v, number(1.0)))), du);
        }
        // d(u^v) = u^v (v' log u + v u'/u)
        return s_mul(*this, s_add(s_mul(v.derivative(), call(Op::log, u)), s_div(s_mul(v, du), u)));
    }
    case Op::exp: return s_mul(*this, du);
    case Op::log: return s_div(du, u);
    case Op::tanh: return s_mul(s_sub(number(1.0), s_pow(*this, number(2.0))), du);
    case Op::cosh: {
        const Expr sinh = s_div(s_sub(call(Op::exp, u), call(Op::exp, negate(u))), number(2.0));
        return s_mul(sinh, du);
    }
    case Op::sin: return s_mul(call(Op::cos, u), du);
    case Op::cos: {
        const Expr d = s_mul(call(Op::sin, u), du);
        return d.op() == Op::number ? number(-d.value()) : negate(d);
    }
    case Op::sqrt: return s_div(du, s_mul(number(2.0), *this));
    default: return number(0.0);
    }
}

// Flattened postfix form of an Expr for hot loops (particle pushes with an
// expression potential).
class ExprProgram {
public:
    explicit ExprProgram(const Expr& e) {
        emit(e);
        int depth = 0;
        for (const auto& ins : code_) {
            if (ins.op == Op::number || ins.op == Op::var || ins.op == Op::pi)
                ++depth;
            else if (detail::is_binary(ins.op))
                --depth;
            max_depth_ = std::max(max_depth_, depth);
        }
    }

    double operator()(double x) const {
        if (max_depth_ > kStack) return fallback(x);
        std::array<double, kStack> st;
        int sp = 0;
        for (const auto& ins : code_) {
            switch (ins.op) {
            case Op::number: st[sp++] = ins.value; break;
            case Op::var: st[sp++] = x; break;
            case Op::pi: st[sp++] = std::numbers::pi; break;
            default:
                if (detail::is_binary(ins.op)) {
                    --sp;
                    st[sp - 1] = detail::apply_binary(ins.op, st[sp - 1], st[sp]);
                } else {
                    st[sp - 1] = detail::apply_unary(ins.op, st[sp - 1]);
                }
            }
        }
        return st[0];
    }

private:
    static constexpr int kStack = 64;

    struct Instr {
        Op op;
        double value;
    };

    void emit(const Expr& e) {
        if (e.op() != Op::number && e.op() != Op::var && e.op() != Op::pi) {
            emit(e.lhs());
            if (detail::is_binary(e.op())) emit(e.rhs());
        }
        code_.push_back({e.op(), e.value()});
        tree_ = e;
    }

    double fallback(double x) const { return tree_(x); }

    std::vector<Instr> code_;
    int max_depth_ = 0;
    Expr tree_;
};

inline ExprProgram Expr::compile() const { return ExprProgram(*this); }

namespace detail {

class ExprParser {
public:
    explicit ExprParser(std::string_view src) : src_(src) {}

    Expr parse() {
        skip_ws();
        if (pos_ >= src_.size()) throw parse_error("empty expression", pos_);
        Expr e = parse_sum();
        skip_ws();
        if (pos_ < src_.size()) throw parse_error(std::string("unexpected '") + src_[pos_] + "'", pos_);
        return e;
    }

private:
    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    Expr parse_sum() {
        Expr e = parse_term();
        for (;;) {
            if (accept('+'))
                e = Expr::binary(Op::add, e, parse_term());
            else if (accept('-'))
                e = Expr::binary(Op::sub, e, parse_term());
            else
                return e;
        }
    }

    Expr parse_term() {
        Expr e = parse_unary();
        for (;;) {
            if (accept('*'))
                e = Expr::binary(Op::mul, e, parse_unary());
            else if (accept('/'))
                e = Expr::binary(Op::div, e, parse_unary());
            else
                return e;
        }
    }

    Expr parse_unary() {
        if (accept('-')) return Expr::negate(parse_unary());
        return parse_power();
    }

    Expr parse_power() {
        Expr base = parse_primary();
        if (accept('^')) return Expr::binary(Op::pow, base, parse_unary());
        return base;
    }

    Expr parse_primary() {
        skip_ws();
        if (pos_ >= src_.size()) throw parse_error("unexpected end of expression", pos_);
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            Expr e = parse_sum();
            if (!accept(')')) throw parse_error("expected ')'", pos_);
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        throw parse_error(std::string("unexpected '") + c + "'", pos_);
    }

    Expr parse_number() {
        const std::size_t start = pos_;
        double v = 0.0;
        auto res = std::from_chars(src_.data() + pos_, src_.data() + src_.size(), v, std::chars_format::general);
        if (res.ec != std::errc{}) throw parse_error("malformed number", start);
        pos_ = static_cast<std::size_t>(res.ptr - src_.data());
        return Expr::number(v);
    }

    Expr parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        const std::string_view id = src_.substr(start, pos_ - start);
        if (id == "x") return Expr::variable();
        if (id == "pi") return Expr::pi();
        static constexpr std::array fns{Op::exp, Op::log, Op::tanh, Op::cosh, Op::sin, Op::cos, Op::sqrt};
        for (Op fn : fns) {
            if (id == function_name(fn)) {
                if (!accept('(')) throw parse_error("expected '(' after " + std::string(id), pos_);
                Expr arg = parse_sum();
                if (!accept(')')) throw parse_error("expected ')'", pos_);
                return Expr::call(fn, arg);
            }
        }
        throw parse_error("unknown identifier '" + std::string(id) + "'", start);
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline Expr parse_expression(std::string_view source) { return detail::ExprParser(source).parse(); }

} // namespace swt

#endif
