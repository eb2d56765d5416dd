#pragma once

// Scalar coefficient expressions in the state variable `y`.
//
// Grammar (loosest to tightest binding):
//   sum     := product (('+' | '-') product)*
//   product := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := atom ('^' unary)?            right-associative
//   atom    := number | 'y' | func '(' sum ')' | '(' sum ')'
//   func    := exp | log | sqrt | tanh | abs
//
// so "-y^2" is -(y^2) and "2^3^2" is 2^(3^2). There is no implicit multiplication.

#include "turnpike/errors.hpp"

#include <charconv>
#include <cmath>
#include <memory>
#include <string>
#include <string_view>
#include <utility>

namespace turnpike {

class Expr
{
  public:
    enum class Kind { Number, Variable, Negate, Add, Sub, Mul, Div, Pow, Call };
    enum class Function { Exp, Log, Sqrt, Tanh, Abs };

    static Expr number(double value)
    {
        if (!(value >= 0.0) || !std::isfinite(value))
            throw InvalidInput("number literals must be finite and nonnegative");
        return Expr(std::make_shared<Node>(Node{Kind::Number, value, {}, nullptr, nullptr}));
    }
    static Expr variable() { return Expr(std::make_shared<Node>(Node{Kind::Variable, 0.0, {}, nullptr, nullptr})); }
    static Expr negate(Expr operand)
    {
        return Expr(std::make_shared<Node>(Node{Kind::Negate, 0.0, {}, std::move(operand.root_), nullptr}));
    }
    static Expr binary(Kind op, Expr lhs, Expr rhs)
    {
        if (op != Kind::Add && op != Kind::Sub && op != Kind::Mul && op != Kind::Div && op != Kind::Pow)
            throw InvalidInput("not a binary operator");
        return Expr(std::make_shared<Node>(Node{op, 0.0, {}, std::move(lhs.root_), std::move(rhs.root_)}));
    }
    static Expr call(Function fn, Expr arg)
    {
        return Expr(std::make_shared<Node>(Node{Kind::Call, 0.0, fn, std::move(arg.root_), nullptr}));
    }

    Kind kind() const { return root_->kind; }

    /// Evaluate at `y`. Throws DomainError naming the offending sub-expression.
    double operator()(double y) const { return eval(*root_, y); }

    /// Canonical text with the minimal parentheses needed to reparse to the same tree.
    std::string to_string() const
    {
        std::string out;
        print(*root_, out);
        return out;
    }

    friend bool operator==(Expr const& a, Expr const& b) { return same(*a.root_, *b.root_); }

  private:
    struct Node
    {
        Kind kind;
        double value;
        Function fn;
        std::shared_ptr<Node const> lhs;
        std::shared_ptr<Node const> rhs;
    };
    using NodePtr = std::shared_ptr<Node const>;

    explicit Expr(NodePtr root) : root_(std::move(root)) {}

    friend class ExprParser;

    static int precedence(Node const& n)
    {
        switch (n.kind)
        {
            case Kind::Add:
            case Kind::Sub: return 10;
            case Kind::Mul:
            case Kind::Div: return 20;
            case Kind::Negate: return 30;
            case Kind::Pow: return 40;
            default: return 100;
        }
    }

    static char const* function_name(Function fn)
    {
        switch (fn)
        {
            case Function::Exp: return "exp";
            case Function::Log: return "log";
            case Function::Sqrt: return "sqrt";
            case Function::Tanh: return "tanh";
            case Function::Abs: return "abs";
        }
        return "?";
    }

    static void print_child(Node const& child, bool parens, std::string& out)
    {
        if (parens)
            out += '(';
        print(child, out);
        if (parens)
            out += ')';
    }

    static void print(Node const& n, std::string& out)
    {
        int const prec = precedence(n);
        switch (n.kind)
        {
            case Kind::Number: {
                char buf[32];
                auto res = std::to_chars(buf, buf + sizeof buf, n.value);
                out.append(buf, res.ptr);
                return;
            }
            case Kind::Variable: out += 'y'; return;
            case Kind::Negate:
                out += '-';
                print_child(*n.lhs, precedence(*n.lhs) < prec, out);
                return;
            case Kind::Call:
                out += function_name(n.fn);
                print_child(*n.lhs, true, out);
                return;
            case Kind::Pow:
                print_child(*n.lhs, precedence(*n.lhs) <= prec, out);
                out += '^';
                print_child(*n.rhs, precedence(*n.rhs) < prec, out);
                return;
            default: {
                char const op = n.kind == Kind::Add   ? '+'
                                : n.kind == Kind::Sub ? '-'
                                : n.kind == Kind::Mul ? '*'
                                                      : '/';
                print_child(*n.lhs, precedence(*n.lhs) < prec, out);
                out += op;
                print_child(*n.rhs, precedence(*n.rhs) <= prec, out);
                return;
            }
        }
    }

    static bool same(Node const& a, Node const& b)
    {
        if (a.kind != b.kind)
            return false;
        switch (a.kind)
        {
            case Kind::Number: return a.value == b.value;
            case Kind::Variable: return true;
            case Kind::Negate: return same(*a.lhs, *b.lhs);
            case Kind::Call: return a.fn == b.fn && same(*a.lhs, *b.lhs);
            default: return same(*a.lhs, *b.lhs) && same(*a.rhs, *b.rhs);
        }
    }

    static std::string text(Node const& n)
    {
        std::string out;
        print(n, out);
        return out;
    }

    static double checked(double v, Node const& n)
    {
        if (!std::isfinite(v))
            throw DomainError("non-finite value", text(n));
        return v;
    }

    static double eval(Node const& n, double y)
    {
        switch (n.kind)
        {
            case Kind::Number: return n.value;
            case Kind::Variable: return y;
            case Kind::Negate: return -eval(*n.lhs, y);
            case Kind::Add: return checked(eval(*n.lhs, y) + eval(*n.rhs, y), n);
            case Kind::Sub: return checked(eval(*n.lhs, y) - eval(*n.rhs, y), n);
            case Kind::Mul: return checked(eval(*n.lhs, y) * eval(*n.rhs, y), n);
            case Kind::Div: {
                double const num = eval(*n.lhs, y);
                double const den = eval(*n.rhs, y);
                if (den == 0.0)
                    throw DomainError("division by zero", text(n));
                return checked(num / den, n);
            }
            case Kind::Pow: {
                double const base = eval(*n.lhs, y);
                double const ex = eval(*n.rhs, y);
                if (base < 0.0 && ex != std::trunc(ex))
                    throw DomainError("negative base with non-integer exponent", text(n));
                if (base == 0.0 && ex < 0.0)
                    throw DomainError("division by zero", text(n));
                return checked(std::pow(base, ex), n);
            }
            case Kind::Call: {
                double const x = eval(*n.lhs, y);
                switch (n.fn)
                {
                    case Function::Exp: return checked(std::exp(x), n);
                    case Function::Log:
                        if (!(x > 0.0))
                            throw DomainError("log of nonpositive value", text(n));
                        return std::log(x);
                    case Function::Sqrt:
                        if (x < 0.0)
                            throw DomainError("sqrt of negative value", text(n));
                        return std::sqrt(x);
                    case Function::Tanh: return std::tanh(x);
                    case Function::Abs: return std::fabs(x);
                }
            }
        }
        return 0.0;
    }

    NodePtr root_;
};

/// Pratt parser producing an Expr.
class ExprParser
{
  public:
    explicit ExprParser(std::string_view text) : text_(text) {}

    Expr parse()
    {
        skip_space();
        if (pos_ == text_.size())
            throw SyntaxError("empty expression", pos_);
        Expr e(parse_expr(0));
        skip_space();
        if (pos_ != text_.size())
            throw SyntaxError("unexpected input", pos_);
        return e;
    }

  private:
    using Node = Expr::Node;
    using NodePtr = Expr::NodePtr;
    using Kind = Expr::Kind;

    void skip_space()
    {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t'))
            ++pos_;
    }

    static bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
    static bool is_ident(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
    static bool is_digit(char c) { return c >= '0' && c <= '9'; }

    static NodePtr make(Kind k, NodePtr lhs = nullptr, NodePtr rhs = nullptr)
    {
        return std::make_shared<Node>(Node{k, 0.0, {}, std::move(lhs), std::move(rhs)});
    }

    // Binding power of an infix operator; 0 when the character is not one.
    static int infix_power(char c)
    {
        switch (c)
        {
            case '+':
            case '-': return 10;
            case '*':
            case '/': return 20;
            case '^': return 40;
            default: return 0;
        }
    }

    NodePtr parse_expr(int min_power)
    {
        NodePtr lhs = parse_prefix();
        for (;;)
        {
            skip_space();
            if (pos_ == text_.size())
                break;
            char const c = text_[pos_];
            int const power = infix_power(c);
            if (power == 0)
            {
                if (c == ')')
                    break;
                throw SyntaxError(std::string("unexpected '") + c + "'", pos_);
            }
            if (power <= min_power)
                break;
            ++pos_;
            // '^' is right-associative: its right operand may contain another '^'.
            NodePtr rhs = parse_expr(c == '^' ? power - 1 : power);
            Kind const k = c == '+'   ? Kind::Add
                           : c == '-' ? Kind::Sub
                           : c == '*' ? Kind::Mul
                           : c == '/' ? Kind::Div
                                      : Kind::Pow;
            lhs = make(k, std::move(lhs), std::move(rhs));
        }
        return lhs;
    }

    NodePtr parse_prefix()
    {
        skip_space();
        if (pos_ == text_.size())
            throw SyntaxError("unexpected end of input", pos_);
        char const c = text_[pos_];
        if (c == '-')
        {
            ++pos_;
            return make(Kind::Negate, parse_expr(30));
        }
        if (c == '(')
        {
            ++pos_;
            NodePtr inner = parse_expr(0);
            expect(')');
            return inner;
        }
        if (is_digit(c) || c == '.')
            return parse_number();
        if (is_ident_start(c))
            return parse_identifier();
        throw SyntaxError(std::string("unexpected '") + c + "'", pos_);
    }

    void expect(char c)
    {
        skip_space();
        if (pos_ == text_.size() || text_[pos_] != c)
            throw SyntaxError(std::string("expected '") + c + "'", pos_);
        ++pos_;
    }

    NodePtr parse_number()
    {
        std::size_t const start = pos_;
        while (pos_ < text_.size() && (is_digit(text_[pos_]) || text_[pos_] == '.'))
            ++pos_;
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E'))
        {
            std::size_t p = pos_ + 1;
            if (p < text_.size() && (text_[p] == '+' || text_[p] == '-'))
                ++p;
            if (p < text_.size() && is_digit(text_[p]))
            {
                while (p < text_.size() && is_digit(text_[p]))
                    ++p;
                pos_ = p;
            }
        }
        double value = 0.0;
        auto res = std::from_chars(text_.data() + start, text_.data() + pos_, value);
        if (res.ec != std::errc() || res.ptr != text_.data() + pos_ || !std::isfinite(value))
            throw SyntaxError("malformed number", start);
        return std::make_shared<Node>(Node{Kind::Number, value, {}, nullptr, nullptr});
    }

    NodePtr parse_identifier()
    {
        std::size_t const start = pos_;
        while (pos_ < text_.size() && is_ident(text_[pos_]))
            ++pos_;
        std::string_view const name = text_.substr(start, pos_ - start);
        if (name == "y")
            return make(Kind::Variable);

        Expr::Function fn;
        if (name == "exp")
            fn = Expr::Function::Exp;
        else if (name == "log")
            fn = Expr::Function::Log;
        else if (name == "sqrt")
            fn = Expr::Function::Sqrt;
        else if (name == "tanh")
            fn = Expr::Function::Tanh;
        else if (name == "abs")
            fn = Expr::Function::Abs;
        else
            throw SyntaxError("unknown identifier '" + std::string(name) + "'", start);

        expect('(');
        NodePtr arg = parse_expr(0);
        expect(')');
        return std::make_shared<Node>(Node{Kind::Call, 0.0, fn, std::move(arg), nullptr});
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

inline Expr parse_coefficient(std::string_view text) { return ExprParser(text).parse(); }

inline double eval_coefficient(Expr const& expr, double y) { return expr(y); }

}  // namespace turnpike
