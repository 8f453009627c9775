#include "nlb/expr.hpp"

#include <cctype>
#include <cmath>
#include <vector>

namespace nlb::expr {

enum class Op { Num, Var, Time, Add, Sub, Mul, Div, Pow, Neg, Call };

class Node {
public:
    Op op;
    double num = 0.0;
    int var = 0;  // 0-based axis for Var
    std::function<double(double)> fn;
    NodePtr a, b;

    double eval(const Vec& x, double t) const {
        switch (op) {
            case Op::Num: return num;
            case Op::Var: return var < x.n ? x[var] : 0.0;
            case Op::Time: return t;
            case Op::Add: return a->eval(x, t) + b->eval(x, t);
            case Op::Sub: return a->eval(x, t) - b->eval(x, t);
            case Op::Mul: return a->eval(x, t) * b->eval(x, t);
            case Op::Div: return a->eval(x, t) / b->eval(x, t);
            case Op::Pow: return std::pow(a->eval(x, t), b->eval(x, t));
            case Op::Neg: return -a->eval(x, t);
            case Op::Call: return fn(a->eval(x, t));
        }
        return 0.0;
    }
};

namespace {

struct Token {
    enum Kind { Number, Ident, Sym, End } kind;
    std::string text;
    double value = 0.0;
    int line = 1, col = 1;
};

class Lexer {
public:
    explicit Lexer(const std::string& s) : s_(s) { advance(); }
    const Token& peek() const { return tok_; }
    Token take() {
        Token t = tok_;
        advance();
        return t;
    }

private:
    void advance() {
        while (pos_ < s_.size() && std::isspace((unsigned char)s_[pos_])) bump();
        tok_.line = line_;
        tok_.col = col_;
        if (pos_ >= s_.size()) {
            tok_.kind = Token::End;
            tok_.text.clear();
            return;
        }
        char c = s_[pos_];
        if (std::isdigit((unsigned char)c) || c == '.') {
            size_t start = pos_;
            while (pos_ < s_.size() &&
                   (std::isdigit((unsigned char)s_[pos_]) || s_[pos_] == '.' || s_[pos_] == 'e' ||
                    s_[pos_] == 'E' ||
                    ((s_[pos_] == '+' || s_[pos_] == '-') && pos_ > start &&
                     (s_[pos_ - 1] == 'e' || s_[pos_ - 1] == 'E'))))
                bump();
            tok_.kind = Token::Number;
            tok_.text = s_.substr(start, pos_ - start);
            try {
                tok_.value = std::stod(tok_.text);
            } catch (...) {
                throw ParseError("invalid number '" + tok_.text + "'", tok_.line, tok_.col);
            }
            return;
        }
        if (std::isalpha((unsigned char)c) || c == '_') {
            size_t start = pos_;
            while (pos_ < s_.size() &&
                   (std::isalnum((unsigned char)s_[pos_]) || s_[pos_] == '_'))
                bump();
            tok_.kind = Token::Ident;
            tok_.text = s_.substr(start, pos_ - start);
            return;
        }
        tok_.kind = Token::Sym;
        tok_.text = std::string(1, c);
        bump();
    }
    void bump() {
        if (s_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }
    std::string s_;
    size_t pos_ = 0;
    int line_ = 1, col_ = 1;
    Token tok_;
};

NodePtr make(Op op, NodePtr a = nullptr, NodePtr b = nullptr) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->a = a;
    n->b = b;
    return n;
}

class Parser {
public:
    explicit Parser(const std::string& s) : lex_(s) {}
    NodePtr parse() {
        NodePtr e = expr();
        if (lex_.peek().kind != Token::End)
            throw ParseError("unexpected token '" + lex_.peek().text + "'", lex_.peek().line,
                             lex_.peek().col);
        return e;
    }

private:
    NodePtr expr() {
        NodePtr lhs = term();
        while (is_sym("+") || is_sym("-")) {
            bool add = is_sym("+");
            lex_.take();
            lhs = make(add ? Op::Add : Op::Sub, lhs, term());
        }
        return lhs;
    }
    NodePtr term() {
        NodePtr lhs = unary();
        while (is_sym("*") || is_sym("/")) {
            bool mul = is_sym("*");
            lex_.take();
            lhs = make(mul ? Op::Mul : Op::Div, lhs, unary());
        }
        return lhs;
    }
    NodePtr unary() {
        if (is_sym("-")) {
            lex_.take();
            return make(Op::Neg, unary());
        }
        if (is_sym("+")) lex_.take();
        return power();
    }
    NodePtr power() {
        NodePtr base = atom();
        if (is_sym("^")) {
            lex_.take();
            return make(Op::Pow, base, unary());  // right associative
        }
        return base;
    }
    NodePtr atom() {
        Token t = lex_.peek();
        if (t.kind == Token::Number) {
            lex_.take();
            auto n = make(Op::Num);
            const_cast<Node&>(*n).num = t.value;
            return n;
        }
        if (t.kind == Token::Ident) {
            lex_.take();
            if (t.text == "t") return make(Op::Time);
            if (t.text == "x" || t.text == "x1") return variable(0);
            if (t.text == "y" || t.text == "x2") return variable(1);
            if (t.text == "z" || t.text == "x3") return variable(2);
            if (t.text == "pi") {
                auto n = make(Op::Num);
                const_cast<Node&>(*n).num = 3.14159265358979323846;
                return n;
            }
            std::function<double(double)> fn;
            if (t.text == "exp") fn = [](double v) { return std::exp(v); };
            else if (t.text == "sin") fn = [](double v) { return std::sin(v); };
            else if (t.text == "cos") fn = [](double v) { return std::cos(v); };
            else if (t.text == "abs") fn = [](double v) { return std::abs(v); };
            else if (t.text == "pos") fn = [](double v) { return v > 0 ? v : 0.0; };
            else if (t.text == "sqrt") fn = [](double v) { return std::sqrt(v); };
            else if (t.text == "log") fn = [](double v) { return std::log(v); };
            else if (t.text == "tanh") fn = [](double v) { return std::tanh(v); };
            else
                throw ParseError("unknown identifier '" + t.text + "'", t.line, t.col);
            expect("(");
            NodePtr arg = expr();
            expect(")");
            auto n = make(Op::Call, arg);
            const_cast<Node&>(*n).fn = fn;
            return n;
        }
        if (is_sym("(")) {
            lex_.take();
            NodePtr e = expr();
            expect(")");
            return e;
        }
        throw ParseError("unexpected token '" + t.text + "'", t.line, t.col);
    }
    NodePtr variable(int axis) {
        auto n = make(Op::Var);
        const_cast<Node&>(*n).var = axis;
        return n;
    }
    bool is_sym(const char* s) const {
        return lex_.peek().kind == Token::Sym && lex_.peek().text == s;
    }
    void expect(const char* s) {
        if (!is_sym(s))
            throw ParseError(std::string("expected '") + s + "'", lex_.peek().line,
                             lex_.peek().col);
        lex_.take();
    }
    Lexer lex_;
};

}  // namespace

double Expression::eval(const Vec& x, double t) const {
    if (!root_) throw std::logic_error("evaluating empty expression");
    return root_->eval(x, t);
}

Expression Expression::parse(const std::string& text) {
    Expression e;
    Parser p(text);
    e.root_ = p.parse();
    e.src_ = text;
    return e;
}

}  // namespace nlb::expr
