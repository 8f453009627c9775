#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>

#include "nlb/geometry.hpp"

namespace nlb::expr {

// Raised on malformed input; carries 1-based line/column of the offending token.
struct ParseError : std::runtime_error {
    int line, column;
    ParseError(const std::string& msg, int ln, int col)
        : std::runtime_error(msg + " at line " + std::to_string(ln) + ", column " +
                             std::to_string(col)),
          line(ln),
          column(col) {}
};

class Node;
using NodePtr = std::shared_ptr<const Node>;

// A parsed arithmetic expression over x1..xn (plus alias t for time-dependent
// data). Grammar: + - * / ^, unary minus, parentheses, numbers, and the
// functions exp, sin, cos, abs, pos (positive part), sqrt, log, tanh.
class Expression {
public:
    Expression() = default;
    double eval(const Vec& x, double t = 0.0) const;
    bool valid() const { return root_ != nullptr; }
    const std::string& source() const { return src_; }

    static Expression parse(const std::string& text);

private:
    NodePtr root_;
    std::string src_;
};

}  // namespace nlb::expr
