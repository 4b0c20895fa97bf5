#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace datko {

/// Raised by parse_generator. offset() is the byte offset of the offending token.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at offset " + std::to_string(offset)),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Raised when an expression evaluates to a non-finite value (division by
/// zero, overflow, fractional power of a negative base).
class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Real function of a single time variable t, stored as a flat tree.
///
/// Grammar (precedence low to high):
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := ('-' | '+') unary | power
///   power   := primary ('^' unary)?        right associative
///   primary := number | 't' | 'pi' | fn '(' expr ')' | '(' expr ')'
///   fn      := sin | cos | exp | abs
class Expr {
 public:
  enum class Op : std::uint8_t {
    kConst, kVar, kNeg, kAdd, kSub, kMul, kDiv, kPow, kSin, kCos, kExp, kAbs
  };

  struct Node {
    Op op;
    double value;  // kConst only
    int lhs;       // operand index for unary ops and functions
    int rhs;
  };

  /// The zero function.
  Expr();

  static Expr constant(double value);
  static Expr variable();
  static Expr unary(Op op, const Expr& operand);
  static Expr binary(Op op, const Expr& lhs, const Expr& rhs);

  double operator()(double t) const;

  const std::vector<Node>& nodes() const { return nodes_; }
  int root() const { return static_cast<int>(nodes_.size()) - 1; }

  /// Structural equality (same tree shape, ops and constants).
  friend bool operator==(const Expr& a, const Expr& b);

 private:
  explicit Expr(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}
  int append(const Expr& other);
  double eval(int index, double t) const;

  std::vector<Node> nodes_;  // children precede their parents
};

Expr parse_generator(std::string_view source);

/// Prints an expression that parses back to a structurally equal tree.
/// Negative constants (never produced by the parser) are printed in
/// parentheses and re-parse as a negation.
std::string to_string(const Expr& expr);

}  // namespace datko
