#include "datko/expr.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>

namespace datko {

namespace {

bool is_unary(Expr::Op op) {
  switch (op) {
    case Expr::Op::kNeg:
    case Expr::Op::kSin:
    case Expr::Op::kCos:
    case Expr::Op::kExp:
    case Expr::Op::kAbs:
      return true;
    default:
      return false;
  }
}

bool is_binary(Expr::Op op) {
  switch (op) {
    case Expr::Op::kAdd:
    case Expr::Op::kSub:
    case Expr::Op::kMul:
    case Expr::Op::kDiv:
    case Expr::Op::kPow:
      return true;
    default:
      return false;
  }
}

struct FunctionName {
  std::string_view name;
  Expr::Op op;
};

constexpr std::array<FunctionName, 4> kFunctions{{
    {"sin", Expr::Op::kSin},
    {"cos", Expr::Op::kCos},
    {"exp", Expr::Op::kExp},
    {"abs", Expr::Op::kAbs},
}};

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  Expr parse() {
    Expr e = expr();
    skip_space();
    if (pos_ != src_.size()) {
      throw ParseError("unexpected '" + std::string(1, src_[pos_]) + "'", pos_);
    }
    return e;
  }

 private:
  void skip_space() {
    while (pos_ < src_.size() &&
           (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' ||
            src_[pos_] == '\r')) {
      ++pos_;
    }
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr expr() {
    Expr lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = Expr::binary(Expr::Op::kAdd, lhs, term());
      } else if (accept('-')) {
        lhs = Expr::binary(Expr::Op::kSub, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  Expr term() {
    Expr lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = Expr::binary(Expr::Op::kMul, lhs, unary());
      } else if (accept('/')) {
        lhs = Expr::binary(Expr::Op::kDiv, lhs, unary());
      } else {
        return lhs;
      }
    }
  }

  Expr unary() {
    if (accept('-')) return Expr::unary(Expr::Op::kNeg, unary());
    if (accept('+')) return unary();
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (accept('^')) return Expr::binary(Expr::Op::kPow, base, unary());
    return base;
  }

  Expr primary() {
    skip_space();
    if (pos_ >= src_.size()) throw ParseError("unexpected end of input", pos_);
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      Expr inner = expr();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      return inner;
    }
    if ((c >= '0' && c <= '9') || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    throw ParseError("unexpected '" + std::string(1, c) + "'", pos_);
  }

  Expr number() {
    const std::size_t start = pos_;
    double value = 0.0;
    const auto [end, ec] =
        std::from_chars(src_.data() + pos_, src_.data() + src_.size(), value,
                        std::chars_format::general);
    if (ec != std::errc{} || !std::isfinite(value)) {
      throw ParseError("malformed number", start);
    }
    pos_ = static_cast<std::size_t>(end - src_.data());
    return Expr::constant(value);
  }

  Expr identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
      ++pos_;
    }
    const std::string_view name = src_.substr(start, pos_ - start);
    if (name == "t") return Expr::variable();
    if (name == "pi") return Expr::constant(std::numbers::pi);
    for (const auto& fn : kFunctions) {
      if (fn.name != name) continue;
      if (!accept('(')) throw ParseError("expected '(' after " + std::string(name), pos_);
      skip_space();
      if (pos_ < src_.size() && src_[pos_] == ')') {
        throw ParseError("arity mismatch: " + std::string(name) + " takes 1 argument", pos_);
      }
      Expr arg = expr();
      skip_space();
      if (pos_ < src_.size() && src_[pos_] == ',') {
        throw ParseError("arity mismatch: " + std::string(name) + " takes 1 argument", pos_);
      }
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      return Expr::unary(fn.op, arg);
    }
    throw ParseError("unknown identifier '" + std::string(name) + "'", start);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

int precedence(Expr::Op op) {
  switch (op) {
    case Expr::Op::kAdd:
    case Expr::Op::kSub:
      return 1;
    case Expr::Op::kMul:
    case Expr::Op::kDiv:
      return 2;
    case Expr::Op::kNeg:
      return 3;
    case Expr::Op::kPow:
      return 4;
    default:
      return 5;
  }
}

std::string format_constant(double v) {
  std::array<char, 64> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), std::abs(v));
  std::string digits(buf.data(), end);
  return v < 0 || std::signbit(v) ? "(-" + digits + ")" : digits;
}

void print(const Expr& e, int index, std::string& out) {
  const auto& n = e.nodes()[index];
  auto child = [&](int c, bool parens) {
    if (parens) out += '(';
    print(e, c, out);
    if (parens) out += ')';
  };
  const int prec = precedence(n.op);
  switch (n.op) {
    case Expr::Op::kConst:
      out += format_constant(n.value);
      return;
    case Expr::Op::kVar:
      out += 't';
      return;
    case Expr::Op::kNeg:
      out += '-';
      child(n.lhs, precedence(e.nodes()[n.lhs].op) < prec);
      return;
    case Expr::Op::kSin:
    case Expr::Op::kCos:
    case Expr::Op::kExp:
    case Expr::Op::kAbs: {
      static constexpr std::array<std::string_view, 4> names{"sin", "cos", "exp", "abs"};
      out += names[static_cast<int>(n.op) - static_cast<int>(Expr::Op::kSin)];
      child(n.lhs, true);
      return;
    }
    case Expr::Op::kPow:
      // base: anything that is not a primary needs parentheses
      child(n.lhs, precedence(e.nodes()[n.lhs].op) <= prec);
      out += '^';
      child(n.rhs, precedence(e.nodes()[n.rhs].op) < precedence(Expr::Op::kNeg));
      return;
    default: {
      static constexpr std::array<char, 4> symbols{'+', '-', '*', '/'};
      child(n.lhs, precedence(e.nodes()[n.lhs].op) < prec);
      out += ' ';
      out += symbols[static_cast<int>(n.op) - static_cast<int>(Expr::Op::kAdd)];
      out += ' ';
      child(n.rhs, precedence(e.nodes()[n.rhs].op) <= prec);
      return;
    }
  }
}

bool equal_at(const Expr& a, int ia, const Expr& b, int ib) {
  const auto& na = a.nodes()[ia];
  const auto& nb = b.nodes()[ib];
  if (na.op != nb.op) return false;
  if (na.op == Expr::Op::kConst) return na.value == nb.value;
  if (na.op == Expr::Op::kVar) return true;
  if (!equal_at(a, na.lhs, b, nb.lhs)) return false;
  return is_unary(na.op) || equal_at(a, na.rhs, b, nb.rhs);
}

}  // namespace

Expr::Expr() : nodes_{{Op::kConst, 0.0, -1, -1}} {}

Expr Expr::constant(double value) { return Expr({{Op::kConst, value, -1, -1}}); }

Expr Expr::variable() { return Expr({{Op::kVar, 0.0, -1, -1}}); }

Expr Expr::unary(Op op, const Expr& operand) {
  if (!is_unary(op)) throw std::invalid_argument("Expr::unary: not a unary op");
  Expr out{std::vector<Node>{}};
  const int a = out.append(operand);
  out.nodes_.push_back({op, 0.0, a, -1});
  return out;
}

Expr Expr::binary(Op op, const Expr& lhs, const Expr& rhs) {
  if (!is_binary(op)) throw std::invalid_argument("Expr::binary: not a binary op");
  Expr out{std::vector<Node>{}};
  const int a = out.append(lhs);
  const int b = out.append(rhs);
  out.nodes_.push_back({op, 0.0, a, b});
  return out;
}

int Expr::append(const Expr& other) {
  const int offset = static_cast<int>(nodes_.size());
  for (Node n : other.nodes_) {
    if (n.lhs >= 0) n.lhs += offset;
    if (n.rhs >= 0) n.rhs += offset;
    nodes_.push_back(n);
  }
  return static_cast<int>(nodes_.size()) - 1;
}

double Expr::eval(int index, double t) const {
  const Node& n = nodes_[index];
  switch (n.op) {
    case Op::kConst: return n.value;
    case Op::kVar: return t;
    case Op::kNeg: return -eval(n.lhs, t);
    case Op::kAdd: return eval(n.lhs, t) + eval(n.rhs, t);
    case Op::kSub: return eval(n.lhs, t) - eval(n.rhs, t);
    case Op::kMul: return eval(n.lhs, t) * eval(n.rhs, t);
    case Op::kDiv: {
      const double den = eval(n.rhs, t);
      if (den == 0.0) throw EvalError("division by zero at t = " + std::to_string(t));
      return eval(n.lhs, t) / den;
    }
    case Op::kPow: {
      const double base = eval(n.lhs, t);
      const double ex = eval(n.rhs, t);
      // small integer exponents are common (sin(t)^2); keep them exact
      if (ex == 2.0) return base * base;
      return std::pow(base, ex);
    }
    case Op::kSin: return std::sin(eval(n.lhs, t));
    case Op::kCos: return std::cos(eval(n.lhs, t));
    case Op::kExp: return std::exp(eval(n.lhs, t));
    case Op::kAbs: return std::abs(eval(n.lhs, t));
  }
  return 0.0;
}

double Expr::operator()(double t) const {
  const double v = eval(root(), t);
  if (!std::isfinite(v)) {
    throw EvalError("non-finite value at t = " + std::to_string(t) + " in " + to_string(*this));
  }
  return v;
}

bool operator==(const Expr& a, const Expr& b) { return equal_at(a, a.root(), b, b.root()); }

Expr parse_generator(std::string_view source) { return Parser(source).parse(); }

std::string to_string(const Expr& expr) {
  std::string out;
  print(expr, expr.root(), out);
  return out;
}

}  // namespace datko
