#include "conglab/expr.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>

namespace conglab {

namespace detail {

enum class NodeKind : std::uint8_t { Number, Var, Add, Sub, Mul, Div, Pow, Neg, Fun };
enum class FunKind : std::uint8_t { Sin, Cos, Exp, Log, Sqrt };

struct ExprNode {
  NodeKind kind;
  FunKind fun = FunKind::Sin;
  double value = 0.0;
  int axis = -1;
  NodePtr a, b;

  mutable std::mutex dmu;
  mutable std::map<int, NodePtr> dcache;
};

namespace {

NodePtr make_number(double v) {
  auto n = std::make_shared<ExprNode>();
  n->kind = NodeKind::Number;
  n->value = v;
  return n;
}

NodePtr make_var(int axis) {
  auto n = std::make_shared<ExprNode>();
  n->kind = NodeKind::Var;
  n->axis = axis;
  return n;
}

bool is_num(const NodePtr& n, double v) {
  return n->kind == NodeKind::Number && n->value == v;
}

NodePtr make_neg(const NodePtr& a);

NodePtr make_binary(NodeKind kind, const NodePtr& a, const NodePtr& b) {
  auto n = std::make_shared<ExprNode>();
  n->kind = kind;
  n->a = a;
  n->b = b;
  return n;
}

NodePtr make_add(const NodePtr& a, const NodePtr& b) {
  if (a->kind == NodeKind::Number && b->kind == NodeKind::Number)
    return make_number(a->value + b->value);
  if (is_num(a, 0.0)) return b;
  if (is_num(b, 0.0)) return a;
  return make_binary(NodeKind::Add, a, b);
}

NodePtr make_sub(const NodePtr& a, const NodePtr& b) {
  if (a->kind == NodeKind::Number && b->kind == NodeKind::Number)
    return make_number(a->value - b->value);
  if (is_num(b, 0.0)) return a;
  if (is_num(a, 0.0)) return make_neg(b);
  return make_binary(NodeKind::Sub, a, b);
}

NodePtr make_mul(const NodePtr& a, const NodePtr& b) {
  if (a->kind == NodeKind::Number && b->kind == NodeKind::Number)
    return make_number(a->value * b->value);
  if (is_num(a, 0.0) || is_num(b, 0.0)) return make_number(0.0);
  if (is_num(a, 1.0)) return b;
  if (is_num(b, 1.0)) return a;
  if (is_num(a, -1.0)) return make_neg(b);
  if (is_num(b, -1.0)) return make_neg(a);
  return make_binary(NodeKind::Mul, a, b);
}

NodePtr make_div(const NodePtr& a, const NodePtr& b) {
  if (a->kind == NodeKind::Number && b->kind == NodeKind::Number && b->value != 0.0)
    return make_number(a->value / b->value);
  if (is_num(a, 0.0)) return make_number(0.0);
  if (is_num(b, 1.0)) return a;
  return make_binary(NodeKind::Div, a, b);
}

NodePtr make_pow(const NodePtr& a, const NodePtr& b) {
  if (is_num(b, 1.0)) return a;
  if (is_num(b, 0.0)) return make_number(1.0);
  if (a->kind == NodeKind::Number && b->kind == NodeKind::Number) {
    double r = std::pow(a->value, b->value);
    if (std::isfinite(r)) return make_number(r);
  }
  return make_binary(NodeKind::Pow, a, b);
}

NodePtr make_neg(const NodePtr& a) {
  if (a->kind == NodeKind::Number) return make_number(-a->value);
  if (a->kind == NodeKind::Neg) return a->a;
  auto n = std::make_shared<ExprNode>();
  n->kind = NodeKind::Neg;
  n->a = a;
  return n;
}

NodePtr make_fun(FunKind fun, const NodePtr& a) {
  if (a->kind == NodeKind::Number) {
    double x = a->value, r = 0.0;
    bool ok = true;
    switch (fun) {
      case FunKind::Sin: r = std::sin(x); break;
      case FunKind::Cos: r = std::cos(x); break;
      case FunKind::Exp: r = std::exp(x); ok = std::isfinite(r); break;
      case FunKind::Log: ok = x > 0.0; r = ok ? std::log(x) : 0.0; break;
      case FunKind::Sqrt: ok = x >= 0.0; r = ok ? std::sqrt(x) : 0.0; break;
    }
    if (ok) return make_number(r);
  }
  auto n = std::make_shared<ExprNode>();
  n->kind = NodeKind::Fun;
  n->fun = fun;
  n->a = a;
  return n;
}

const char* fun_name(FunKind f) {
  switch (f) {
    case FunKind::Sin: return "sin";
    case FunKind::Cos: return "cos";
    case FunKind::Exp: return "exp";
    case FunKind::Log: return "log";
    case FunKind::Sqrt: return "sqrt";
  }
  return "?";
}

double eval_node(const ExprNode* n, std::span<const double> p) {
  switch (n->kind) {
    case NodeKind::Number:
      return n->value;
    case NodeKind::Var:
      return p[static_cast<std::size_t>(n->axis)];
    case NodeKind::Add:
      return eval_node(n->a.get(), p) + eval_node(n->b.get(), p);
    case NodeKind::Sub:
      return eval_node(n->a.get(), p) - eval_node(n->b.get(), p);
    case NodeKind::Mul:
      return eval_node(n->a.get(), p) * eval_node(n->b.get(), p);
    case NodeKind::Div: {
      double num = eval_node(n->a.get(), p);
      double den = eval_node(n->b.get(), p);
      if (den == 0.0) throw EvalError(EvalFault::DivisionByZero, "division by zero");
      return num / den;
    }
    case NodeKind::Pow: {
      double base = eval_node(n->a.get(), p);
      double e = eval_node(n->b.get(), p);
      if (base == 0.0 && e < 0.0)
        throw EvalError(EvalFault::PowDomain, "zero raised to a negative power");
      if (base < 0.0 && e != std::floor(e))
        throw EvalError(EvalFault::PowDomain, "negative base with non-integer exponent");
      double r = std::pow(base, e);
      if (!std::isfinite(r)) throw EvalError(EvalFault::NonFinite, "non-finite power result");
      return r;
    }
    case NodeKind::Neg:
      return -eval_node(n->a.get(), p);
    case NodeKind::Fun: {
      double x = eval_node(n->a.get(), p);
      switch (n->fun) {
        case FunKind::Sin: return std::sin(x);
        case FunKind::Cos: return std::cos(x);
        case FunKind::Exp: {
          double r = std::exp(x);
          if (!std::isfinite(r)) throw EvalError(EvalFault::NonFinite, "exp overflow");
          return r;
        }
        case FunKind::Log:
          if (x <= 0.0) throw EvalError(EvalFault::LogDomain, "log of non-positive value");
          return std::log(x);
        case FunKind::Sqrt:
          if (x < 0.0) throw EvalError(EvalFault::SqrtDomain, "sqrt of negative value");
          return std::sqrt(x);
      }
      break;
    }
  }
  throw Error("corrupt expression node");
}

NodePtr diff_node(const NodePtr& n, int axis);

NodePtr diff_uncached(const NodePtr& n, int axis) {
  switch (n->kind) {
    case NodeKind::Number:
      return make_number(0.0);
    case NodeKind::Var:
      return make_number(n->axis == axis ? 1.0 : 0.0);
    case NodeKind::Add:
      return make_add(diff_node(n->a, axis), diff_node(n->b, axis));
    case NodeKind::Sub:
      return make_sub(diff_node(n->a, axis), diff_node(n->b, axis));
    case NodeKind::Mul:
      return make_add(make_mul(diff_node(n->a, axis), n->b),
                      make_mul(n->a, diff_node(n->b, axis)));
    case NodeKind::Div:
      return make_div(make_sub(make_mul(diff_node(n->a, axis), n->b),
                               make_mul(n->a, diff_node(n->b, axis))),
                      make_mul(n->b, n->b));
    case NodeKind::Pow: {
      const NodePtr& base = n->a;
      const NodePtr& e = n->b;
      NodePtr db = diff_node(base, axis);
      NodePtr de = diff_node(e, axis);
      if (e->kind == NodeKind::Number)
        return make_mul(make_mul(e, make_pow(base, make_number(e->value - 1.0))), db);
      if (is_num(db, 0.0))
        return make_mul(make_mul(make_pow(base, e), make_fun(FunKind::Log, base)), de);
      // general case: a^b (b' log a + b a'/a)
      return make_mul(make_pow(base, e),
                      make_add(make_mul(de, make_fun(FunKind::Log, base)),
                               make_div(make_mul(e, db), base)));
    }
    case NodeKind::Neg:
      return make_neg(diff_node(n->a, axis));
    case NodeKind::Fun: {
      NodePtr da = diff_node(n->a, axis);
      switch (n->fun) {
        case FunKind::Sin: return make_mul(make_fun(FunKind::Cos, n->a), da);
        case FunKind::Cos: return make_neg(make_mul(make_fun(FunKind::Sin, n->a), da));
        case FunKind::Exp: return make_mul(make_fun(FunKind::Exp, n->a), da);
        case FunKind::Log: return make_div(da, n->a);
        case FunKind::Sqrt:
          return make_div(da, make_mul(make_number(2.0), make_fun(FunKind::Sqrt, n->a)));
      }
      break;
    }
  }
  throw Error("corrupt expression node");
}

NodePtr diff_node(const NodePtr& n, int axis) {
  {
    std::lock_guard<std::mutex> lock(n->dmu);
    auto it = n->dcache.find(axis);
    if (it != n->dcache.end()) return it->second;
  }
  NodePtr d = diff_uncached(n, axis);
  std::lock_guard<std::mutex> lock(n->dmu);
  return n->dcache.emplace(axis, std::move(d)).first->second;
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), ptr);
}

// Precedence: Add/Sub 1, Mul/Div 2, Neg 3, Pow 4, atoms 5.
int node_prec(const ExprNode* n) {
  switch (n->kind) {
    case NodeKind::Add:
    case NodeKind::Sub:
      return 1;
    case NodeKind::Mul:
    case NodeKind::Div:
      return 2;
    case NodeKind::Neg:
      return 3;
    case NodeKind::Number:
      return n->value < 0.0 ? 3 : 5;
    case NodeKind::Pow:
      return 4;
    default:
      return 5;
  }
}

void print_node(const ExprNode* n, const std::vector<std::string>* names, int min_prec,
                std::string& out) {
  int prec = node_prec(n);
  bool parens = prec < min_prec;
  if (parens) out += '(';
  switch (n->kind) {
    case NodeKind::Number:
      out += format_double(n->value);
      break;
    case NodeKind::Var:
      out += names ? (*names)[static_cast<std::size_t>(n->axis)]
                   : "#" + std::to_string(n->axis);
      break;
    case NodeKind::Add:
      print_node(n->a.get(), names, 1, out);
      out += '+';
      print_node(n->b.get(), names, 2, out);
      break;
    case NodeKind::Sub:
      print_node(n->a.get(), names, 1, out);
      out += '-';
      print_node(n->b.get(), names, 2, out);
      break;
    case NodeKind::Mul:
      print_node(n->a.get(), names, 2, out);
      out += '*';
      print_node(n->b.get(), names, 3, out);
      break;
    case NodeKind::Div:
      print_node(n->a.get(), names, 2, out);
      out += '/';
      print_node(n->b.get(), names, 3, out);
      break;
    case NodeKind::Neg:
      out += '-';
      print_node(n->a.get(), names, 3, out);
      break;
    case NodeKind::Pow:
      print_node(n->a.get(), names, 5, out);
      out += '^';
      print_node(n->b.get(), names, 3, out);
      break;
    case NodeKind::Fun:
      out += fun_name(n->fun);
      out += '(';
      print_node(n->a.get(), names, 0, out);
      out += ')';
      break;
  }
  if (parens) out += ')';
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

enum class Tok { Num, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, End };

struct Token {
  Tok kind;
  std::size_t offset;
  std::string text;
  double value = 0.0;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) { advance(); }

  const Token& peek() const { return tok_; }

  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    tok_.offset = pos_;
    if (pos_ >= src_.size()) {
      tok_ = {Tok::End, pos_, "", 0.0};
      return;
    }
    char c = src_[pos_];
    switch (c) {
      case '+': tok_ = {Tok::Plus, pos_++, "+", 0.0}; return;
      case '-': tok_ = {Tok::Minus, pos_++, "-", 0.0}; return;
      case '*': tok_ = {Tok::Star, pos_++, "*", 0.0}; return;
      case '/': tok_ = {Tok::Slash, pos_++, "/", 0.0}; return;
      case '^': tok_ = {Tok::Caret, pos_++, "^", 0.0}; return;
      case '(': tok_ = {Tok::LParen, pos_++, "(", 0.0}; return;
      case ')': tok_ = {Tok::RParen, pos_++, ")", 0.0}; return;
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      if (pos_ < src_.size() && src_[pos_] == '.') {
        ++pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      }
      if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
        std::size_t mark = pos_;
        ++pos_;
        if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
        if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
          while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        } else {
          pos_ = mark;  // not an exponent
        }
      }
      std::string text(src_.substr(start, pos_ - start));
      double v = 0.0;
      auto res = std::from_chars(text.data(), text.data() + text.size(), v);
      if (res.ec != std::errc())
        throw ParseError(start, "a valid number", "malformed number literal at offset " +
                                                      std::to_string(start));
      tok_ = {Tok::Num, start, std::move(text), v};
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        ++pos_;
      tok_ = {Tok::Ident, start, std::string(src_.substr(start, pos_ - start)), 0.0};
      return;
    }
    throw ParseError(pos_, "a number, identifier, operator, or parenthesis",
                     std::string("unexpected character '") + c + "' at offset " +
                         std::to_string(pos_));
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  Token tok_{Tok::End, 0, "", 0.0};
};

class Parser {
 public:
  Parser(std::string_view src, const Coords& coords) : lex_(src), coords_(coords) {}

  NodePtr run() {
    NodePtr e = additive();
    const Token& t = lex_.peek();
    if (t.kind != Tok::End)
      throw ParseError(t.offset, "an operator or end of input",
                       "unexpected '" + t.text + "' at offset " + std::to_string(t.offset));
    return e;
  }

 private:
  static constexpr const char* kPrimaryExpected =
      "a number, a variable, a function name, '(' or '-'";

  NodePtr additive() {
    NodePtr e = multiplicative();
    for (;;) {
      Tok k = lex_.peek().kind;
      if (k == Tok::Plus) {
        lex_.take();
        e = make_add(e, multiplicative());
      } else if (k == Tok::Minus) {
        lex_.take();
        e = make_sub(e, multiplicative());
      } else {
        return e;
      }
    }
  }

  NodePtr multiplicative() {
    NodePtr e = unary();
    for (;;) {
      Tok k = lex_.peek().kind;
      if (k == Tok::Star) {
        lex_.take();
        e = make_mul(e, unary());
      } else if (k == Tok::Slash) {
        lex_.take();
        e = make_div(e, unary());
      } else {
        return e;
      }
    }
  }

  NodePtr unary() {
    if (lex_.peek().kind == Tok::Minus) {
      lex_.take();
      return make_neg(unary());
    }
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (lex_.peek().kind == Tok::Caret) {
      lex_.take();
      return make_pow(base, unary());  // right-associative; unary minus allowed in exponent
    }
    return base;
  }

  NodePtr primary() {
    Token t = lex_.peek();
    switch (t.kind) {
      case Tok::Num:
        lex_.take();
        return make_number(t.value);
      case Tok::LParen: {
        lex_.take();
        NodePtr e = additive();
        expect(Tok::RParen, "')'");
        return e;
      }
      case Tok::Ident: {
        lex_.take();
        if (auto fun = fun_of(t.text)) {
          expect(Tok::LParen, "'(' after function name");
          NodePtr arg = additive();
          expect(Tok::RParen, "')'");
          return make_fun(*fun, arg);
        }
        for (std::size_t i = 0; i < coords_->size(); ++i)
          if ((*coords_)[i] == t.text) return make_var(static_cast<int>(i));
        throw UnknownIdentifierError(t.offset, t.text);
      }
      default:
        throw ParseError(t.offset, kPrimaryExpected,
                         "unexpected " + describe(t) + " at offset " + std::to_string(t.offset));
    }
  }

  static std::optional<FunKind> fun_of(const std::string& name) {
    if (name == "sin") return FunKind::Sin;
    if (name == "cos") return FunKind::Cos;
    if (name == "exp") return FunKind::Exp;
    if (name == "log") return FunKind::Log;
    if (name == "sqrt") return FunKind::Sqrt;
    return std::nullopt;
  }

  static std::string describe(const Token& t) {
    return t.kind == Tok::End ? std::string("end of input") : "'" + t.text + "'";
  }

  void expect(Tok kind, const std::string& what) {
    const Token& t = lex_.peek();
    if (t.kind != kind)
      throw ParseError(t.offset, what,
                       "expected " + what + " but found " + describe(t) + " at offset " +
                           std::to_string(t.offset));
    lex_.take();
  }

  Lexer lex_;
  Coords coords_;
};

}  // namespace
}  // namespace detail

using detail::ExprNode;
using detail::NodePtr;

Coords make_coords(std::vector<std::string> names) {
  for (const auto& n : names) {
    if (n.empty()) throw ValidationError("empty coordinate name");
    if (n == "sin" || n == "cos" || n == "exp" || n == "log" || n == "sqrt")
      throw ValidationError("coordinate name '" + n + "' collides with a function name");
  }
  for (std::size_t i = 0; i < names.size(); ++i)
    for (std::size_t j = i + 1; j < names.size(); ++j)
      if (names[i] == names[j]) throw ValidationError("duplicate coordinate name '" + names[i] + "'");
  return std::make_shared<const std::vector<std::string>>(std::move(names));
}

Expr::Expr() : node_(detail::make_number(0.0)) {}

Expr::Expr(NodePtr node, Coords coords) : node_(std::move(node)), coords_(std::move(coords)) {}

Expr Expr::parse(std::string_view source, const Coords& coords) {
  if (!coords) throw ValidationError("parse requires a coordinate list");
  detail::Parser parser(source, coords);
  return Expr(parser.run(), coords);
}

Expr Expr::number(double value) { return Expr(detail::make_number(value), nullptr); }

Expr Expr::variable(int axis, const Coords& coords) {
  if (!coords || axis < 0 || axis >= static_cast<int>(coords->size()))
    throw ValidationError("variable axis out of range");
  return Expr(detail::make_var(axis), coords);
}

Expr Expr::derivative(int axis) const {
  if (coords_ && (axis < 0 || axis >= static_cast<int>(coords_->size())))
    throw ValidationError("derivative axis out of range");
  return Expr(detail::diff_node(node_, axis), coords_);
}

double Expr::eval(std::span<const double> point) const {
  if (coords_ && point.size() < coords_->size())
    throw ValidationError("evaluation point has wrong dimension");
  return detail::eval_node(node_.get(), point);
}

std::string Expr::str() const {
  std::string out;
  detail::print_node(node_.get(), coords_ ? coords_.get() : nullptr, 0, out);
  return out;
}

int Expr::dim() const noexcept { return coords_ ? static_cast<int>(coords_->size()) : 0; }

bool Expr::is_literal() const noexcept { return node_->kind == detail::NodeKind::Number; }

bool Expr::is_zero() const noexcept { return is_literal() && node_->value == 0.0; }

double Expr::literal_value() const {
  if (!is_literal()) throw Error("expression is not a literal");
  return node_->value;
}

namespace {

Coords merge_coords(const Coords& a, const Coords& b) {
  if (!a) return b;
  if (!b) return a;
  if (a == b || *a == *b) return a;
  throw ValidationError("cannot combine expressions over different coordinate lists");
}

}  // namespace

Expr Expr::operator-() const { return Expr(detail::make_neg(node_), coords_); }

Expr operator+(const Expr& a, const Expr& b) {
  return Expr(detail::make_add(a.node_, b.node_), merge_coords(a.coords_, b.coords_));
}
Expr operator-(const Expr& a, const Expr& b) {
  return Expr(detail::make_sub(a.node_, b.node_), merge_coords(a.coords_, b.coords_));
}
Expr operator*(const Expr& a, const Expr& b) {
  return Expr(detail::make_mul(a.node_, b.node_), merge_coords(a.coords_, b.coords_));
}
Expr operator/(const Expr& a, const Expr& b) {
  return Expr(detail::make_div(a.node_, b.node_), merge_coords(a.coords_, b.coords_));
}
Expr pow(const Expr& base, const Expr& exponent) {
  return Expr(detail::make_pow(base.node_, exponent.node_),
              merge_coords(base.coords_, exponent.coords_));
}
Expr sin(const Expr& a) { return Expr(detail::make_fun(detail::FunKind::Sin, a.node_), a.coords_); }
Expr cos(const Expr& a) { return Expr(detail::make_fun(detail::FunKind::Cos, a.node_), a.coords_); }
Expr exp(const Expr& a) { return Expr(detail::make_fun(detail::FunKind::Exp, a.node_), a.coords_); }
Expr log(const Expr& a) { return Expr(detail::make_fun(detail::FunKind::Log, a.node_), a.coords_); }
Expr sqrt(const Expr& a) {
  return Expr(detail::make_fun(detail::FunKind::Sqrt, a.node_), a.coords_);
}

}  // namespace conglab
