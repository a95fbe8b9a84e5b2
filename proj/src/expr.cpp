#include "svf/expr.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>

namespace svf {

char block_name(Block b) {
  switch (b) {
    case Block::x: return 'x';
    case Block::y: return 'y';
    case Block::u: return 'u';
    case Block::s: return 's';
  }
  return '?';
}

struct Expr::Node {
  Op op = Op::constant;
  double value = 0.0;
  VarRef var{};
  int exponent = 0;
  std::vector<Expr> children;
};

namespace {

bool is_binary(Op op) {
  return op == Op::add || op == Op::sub || op == Op::mul || op == Op::div;
}

const char* function_name(Op op) {
  switch (op) {
    case Op::sin: return "sin";
    case Op::cos: return "cos";
    case Op::exp: return "exp";
    case Op::log: return "log";
    case Op::sqrt: return "sqrt";
    default: return nullptr;
  }
}

double apply_unary(Op op, double a) {
  switch (op) {
    case Op::neg: return -a;
    case Op::sin: return std::sin(a);
    case Op::cos: return std::cos(a);
    case Op::exp: return std::exp(a);
    case Op::log: return std::log(a);
    case Op::sqrt: return std::sqrt(a);
    default: return a;
  }
}

double apply_binary(Op op, double a, double b) {
  switch (op) {
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
    case Op::div: return a / b;
    default: return 0.0;
  }
}

double int_pow(double base, int n) {
  if (n < 0) return 1.0 / int_pow(base, -n);
  double result = 1.0;
  double b = base;
  while (n > 0) {
    if (n & 1) result *= b;
    b *= b;
    n >>= 1;
  }
  return result;
}

// Whether the operation is defined for the argument(s); folding never hides a
// domain error that evaluation would raise.
bool unary_in_domain(Op op, double a) {
  if (op == Op::log) return a > 0.0;
  if (op == Op::sqrt) return a >= 0.0;
  return true;
}

}  // namespace

Expr::Expr() : Expr(constant(0.0)) {}

Expr Expr::constant(double v) {
  auto n = std::make_shared<Node>();
  n->op = Op::constant;
  n->value = v;
  return Expr(std::move(n));
}

Expr Expr::variable(Block b, int index) {
  if (index < 0) throw std::invalid_argument("negative variable index");
  auto n = std::make_shared<Node>();
  n->op = Op::variable;
  n->var = {b, index};
  return Expr(std::move(n));
}

Expr Expr::raw_unary(Op op, Expr a) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->children = {std::move(a)};
  return Expr(std::move(n));
}

Expr Expr::raw_binary(Op op, Expr a, Expr b) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->children = {std::move(a), std::move(b)};
  return Expr(std::move(n));
}

Expr Expr::raw_pow(Expr base, int exponent) {
  auto n = std::make_shared<Node>();
  n->op = Op::pow;
  n->exponent = exponent;
  n->children = {std::move(base)};
  return Expr(std::move(n));
}

Op Expr::op() const { return node_->op; }
double Expr::value() const { return node_->value; }
VarRef Expr::var() const { return node_->var; }
int Expr::exponent() const { return node_->exponent; }
std::span<const Expr> Expr::children() const { return node_->children; }

std::size_t Expr::size() const {
  std::size_t n = 1;
  for (const auto& c : children()) n += c.size();
  return n;
}

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr::constant(a.value() + b.value());
  if (a.is_constant(0.0)) return b;
  if (b.is_constant(0.0)) return a;
  return Expr::raw_binary(Op::add, a, b);
}

Expr operator-(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr::constant(a.value() - b.value());
  if (b.is_constant(0.0)) return a;
  if (a.is_constant(0.0)) return -b;
  return Expr::raw_binary(Op::sub, a, b);
}

Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr::constant(a.value() * b.value());
  if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr::constant(0.0);
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(-1.0)) return -b;
  if (b.is_constant(-1.0)) return -a;
  return Expr::raw_binary(Op::mul, a, b);
}

Expr operator/(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant() && b.value() != 0.0)
    return Expr::constant(a.value() / b.value());
  if (b.is_constant(1.0)) return a;
  return Expr::raw_binary(Op::div, a, b);
}

Expr operator-(const Expr& a) {
  if (a.is_constant()) return Expr::constant(-a.value());
  if (a.op() == Op::neg) return a.children()[0];
  return Expr::raw_unary(Op::neg, a);
}

Expr pow(const Expr& base, int exponent) {
  if (exponent == 0) return Expr::constant(1.0);
  if (exponent == 1) return base;
  if (base.is_constant() && (exponent > 0 || base.value() != 0.0))
    return Expr::constant(int_pow(base.value(), exponent));
  return Expr::raw_pow(base, exponent);
}

Expr make_unary(Op op, const Expr& a) {
  if (op == Op::neg) return -a;
  if (a.is_constant() && unary_in_domain(op, a.value()))
    return Expr::constant(apply_unary(op, a.value()));
  return Expr::raw_unary(op, a);
}

Expr make_binary(Op op, const Expr& a, const Expr& b) {
  switch (op) {
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
    case Op::div: return a / b;
    default: throw std::invalid_argument("make_binary: not a binary operator");
  }
}

Expr sin(const Expr& a) { return make_unary(Op::sin, a); }
Expr cos(const Expr& a) { return make_unary(Op::cos, a); }
Expr exp(const Expr& a) { return make_unary(Op::exp, a); }
Expr log(const Expr& a) { return make_unary(Op::log, a); }
Expr sqrt(const Expr& a) { return make_unary(Op::sqrt, a); }

Expr fold(const Expr& e) {
  switch (e.op()) {
    case Op::constant:
    case Op::variable:
      return e;
    case Op::pow:
      return pow(fold(e.children()[0]), e.exponent());
    default:
      break;
  }
  if (is_binary(e.op())) return make_binary(e.op(), fold(e.children()[0]), fold(e.children()[1]));
  return make_unary(e.op(), fold(e.children()[0]));
}

Expr differentiate(const Expr& e, VarRef v) {
  switch (e.op()) {
    case Op::constant:
      return Expr::constant(0.0);
    case Op::variable:
      return Expr::constant(e.var() == v ? 1.0 : 0.0);
    case Op::neg:
      return -differentiate(e.children()[0], v);
    case Op::add:
      return differentiate(e.children()[0], v) + differentiate(e.children()[1], v);
    case Op::sub:
      return differentiate(e.children()[0], v) - differentiate(e.children()[1], v);
    case Op::mul: {
      const Expr& a = e.children()[0];
      const Expr& b = e.children()[1];
      return differentiate(a, v) * b + a * differentiate(b, v);
    }
    case Op::div: {
      const Expr& a = e.children()[0];
      const Expr& b = e.children()[1];
      Expr da = differentiate(a, v);
      Expr db = differentiate(b, v);
      if (db.is_constant(0.0)) return da / b;
      return (da * b - a * db) / pow(b, 2);
    }
    case Op::pow: {
      const Expr& a = e.children()[0];
      int n = e.exponent();
      return Expr::constant(n) * pow(a, n - 1) * differentiate(a, v);
    }
    case Op::sin: {
      const Expr& a = e.children()[0];
      return cos(a) * differentiate(a, v);
    }
    case Op::cos: {
      const Expr& a = e.children()[0];
      return -(sin(a) * differentiate(a, v));
    }
    case Op::exp: {
      const Expr& a = e.children()[0];
      return e * differentiate(a, v);
    }
    case Op::log: {
      const Expr& a = e.children()[0];
      return differentiate(a, v) / a;
    }
    case Op::sqrt: {
      const Expr& a = e.children()[0];
      Expr da = differentiate(a, v);
      if (da.is_constant(0.0)) return da;
      return da / (Expr::constant(2.0) * e);
    }
  }
  return Expr::constant(0.0);
}

Expr substitute_block(const Expr& e, Block from, Block to) {
  switch (e.op()) {
    case Op::constant:
      return e;
    case Op::variable:
      return e.var().block == from ? Expr::variable(to, e.var().index) : e;
    case Op::pow:
      return Expr::raw_pow(substitute_block(e.children()[0], from, to), e.exponent());
    default:
      break;
  }
  if (is_binary(e.op()))
    return Expr::raw_binary(e.op(), substitute_block(e.children()[0], from, to),
                            substitute_block(e.children()[1], from, to));
  return Expr::raw_unary(e.op(), substitute_block(e.children()[0], from, to));
}

Expr substitute(const Expr& e, VarRef v, const Expr& replacement) {
  switch (e.op()) {
    case Op::constant:
      return e;
    case Op::variable:
      return e.var() == v ? replacement : e;
    case Op::pow:
      return pow(substitute(e.children()[0], v, replacement), e.exponent());
    default:
      break;
  }
  if (is_binary(e.op()))
    return make_binary(e.op(), substitute(e.children()[0], v, replacement),
                       substitute(e.children()[1], v, replacement));
  return make_unary(e.op(), substitute(e.children()[0], v, replacement));
}

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.identity() == b.identity()) return true;
  if (a.op() != b.op()) return false;
  switch (a.op()) {
    case Op::constant:
      // Bitwise so that -0 and +0 are distinguished.
      return std::signbit(a.value()) == std::signbit(b.value()) &&
             (a.value() == b.value() || (std::isnan(a.value()) && std::isnan(b.value())));
    case Op::variable:
      return a.var() == b.var();
    case Op::pow:
      if (a.exponent() != b.exponent()) return false;
      break;
    default:
      break;
  }
  auto ca = a.children();
  auto cb = b.children();
  if (ca.size() != cb.size()) return false;
  for (std::size_t i = 0; i < ca.size(); ++i)
    if (!structurally_equal(ca[i], cb[i])) return false;
  return true;
}

bool depends_on(const Expr& e, Block b) {
  if (e.op() == Op::variable) return e.var().block == b;
  for (const auto& c : e.children())
    if (depends_on(c, b)) return true;
  return false;
}

int max_index(const Expr& e, Block b) {
  if (e.op() == Op::variable) return e.var().block == b ? e.var().index : -1;
  int best = -1;
  for (const auto& c : e.children()) best = std::max(best, max_index(c, b));
  return best;
}

namespace {

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", std::fabs(v));
  // Prefer the shortest representation that round-trips.
  for (int prec = 1; prec <= 17; ++prec) {
    char probe[40];
    std::snprintf(probe, sizeof probe, "%.*g", prec, std::fabs(v));
    if (std::strtod(probe, nullptr) == std::fabs(v)) {
      std::snprintf(buf, sizeof buf, "%s", probe);
      break;
    }
  }
  std::string s = buf;
  if (std::signbit(v)) return "(-" + s + ")";
  return s;
}

void print(const Expr& e, std::string& out) {
  switch (e.op()) {
    case Op::constant:
      out += format_number(e.value());
      return;
    case Op::variable:
      out += block_name(e.var().block);
      out += '[';
      out += std::to_string(e.var().index + 1);
      out += ']';
      return;
    case Op::neg:
      out += "(-";
      print(e.children()[0], out);
      out += ')';
      return;
    case Op::pow:
      out += '(';
      print(e.children()[0], out);
      out += '^';
      if (e.exponent() < 0)
        out += "(" + std::to_string(e.exponent()) + ")";
      else
        out += std::to_string(e.exponent());
      out += ')';
      return;
    default:
      break;
  }
  if (is_binary(e.op())) {
    static constexpr char sym[] = {'+', '-', '*', '/'};
    char c = sym[static_cast<int>(e.op()) - static_cast<int>(Op::add)];
    out += '(';
    print(e.children()[0], out);
    out += ' ';
    out += c;
    out += ' ';
    print(e.children()[1], out);
    out += ')';
    return;
  }
  out += function_name(e.op());
  out += '(';
  print(e.children()[0], out);
  out += ')';
}

}  // namespace

std::string to_string(const Expr& e) {
  std::string out;
  print(e, out);
  return out;
}

std::span<const double> Point::block(Block b) const {
  switch (b) {
    case Block::x: return x;
    case Block::y: return y;
    case Block::u: return u;
    case Block::s: return s;
  }
  return {};
}

namespace {

[[noreturn]] void domain_error(const char* what, const Expr& e) {
  throw DomainError(what, to_string(e));
}

}  // namespace

double evaluate(const Expr& e, const Point& p) {
  switch (e.op()) {
    case Op::constant:
      return e.value();
    case Op::variable: {
      auto blk = p.block(e.var().block);
      if (e.var().index >= static_cast<int>(blk.size()))
        throw std::out_of_range(std::string("point has no value for ") + to_string(e));
      return blk[e.var().index];
    }
    case Op::pow: {
      double a = evaluate(e.children()[0], p);
      if (a == 0.0 && e.exponent() < 0) domain_error("division by zero", e);
      return int_pow(a, e.exponent());
    }
    case Op::div: {
      double a = evaluate(e.children()[0], p);
      double b = evaluate(e.children()[1], p);
      if (b == 0.0) domain_error("division by zero", e);
      return a / b;
    }
    default:
      break;
  }
  if (is_binary(e.op()))
    return apply_binary(e.op(), evaluate(e.children()[0], p), evaluate(e.children()[1], p));
  double a = evaluate(e.children()[0], p);
  if (e.op() == Op::log && !(a > 0.0)) domain_error("log of nonpositive value", e);
  if (e.op() == Op::sqrt && a < 0.0) domain_error("sqrt of negative value", e);
  return apply_unary(e.op(), a);
}

int BlockLayout::slot(VarRef v) const {
  int b = static_cast<int>(v.block);
  if (offset[b] < 0 || v.index >= size[b])
    throw std::out_of_range(std::string("no slot for ") + block_name(v.block) + "[" +
                            std::to_string(v.index + 1) + "]");
  return offset[b] + v.index;
}

int BlockLayout::total() const {
  int n = 0;
  for (int b = 0; b < kNumBlocks; ++b)
    if (offset[b] >= 0) n = std::max(n, offset[b] + size[b]);
  return n;
}

namespace {

int emit(const Expr& e, const BlockLayout& layout, auto& code, int depth, int& max_depth) {
  switch (e.op()) {
    case Op::constant:
      code.push_back({Op::constant, 0, e.value()});
      max_depth = std::max(max_depth, depth + 1);
      return depth + 1;
    case Op::variable:
      code.push_back({Op::variable, layout.slot(e.var()), 0.0});
      max_depth = std::max(max_depth, depth + 1);
      return depth + 1;
    default:
      break;
  }
  int d = depth;
  for (const auto& c : e.children()) d = emit(c, layout, code, d, max_depth);
  code.push_back({e.op(), e.op() == Op::pow ? e.exponent() : 0, 0.0});
  return d - static_cast<int>(e.children().size()) + 1;
}

}  // namespace

Tape::Tape(const Expr& e, const BlockLayout& layout) : text_(to_string(e)) {
  emit(e, layout, code_, 0, max_stack_);
}

double Tape::operator()(std::span<const double> w) const {
  constexpr int kInline = 64;
  std::array<double, kInline> small{};
  std::vector<double> big;
  double* st = small.data();
  if (max_stack_ > kInline) {
    big.resize(max_stack_);
    st = big.data();
  }
  int top = 0;
  for (const Instr& in : code_) {
    switch (in.op) {
      case Op::constant: st[top++] = in.c; break;
      case Op::variable: st[top++] = w[in.arg]; break;
      case Op::neg: st[top - 1] = -st[top - 1]; break;
      case Op::add: --top; st[top - 1] += st[top]; break;
      case Op::sub: --top; st[top - 1] -= st[top]; break;
      case Op::mul: --top; st[top - 1] *= st[top]; break;
      case Op::div:
        --top;
        if (st[top] == 0.0) throw DomainError("division by zero", text_);
        st[top - 1] /= st[top];
        break;
      case Op::pow:
        if (st[top - 1] == 0.0 && in.arg < 0) throw DomainError("division by zero", text_);
        st[top - 1] = int_pow(st[top - 1], in.arg);
        break;
      case Op::sin: st[top - 1] = std::sin(st[top - 1]); break;
      case Op::cos: st[top - 1] = std::cos(st[top - 1]); break;
      case Op::exp: st[top - 1] = std::exp(st[top - 1]); break;
      case Op::log:
        if (!(st[top - 1] > 0.0)) throw DomainError("log of nonpositive value", text_);
        st[top - 1] = std::log(st[top - 1]);
        break;
      case Op::sqrt:
        if (st[top - 1] < 0.0) throw DomainError("sqrt of negative value", text_);
        st[top - 1] = std::sqrt(st[top - 1]);
        break;
    }
  }
  return st[0];
}

namespace {

void collect_vars(const Expr& e, std::set<std::pair<int, int>>& out) {
  if (e.op() == Op::variable) {
    out.insert({static_cast<int>(e.var().block), e.var().index});
    return;
  }
  for (const auto& c : e.children()) collect_vars(c, out);
}

}  // namespace

CompiledFunction::CompiledFunction(const Expr& e, const BlockLayout& layout)
    : expr_(e), value_(e, layout) {
  std::set<std::pair<int, int>> vars;
  collect_vars(e, vars);
  std::vector<std::pair<int, VarRef>> ordered;
  for (auto [b, i] : vars) {
    VarRef v{static_cast<Block>(b), i};
    ordered.push_back({layout.slot(v), v});
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [slot, v] : ordered) {
    Expr d = differentiate(e, v);
    if (d.is_constant(0.0)) continue;
    slots_.push_back(slot);
    partials_.emplace_back(d, layout);
  }
}

void CompiledFunction::add_gradient(std::span<const double> w, double scale,
                                    std::span<double> out) const {
  if (scale == 0.0) return;
  for (std::size_t k = 0; k < slots_.size(); ++k) out[slots_[k]] += scale * partials_[k](w);
}

}  // namespace svf
