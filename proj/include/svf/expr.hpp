#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace svf {

/// Variable blocks. Source models only use x and y; u and s appear in
/// derived single-level instances.
enum class Block : std::uint8_t { x = 0, y = 1, u = 2, s = 3 };

inline constexpr int kNumBlocks = 4;

char block_name(Block b);

enum class Op : std::uint8_t {
  constant,
  variable,
  neg,
  add,
  sub,
  mul,
  div,
  pow,  // integer exponent stored on the node
  sin,
  cos,
  exp,
  log,
  sqrt,
};

struct VarRef {
  Block block = Block::x;
  int index = 0;  // zero-based

  friend bool operator==(const VarRef&, const VarRef&) = default;
};

/// Raised when evaluation leaves the domain of a builtin (log/sqrt of a
/// negative number, division by zero).
class DomainError : public std::runtime_error {
 public:
  DomainError(const std::string& what, std::string node)
      : std::runtime_error(what + " at node " + node), node_(std::move(node)) {}
  const std::string& node() const { return node_; }

 private:
  std::string node_;
};

/// Immutable symbolic expression. Copies share structure.
class Expr {
 public:
  Expr();  // the constant 0

  static Expr constant(double v);
  static Expr variable(Block b, int index);

  /// Unsimplified constructors used by the parser; `fold` cleans up afterwards.
  static Expr raw_unary(Op op, Expr a);
  static Expr raw_binary(Op op, Expr a, Expr b);
  static Expr raw_pow(Expr base, int exponent);

  Op op() const;
  double value() const;  // constant nodes
  VarRef var() const;    // variable nodes
  int exponent() const;  // pow nodes
  std::span<const Expr> children() const;

  bool is_constant() const { return op() == Op::constant; }
  bool is_constant(double v) const { return is_constant() && value() == v; }

  /// Number of nodes in the tree (shared subtrees counted per occurrence).
  std::size_t size() const;

  const void* identity() const { return node_.get(); }

 private:
  struct Node;
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

// Simplifying constructors. Rules are restricted to identities that are exact
// in floating point (x+0, x*1, x*0, constant-constant folding, ...).
Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr pow(const Expr& base, int exponent);
Expr sin(const Expr& a);
Expr cos(const Expr& a);
Expr exp(const Expr& a);
Expr log(const Expr& a);
Expr sqrt(const Expr& a);
Expr make_unary(Op op, const Expr& a);
Expr make_binary(Op op, const Expr& a, const Expr& b);

/// Rebuilds the tree bottom-up through the simplifying constructors.
Expr fold(const Expr& e);

Expr differentiate(const Expr& e, VarRef v);

/// Renames every reference to block `from` into block `to`.
Expr substitute_block(const Expr& e, Block from, Block to);

/// Replaces references to `v` with `replacement`.
Expr substitute(const Expr& e, VarRef v, const Expr& replacement);

bool structurally_equal(const Expr& a, const Expr& b);
bool depends_on(const Expr& e, Block b);

/// Largest zero-based index referenced in block b, or -1.
int max_index(const Expr& e, Block b);

/// Fully parenthesised text in the model language (1-based indices).
std::string to_string(const Expr& e);

/// Values for every block; unused blocks may be empty.
struct Point {
  std::span<const double> x, y, u, s;

  std::span<const double> block(Block b) const;
};

/// Tree-walking evaluation in double precision.
double evaluate(const Expr& e, const Point& p);

/// Offsets of each block inside a flat composite vector.
struct BlockLayout {
  int offset[kNumBlocks] = {-1, -1, -1, -1};
  int size[kNumBlocks] = {0, 0, 0, 0};

  int slot(VarRef v) const;
  int total() const;
  bool has(Block b) const { return offset[static_cast<int>(b)] >= 0; }
};

/// Postfix program compiled from an Expr for fast repeated evaluation over a
/// flat composite vector.
class Tape {
 public:
  Tape() = default;
  Tape(const Expr& e, const BlockLayout& layout);

  double operator()(std::span<const double> w) const;

  bool is_constant() const { return code_.size() == 1 && code_.front().op == Op::constant; }
  double constant_value() const { return code_.front().c; }

 private:
  struct Instr {
    Op op;
    int arg;  // slot or exponent
    double c;
  };
  std::vector<Instr> code_;
  int max_stack_ = 0;
  std::string text_;  // for domain error reports
};

/// Sparse first-order derivative information for one scalar function over a
/// flat composite vector.
class CompiledFunction {
 public:
  CompiledFunction() = default;
  CompiledFunction(const Expr& e, const BlockLayout& layout);

  double value(std::span<const double> w) const { return value_(w); }

  /// Accumulates scale * gradient into `out` (length = layout.total()).
  void add_gradient(std::span<const double> w, double scale, std::span<double> out) const;

  /// Gradient as (slot, value) pairs.
  const std::vector<int>& slots() const { return slots_; }
  double partial(std::size_t k, std::span<const double> w) const { return partials_[k](w); }

  const Expr& expr() const { return expr_; }

 private:
  Expr expr_;
  Tape value_;
  std::vector<int> slots_;
  std::vector<Tape> partials_;
};

}  // namespace svf
