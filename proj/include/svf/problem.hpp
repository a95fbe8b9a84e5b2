#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "svf/expr.hpp"

namespace svf {

/// Syntax or validation failure while reading a model; carries the 1-based
/// source position.
class ParseError : public std::runtime_error {
 public:
  enum class Kind { syntax, undeclared_variable, dimension_mismatch, missing_objective };

  ParseError(Kind kind, const std::string& msg, int line, int column);

  Kind kind() const { return kind_; }
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  Kind kind_;
  int line_;
  int column_;
};

/// Axis-aligned box; one [lo, hi] pair per coordinate.
struct Box {
  std::vector<double> lo, hi;

  std::size_t size() const { return lo.size(); }
  static Box uniform(std::size_t n, double lo, double hi);
};

struct ProblemMeta {
  std::string name;
  bool lower_convex = false;
  // Start point for the solvers (zeros when absent).
  std::vector<double> x0, y0;
  // Known global solution and objective values.
  std::optional<std::vector<double>> x_ref, y_ref;
  std::optional<double> F_star, f_star;
  // Search boxes for the brute-force oracle.
  std::optional<Box> x_box, y_box;
};

/// A bilevel program
///   min F(x,y) s.t. G(x,y) <= 0, y in argmin { f(x,y) : g(x,y) <= 0 }.
/// Constraints are stored in e <= 0 form.
struct BilevelProblem {
  int d = 0;  // upper variables
  int l = 0;  // lower variables
  Expr F;
  std::vector<Expr> G;
  Expr f;
  std::vector<Expr> g;
  ProblemMeta meta;

  int m() const { return static_cast<int>(g.size()); }
  int p() const { return static_cast<int>(G.size()); }

  /// Layout of the source variables (x then y) in a flat vector.
  BlockLayout layout() const;

  /// Start point with zeros filled in where the metadata is silent.
  std::vector<double> start_x() const;
  std::vector<double> start_y() const;

  Box oracle_x_box() const;
  Box oracle_y_box() const;
};

BilevelProblem parse_problem(std::string_view source);
BilevelProblem load_problem(const std::string& path);

/// Model-language text for the problem; parse_problem(to_source(p)) yields
/// structurally identical expressions.
std::string to_source(const BilevelProblem& p);

/// Symbolic gradient of e with respect to every coordinate of `block`.
std::vector<Expr> gradient_block(const Expr& e, Block block, int dim);

/// Symbolic second-derivative block: entry (i, j) is d/d col_j of d/d row_i.
std::vector<std::vector<Expr>> hessian_block(const Expr& e, Block row_block, int row_dim,
                                             Block col_block, int col_dim);

/// Dimension of a source block in the problem (x -> d, y -> l).
int block_dim(const BilevelProblem& p, Block b);

}  // namespace svf
