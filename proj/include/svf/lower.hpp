#pragma once

#include <span>
#include <vector>

#include "svf/nlp.hpp"
#include "svf/problem.hpp"

namespace svf {

/// Replaces every reference to block b by the constants in `values`.
Expr fix_block(const Expr& e, Block b, std::span<const double> values);

struct LowerSolve {
  std::vector<double> y;
  double f = 0.0;
  double violation = 0.0;
  bool converged = false;
};

/// Local solve of min_y f(x,y) s.t. g(x,y) <= 0 (optionally inside a box) from y0.
LowerSolve lower_local_solve(const BilevelProblem& prob, std::span<const double> x,
                             std::span<const double> y0, const Box* box = nullptr,
                             double tol = 1e-9);

}  // namespace svf
