#pragma once

#include <span>
#include <string>
#include <vector>

#include "svf/problem.hpp"

namespace svf {

enum class MpecKind { svf, kp };

const char* kind_name(MpecKind k);

/// Role of each inequality row, in instance order.
enum class RowRole { dominance, lower_at_y, lower_at_u, upper, s_nonneg };

/// 0 <= s[s_index]  complementary to  -inequalities[row] >= 0.
struct CompPair {
  int s_index;
  int row;
};

/// Single-level instance over a composite vector w = (x, y, u, s) for SVF or
/// w = (x, y, s) for KP. Constraints are in c(w) = 0 / c(w) <= 0 form.
struct MpecInstance {
  MpecKind kind = MpecKind::svf;
  int n = 0;
  int d = 0, l = 0, m = 0, p = 0;
  BlockLayout layout;

  Expr objective;
  std::vector<Expr> equalities;
  std::vector<Expr> inequalities;
  std::vector<RowRole> roles;
  std::vector<CompPair> comp_pairs;

  // Pieces of the stationarity rows, over the block where the lower problem is
  // posed (u for SVF, y for KP): equality j is lower_grad_f[j] + sum_i s_i * lower_grad_g[i][j].
  Block stationary_block = Block::u;
  Expr lower_f;
  std::vector<Expr> lower_grad_f;
  std::vector<std::vector<Expr>> lower_grad_g;
  std::vector<Expr> lower_g;  // g_i at the stationary block

  Point split(std::span<const double> w) const;

  /// Composite vector from block values; u and s are ignored when absent.
  std::vector<double> pack(std::span<const double> x, std::span<const double> y,
                           std::span<const double> u, std::span<const double> s) const;

  std::span<const double> block(std::span<const double> w, Block b) const;
};

MpecInstance build_svf(const BilevelProblem& prob);
MpecInstance build_kp(const BilevelProblem& prob);

struct ResidualBreakdown {
  double equality_inf_norm = 0.0;
  double inequality_violation_inf_norm = 0.0;  // every row except dominance
  double complementarity_inf_norm = 0.0;       // max_i |s_i * g_i|
  double dominance_violation = 0.0;

  double max() const;
  bool feasible(double tau) const { return max() <= tau; }
};

ResidualBreakdown mpec_residual(const MpecInstance& inst, std::span<const double> w);

/// Debug dump: blocks, constraint strings, pair indices.
std::string to_json(const MpecInstance& inst, int indent = 2);

}  // namespace svf
