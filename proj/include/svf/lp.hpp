#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

namespace svf {

/// min c'x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  lo <= x <= hi.
/// Bounds may be infinite; an empty matrix means no rows of that kind.
struct LinearProgram {
  Eigen::VectorXd c;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd A_ub;
  Eigen::VectorXd b_ub;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  explicit LinearProgram(int n = 0);
  int num_vars() const { return static_cast<int>(c.size()); }
  void add_eq(const Eigen::RowVectorXd& row, double rhs);
  void add_ub(const Eigen::RowVectorXd& row, double rhs);
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

const char* lp_status_name(LpStatus s);

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  Eigen::VectorXd x;
  double objective = std::numeric_limits<double>::quiet_NaN();
  int pivots = 0;
};

/// Dense two-phase simplex with Bland's rule.
LpResult solve_lp(const LinearProgram& lp);

/// min t  s.t.  |(M v - q)_k| <= t for every row k, with v_j >= 0 where
/// nonneg[j] is set and free otherwise. Returns the optimal t and v.
struct ChebyshevResult {
  double residual = std::numeric_limits<double>::infinity();
  Eigen::VectorXd v;
  bool ok = false;
};

ChebyshevResult min_inf_norm(const Eigen::MatrixXd& M, const Eigen::VectorXd& q,
                             const std::vector<bool>& nonneg);

}  // namespace svf
