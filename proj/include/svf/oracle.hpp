#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "svf/problem.hpp"

namespace svf {

class OracleError : public std::runtime_error {
 public:
  enum class Kind { infeasible, dimension, bad_spec };
  OracleError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct GridSpec {
  Box box;
  int resolution = 201;  // points per axis
  int refine_rounds = 3;
  double shrink = 0.1;
  double feas_tol = 1e-9;
  int max_candidates = 20;  // grid minima polished per value-function call

  void validate(std::size_t dim) const;
};

GridSpec x_grid_spec(const BilevelProblem& prob);  // coarse outer grid for global_solve
GridSpec y_grid_spec(const BilevelProblem& prob);  // inner grid for global_solve

struct ValueFunction {
  double V = 0.0;
  std::vector<std::vector<double>> argmins;  // one representative per cluster
  int feasible_nodes = 0;
  int candidates = 0;
};

inline constexpr double kValueTol = 1e-6;
inline constexpr double kClusterRadius = 1e-4;

/// V(x) = min { f(x,y) : g(x,y) <= 0, y in spec.box } by grid search plus local polish.
ValueFunction value_function(const BilevelProblem& prob, const std::vector<double>& x,
                             const GridSpec& spec);

struct GlobalSolution {
  std::vector<double> x, y;
  double F = 0.0, f = 0.0;
  int evaluated = 0;  // outer grid points with a nonempty lower solution set
};

/// Optimistic global solution: outer grid over x, value function per x, refinement
/// around the incumbent.
GlobalSolution global_solve(const BilevelProblem& prob, const GridSpec& spec_x,
                            const GridSpec& spec_y);

/// Hex FNV-1a digests used as cache keys.
std::string problem_hash(const BilevelProblem& prob);
std::string spec_hash(const GridSpec& sx, const GridSpec& sy);

/// global_solve with results cached as <dir>/<problem hash>_<spec hash>.json.
GlobalSolution global_solve_cached(const BilevelProblem& prob, const GridSpec& spec_x,
                                   const GridSpec& spec_y, const std::string& cache_dir,
                                   bool* hit = nullptr);

std::string to_json(const GlobalSolution& sol, int indent = 2);
GlobalSolution global_solution_from_json(const std::string& text);

struct FdReport {
  double max_rel_error = 0.0;
  int evaluated = 0;
  int skipped = 0;  // samples hitting a domain error
};

inline constexpr double kFdStep1 = 1e-6;
inline constexpr double kFdStep2 = 1e-4;

/// Symbolic derivatives of order 1 or 2 against central differences at random
/// points of the box (one interval per layout slot). Error is |a - b| / max(1, |a|).
FdReport fd_check(const Expr& e, const BlockLayout& layout, const Box& box, int samples,
                  int order, std::uint64_t seed = 1);

/// Every expression of the problem over its oracle boxes.
FdReport fd_check_problem(const BilevelProblem& prob, int samples, int order,
                          std::uint64_t seed = 1);

/// Shift-pair derivatives (z, kappa in g and s) against central differences.
FdReport fd_check_shift(int samples, double r, double rho, std::uint64_t seed = 1);

}  // namespace svf
