#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "svf/expr.hpp"

namespace svf {

/// Values (and optionally dense derivatives) of a smooth NLP
///   min f(w)  s.t.  ce(w) = 0,  ci(w) <= 0.
struct NlpEval {
  double f = 0.0;
  Eigen::VectorXd grad;
  Eigen::VectorXd ce;
  Eigen::MatrixXd Je;
  Eigen::VectorXd ci;
  Eigen::MatrixXd Ji;
};

class SmoothNlp {
 public:
  virtual ~SmoothNlp() = default;

  virtual int dimension() const = 0;
  virtual int num_equalities() const = 0;
  virtual int num_inequalities() const = 0;

  /// May throw DomainError when w leaves the domain of the model.
  virtual void evaluate(std::span<const double> w, bool derivatives, NlpEval& out) const = 0;

  /// Scale applied to |ce_k| when measuring equality feasibility at w.
  virtual double equality_weight(int /*row*/, std::span<const double> /*w*/) const { return 1.0; }
};

/// NLP given by expressions over a block layout; inequality rows are
/// ci_k(w) - offset_k <= 0 with adjustable offsets.
class ExprNlp : public SmoothNlp {
 public:
  ExprNlp(const BlockLayout& layout, const Expr& objective, const std::vector<Expr>& equalities,
          const std::vector<Expr>& inequalities);

  void set_offset(int row, double value) { offsets_[row] = value; }

  int dimension() const override { return layout_.total(); }
  int num_equalities() const override { return static_cast<int>(eq_.size()); }
  int num_inequalities() const override { return static_cast<int>(ineq_.size()); }
  void evaluate(std::span<const double> w, bool derivatives, NlpEval& out) const override;

 private:
  BlockLayout layout_;
  CompiledFunction obj_;
  std::vector<CompiledFunction> eq_, ineq_;
  std::vector<double> offsets_;
};

struct NlpOptions {
  double equality_penalty_init = 10.0;
  bool multiplier_update = true;
  int max_outer = 30;
  int max_inner = 500;
  double grad_tol = 1e-6;
  double armijo_c = 1e-4;
  double backtrack_factor = 0.5;
  double penalty_growth = 10.0;
  double penalty_max = 1e10;
};

enum class NlpStatus { converged, iteration_limit, line_search_failure };

const char* status_name(NlpStatus s);

struct NlpResult {
  std::vector<double> w;
  std::vector<double> eq_multipliers;
  std::vector<double> ineq_multipliers;
  double kkt_residual = 0.0;
  double stationarity = 0.0;
  double equality_residual = 0.0;
  double inequality_violation = 0.0;
  NlpStatus status = NlpStatus::iteration_limit;
  int inner_iterations = 0;
  int outer_iterations = 0;
  double final_penalty = 0.0;
};

/// Augmented Lagrangian outer loop with a dense damped-BFGS inner solver.
NlpResult solve_nlp(const SmoothNlp& nlp, std::span<const double> w0, const NlpOptions& opts,
                    std::span<const double> eq_mult0 = {},
                    std::span<const double> ineq_mult0 = {});

/// max( ||grad f + Je^T lambda + Ji^T nu||_inf , max_k |nu_k ci_k| ).
double kkt_residual_nlp(const SmoothNlp& nlp, std::span<const double> w,
                        std::span<const double> eq_mult, std::span<const double> ineq_mult);

/// KKT residual at w with multipliers chosen to minimize the stationarity
/// norm (inequality multipliers restricted to rows with ci > -activity).
/// Returns max(stationarity, complementarity, equality residual, violation).
struct OptimalKkt {
  double residual = 0.0;
  std::vector<double> eq_multipliers;
  std::vector<double> ineq_multipliers;
};

OptimalKkt kkt_residual_optimal(const SmoothNlp& nlp, std::span<const double> w,
                                double activity);

}  // namespace svf
