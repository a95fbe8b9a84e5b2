#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "svf/mpec.hpp"
#include "svf/nlp.hpp"

namespace svf {

struct ShiftPair {
  double z = 0.0;
  double kappa = 0.0;
  double g = 0.0;
  double s = 0.0;
  double r = 0.0;
  double rho = 0.0;
};

class SingularShift : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Roots z, kappa >= 0 of z * kappa = rho * r with z + g = kappa - rho * s.
ShiftPair shift(double g, double s, double r, double rho);

struct ShiftDerivatives {
  std::vector<double> dz;      // w.r.t. the variables behind grad_g
  std::vector<double> dkappa;
  double dz_ds = 0.0;
  double dkappa_ds = 0.0;
};

ShiftDerivatives shift_derivatives(double g, double s, std::span<const double> grad_g, double r,
                                   double rho);

/// Smoothed subproblem: objective F, equalities phi (l rows) then psi (m rows),
/// inequalities carried over from the base instance without the rows tied to
/// complementarity.
class SmoothedInstance : public SmoothNlp {
 public:
  SmoothedInstance(const MpecInstance& base, double r, double rho);

  const MpecInstance& base() const { return *base_; }
  double r() const { return r_; }
  double rho() const { return rho_; }

  /// Indices into base().inequalities of the rows kept.
  const std::vector<int>& kept_rows() const { return kept_; }

  int dimension() const override { return base_->n; }
  int num_equalities() const override { return base_->l + base_->m; }
  int num_inequalities() const override { return static_cast<int>(kept_.size()); }
  void evaluate(std::span<const double> w, bool derivatives, NlpEval& out) const override;
  double equality_weight(int row, std::span<const double> w) const override;

  /// Shift pairs at w for every lower constraint.
  std::vector<ShiftPair> shifts(std::span<const double> w) const;

  /// f_r^rho at w (z eliminated) and its gradient over the composite vector.
  double augmented_objective(std::span<const double> w, std::vector<double>* grad = nullptr) const;

 private:
  const MpecInstance* base_;
  double r_, rho_;
  BlockLayout layout_;
  CompiledFunction F_;
  CompiledFunction f_low_;
  std::vector<CompiledFunction> df_;               // d f / d (stationary block)_j
  std::vector<CompiledFunction> g_;                // g_i at the stationary block
  std::vector<std::vector<CompiledFunction>> dg_;  // [i][j]
  std::vector<int> kept_;
  std::vector<CompiledFunction> ineq_;
  int s_offset_ = 0;
};

SmoothedInstance smooth_instance(const MpecInstance& base, double r, double rho);

}  // namespace svf
