#pragma once

#include <string>
#include <vector>

#include "svf/problem.hpp"

namespace svf {

enum class StationarityClass { none = 0, W = 1, C = 2, M = 3, S = 4 };

const char* class_name(StationarityClass c);
StationarityClass parse_class(const std::string& s);

/// A point (x, y, u, s) of the surrogate value function model.
struct SvfPoint {
  std::vector<double> x, y, u, s;
};

/// Zero-based index sets at a feasible point.
struct IndexSets {
  std::vector<int> I_y;  // g_i(x,y) active
  std::vector<int> I_g;  // g_i(x,u) active, s_i > 0
  std::vector<int> I_0;  // g_i(x,u) active, s_i = 0
  std::vector<int> I_s;  // g_i(x,u) < 0, s_i = 0
  std::vector<int> G_active;
  bool dominance_active = false;
  double tau_act = 1e-6;
};

/// Throws std::invalid_argument if the point is not feasible within tau_act.
IndexSets index_sets(const BilevelProblem& prob, const SvfPoint& pt, double tau_act = 1e-6);

/// Full-length multiplier vectors (zeros off the index sets).
struct SvfMultipliers {
  double lambda0 = 0.0;
  std::vector<double> lambda;    // m, lower constraints at y
  std::vector<double> lambda_G;  // p
  std::vector<double> mu_phi;    // l
  std::vector<double> mu_g;      // m
};

struct ConditionResiduals {
  double x_row = 0.0;    // (2.1)
  double y_row = 0.0;    // (2.2)
  double u_row = 0.0;    // (2.3)
  double s_row = 0.0;    // (2.4)
  double support = 0.0;  // multipliers off their index sets, negative lambdas
  double dominance = 0.0;
  double sign = 0.0;     // mode condition on I_0

  double max() const;
};

ConditionResiduals check_multipliers(const BilevelProblem& prob, const SvfPoint& pt,
                                     const IndexSets& sets, const SvfMultipliers& mult,
                                     StationarityClass mode);

struct StationarityCertificate {
  StationarityClass cls = StationarityClass::none;
  StationarityClass requested = StationarityClass::W;
  IndexSets sets;
  SvfMultipliers mult;
  ConditionResiduals residuals;
  double minimal_residual = 0.0;  // LP optimum for the reported class (or W when none)
  int patterns_tried = 0;
  double tau = 0.0;
};

/// Strongest class <= mode for which multipliers exist with LP residual <= tau.
/// Throws std::invalid_argument for infeasible points or |I_0| > 10.
StationarityCertificate certify(const BilevelProblem& prob, const SvfPoint& pt,
                                StationarityClass mode, double tau = 1e-8,
                                double tau_act = 1e-6);

struct LowerKkt {
  bool kkt = false;
  std::vector<double> s;  // minimizer over s >= 0 on the active set
  double residual = 0.0;
};

/// min over s >= 0 supported on the active set of |grad_y f + sum s_i grad_y g_i|_inf.
LowerKkt lower_kkt_check(const BilevelProblem& prob, const std::vector<double>& x,
                         const std::vector<double>& y, double tau = 1e-9, double tau_act = 1e-6);

struct KpCertificate {
  std::vector<double> mu;      // m
  std::vector<double> mu_phi;  // l
  std::vector<double> nu;      // m, grad_y g_i' mu_phi
  std::vector<double> lambda_G;
  double x_row = 0.0, y_row = 0.0, comp = 0.0, sign = 0.0;
  bool ok = false;

  double max() const;
};

/// Maps an S certificate at a point with y = u to KP multipliers mu = mu_g + lambda.
KpCertificate svf_to_kp_certificate(const BilevelProblem& prob, const SvfPoint& pt,
                                    const StationarityCertificate& cert, double tau = 1e-8);

std::string to_json(const StationarityCertificate& cert, int indent = 2);

}  // namespace svf
