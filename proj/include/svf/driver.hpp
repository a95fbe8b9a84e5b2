#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "svf/problem.hpp"

namespace svf {

struct ScheduleParams {
  double r0 = 1.0;
  double rho0 = 1.0;
  double rho_bar = 0.01;
  double delta = 0.1;
  int max_outer_k = 50;

  void validate() const;
  double r(int k) const;    // r0 * delta^k, clamped at kMinR
  double rho(int k) const;  // max(rho_bar, rho0 * delta^k)
};

inline constexpr double kMinR = 1e-16;

struct RlxParams {
  double eps0 = 1.0;
  double shrink = 0.1;
  int max_outer_k = 50;
};

struct StartPoint {
  std::vector<double> x, y;
};

StartPoint default_start(const BilevelProblem& prob);

enum class U0Strategy { y0, neg_y0, none };

const char* strategy_name(U0Strategy s);

struct SolveReport {
  std::string solver;
  std::string problem;
  std::vector<double> x, y, u, s;
  std::vector<double> residual_trace;  // Res_0 .. Res_K
  // Parameters of the subproblem solved at outer step k (r and rho, or eps for
  // the relaxation in `r_trace` with rho unused).
  std::vector<double> r_trace, rho_trace;
  // max_i |s_i g_i + r_k| and the inner tolerance at each accepted iterate.
  std::vector<double> smoothing_gap, subproblem_tol;
  int criterion = 0;  // 1..4, or 0 when the run aborted
  double F = 0.0, f = 0.0;
  double wall_time = 0.0;
  U0Strategy strategy = U0Strategy::none;
  std::uint64_t seed = 42;
  bool r_clamped = false;
  std::string status = "ok";
  int rejected_steps = 0;  // subproblem results discarded by the safeguard
  // Alternative u0 runs that were not adopted and why.
  std::vector<std::string> notes;

  int outer_iterations() const { return static_cast<int>(residual_trace.size()) - 1; }
  double final_residual() const { return residual_trace.empty() ? HUGE_VAL : residual_trace.back(); }
};

/// First stopping criterion (1..4) satisfied by the trace, or 0.
int stopping_criterion(const std::vector<double>& trace, int max_outer_k);

SolveReport solve_svf_sbal(const BilevelProblem& prob, const StartPoint& start,
                           const ScheduleParams& params = {}, std::uint64_t seed = 42);

/// Single SVF run with a fixed u0 strategy (no adoption).
SolveReport solve_svf_sbal_run(const BilevelProblem& prob, const StartPoint& start,
                               const ScheduleParams& params, std::uint64_t seed,
                               U0Strategy strategy);

SolveReport solve_kp_sbal(const BilevelProblem& prob, const StartPoint& start,
                          const ScheduleParams& params = {}, std::uint64_t seed = 42);

SolveReport solve_kp_rlx(const BilevelProblem& prob, const StartPoint& start,
                         const RlxParams& params = {}, std::uint64_t seed = 42);

/// Uniform(0,1)^m draw used for s0.
std::vector<double> initial_multipliers(int m, std::uint64_t seed);

std::string to_json(const SolveReport& rep, int indent = 2);
SolveReport report_from_json(const std::string& text);

}  // namespace svf
