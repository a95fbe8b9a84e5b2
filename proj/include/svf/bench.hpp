#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "svf/driver.hpp"

namespace svf {

inline constexpr double kSuccessThreshold = 1e-3;

class MissingReference : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Reference {
  std::vector<double> x, y;
  double F = 0.0, f = 0.0;
};

/// Reference from the corpus metadata; F* and f* are evaluated at (x*, y*)
/// when the metadata omits them. Empty when x* or y* is missing.
std::optional<Reference> reference_from_meta(const BilevelProblem& prob);

struct Metrics {
  double eps_x = 0.0;  // |(x,y) - (x*,y*)|_2
  double eps_f = 0.0;  // |(F - F*, f - f*)|_2
  double omega = 0.0;
  bool success = false, obj_success = false, sol_success = false;
  double time = 0.0;
};

Metrics evaluate_metrics(const SolveReport& rep, const Reference& ref);

/// log10(w / w_min) on successes, with the 0 / 50 / 100 special branches.
double accuracy_ratio(double omega, double omega_min);

/// Accuracy ratios of all solvers on one problem.
std::vector<double> accuracy_ratios(const std::vector<double>& omega);

/// log10(t / t_min) over the successful solvers; failures get 100.
std::vector<double> time_ratios(const std::vector<double>& t, const std::vector<bool>& success);

inline constexpr double kProfileMaxGamma = 100.0;
inline constexpr double kProfileStep = 0.05;

struct ProfilePoint {
  double gamma = 0.0;
  std::vector<double> fraction;  // per solver
};

/// ratios[p][s]: ratio of solver s on problem p.
std::vector<ProfilePoint> profile_curve(const std::vector<std::vector<double>>& ratios);

struct BenchRow {
  std::string problem, solver;
  double eps_x = 0.0, eps_f = 0.0, omega = 0.0;
  bool success = false, obj_success = false, sol_success = false;
  double time_s = 0.0;
  int criterion = 0;
  std::uint64_t seed = 42;

  friend bool operator==(const BenchRow&, const BenchRow&) = default;
};

struct BenchReport {
  std::vector<BenchRow> rows;  // sorted by (problem, solver order)
  std::vector<std::string> solvers;
  std::vector<std::string> problems;
};

const std::vector<std::string>& known_solvers();

/// Runs one named solver with default parameters from the corpus start point.
SolveReport run_solver(const std::string& solver, const BilevelProblem& prob, std::uint64_t seed);

BenchRow make_row(const BilevelProblem& prob, const std::string& solver, const SolveReport& rep);

BenchReport run_suite(const std::string& corpus_dir, const std::vector<std::string>& solvers,
                      std::uint64_t seed = 42, int parallelism = 1);

std::string to_csv(const BenchReport& report);
BenchReport report_from_csv(const std::string& text);

struct SolverSummary {
  std::string solver;
  int problems = 0;
  int success = 0, obj_success = 0, sol_success = 0;
  double time_s = 0.0;
};

std::vector<SolverSummary> summarize(const BenchReport& report);

enum class ProfileMetric { success, objective, solution, time };

const char* metric_name(ProfileMetric m);

/// ratios[p][s] for one metric, problems and solvers in report order.
std::vector<std::vector<double>> ratio_table(const BenchReport& report, ProfileMetric metric);

std::string profile_svg(const BenchReport& report, ProfileMetric metric);

/// Writes <prefix>_<metric>.svg for all four metrics; returns the paths.
std::vector<std::string> write_profile_svgs(const BenchReport& report, const std::string& prefix);

}  // namespace svf
