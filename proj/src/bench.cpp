#include "svf/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

namespace svf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw std::invalid_argument("bad number '" + s + "' in CSV");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw std::invalid_argument("bad flag '" + s + "' in CSV");
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

int solver_rank(const std::vector<std::string>& solvers, const std::string& s) {
  auto it = std::find(solvers.begin(), solvers.end(), s);
  return static_cast<int>(it - solvers.begin());
}

void sort_rows(BenchReport& r) {
  std::sort(r.rows.begin(), r.rows.end(), [&](const BenchRow& a, const BenchRow& b) {
    if (a.problem != b.problem) return a.problem < b.problem;
    return solver_rank(r.solvers, a.solver) < solver_rank(r.solvers, b.solver);
  });
}

const char* const kCsvHeader =
    "problem,solver,eps_x,eps_f,omega,success,obj_success,sol_success,time_s,criterion,seed";

}  // namespace

std::optional<Reference> reference_from_meta(const BilevelProblem& prob) {
  if (!prob.meta.x_ref || !prob.meta.y_ref) return std::nullopt;
  Reference ref;
  ref.x = *prob.meta.x_ref;
  ref.y = *prob.meta.y_ref;
  const Point p{ref.x, ref.y, {}, {}};
  ref.F = prob.meta.F_star ? *prob.meta.F_star : evaluate(prob.F, p);
  ref.f = prob.meta.f_star ? *prob.meta.f_star : evaluate(prob.f, p);
  return ref;
}

Metrics evaluate_metrics(const SolveReport& rep, const Reference& ref) {
  if (rep.x.size() != ref.x.size() || rep.y.size() != ref.y.size())
    throw MissingReference("reference dimensions do not match the report");
  Metrics m;
  double sq = 0.0;
  for (std::size_t i = 0; i < ref.x.size(); ++i) sq += (rep.x[i] - ref.x[i]) * (rep.x[i] - ref.x[i]);
  for (std::size_t i = 0; i < ref.y.size(); ++i) sq += (rep.y[i] - ref.y[i]) * (rep.y[i] - ref.y[i]);
  m.eps_x = std::sqrt(sq);
  m.eps_f = std::hypot(rep.F - ref.F, rep.f - ref.f);
  if (!std::isfinite(m.eps_x)) m.eps_x = HUGE_VAL;
  if (!std::isfinite(m.eps_f)) m.eps_f = HUGE_VAL;
  m.omega = std::min(m.eps_x, m.eps_f);
  m.success = m.omega <= kSuccessThreshold;
  m.obj_success = m.eps_f <= kSuccessThreshold;
  m.sol_success = m.eps_x <= kSuccessThreshold;
  m.time = rep.wall_time;
  return m;
}

double accuracy_ratio(double omega, double omega_min) {
  const bool small = omega > 0.0 && omega <= kSuccessThreshold;
  if (omega_min > 0.0 && small) return std::log10(omega / omega_min);
  if (omega_min == 0.0 && omega == 0.0) return 0.0;
  if (omega_min == 0.0 && small) return 50.0;
  return 100.0;
}

std::vector<double> accuracy_ratios(const std::vector<double>& omega) {
  double lo = HUGE_VAL;
  for (double w : omega)
    if (!std::isnan(w)) lo = std::min(lo, w);
  std::vector<double> out;
  for (double w : omega) out.push_back(std::isnan(w) ? 100.0 : accuracy_ratio(w, lo));
  return out;
}

std::vector<double> time_ratios(const std::vector<double>& t, const std::vector<bool>& success) {
  double lo = HUGE_VAL;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (success[i]) lo = std::min(lo, t[i]);
  std::vector<double> out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!success[i]) out.push_back(100.0);
    else if (lo <= 0.0) out.push_back(t[i] <= 0.0 ? 0.0 : 50.0);
    else out.push_back(std::log10(t[i] / lo));
  }
  return out;
}

std::vector<ProfilePoint> profile_curve(const std::vector<std::vector<double>>& ratios) {
  if (ratios.empty()) throw std::invalid_argument("empty ratio table");
  const std::size_t ns = ratios.front().size();
  const double np = static_cast<double>(ratios.size());
  const int steps = static_cast<int>(std::lround(kProfileMaxGamma / kProfileStep));
  std::vector<ProfilePoint> out;
  out.reserve(steps + 1);
  for (int k = 0; k <= steps; ++k) {
    ProfilePoint pt;
    pt.gamma = k * kProfileStep;
    pt.fraction.assign(ns, 0.0);
    for (const auto& row : ratios)
      for (std::size_t s = 0; s < ns; ++s)
        if (row[s] <= pt.gamma + 1e-12) pt.fraction[s] += 1.0;
    for (double& f : pt.fraction) f /= np;
    out.push_back(std::move(pt));
  }
  return out;
}

const std::vector<std::string>& known_solvers() {
  static const std::vector<std::string> names{"svf-sbal", "kp-sbal", "kp-rlx"};
  return names;
}

SolveReport run_solver(const std::string& solver, const BilevelProblem& prob, std::uint64_t seed) {
  const StartPoint start = default_start(prob);
  if (solver == "svf-sbal") return solve_svf_sbal(prob, start, {}, seed);
  if (solver == "kp-sbal") return solve_kp_sbal(prob, start, {}, seed);
  if (solver == "kp-rlx") return solve_kp_rlx(prob, start, {}, seed);
  throw std::invalid_argument("unknown solver '" + solver + "'");
}

BenchRow make_row(const BilevelProblem& prob, const std::string& solver, const SolveReport& rep) {
  BenchRow row;
  row.problem = prob.meta.name;
  row.solver = solver;
  row.time_s = rep.wall_time;
  row.criterion = rep.criterion;
  row.seed = rep.seed;
  const auto ref = reference_from_meta(prob);
  if (!ref) {
    row.eps_x = row.eps_f = row.omega = kNaN;
    return row;
  }
  const Metrics m = evaluate_metrics(rep, *ref);
  row.eps_x = m.eps_x;
  row.eps_f = m.eps_f;
  row.omega = m.omega;
  row.success = m.success;
  row.obj_success = m.obj_success;
  row.sol_success = m.sol_success;
  return row;
}

BenchReport run_suite(const std::string& corpus_dir, const std::vector<std::string>& solvers,
                      std::uint64_t seed, int parallelism) {
  for (const auto& s : solvers) {
    const auto& k = known_solvers();
    if (std::find(k.begin(), k.end(), s) == k.end())
      throw std::invalid_argument("unknown solver '" + s + "'");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(corpus_dir))
    if (e.path().extension() == ".blp") files.push_back(e.path());
  std::sort(files.begin(), files.end());

  struct Task {
    std::size_t file;
    std::string solver;
  };
  std::vector<Task> tasks;
  for (std::size_t f = 0; f < files.size(); ++f)
    for (const auto& s : solvers) tasks.push_back({f, s});

  BenchReport report;
  report.solvers = solvers;
  report.rows.resize(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t; (t = next.fetch_add(1)) < tasks.size();) {
      const Task& task = tasks[t];
      BenchRow& row = report.rows[t];
      row.solver = task.solver;
      row.seed = seed;
      row.problem = files[task.file].stem().string();
      try {
        const BilevelProblem prob = load_problem(files[task.file].string());
        row = make_row(prob, task.solver, run_solver(task.solver, prob, seed));
      } catch (const std::exception&) {
        row.eps_x = row.eps_f = row.omega = HUGE_VAL;
        row.criterion = 0;
      }
    }
  };
  const int nthreads = std::max(1, std::min<int>(parallelism, static_cast<int>(tasks.size())));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  sort_rows(report);
  for (const auto& r : report.rows)
    if (report.problems.empty() || report.problems.back() != r.problem)
      report.problems.push_back(r.problem);
  return report;
}

std::string to_csv(const BenchReport& report) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const BenchRow& r : report.rows) {
    out += r.problem + ',' + r.solver + ',' + fmt(r.eps_x) + ',' + fmt(r.eps_f) + ',' +
           fmt(r.omega) + ',' + (r.success ? "true" : "false") + ',' +
           (r.obj_success ? "true" : "false") + ',' + (r.sol_success ? "true" : "false") + ',' +
           fmt(r.time_s) + ',' + std::to_string(r.criterion) + ',' + std::to_string(r.seed) + '\n';
  }
  return out;
}

BenchReport report_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw std::invalid_argument("CSV header does not match");
  BenchReport report;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 11) throw std::invalid_argument("CSV row has " + std::to_string(f.size()) + " fields");
    BenchRow r;
    r.problem = f[0];
    r.solver = f[1];
    r.eps_x = parse_double(f[2]);
    r.eps_f = parse_double(f[3]);
    r.omega = parse_double(f[4]);
    r.success = parse_bool(f[5]);
    r.obj_success = parse_bool(f[6]);
    r.sol_success = parse_bool(f[7]);
    r.time_s = parse_double(f[8]);
    r.criterion = std::stoi(f[9]);
    r.seed = std::stoull(f[10]);
    if (std::find(report.solvers.begin(), report.solvers.end(), r.solver) == report.solvers.end())
      report.solvers.push_back(r.solver);
    if (report.problems.empty() || report.problems.back() != r.problem)
      report.problems.push_back(r.problem);
    report.rows.push_back(std::move(r));
  }
  return report;
}

std::vector<SolverSummary> summarize(const BenchReport& report) {
  std::vector<SolverSummary> out;
  for (const auto& s : report.solvers) {
    SolverSummary sum;
    sum.solver = s;
    for (const BenchRow& r : report.rows) {
      if (r.solver != s) continue;
      ++sum.problems;
      sum.success += r.success;
      sum.obj_success += r.obj_success;
      sum.sol_success += r.sol_success;
      sum.time_s += r.time_s;
    }
    out.push_back(sum);
  }
  return out;
}

const char* metric_name(ProfileMetric m) {
  switch (m) {
    case ProfileMetric::success: return "success";
    case ProfileMetric::objective: return "objective";
    case ProfileMetric::solution: return "solution";
    default: return "time";
  }
}

std::vector<std::vector<double>> ratio_table(const BenchReport& report, ProfileMetric metric) {
  std::vector<std::vector<double>> table;
  for (const auto& p : report.problems) {
    std::vector<double> vals(report.solvers.size(), HUGE_VAL);
    std::vector<bool> ok(report.solvers.size(), false);
    for (const BenchRow& r : report.rows) {
      if (r.problem != p) continue;
      const auto s = static_cast<std::size_t>(solver_rank(report.solvers, r.solver));
      switch (metric) {
        case ProfileMetric::success: vals[s] = r.omega; break;
        case ProfileMetric::objective: vals[s] = r.eps_f; break;
        case ProfileMetric::solution: vals[s] = r.eps_x; break;
        case ProfileMetric::time: vals[s] = r.time_s; ok[s] = r.success; break;
      }
    }
    table.push_back(metric == ProfileMetric::time ? time_ratios(vals, ok) : accuracy_ratios(vals));
  }
  return table;
}

std::string profile_svg(const BenchReport& report, ProfileMetric metric) {
  static const char* const colors[] = {"#1b6ca8", "#d1495b", "#edae49", "#00798c", "#30638e"};
  const double W = 640, H = 400, left = 60, right = 150, top = 40, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  const double xmax = std::log1p(kProfileMaxGamma);
  auto X = [&](double g) { return left + pw * std::log1p(g) / xmax; };
  auto Y = [&](double f) { return top + ph * (1.0 - f); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << left << "\" y=\"24\" font-size=\"14\">Performance profile: "
    << metric_name(metric) << "</text>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double g : {0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0}) {
    o << "<line x1=\"" << X(g) << "\" y1=\"" << top + ph << "\" x2=\"" << X(g) << "\" y2=\""
      << top + ph + 5 << "\" stroke=\"black\"/>";
    o << "<text x=\"" << X(g) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << g
      << "</text>\n";
  }
  for (double f : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    o << "<line x1=\"" << left - 5 << "\" y1=\"" << Y(f) << "\" x2=\"" << left << "\" y2=\"" << Y(f)
      << "\" stroke=\"black\"/>";
    o << "<text x=\"" << left - 8 << "\" y=\"" << Y(f) + 4 << "\" text-anchor=\"end\">" << f
      << "</text>\n";
  }
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 10
    << "\" text-anchor=\"middle\">gamma (log(1+gamma) scale)</text>\n";

  if (!report.problems.empty()) {
    const auto curve = profile_curve(ratio_table(report, metric));
    for (std::size_t s = 0; s < report.solvers.size(); ++s) {
      const char* color = colors[s % 5];
      o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      double prev = curve.front().fraction[s];
      o << X(0) << ',' << Y(prev);
      for (const auto& pt : curve) {
        if (pt.fraction[s] != prev) {
          o << ' ' << X(pt.gamma) << ',' << Y(prev) << ' ' << X(pt.gamma) << ',' << Y(pt.fraction[s]);
          prev = pt.fraction[s];
        }
      }
      o << ' ' << X(kProfileMaxGamma) << ',' << Y(prev) << "\"/>\n";
      const double ly = top + 20 + 20 * static_cast<double>(s);
      o << "<line x1=\"" << W - right + 15 << "\" y1=\"" << ly << "\" x2=\"" << W - right + 40
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>";
      o << "<text x=\"" << W - right + 45 << "\" y=\"" << ly + 4 << "\">" << report.solvers[s]
        << "</text>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

std::vector<std::string> write_profile_svgs(const BenchReport& report, const std::string& prefix) {
  std::vector<std::string> paths;
  for (auto m : {ProfileMetric::success, ProfileMetric::objective, ProfileMetric::solution,
                 ProfileMetric::time}) {
    const std::string path = prefix + "_" + metric_name(m) + ".svg";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << profile_svg(report, m);
    paths.push_back(path);
  }
  return paths;
}

}  // namespace svf
