#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "svf/bench.hpp"
#include "svf/driver.hpp"
#include "svf/oracle.hpp"
#include "svf/stationarity.hpp"

using namespace svf;

namespace {

enum Exit { kOk = 0, kParse = 2, kSolver = 3, kNoReference = 4 };

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text << "\n";
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text << "\n";
}

// "lo:hi,lo:hi,..."
Box parse_box(const std::string& text) {
  Box b;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto c = item.find(':');
    if (c == std::string::npos) throw std::invalid_argument("box entry needs lo:hi: " + item);
    b.lo.push_back(std::stod(item.substr(0, c)));
    b.hi.push_back(std::stod(item.substr(c + 1)));
  }
  return b;
}

std::vector<double> parse_vector(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) v.push_back(std::stod(item));
  return v;
}

struct SolveArgs {
  std::string file, solver = "svf-sbal", json;
  std::uint64_t seed = 42;
  ScheduleParams sp;
  bool metrics = false;
};

int cmd_solve(const SolveArgs& a) {
  const BilevelProblem p = load_problem(a.file);
  a.sp.validate();
  SolveReport r;
  if (a.solver == "svf-sbal") {
    r = solve_svf_sbal(p, default_start(p), a.sp, a.seed);
  } else if (a.solver == "kp-sbal") {
    r = solve_kp_sbal(p, default_start(p), a.sp, a.seed);
  } else {
    RlxParams rp;
    rp.eps0 = a.sp.r0;
    rp.shrink = a.sp.delta;
    rp.max_outer_k = a.sp.max_outer_k;
    r = solve_kp_rlx(p, default_start(p), rp, a.seed);
  }
  if (!a.json.empty()) emit(to_json(r), a.json);
  std::printf("%s %s: criterion %d, F = %.10g, f = %.10g, Res = %.3e, %d outer steps\n",
              r.solver.c_str(), p.meta.name.c_str(), r.criterion, r.F, r.f, r.final_residual(),
              r.outer_iterations());
  std::printf("x = %s\ny = %s\n", nlohmann::json(r.x).dump().c_str(),
              nlohmann::json(r.y).dump().c_str());
  if (r.status != "ok" || r.criterion == 0) {
    std::fprintf(stderr, "solver failed: %s\n", r.status.c_str());
    return kSolver;
  }
  if (a.metrics) {
    const auto ref = reference_from_meta(p);
    if (!ref) {
      std::fprintf(stderr, "%s has no reference solution\n", a.file.c_str());
      return kNoReference;
    }
    const Metrics m = evaluate_metrics(r, *ref);
    std::printf("eps_x = %.3e, eps_f = %.3e, omega = %.3e, success = %s\n", m.eps_x, m.eps_f,
                m.omega, m.success ? "true" : "false");
  }
  return kOk;
}

struct BenchArgs {
  std::string dir, csv, svg;
  std::vector<std::string> solvers{"svf-sbal", "kp-sbal", "kp-rlx"};
  int par = 1;
  std::uint64_t seed = 42;
};

int cmd_bench(const BenchArgs& a) {
  const BenchReport rep = run_suite(a.dir, a.solvers, a.seed, a.par);
  if (!a.csv.empty()) {
    std::ofstream out(a.csv);
    if (!out) throw std::runtime_error("cannot write " + a.csv);
    out << to_csv(rep);
  }
  if (!a.svg.empty()) write_profile_svgs(rep, a.svg);
  std::printf("%-10s %9s %5s %9s %9s %9s\n", "solver", "problems", "Suc.", "Obj.Suc.",
              "Sol.Suc.", "Time(s)");
  for (const auto& s : summarize(rep))
    std::printf("%-10s %9d %5d %9d %9d %9.3f\n", s.solver.c_str(), s.problems, s.success,
                s.obj_success, s.sol_success, s.time_s);
  int missing = 0;
  for (const auto& row : rep.rows)
    if (std::isnan(row.omega)) ++missing;
  if (missing) {
    std::fprintf(stderr, "%d rows without a reference solution\n", missing);
    return kNoReference;
  }
  return kOk;
}

SvfPoint read_point(const std::string& path, const BilevelProblem& p) {
  const auto j = nlohmann::json::parse(slurp(path));
  SvfPoint pt;
  pt.x = j.at("x").get<std::vector<double>>();
  pt.y = j.at("y").get<std::vector<double>>();
  pt.u = j.at("u").get<std::vector<double>>();
  pt.s = j.at("s").get<std::vector<double>>();
  if (static_cast<int>(pt.x.size()) != p.d || static_cast<int>(pt.y.size()) != p.l ||
      static_cast<int>(pt.u.size()) != p.l || static_cast<int>(pt.s.size()) != p.m())
    throw std::invalid_argument("point dimensions do not match the problem");
  return pt;
}

struct CertifyArgs {
  std::string file, point, mode = "S";
  double tau = 1e-8, tau_act = 1e-6;
};

int cmd_certify(const CertifyArgs& a) {
  const BilevelProblem p = load_problem(a.file);
  const SvfPoint pt = read_point(a.point, p);
  const StationarityCertificate c = certify(p, pt, parse_class(a.mode), a.tau, a.tau_act);
  std::cout << to_json(c) << "\n";
  return kOk;
}

struct OracleArgs {
  std::string file, box, xbox, value_at;
  bool global = false;
  std::string cache;
};

int cmd_oracle(const OracleArgs& a) {
  const BilevelProblem p = load_problem(a.file);
  if (!a.value_at.empty()) {
    GridSpec s;
    s.box = a.box.empty() ? p.oracle_y_box() : parse_box(a.box);
    const ValueFunction v = value_function(p, parse_vector(a.value_at), s);
    nlohmann::json j{{"V", v.V}, {"argmins", v.argmins}, {"feasible_nodes", v.feasible_nodes},
                     {"candidates", v.candidates}};
    std::cout << j.dump(2) << "\n";
    return kOk;
  }
  GridSpec sx = x_grid_spec(p), sy = y_grid_spec(p);
  if (!a.xbox.empty()) sx.box = parse_box(a.xbox);
  if (!a.box.empty()) sy.box = parse_box(a.box);
  const GlobalSolution g =
      a.cache.empty() ? global_solve(p, sx, sy) : global_solve_cached(p, sx, sy, a.cache);
  std::cout << to_json(g) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bilevel solver toolkit"};
  app.require_subcommand(1);

  SolveArgs sa;
  auto* solve = app.add_subcommand("solve", "Solve one problem");
  solve->add_option("file", sa.file, "Model file (.blp)")->required()->check(CLI::ExistingFile);
  solve->add_option("--solver", sa.solver)->check(CLI::IsMember({"svf-sbal", "kp-sbal", "kp-rlx"}));
  solve->add_option("--seed", sa.seed);
  solve->add_option("--r0", sa.sp.r0, "Initial r (eps0 for kp-rlx)");
  solve->add_option("--rho0", sa.sp.rho0);
  solve->add_option("--rhobar", sa.sp.rho_bar);
  solve->add_option("--delta", sa.sp.delta, "Decrease factor (eps shrink for kp-rlx)");
  solve->add_option("--max-outer", sa.sp.max_outer_k);
  solve->add_option("--json", sa.json, "Write the JSON report ('-' for stdout)");
  solve->add_flag("--metrics", sa.metrics, "Compare with the reference solution");

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Run every solver on a corpus directory");
  bench->add_option("dir", ba.dir)->required()->check(CLI::ExistingDirectory);
  bench->add_option("--solvers", ba.solvers);
  bench->add_option("--par", ba.par)->check(CLI::PositiveNumber);
  bench->add_option("--seed", ba.seed);
  bench->add_option("--csv", ba.csv);
  bench->add_option("--svg", ba.svg, "Prefix for the four profile plots");

  CertifyArgs ca;
  auto* cert = app.add_subcommand("certify", "Classify a point of the SVF reformulation");
  cert->add_option("file", ca.file)->required()->check(CLI::ExistingFile);
  cert->add_option("--point", ca.point, "JSON with x, y, u, s (a solve report works)")
      ->required()
      ->check(CLI::ExistingFile);
  cert->add_option("--mode", ca.mode)->check(CLI::IsMember({"W", "C", "M", "S"}));
  cert->add_option("--tau", ca.tau, "Residual tolerance");
  cert->add_option("--tau-act", ca.tau_act, "Activity and feasibility tolerance");

  OracleArgs oa;
  auto* orc = app.add_subcommand("oracle", "Grid-search value function or global solution");
  orc->add_option("file", oa.file)->required()->check(CLI::ExistingFile);
  orc->add_option("--box", oa.box, "Lower-level box lo:hi,lo:hi,...");
  orc->add_option("--xbox", oa.xbox, "Upper-level box for --global");
  auto* g = orc->add_flag("--global", oa.global);
  orc->add_option("--value-at", oa.value_at, "Comma-separated x")->excludes(g);
  orc->add_option("--cache", oa.cache, "Cache directory for --global");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kParse;
  }

  try {
    if (*solve) return cmd_solve(sa);
    if (*bench) return cmd_bench(ba);
    if (*cert) return cmd_certify(ca);
    if (*orc) return cmd_oracle(oa);
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kParse;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "bad JSON: %s\n", e.what());
    return kParse;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kParse;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kSolver;
  }
  return kOk;
}
