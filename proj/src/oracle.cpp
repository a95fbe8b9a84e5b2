#include "svf/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "svf/lower.hpp"
#include "svf/rng.hpp"
#include "svf/smooth.hpp"

namespace svf {

namespace {

BlockLayout y_layout(int l) {
  BlockLayout lay;
  lay.offset[static_cast<int>(Block::y)] = 0;
  lay.size[static_cast<int>(Block::y)] = l;
  return lay;
}

double coord(const GridSpec& spec, int axis, int k) {
  const double lo = spec.box.lo[axis], hi = spec.box.hi[axis];
  if (k == spec.resolution - 1) return hi;
  return lo + (hi - lo) * k / (spec.resolution - 1);
}

// Grid node from a flat index; axis 0 varies slowest.
void node(const GridSpec& spec, long idx, std::vector<double>& out, std::vector<int>& digits) {
  const int n = static_cast<int>(out.size());
  for (int a = n - 1; a >= 0; --a) {
    digits[a] = static_cast<int>(idx % spec.resolution);
    idx /= spec.resolution;
    out[a] = coord(spec, a, digits[a]);
  }
}

long grid_size(const GridSpec& spec, int dim) {
  long n = 1;
  for (int a = 0; a < dim; ++a) n *= spec.resolution;
  return n;
}

struct Candidate {
  std::vector<double> y;
  double f;
};

double dist2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

template <class Fn>
void parallel_for(long n, Fn&& fn) {
  const long nthreads =
      std::min<long>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (nthreads <= 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  std::vector<std::thread> pool;
  for (long t = 0; t < nthreads; ++t)
    pool.emplace_back([&] {
      for (long i; (i = next.fetch_add(1)) < n;) fn(i);
    });
  for (auto& th : pool) th.join();
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream o;
  o << std::hex;
  o.width(16);
  o.fill('0');
  o << v;
  return o.str();
}

// Best y over the lower solution set at x that satisfies the upper constraints.
struct OuterEval {
  bool ok = false;
  std::vector<double> x, y;
  double F = HUGE_VAL, f = 0.0;
};

OuterEval evaluate_outer(const BilevelProblem& prob, const std::vector<double>& x,
                         const GridSpec& spec_y) {
  OuterEval out;
  out.x = x;
  ValueFunction vf;
  try {
    vf = value_function(prob, x, spec_y);
  } catch (const OracleError&) {
    return out;
  }
  for (const auto& y : vf.argmins) {
    const Point p{x, y, {}, {}};
    bool feasible = true;
    for (const Expr& G : prob.G)
      if (evaluate(G, p) > 1e-7) feasible = false;
    if (!feasible) continue;
    const double F = evaluate(prob.F, p);
    if (F < out.F) {
      out.ok = true;
      out.F = F;
      out.y = y;
      out.f = evaluate(prob.f, p);
    }
  }
  return out;
}

}  // namespace

void GridSpec::validate(std::size_t dim) const {
  if (box.lo.size() != dim || box.hi.size() != dim)
    throw OracleError(OracleError::Kind::bad_spec, "grid box has the wrong dimension");
  for (std::size_t a = 0; a < dim; ++a)
    if (!std::isfinite(box.lo[a]) || !std::isfinite(box.hi[a]) || box.lo[a] > box.hi[a])
      throw OracleError(OracleError::Kind::bad_spec, "grid bounds must be finite and ordered");
  if (resolution < 3) throw OracleError(OracleError::Kind::bad_spec, "resolution must be >= 3");
  if (!(shrink > 0.0 && shrink < 1.0))
    throw OracleError(OracleError::Kind::bad_spec, "shrink must lie in (0, 1)");
  if (refine_rounds < 0 || max_candidates < 1)
    throw OracleError(OracleError::Kind::bad_spec, "bad refinement settings");
}

GridSpec x_grid_spec(const BilevelProblem& prob) {
  GridSpec s;
  s.box = prob.oracle_x_box();
  s.resolution = prob.d <= 1 ? 41 : 21;
  s.refine_rounds = prob.d <= 1 ? 5 : 4;
  return s;
}

GridSpec y_grid_spec(const BilevelProblem& prob) {
  GridSpec s;
  s.box = prob.oracle_y_box();
  s.resolution = prob.l <= 1 ? 201 : prob.l == 2 ? 101 : 41;
  s.max_candidates = 10;
  return s;
}

ValueFunction value_function(const BilevelProblem& prob, const std::vector<double>& x,
                             const GridSpec& spec) {
  if (prob.l > 3)
    throw OracleError(OracleError::Kind::dimension, "value function grid needs l <= 3");
  if (static_cast<int>(x.size()) != prob.d)
    throw OracleError(OracleError::Kind::bad_spec, "x has the wrong dimension");
  spec.validate(prob.l);
  const int l = prob.l, m = prob.m();
  const BlockLayout lay = y_layout(l);

  const Expr fx = fix_block(prob.f, Block::x, x);
  const Tape f_tape(fx, lay);
  std::vector<Tape> g_tape;
  std::vector<std::vector<Tape>> dg_tape(m);
  for (int i = 0; i < m; ++i) {
    const Expr gi = fix_block(prob.g[i], Block::x, x);
    g_tape.emplace_back(gi, lay);
    for (int j = 0; j < l; ++j) dg_tape[i].emplace_back(fold(differentiate(gi, {Block::y, j})), lay);
  }
  std::vector<double> h(l);
  for (int a = 0; a < l; ++a) h[a] = (spec.box.hi[a] - spec.box.lo[a]) / (spec.resolution - 1);

  // Per node: f, worst violation, and whether every g_i is within the change a
  // cell-sized move could make.
  const long N = grid_size(spec, l);
  std::vector<double> fval(N, HUGE_VAL), gmax(N, HUGE_VAL);
  std::vector<char> close(N, 0);
  std::vector<double> y(l);
  std::vector<int> digits(l);
  for (long k = 0; k < N; ++k) {
    node(spec, k, y, digits);
    try {
      double worst = -HUGE_VAL;
      bool ok = true;
      for (int i = 0; i < m; ++i) {
        const double gi = g_tape[i](y);
        double lip = 0.0;
        for (int j = 0; j < l; ++j) lip += std::abs(dg_tape[i][j](y)) * h[j];
        worst = std::max(worst, gi);
        if (gi > lip + spec.feas_tol) ok = false;
      }
      gmax[k] = worst;
      close[k] = ok;
      fval[k] = f_tape(y);
    } catch (const DomainError&) {
      fval[k] = HUGE_VAL;
    }
  }
  auto exact = [&](long k) { return std::isfinite(fval[k]) && gmax[k] <= spec.feas_tol; };
  auto near = [&](long k) { return std::isfinite(fval[k]) && close[k]; };

  ValueFunction out;
  // Discrete local minima within the exactly feasible nodes and within the
  // near-feasible ones; ties broken by grid index.
  std::vector<std::pair<double, long>> minima;
  for (int pass = 0; pass < 2; ++pass) {
    std::vector<std::pair<double, long>> found;
    auto in_set = [&](long k) { return pass == 0 ? exact(k) : near(k); };
    for (long k = 0; k < N; ++k) {
      if (!in_set(k)) continue;
      if (pass == 0) ++out.feasible_nodes;
      node(spec, k, y, digits);
      bool is_min = true;
      long stride = 1;
      for (int a = l - 1; a >= 0 && is_min; --a) {
        for (int dir : {-1, 1}) {
          const int dk = digits[a] + dir;
          if (dk < 0 || dk >= spec.resolution) continue;
          const long nb = k + dir * stride;
          if (!in_set(nb)) continue;
          if (fval[nb] < fval[k] || (fval[nb] == fval[k] && nb < k)) {
            is_min = false;
            break;
          }
        }
        stride *= spec.resolution;
      }
      if (is_min) found.emplace_back(fval[k], k);
    }
    std::sort(found.begin(), found.end());
    if (static_cast<int>(found.size()) > spec.max_candidates) found.resize(spec.max_candidates);
    minima.insert(minima.end(), found.begin(), found.end());
  }
  std::sort(minima.begin(), minima.end());
  minima.erase(std::unique(minima.begin(), minima.end()), minima.end());
  if (minima.empty())
    throw OracleError(OracleError::Kind::infeasible, "no feasible grid node; Y(x) may be empty");

  // Polish each minimum; keep the better of the polished point and an exactly feasible node.
  std::vector<Candidate> cands(minima.size(), Candidate{{}, HUGE_VAL});
  parallel_for(static_cast<long>(minima.size()), [&](long c) {
    std::vector<double> y0(l);
    std::vector<int> dg(l);
    const long k = minima[c].second;
    node(spec, k, y0, dg);
    Candidate best{y0, exact(k) ? fval[k] : HUGE_VAL};
    LowerSolve ls = lower_local_solve(prob, x, y0, &spec.box, 1e-10);
    if (ls.violation <= spec.feas_tol && ls.f < best.f) best = {ls.y, ls.f};
    cands[c] = std::move(best);
  });
  out.candidates = static_cast<int>(cands.size());
  std::erase_if(cands, [](const Candidate& c) { return !std::isfinite(c.f); });
  if (cands.empty())
    throw OracleError(OracleError::Kind::infeasible, "no candidate could be made feasible");
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& a, const Candidate& b) { return a.f < b.f; });
  out.V = cands.front().f;
  for (const Candidate& c : cands) {
    if (c.f > out.V + kValueTol) break;
    bool seen = false;
    for (const auto& rep : out.argmins)
      if (dist2(rep, c.y) <= kClusterRadius) seen = true;
    if (!seen) out.argmins.push_back(c.y);
  }
  return out;
}

GlobalSolution global_solve(const BilevelProblem& prob, const GridSpec& spec_x,
                            const GridSpec& spec_y) {
  if (prob.d > 2 || prob.l > 3)
    throw OracleError(OracleError::Kind::dimension, "global solve needs d <= 2 and l <= 3");
  spec_x.validate(prob.d);
  spec_y.validate(prob.l);
  const int d = prob.d;

  GlobalSolution sol;
  OuterEval best;
  GridSpec round = spec_x;
  for (int r = 0; r <= spec_x.refine_rounds; ++r) {
    const long N = grid_size(round, d);
    std::vector<OuterEval> evals(N);
    parallel_for(N, [&](long k) {
      std::vector<double> x(d);
      std::vector<int> digits(d);
      node(round, k, x, digits);
      evals[k] = evaluate_outer(prob, x, spec_y);
    });
    for (long k = 0; k < N; ++k) {
      if (!evals[k].ok) continue;
      ++sol.evaluated;
      if (evals[k].F < best.F) best = evals[k];
    }
    if (!best.ok)
      throw OracleError(OracleError::Kind::infeasible, "no bilevel-feasible grid point");
    GridSpec next = round;
    for (int a = 0; a < d; ++a) {
      const double w = 0.5 * spec_x.shrink * (round.box.hi[a] - round.box.lo[a]);
      next.box.lo[a] = std::max(spec_x.box.lo[a], best.x[a] - w);
      next.box.hi[a] = std::min(spec_x.box.hi[a], best.x[a] + w);
    }
    round = next;
  }
  sol.x = best.x;
  sol.y = best.y;
  sol.F = best.F;
  sol.f = best.f;
  return sol;
}

std::string problem_hash(const BilevelProblem& prob) { return hex(fnv1a(to_source(prob))); }

std::string spec_hash(const GridSpec& sx, const GridSpec& sy) {
  nlohmann::json j;
  for (const GridSpec* s : {&sx, &sy})
    j.push_back({s->box.lo, s->box.hi, s->resolution, s->refine_rounds, s->shrink, s->feas_tol,
                 s->max_candidates});
  return hex(fnv1a(j.dump()));
}

std::string to_json(const GlobalSolution& sol, int indent) {
  nlohmann::json j{{"x", sol.x}, {"y", sol.y}, {"F", sol.F}, {"f", sol.f},
                   {"evaluated", sol.evaluated}};
  return j.dump(indent);
}

GlobalSolution global_solution_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  GlobalSolution s;
  s.x = j.at("x").get<std::vector<double>>();
  s.y = j.at("y").get<std::vector<double>>();
  s.F = j.at("F").get<double>();
  s.f = j.at("f").get<double>();
  s.evaluated = j.value("evaluated", 0);
  return s;
}

GlobalSolution global_solve_cached(const BilevelProblem& prob, const GridSpec& spec_x,
                                   const GridSpec& spec_y, const std::string& cache_dir,
                                   bool* hit) {
  namespace fs = std::filesystem;
  const fs::path path =
      fs::path(cache_dir) / (problem_hash(prob) + "_" + spec_hash(spec_x, spec_y) + ".json");
  if (hit) *hit = false;
  if (fs::exists(path)) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      GlobalSolution s = global_solution_from_json(ss.str());
      if (hit) *hit = true;
      return s;
    } catch (const std::exception&) {
      // unreadable entry: recompute
    }
  }
  GlobalSolution s = global_solve(prob, spec_x, spec_y);
  fs::create_directories(cache_dir);
  std::ofstream(path) << to_json(s);
  return s;
}

FdReport fd_check(const Expr& e, const BlockLayout& layout, const Box& box, int samples,
                  int order, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("fd_check needs at least one sample");
  if (order != 1 && order != 2) throw std::invalid_argument("fd_check order must be 1 or 2");
  const int n = layout.total();
  if (static_cast<int>(box.size()) != n) throw std::invalid_argument("box does not match layout");
  std::vector<VarRef> vars(n);
  for (int b = 0; b < kNumBlocks; ++b)
    for (int i = 0; i < layout.size[b]; ++i)
      vars[layout.offset[b] + i] = VarRef{static_cast<Block>(b), i};

  const Tape value(e, layout);
  std::vector<Tape> d1;
  std::vector<std::vector<Tape>> d2(n);
  for (int a = 0; a < n; ++a) {
    const Expr da = differentiate(e, vars[a]);
    d1.emplace_back(da, layout);
    if (order == 2)
      for (int b = 0; b < n; ++b) d2[a].emplace_back(differentiate(da, vars[b]), layout);
  }
  Xoshiro256 rng(seed);
  FdReport rep;
  std::vector<double> w(n);
  for (int s = 0; s < samples; ++s) {
    for (int a = 0; a < n; ++a) w[a] = box.lo[a] + (box.hi[a] - box.lo[a]) * rng.uniform();
    try {
      double worst = 0.0;
      for (int a = 0; a < n; ++a) {
        const double h = order == 1 ? kFdStep1 : kFdStep2;
        std::vector<double> vp = w, vm = w;
        vp[a] += h;
        vm[a] -= h;
        if (order == 1) {
          const double fd = (value(vp) - value(vm)) / (2 * h);
          const double an = d1[a](w);
          worst = std::max(worst, std::abs(an - fd) / std::max(1.0, std::abs(an)));
        } else {
          // Hessian columns against differences of the (separately checked) gradient.
          for (int b = 0; b < n; ++b) {
            const double fd = (d1[b](vp) - d1[b](vm)) / (2 * h);
            const double an = d2[b][a](w);
            worst = std::max(worst, std::abs(an - fd) / std::max(1.0, std::abs(an)));
          }
        }
      }
      rep.max_rel_error = std::max(rep.max_rel_error, worst);
      ++rep.evaluated;
    } catch (const DomainError&) {
      ++rep.skipped;
    }
  }
  return rep;
}

FdReport fd_check_problem(const BilevelProblem& prob, int samples, int order,
                          std::uint64_t seed) {
  const BlockLayout lay = prob.layout();
  Box box;
  const Box bx = prob.oracle_x_box(), by = prob.oracle_y_box();
  box.lo.resize(lay.total());
  box.hi.resize(lay.total());
  for (int i = 0; i < prob.d; ++i) {
    box.lo[lay.slot({Block::x, i})] = bx.lo[i];
    box.hi[lay.slot({Block::x, i})] = bx.hi[i];
  }
  for (int i = 0; i < prob.l; ++i) {
    box.lo[lay.slot({Block::y, i})] = by.lo[i];
    box.hi[lay.slot({Block::y, i})] = by.hi[i];
  }
  std::vector<Expr> all{prob.F, prob.f};
  all.insert(all.end(), prob.G.begin(), prob.G.end());
  all.insert(all.end(), prob.g.begin(), prob.g.end());
  FdReport total;
  std::uint64_t k = 0;
  for (const Expr& e : all) {
    const FdReport r = fd_check(e, lay, box, samples, order, seed + 7919 * k++);
    total.max_rel_error = std::max(total.max_rel_error, r.max_rel_error);
    total.evaluated += r.evaluated;
    total.skipped += r.skipped;
  }
  return total;
}

FdReport fd_check_shift(int samples, double r, double rho, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("fd_check needs at least one sample");
  Xoshiro256 rng(seed);
  FdReport rep;
  const double h = kFdStep1;
  for (int k = 0; k < samples; ++k) {
    const double g = -10.0 + 20.0 * rng.uniform();
    const double s = 10.0 * rng.uniform();
    const double dg = -2.0 + 4.0 * rng.uniform();  // g moves along t with slope dg
    const double grad[] = {dg};
    const ShiftDerivatives D = shift_derivatives(g, s, grad, r, rho);
    const ShiftPair gp = shift(g + dg * h, s, r, rho), gm = shift(g - dg * h, s, r, rho);
    const ShiftPair sp = shift(g, s + h, r, rho), sm = shift(g, s - h, r, rho);
    auto rel = [](double an, double fd) { return std::abs(an - fd) / std::max(1.0, std::abs(an)); };
    const double worst = std::max({rel(D.dz[0], (gp.z - gm.z) / (2 * h)),
                                   rel(D.dkappa[0], (gp.kappa - gm.kappa) / (2 * h)),
                                   rel(D.dz_ds, (sp.z - sm.z) / (2 * h)),
                                   rel(D.dkappa_ds, (sp.kappa - sm.kappa) / (2 * h))});
    rep.max_rel_error = std::max(rep.max_rel_error, worst);
    ++rep.evaluated;
  }
  return rep;
}

}  // namespace svf
