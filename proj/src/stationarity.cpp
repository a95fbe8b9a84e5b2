#include "svf/stationarity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <json.hpp>
#include <stdexcept>

#include "svf/lp.hpp"

namespace svf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

VectorXd eval_grad(const Expr& e, Block b, int dim, const Point& p) {
  VectorXd out(dim);
  for (int i = 0; i < dim; ++i) out[i] = evaluate(differentiate(e, {b, i}), p);
  return out;
}

// Everything the conditions need, evaluated once.
struct Eval {
  int d = 0, l = 0, m = 0, p = 0;
  VectorXd F_x, F_y;
  double f_y = 0.0, f_u = 0.0;
  VectorXd fx_y, fy_y, fx_u, fy_u;  // grad f at (x,y) and (x,u)
  VectorXd g_y, g_u, G;
  std::vector<VectorXd> gx_y, gy_y, gx_u, gy_u, Gx, Gy;
  // Jacobian of phi(x,u,s) = grad_u f + sum s_i grad_u g_i with respect to x and u.
  MatrixXd Jx, Ju;
};

// Jacobians of grad_y(e) with respect to x and y at p, scaled and accumulated.
void add_phi_jacobian(const Expr& e, double scale, const Point& p, int d, int l, MatrixXd& Jx,
                      MatrixXd& Ju) {
  if (scale == 0.0) return;
  for (int k = 0; k < l; ++k) {
    const Expr gk = differentiate(e, {Block::y, k});
    for (int j = 0; j < d; ++j) Jx(k, j) += scale * evaluate(differentiate(gk, {Block::x, j}), p);
    for (int j = 0; j < l; ++j) Ju(k, j) += scale * evaluate(differentiate(gk, {Block::y, j}), p);
  }
}

Eval evaluate_all(const BilevelProblem& prob, const std::vector<double>& x,
                  const std::vector<double>& y, const std::vector<double>& u,
                  const std::vector<double>& s) {
  Eval ev;
  ev.d = prob.d;
  ev.l = prob.l;
  ev.m = prob.m();
  ev.p = prob.p();
  const Point py{x, y, {}, {}};
  const Point pu{x, u, {}, {}};
  ev.F_x = eval_grad(prob.F, Block::x, ev.d, py);
  ev.F_y = eval_grad(prob.F, Block::y, ev.l, py);
  ev.f_y = evaluate(prob.f, py);
  ev.f_u = evaluate(prob.f, pu);
  ev.fx_y = eval_grad(prob.f, Block::x, ev.d, py);
  ev.fy_y = eval_grad(prob.f, Block::y, ev.l, py);
  ev.fx_u = eval_grad(prob.f, Block::x, ev.d, pu);
  ev.fy_u = eval_grad(prob.f, Block::y, ev.l, pu);
  ev.g_y.resize(ev.m);
  ev.g_u.resize(ev.m);
  for (int i = 0; i < ev.m; ++i) {
    ev.g_y[i] = evaluate(prob.g[i], py);
    ev.g_u[i] = evaluate(prob.g[i], pu);
    ev.gx_y.push_back(eval_grad(prob.g[i], Block::x, ev.d, py));
    ev.gy_y.push_back(eval_grad(prob.g[i], Block::y, ev.l, py));
    ev.gx_u.push_back(eval_grad(prob.g[i], Block::x, ev.d, pu));
    ev.gy_u.push_back(eval_grad(prob.g[i], Block::y, ev.l, pu));
  }
  ev.G.resize(ev.p);
  for (int j = 0; j < ev.p; ++j) {
    ev.G[j] = evaluate(prob.G[j], py);
    ev.Gx.push_back(eval_grad(prob.G[j], Block::x, ev.d, py));
    ev.Gy.push_back(eval_grad(prob.G[j], Block::y, ev.l, py));
  }
  ev.Jx = MatrixXd::Zero(ev.l, ev.d);
  ev.Ju = MatrixXd::Zero(ev.l, ev.l);
  add_phi_jacobian(prob.f, 1.0, pu, ev.d, ev.l, ev.Jx, ev.Ju);
  for (int i = 0; i < ev.m; ++i)
    add_phi_jacobian(prob.g[i], i < static_cast<int>(s.size()) ? s[i] : 0.0, pu, ev.d, ev.l,
                     ev.Jx, ev.Ju);
  return ev;
}

void check_sizes(const BilevelProblem& prob, const SvfPoint& pt) {
  if (static_cast<int>(pt.x.size()) != prob.d || static_cast<int>(pt.y.size()) != prob.l ||
      static_cast<int>(pt.u.size()) != prob.l || static_cast<int>(pt.s.size()) != prob.m())
    throw std::invalid_argument("point dimensions do not match the problem");
}

bool contains(const std::vector<int>& v, int i) {
  return std::find(v.begin(), v.end(), i) != v.end();
}

double sign_residual(StationarityClass mode, double mg, double a) {
  switch (mode) {
    case StationarityClass::S:
      return std::max({0.0, -mg, -a});
    case StationarityClass::M:
      return (mg >= 0.0 && a >= 0.0) ? 0.0 : std::min(std::abs(mg), std::abs(a));
    case StationarityClass::C:
      return std::max(0.0, -mg * a);
    default:
      return 0.0;
  }
}

// min t s.t. |M v - q| <= t, lo <= v <= hi, A_ub v <= 0, A_eq v = 0.
ChebyshevResult constrained_min_inf(const MatrixXd& M, const VectorXd& q, const VectorXd& lo,
                                    const VectorXd& hi, const MatrixXd& A_ub,
                                    const MatrixXd& A_eq) {
  const int rows = static_cast<int>(M.rows()), k = static_cast<int>(M.cols());
  VectorXd scale = VectorXd::Ones(k);
  for (int j = 0; j < k; ++j) {
    const double mx = M.col(j).cwiseAbs().maxCoeff();
    if (mx > 0.0) scale[j] = 1.0 / mx;
  }
  LinearProgram lp(k + 1);
  lp.c[k] = 1.0;
  for (int j = 0; j < k; ++j) {
    lp.lo[j] = std::isinf(lo[j]) ? lo[j] : lo[j] / scale[j];
    lp.hi[j] = std::isinf(hi[j]) ? hi[j] : hi[j] / scale[j];
  }
  Eigen::RowVectorXd row(k + 1);
  for (int i = 0; i < rows; ++i) {
    const Eigen::RowVectorXd sc = M.row(i).cwiseProduct(scale.transpose());
    row << sc, -1.0;
    lp.add_ub(row, q[i]);
    row << -sc, -1.0;
    lp.add_ub(row, -q[i]);
  }
  for (int i = 0; i < A_ub.rows(); ++i) {
    row << A_ub.row(i).cwiseProduct(scale.transpose()), 0.0;
    lp.add_ub(row, 0.0);
  }
  for (int i = 0; i < A_eq.rows(); ++i) {
    row << A_eq.row(i).cwiseProduct(scale.transpose()), 0.0;
    lp.add_eq(row, 0.0);
  }
  ChebyshevResult out;
  const LpResult r = solve_lp(lp);
  if (r.status != LpStatus::optimal) return out;
  out.ok = true;
  out.v = r.x.head(k).cwiseProduct(scale);
  out.residual = rows > 0 ? (M * out.v - q).lpNorm<Eigen::Infinity>() : 0.0;
  return out;
}

// Linear system of (2.1)-(2.4) in the unknowns
// (lambda0, lambda on I_y, lambda_G on active G, mu_phi, mu_g on I_g u I_0).
struct System {
  MatrixXd M;
  VectorXd q, lo, hi;
  std::vector<int> lam_idx, G_idx, mug_idx;  // problem indices per column group
  int c_lam0 = 0, c_lam = 1, c_G = 0, c_phi = 0, c_mug = 0;
};

System build_system(const Eval& ev, const IndexSets& sets) {
  System sys;
  const int d = ev.d, l = ev.l;
  sys.lam_idx = sets.I_y;
  sys.G_idx = sets.G_active;
  for (int i = 0; i < ev.m; ++i)
    if (contains(sets.I_g, i) || contains(sets.I_0, i)) sys.mug_idx.push_back(i);
  sys.c_G = sys.c_lam + static_cast<int>(sys.lam_idx.size());
  sys.c_phi = sys.c_G + static_cast<int>(sys.G_idx.size());
  sys.c_mug = sys.c_phi + l;
  const int cols = sys.c_mug + static_cast<int>(sys.mug_idx.size());
  const int rows = d + 2 * l + static_cast<int>(sets.I_g.size());
  sys.M = MatrixXd::Zero(rows, cols);
  sys.q = VectorXd::Zero(rows);
  sys.q.head(d) = -ev.F_x;
  sys.q.segment(d, l) = -ev.F_y;
  const int ry = d, ru = d + l, rs = d + 2 * l;

  sys.M.col(sys.c_lam0).head(d) = ev.fx_y - ev.fx_u;
  sys.M.col(sys.c_lam0).segment(ry, l) = ev.fy_y;
  sys.M.col(sys.c_lam0).segment(ru, l) = -ev.fy_u;
  for (std::size_t a = 0; a < sys.lam_idx.size(); ++a) {
    const int i = sys.lam_idx[a];
    sys.M.col(sys.c_lam + a).head(d) = ev.gx_y[i];
    sys.M.col(sys.c_lam + a).segment(ry, l) = ev.gy_y[i];
  }
  for (std::size_t a = 0; a < sys.G_idx.size(); ++a) {
    const int j = sys.G_idx[a];
    sys.M.col(sys.c_G + a).head(d) = ev.Gx[j];
    sys.M.col(sys.c_G + a).segment(ry, l) = ev.Gy[j];
  }
  for (int k = 0; k < l; ++k) {
    sys.M.col(sys.c_phi + k).head(d) = ev.Jx.row(k).transpose();
    sys.M.col(sys.c_phi + k).segment(ru, l) = ev.Ju.row(k).transpose();
    for (std::size_t a = 0; a < sets.I_g.size(); ++a)
      sys.M(rs + a, sys.c_phi + k) = ev.gy_u[sets.I_g[a]][k];
  }
  for (std::size_t a = 0; a < sys.mug_idx.size(); ++a) {
    const int i = sys.mug_idx[a];
    sys.M.col(sys.c_mug + a).head(d) = ev.gx_u[i];
    sys.M.col(sys.c_mug + a).segment(ru, l) = ev.gy_u[i];
  }
  sys.lo = VectorXd::Constant(cols, -kInf);
  sys.hi = VectorXd::Constant(cols, kInf);
  sys.lo[sys.c_lam0] = 0.0;
  if (!sets.dominance_active) sys.hi[sys.c_lam0] = 0.0;
  for (int c = sys.c_lam; c < sys.c_phi; ++c) sys.lo[c] = 0.0;
  return sys;
}

SvfMultipliers unpack(const System& sys, const VectorXd& v, const Eval& ev) {
  SvfMultipliers mu;
  mu.lambda0 = v[sys.c_lam0];
  mu.lambda.assign(ev.m, 0.0);
  mu.lambda_G.assign(ev.p, 0.0);
  mu.mu_phi.assign(ev.l, 0.0);
  mu.mu_g.assign(ev.m, 0.0);
  for (std::size_t a = 0; a < sys.lam_idx.size(); ++a) mu.lambda[sys.lam_idx[a]] = v[sys.c_lam + a];
  for (std::size_t a = 0; a < sys.G_idx.size(); ++a) mu.lambda_G[sys.G_idx[a]] = v[sys.c_G + a];
  for (int k = 0; k < ev.l; ++k) mu.mu_phi[k] = v[sys.c_phi + k];
  for (std::size_t a = 0; a < sys.mug_idx.size(); ++a) mu.mu_g[sys.mug_idx[a]] = v[sys.c_mug + a];
  return mu;
}

int ipow(int b, int e) {
  int r = 1;
  while (e-- > 0) r *= b;
  return r;
}

struct Attempt {
  bool ok = false;
  double residual = kInf;
  VectorXd v;
  int patterns = 0;
};

// Pattern digit per I_0 entry: C uses {+, -}, M uses {both >= 0, mu_g = 0, a'mu_phi = 0}.
Attempt try_mode(const System& sys, const Eval& ev, const IndexSets& sets, StationarityClass mode,
                 double tau) {
  const int n0 = static_cast<int>(sets.I_0.size());
  const int base = mode == StationarityClass::C ? 2 : mode == StationarityClass::M ? 3 : 1;
  const int count = (mode == StationarityClass::W || n0 == 0) ? 1 : ipow(base, n0);
  const int cols = static_cast<int>(sys.M.cols());
  Attempt best;
  for (int pat = 0; pat < count; ++pat) {
    VectorXd lo = sys.lo, hi = sys.hi;
    std::vector<Eigen::RowVectorXd> ub, eq;
    int code = pat;
    for (int a = 0; a < n0 && mode != StationarityClass::W; ++a) {
      const int i = sets.I_0[a];
      const int c = sys.c_mug + static_cast<int>(
                                    std::find(sys.mug_idx.begin(), sys.mug_idx.end(), i) -
                                    sys.mug_idx.begin());
      Eigen::RowVectorXd arow = Eigen::RowVectorXd::Zero(cols);
      for (int k = 0; k < ev.l; ++k) arow[sys.c_phi + k] = ev.gy_u[i][k];
      int digit = base > 1 ? code % base : 0;
      code = base > 1 ? code / base : code;
      if (mode == StationarityClass::S || (mode == StationarityClass::M && digit == 0) ||
          (mode == StationarityClass::C && digit == 0)) {
        lo[c] = 0.0;
        ub.push_back(-arow);
      } else if (mode == StationarityClass::C) {
        hi[c] = 0.0;
        ub.push_back(arow);
      } else if (digit == 1) {
        lo[c] = hi[c] = 0.0;
      } else {
        eq.push_back(arow);
      }
    }
    MatrixXd A_ub(ub.size(), cols), A_eq(eq.size(), cols);
    for (std::size_t r = 0; r < ub.size(); ++r) A_ub.row(r) = ub[r];
    for (std::size_t r = 0; r < eq.size(); ++r) A_eq.row(r) = eq[r];
    const ChebyshevResult res = constrained_min_inf(sys.M, sys.q, lo, hi, A_ub, A_eq);
    ++best.patterns;
    if (!res.ok) continue;
    if (res.residual < best.residual) {
      best.residual = res.residual;
      best.v = res.v;
    }
    if (res.residual <= tau) {
      best.ok = true;
      best.residual = res.residual;
      best.v = res.v;
      break;
    }
  }
  return best;
}

}  // namespace

const char* class_name(StationarityClass c) {
  switch (c) {
    case StationarityClass::W: return "W";
    case StationarityClass::C: return "C";
    case StationarityClass::M: return "M";
    case StationarityClass::S: return "S";
    default: return "none";
  }
}

StationarityClass parse_class(const std::string& s) {
  if (s == "W") return StationarityClass::W;
  if (s == "C") return StationarityClass::C;
  if (s == "M") return StationarityClass::M;
  if (s == "S") return StationarityClass::S;
  if (s == "none") return StationarityClass::none;
  throw std::invalid_argument("unknown stationarity class '" + s + "'");
}

IndexSets index_sets(const BilevelProblem& prob, const SvfPoint& pt, double tau_act) {
  check_sizes(prob, pt);
  IndexSets sets;
  sets.tau_act = tau_act;
  const Point py{pt.x, pt.y, {}, {}};
  const Point pu{pt.x, pt.u, {}, {}};
  for (int i = 0; i < prob.m(); ++i) {
    const double gy = evaluate(prob.g[i], py), gu = evaluate(prob.g[i], pu), s = pt.s[i];
    if (gy > tau_act || gu > tau_act)
      throw std::invalid_argument("lower constraint " + std::to_string(i + 1) + " violated");
    if (s < -tau_act) throw std::invalid_argument("negative multiplier s" + std::to_string(i + 1));
    if (gy >= -tau_act) sets.I_y.push_back(i);
    const bool active = gu >= -tau_act, zero = s <= tau_act;
    if (active && !zero) sets.I_g.push_back(i);
    else if (active) sets.I_0.push_back(i);
    else if (zero) sets.I_s.push_back(i);
    else
      throw std::invalid_argument("complementarity violated at pair " + std::to_string(i + 1));
  }
  for (int j = 0; j < prob.p(); ++j) {
    const double G = evaluate(prob.G[j], py);
    if (G > tau_act) throw std::invalid_argument("upper constraint " + std::to_string(j + 1) + " violated");
    if (G >= -tau_act) sets.G_active.push_back(j);
  }
  const double gap = evaluate(prob.f, py) - evaluate(prob.f, pu);
  if (gap > tau_act) throw std::invalid_argument("dominance constraint violated");
  sets.dominance_active = gap >= -tau_act;
  return sets;
}

double ConditionResiduals::max() const {
  return std::max({x_row, y_row, u_row, s_row, support, dominance, sign});
}

ConditionResiduals check_multipliers(const BilevelProblem& prob, const SvfPoint& pt,
                                     const IndexSets& sets, const SvfMultipliers& mult,
                                     StationarityClass mode) {
  check_sizes(prob, pt);
  const Eval ev = evaluate_all(prob, pt.x, pt.y, pt.u, pt.s);
  if (static_cast<int>(mult.lambda.size()) != ev.m || static_cast<int>(mult.mu_g.size()) != ev.m ||
      static_cast<int>(mult.mu_phi.size()) != ev.l || static_cast<int>(mult.lambda_G.size()) != ev.p)
    throw std::invalid_argument("multiplier dimensions do not match the problem");
  const Eigen::Map<const VectorXd> mphi(mult.mu_phi.data(), ev.l);
  ConditionResiduals r;

  VectorXd rx = ev.F_x + mult.lambda0 * (ev.fx_y - ev.fx_u) + ev.Jx.transpose() * mphi;
  VectorXd ry = ev.F_y + mult.lambda0 * ev.fy_y;
  VectorXd ru = -mult.lambda0 * ev.fy_u + ev.Ju.transpose() * mphi;
  for (int i : sets.I_y) {
    rx += mult.lambda[i] * ev.gx_y[i];
    ry += mult.lambda[i] * ev.gy_y[i];
  }
  for (int j : sets.G_active) {
    rx += mult.lambda_G[j] * ev.Gx[j];
    ry += mult.lambda_G[j] * ev.Gy[j];
  }
  for (int i = 0; i < ev.m; ++i) {
    if (contains(sets.I_s, i)) continue;
    rx += mult.mu_g[i] * ev.gx_u[i];
    ru += mult.mu_g[i] * ev.gy_u[i];
  }
  r.x_row = rx.lpNorm<Eigen::Infinity>();
  r.y_row = ry.lpNorm<Eigen::Infinity>();
  r.u_row = ru.lpNorm<Eigen::Infinity>();
  for (int i : sets.I_s) r.s_row = std::max(r.s_row, std::abs(mult.mu_g[i]));
  for (int i : sets.I_g) r.s_row = std::max(r.s_row, std::abs(ev.gy_u[i].dot(mphi)));

  r.support = std::max(0.0, -mult.lambda0);
  for (int i = 0; i < ev.m; ++i) {
    r.support = std::max(r.support, -mult.lambda[i]);
    if (!contains(sets.I_y, i)) r.support = std::max(r.support, std::abs(mult.lambda[i]));
  }
  for (int j = 0; j < ev.p; ++j) {
    r.support = std::max(r.support, -mult.lambda_G[j]);
    if (!contains(sets.G_active, j)) r.support = std::max(r.support, std::abs(mult.lambda_G[j]));
  }
  r.dominance = std::abs(mult.lambda0 * (ev.f_y - ev.f_u));
  for (int i : sets.I_0)
    r.sign = std::max(r.sign, sign_residual(mode, mult.mu_g[i], ev.gy_u[i].dot(mphi)));
  return r;
}

StationarityCertificate certify(const BilevelProblem& prob, const SvfPoint& pt,
                                StationarityClass mode, double tau, double tau_act) {
  if (mode == StationarityClass::none) throw std::invalid_argument("mode must be W, C, M or S");
  StationarityCertificate cert;
  cert.requested = mode;
  cert.tau = tau;
  cert.sets = index_sets(prob, pt, tau_act);
  if (cert.sets.I_0.size() > 10 && mode != StationarityClass::W)
    throw std::invalid_argument("biactive set has " + std::to_string(cert.sets.I_0.size()) +
                                " entries; sign-pattern enumeration is limited to 10");
  const Eval ev = evaluate_all(prob, pt.x, pt.y, pt.u, pt.s);
  const System sys = build_system(ev, cert.sets);
  Attempt weakest;
  for (int c = static_cast<int>(mode); c >= static_cast<int>(StationarityClass::W); --c) {
    const auto cls = static_cast<StationarityClass>(c);
    Attempt at = try_mode(sys, ev, cert.sets, cls, tau);
    cert.patterns_tried += at.patterns;
    if (at.ok) {
      cert.cls = cls;
      cert.mult = unpack(sys, at.v, ev);
      cert.minimal_residual = at.residual;
      cert.residuals = check_multipliers(prob, pt, cert.sets, cert.mult, cls);
      return cert;
    }
    if (cls == StationarityClass::W) weakest = at;
  }
  cert.cls = StationarityClass::none;
  cert.minimal_residual = weakest.residual;
  if (weakest.v.size() > 0) {
    cert.mult = unpack(sys, weakest.v, ev);
    cert.residuals = check_multipliers(prob, pt, cert.sets, cert.mult, StationarityClass::W);
  }
  return cert;
}

LowerKkt lower_kkt_check(const BilevelProblem& prob, const std::vector<double>& x,
                         const std::vector<double>& y, double tau, double tau_act) {
  if (static_cast<int>(x.size()) != prob.d || static_cast<int>(y.size()) != prob.l)
    throw std::invalid_argument("point dimensions do not match the problem");
  const Point py{x, y, {}, {}};
  std::vector<int> active;
  for (int i = 0; i < prob.m(); ++i) {
    const double g = evaluate(prob.g[i], py);
    if (g > tau_act)
      throw std::invalid_argument("y violates lower constraint " + std::to_string(i + 1));
    if (g >= -tau_act) active.push_back(i);
  }
  const VectorXd fy = eval_grad(prob.f, Block::y, prob.l, py);
  LowerKkt out;
  out.s.assign(prob.m(), 0.0);
  if (active.empty()) {
    out.residual = prob.l > 0 ? fy.lpNorm<Eigen::Infinity>() : 0.0;
  } else {
    MatrixXd M(prob.l, active.size());
    for (std::size_t a = 0; a < active.size(); ++a)
      M.col(a) = eval_grad(prob.g[active[a]], Block::y, prob.l, py);
    const ChebyshevResult r = min_inf_norm(M, -fy, std::vector<bool>(active.size(), true));
    if (!r.ok) throw std::runtime_error("lower KKT linear program failed");
    for (std::size_t a = 0; a < active.size(); ++a) out.s[active[a]] = std::max(0.0, r.v[a]);
    out.residual = r.residual;
  }
  out.kkt = out.residual <= tau;
  return out;
}

double KpCertificate::max() const { return std::max({x_row, y_row, comp, sign}); }

KpCertificate svf_to_kp_certificate(const BilevelProblem& prob, const SvfPoint& pt,
                                    const StationarityCertificate& cert, double tau) {
  check_sizes(prob, pt);
  if (cert.cls != StationarityClass::S)
    throw std::invalid_argument(std::string("certificate class is ") + class_name(cert.cls) +
                                ", S is required");
  double gap = 0.0;
  for (int k = 0; k < prob.l; ++k) gap = std::max(gap, std::abs(pt.y[k] - pt.u[k]));
  if (gap > tau) throw std::invalid_argument("y and u differ; the mapping needs y = u");

  const SvfMultipliers& mu = cert.mult;
  const Eval ev = evaluate_all(prob, pt.x, pt.y, pt.y, pt.s);
  KpCertificate kp;
  kp.mu.resize(ev.m);
  kp.nu.resize(ev.m);
  kp.mu_phi = mu.mu_phi;
  kp.lambda_G = mu.lambda_G;
  const Eigen::Map<const VectorXd> mphi(mu.mu_phi.data(), ev.l);
  VectorXd rx = ev.F_x + ev.Jx.transpose() * mphi;
  VectorXd ry = ev.F_y + ev.Ju.transpose() * mphi;
  for (int i = 0; i < ev.m; ++i) {
    kp.mu[i] = mu.mu_g[i] + mu.lambda[i];
    kp.nu[i] = ev.gy_y[i].dot(mphi);
    rx += kp.mu[i] * ev.gx_y[i];
    ry += kp.mu[i] * ev.gy_y[i];
  }
  for (int j = 0; j < ev.p; ++j) {
    rx += kp.lambda_G[j] * ev.Gx[j];
    ry += kp.lambda_G[j] * ev.Gy[j];
    kp.sign = std::max(kp.sign, -kp.lambda_G[j]);
  }
  kp.x_row = rx.lpNorm<Eigen::Infinity>();
  kp.y_row = ry.lpNorm<Eigen::Infinity>();
  const double ta = cert.sets.tau_act;
  for (int i = 0; i < ev.m; ++i) {
    const bool active = ev.g_y[i] >= -ta, zero = pt.s[i] <= ta;
    if (!active) kp.comp = std::max(kp.comp, std::abs(kp.mu[i]));
    if (!zero) kp.comp = std::max(kp.comp, std::abs(kp.nu[i]));
    if (active && zero) kp.sign = std::max({kp.sign, -kp.mu[i], -kp.nu[i]});
  }
  kp.ok = kp.max() <= tau;
  return kp;
}

std::string to_json(const StationarityCertificate& cert, int indent) {
  nlohmann::json j;
  j["class"] = class_name(cert.cls);
  j["requested"] = class_name(cert.requested);
  j["tau"] = cert.tau;
  j["minimal_residual"] = cert.minimal_residual;
  j["patterns_tried"] = cert.patterns_tried;
  j["index_sets"] = {{"I_y", cert.sets.I_y},       {"I_g", cert.sets.I_g},
                     {"I_0", cert.sets.I_0},       {"I_s", cert.sets.I_s},
                     {"G_active", cert.sets.G_active},
                     {"dominance_active", cert.sets.dominance_active},
                     {"tau_act", cert.sets.tau_act}};
  j["multipliers"] = {{"lambda0", cert.mult.lambda0},   {"lambda", cert.mult.lambda},
                      {"lambda_G", cert.mult.lambda_G}, {"mu_phi", cert.mult.mu_phi},
                      {"mu_g", cert.mult.mu_g}};
  const ConditionResiduals& r = cert.residuals;
  j["residuals"] = {{"x_row", r.x_row},       {"y_row", r.y_row},     {"u_row", r.u_row},
                    {"s_row", r.s_row},       {"support", r.support}, {"dominance", r.dominance},
                    {"sign", r.sign}};
  return j.dump(indent);
}

}  // namespace svf
