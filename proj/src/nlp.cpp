#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

#include "svf/expr.hpp"
#include "svf/lp.hpp"
#include "svf/nlp.hpp"

namespace svf {

const char* status_name(NlpStatus s) {
  switch (s) {
    case NlpStatus::converged: return "converged";
    case NlpStatus::iteration_limit: return "iteration-limit";
    case NlpStatus::line_search_failure: return "line-search-failure";
  }
  return "?";
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

std::span<const double> as_span(const VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// Augmented Lagrangian merit for fixed multipliers and penalty.
class Merit {
 public:
  Merit(const SmoothNlp& nlp, const VectorXd& lam, const VectorXd& nu, double mu)
      : nlp_(nlp), lam_(lam), nu_(nu), mu_(mu) {}

  // Returns +inf outside the model's domain.
  double value(const VectorXd& w, NlpEval& ev) const {
    try {
      nlp_.evaluate(as_span(w), false, ev);
    } catch (const DomainError&) {
      return kInf;
    } catch (const std::domain_error&) {
      return kInf;
    }
    return combine(ev);
  }

  double value_and_gradient(const VectorXd& w, NlpEval& ev, VectorXd& grad) const {
    nlp_.evaluate(as_span(w), true, ev);
    grad = ev.grad;
    if (ev.ce.size() > 0) grad.noalias() += ev.Je.transpose() * (lam_ + mu_ * ev.ce);
    if (ev.ci.size() > 0) {
      VectorXd shifted = (nu_ + mu_ * ev.ci).cwiseMax(0.0);
      grad.noalias() += ev.Ji.transpose() * shifted;
    }
    return combine(ev);
  }

 private:
  double combine(const NlpEval& ev) const {
    double v = ev.f;
    if (ev.ce.size() > 0) v += lam_.dot(ev.ce) + 0.5 * mu_ * ev.ce.squaredNorm();
    if (ev.ci.size() > 0) {
      VectorXd shifted = (nu_ + mu_ * ev.ci).cwiseMax(0.0);
      v += (shifted.squaredNorm() - nu_.squaredNorm()) / (2.0 * mu_);
    }
    if (!std::isfinite(v)) return kInf;
    return v;
  }

  const SmoothNlp& nlp_;
  const VectorXd& lam_;
  const VectorXd& nu_;
  double mu_;
};

enum class InnerStop { gradient, iteration_limit, line_search };

struct InnerResult {
  InnerStop stop = InnerStop::iteration_limit;
  int iterations = 0;
};

// Central-difference Hessian of the merit from its analytic gradient, shifted
// to be safely positive definite. Falls back to the identity near the edge of
// the model's domain.
MatrixXd model_hessian(const Merit& merit, const VectorXd& w) {
  const int n = static_cast<int>(w.size());
  MatrixXd H(n, n);
  NlpEval ev;
  VectorXd gp, gm;
  VectorXd wp = w, wm = w;
  try {
    for (int j = 0; j < n; ++j) {
      const double h = 1e-6 * std::max(1.0, std::fabs(w[j]));
      wp[j] = w[j] + h;
      wm[j] = w[j] - h;
      merit.value_and_gradient(wp, ev, gp);
      merit.value_and_gradient(wm, ev, gm);
      H.col(j) = (gp - gm) / (2.0 * h);
      wp[j] = wm[j] = w[j];
    }
  } catch (const std::exception&) {
    return MatrixXd::Identity(n, n);
  }
  if (!H.allFinite()) return MatrixXd::Identity(n, n);
  MatrixXd S = 0.5 * (H + H.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
  VectorXd ev_vals = es.eigenvalues();
  const double top = std::max(1.0, ev_vals.cwiseAbs().maxCoeff());
  const double floor = 1e-10 * top;
  for (int k = 0; k < n; ++k) ev_vals[k] = std::max(std::fabs(ev_vals[k]), floor);
  return es.eigenvectors() * ev_vals.asDiagonal() * es.eigenvectors().transpose();
}

// Damped BFGS on the merit, starting from w (updated in place). The curvature
// model B is seeded from a finite-difference Hessian and refreshed the same way
// when a search direction fails.
InnerResult minimize_merit(const Merit& merit, VectorXd& w, MatrixXd& B, double tol,
                           const NlpOptions& opts) {
  const int n = static_cast<int>(w.size());
  InnerResult res;
  NlpEval ev;
  VectorXd grad;
  double phi = merit.value_and_gradient(w, ev, grad);
  if (!std::isfinite(phi)) {
    res.stop = InnerStop::line_search;
    return res;
  }
  if (B.rows() != n) B = model_hessian(merit, w);
  bool fresh = false;
  VectorXd w_new(n), grad_new(n), d(n);
  NlpEval trial;
  for (int it = 0; it < opts.max_inner; ++it) {
    res.iterations = it;
    if (grad.lpNorm<Eigen::Infinity>() <= tol) {
      res.stop = InnerStop::gradient;
      return res;
    }
    Eigen::LLT<MatrixXd> llt(B);
    bool ok = llt.info() == Eigen::Success;
    if (ok) d = -llt.solve(grad);
    if (!ok || !d.allFinite() || grad.dot(d) >= 0.0) {
      if (!fresh) {
        B = model_hessian(merit, w);
        fresh = true;
        continue;
      }
      d = -grad;
    }
    const double slope = grad.dot(d);
    const double noise = 1e-12 * (1.0 + std::fabs(phi));
    double alpha = 1.0;
    double phi_new = kInf;
    for (;;) {
      w_new = w + alpha * d;
      phi_new = merit.value(w_new, trial);
      if (phi_new <= phi + opts.armijo_c * alpha * slope) break;
      // Near a minimizer the decrease drops below rounding noise in the merit;
      // then a step that stays within the noise and reduces the gradient is taken.
      if (phi_new <= phi + noise) {
        merit.value_and_gradient(w_new, ev, grad_new);
        if (grad_new.lpNorm<Eigen::Infinity>() < 0.9 * grad.lpNorm<Eigen::Infinity>()) break;
      }
      alpha *= opts.backtrack_factor;
      if (alpha * d.lpNorm<Eigen::Infinity>() < 1e-16 || alpha < 1e-16) {
        phi_new = kInf;
        break;
      }
    }
    if (!std::isfinite(phi_new)) {
      if (!fresh) {
        B = model_hessian(merit, w);
        fresh = true;
        continue;
      }
      res.stop = InnerStop::line_search;
      return res;
    }
    fresh = false;
    phi = merit.value_and_gradient(w_new, ev, grad_new);
    VectorXd s = w_new - w;
    VectorXd y = grad_new - grad;
    w = w_new;
    grad = grad_new;

    // Powell-damped BFGS update of the Hessian model.
    VectorXd Bs = B * s;
    const double sBs = s.dot(Bs);
    const double sy = s.dot(y);
    if (sBs > 0.0 && std::isfinite(sBs) && y.allFinite()) {
      double theta = 1.0;
      if (sy < 0.2 * sBs) theta = 0.8 * sBs / (sBs - sy);
      VectorXd r = theta * y + (1.0 - theta) * Bs;
      const double sr = s.dot(r);
      if (sr > 0.0) B += (r * r.transpose()) / sr - (Bs * Bs.transpose()) / sBs;
    }
  }
  res.iterations = opts.max_inner;
  res.stop = grad.lpNorm<Eigen::Infinity>() <= tol ? InnerStop::gradient
                                                     : InnerStop::iteration_limit;
  return res;
}

struct Measures {
  double stationarity = 0.0;
  double complementarity = 0.0;
  double equality = 0.0;
  double weighted_equality = 0.0;
  double inequality = 0.0;
};

Measures measure(const SmoothNlp& nlp, const VectorXd& w, const VectorXd& lam,
                 const VectorXd& nu) {
  NlpEval ev;
  nlp.evaluate(as_span(w), true, ev);
  Measures m;
  VectorXd g = ev.grad;
  if (ev.ce.size() > 0) g.noalias() += ev.Je.transpose() * lam;
  if (ev.ci.size() > 0) g.noalias() += ev.Ji.transpose() * nu;
  m.stationarity = g.lpNorm<Eigen::Infinity>();
  for (int k = 0; k < ev.ce.size(); ++k) {
    const double a = std::fabs(ev.ce[k]);
    m.equality = std::max(m.equality, a);
    m.weighted_equality = std::max(m.weighted_equality, a * nlp.equality_weight(k, as_span(w)));
  }
  for (int k = 0; k < ev.ci.size(); ++k) {
    m.inequality = std::max(m.inequality, std::max(0.0, ev.ci[k]));
    m.complementarity = std::max(m.complementarity, std::fabs(nu[k] * ev.ci[k]));
  }
  return m;
}

}  // namespace

NlpResult solve_nlp(const SmoothNlp& nlp, std::span<const double> w0, const NlpOptions& opts,
                    std::span<const double> eq_mult0, std::span<const double> ineq_mult0) {
  const int n = nlp.dimension(), ne = nlp.num_equalities(), ni = nlp.num_inequalities();
  if (static_cast<int>(w0.size()) != n) throw std::invalid_argument("solve_nlp: bad start size");
  VectorXd w = Eigen::Map<const VectorXd>(w0.data(), n);
  VectorXd lam = VectorXd::Zero(ne), nu = VectorXd::Zero(ni);
  if (static_cast<int>(eq_mult0.size()) == ne) lam = Eigen::Map<const VectorXd>(eq_mult0.data(), ne);
  if (static_cast<int>(ineq_mult0.size()) == ni)
    nu = Eigen::Map<const VectorXd>(ineq_mult0.data(), ni).cwiseMax(0.0);
  double mu = opts.equality_penalty_init;
  MatrixXd B;

  NlpResult out;
  double prev_violation = kInf;
  int stalls = 0;
  for (int outer = 0; outer < opts.max_outer; ++outer) {
    Merit merit(nlp, lam, nu, mu);
    VectorXd w_before = w;
    InnerResult inner = minimize_merit(merit, w, B, opts.grad_tol, opts);
    out.inner_iterations += inner.iterations;
    out.outer_iterations = outer + 1;

    NlpEval ev;
    nlp.evaluate(as_span(w), false, ev);
    if (opts.multiplier_update) {
      if (ne > 0) lam += mu * ev.ce;
      if (ni > 0) nu = (nu + mu * ev.ci).cwiseMax(0.0);
    }
    Measures m = measure(nlp, w, lam, nu);
    if (std::getenv("SVF_NLP_TRACE"))
      std::fprintf(stderr, "outer %d mu %.1e inner %d stop %d stat %.2e eq %.2e weq %.2e ineq %.2e comp %.2e\n",
                   outer, mu, inner.iterations, static_cast<int>(inner.stop), m.stationarity,
                   m.equality, m.weighted_equality, m.inequality, m.complementarity);
    out.stationarity = m.stationarity;
    out.equality_residual = m.equality;
    out.inequality_violation = m.inequality;
    out.kkt_residual = std::max({m.stationarity, m.complementarity, m.equality, m.inequality});
    const double violation = std::max(m.weighted_equality, m.inequality);
    const double kkt = std::max({m.stationarity, m.complementarity, violation});
    if (kkt <= opts.grad_tol) {
      out.status = NlpStatus::converged;
      break;
    }
    if (violation <= opts.grad_tol) {
      // Degenerate constraints can keep the running multipliers from settling
      // even though the point is stationary; check with the best multipliers.
      OptimalKkt best = kkt_residual_optimal(nlp, as_span(w), opts.grad_tol);
      if (best.residual <= opts.grad_tol) {
        lam = Eigen::Map<const VectorXd>(best.eq_multipliers.data(), ne);
        nu = Eigen::Map<const VectorXd>(best.ineq_multipliers.data(), ni);
        out.kkt_residual = best.residual;
        Measures mb = measure(nlp, w, lam, nu);
        out.stationarity = mb.stationarity;
        out.status = NlpStatus::converged;
        break;
      }
    }
    if (inner.stop == InnerStop::line_search) {
      out.status = NlpStatus::line_search_failure;
      stalls = (w - w_before).lpNorm<Eigen::Infinity>() == 0.0 ? stalls + 1 : 0;
      if (stalls >= 2) break;
    } else {
      out.status = NlpStatus::iteration_limit;
      stalls = 0;
    }
    const double raw_violation = std::max(m.equality, m.inequality);
    if ((raw_violation > 0.5 * prev_violation && violation > opts.grad_tol) ||
        !opts.multiplier_update) {
      mu = std::min(mu * opts.penalty_growth, opts.penalty_max);
      B.resize(0, 0);  // reseeded for the new penalty
    }
    prev_violation = raw_violation;
  }
  out.w.assign(w.data(), w.data() + n);
  out.eq_multipliers.assign(lam.data(), lam.data() + ne);
  out.ineq_multipliers.assign(nu.data(), nu.data() + ni);
  out.final_penalty = mu;
  return out;
}

double kkt_residual_nlp(const SmoothNlp& nlp, std::span<const double> w,
                        std::span<const double> eq_mult, std::span<const double> ineq_mult) {
  const int ne = nlp.num_equalities(), ni = nlp.num_inequalities();
  VectorXd wv = Eigen::Map<const VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  VectorXd lam = VectorXd::Zero(ne), nu = VectorXd::Zero(ni);
  if (static_cast<int>(eq_mult.size()) == ne) lam = Eigen::Map<const VectorXd>(eq_mult.data(), ne);
  if (static_cast<int>(ineq_mult.size()) == ni)
    nu = Eigen::Map<const VectorXd>(ineq_mult.data(), ni);
  Measures m = measure(nlp, wv, lam, nu);
  return std::max(m.stationarity, m.complementarity);
}

ExprNlp::ExprNlp(const BlockLayout& layout, const Expr& objective,
                 const std::vector<Expr>& equalities, const std::vector<Expr>& inequalities)
    : layout_(layout), obj_(objective, layout), offsets_(inequalities.size(), 0.0) {
  for (const Expr& e : equalities) eq_.emplace_back(e, layout);
  for (const Expr& e : inequalities) ineq_.emplace_back(e, layout);
}

void ExprNlp::evaluate(std::span<const double> w, bool derivatives, NlpEval& out) const {
  const int n = dimension(), ne = num_equalities(), ni = num_inequalities();
  out.f = obj_.value(w);
  out.ce.resize(ne);
  out.ci.resize(ni);
  for (int k = 0; k < ne; ++k) out.ce[k] = eq_[k].value(w);
  for (int k = 0; k < ni; ++k) out.ci[k] = ineq_[k].value(w) - offsets_[k];
  if (!derivatives) return;
  out.grad = VectorXd::Zero(n);
  obj_.add_gradient(w, 1.0, {out.grad.data(), static_cast<std::size_t>(n)});
  out.Je = MatrixXd::Zero(ne, n);
  out.Ji = MatrixXd::Zero(ni, n);
  auto fill = [&](const CompiledFunction& fn, MatrixXd& J, int row) {
    const auto& slots = fn.slots();
    for (std::size_t k = 0; k < slots.size(); ++k) J(row, slots[k]) += fn.partial(k, w);
  };
  for (int k = 0; k < ne; ++k) fill(eq_[k], out.Je, k);
  for (int k = 0; k < ni; ++k) fill(ineq_[k], out.Ji, k);
}

OptimalKkt kkt_residual_optimal(const SmoothNlp& nlp, std::span<const double> w,
                                double activity) {
  const int n = nlp.dimension(), ne = nlp.num_equalities(), ni = nlp.num_inequalities();
  NlpEval ev;
  nlp.evaluate(w, true, ev);
  std::vector<int> active;
  for (int k = 0; k < ni; ++k)
    if (ev.ci[k] > -activity) active.push_back(k);
  const int na = static_cast<int>(active.size());
  // Rows n.. hold |ci_k| nu_k so complementarity is minimized jointly.
  MatrixXd M = MatrixXd::Zero(n + na, ne + na);
  if (ne > 0) M.topLeftCorner(n, ne) = ev.Je.transpose();
  for (int a = 0; a < na; ++a) {
    M.block(0, ne + a, n, 1) = ev.Ji.row(active[a]).transpose();
    M(n + a, ne + a) = std::fabs(ev.ci[active[a]]);
  }
  VectorXd q = VectorXd::Zero(n + na);
  q.head(n) = -ev.grad;
  std::vector<bool> nonneg(ne + na, false);
  for (int a = 0; a < na; ++a) nonneg[ne + a] = true;
  OptimalKkt out;
  out.eq_multipliers.assign(ne, 0.0);
  out.ineq_multipliers.assign(ni, 0.0);
  double stat = ev.grad.lpNorm<Eigen::Infinity>();
  if (ne + na > 0) {
    ChebyshevResult ch = min_inf_norm(M, q, nonneg);
    if (ch.ok) {
      stat = ch.residual;
      for (int k = 0; k < ne; ++k) out.eq_multipliers[k] = ch.v[k];
      for (int a = 0; a < na; ++a) out.ineq_multipliers[active[a]] = std::max(0.0, ch.v[ne + a]);
    }
  }
  double r = stat;
  for (int k = 0; k < ne; ++k) r = std::max(r, std::fabs(ev.ce[k]));
  for (int k = 0; k < ni; ++k) {
    r = std::max(r, std::max(0.0, ev.ci[k]));
    r = std::max(r, std::fabs(out.ineq_multipliers[k] * ev.ci[k]));
  }
  out.residual = r;
  return out;
}

}  // namespace svf
