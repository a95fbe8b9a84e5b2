#include "svf/lower.hpp"

#include <algorithm>
#include <cmath>

namespace svf {

Expr fix_block(const Expr& e, Block b, std::span<const double> values) {
  Expr out = e;
  for (std::size_t i = 0; i < values.size(); ++i)
    out = substitute(out, VarRef{b, static_cast<int>(i)}, Expr::constant(values[i]));
  return fold(out);
}

LowerSolve lower_local_solve(const BilevelProblem& prob, std::span<const double> x,
                             std::span<const double> y0, const Box* box, double tol) {
  BlockLayout lay;
  lay.offset[static_cast<int>(Block::y)] = 0;
  lay.size[static_cast<int>(Block::y)] = prob.l;
  std::vector<Expr> ineq;
  for (const Expr& gi : prob.g) ineq.push_back(fix_block(gi, Block::x, x));
  if (box) {
    for (int j = 0; j < prob.l; ++j) {
      Expr yj = Expr::variable(Block::y, j);
      if (std::isfinite(box->lo[j])) ineq.push_back(Expr::constant(box->lo[j]) - yj);
      if (std::isfinite(box->hi[j])) ineq.push_back(yj - Expr::constant(box->hi[j]));
    }
  }
  ExprNlp nlp(lay, fix_block(prob.f, Block::x, x), {}, ineq);
  NlpOptions opts;
  opts.grad_tol = tol;
  LowerSolve out;
  try {
    NlpResult res = solve_nlp(nlp, y0, opts);
    out.y = res.w;
    out.converged = res.status == NlpStatus::converged;
    out.violation = res.inequality_violation;
  } catch (const DomainError&) {
    out.y.assign(y0.begin(), y0.end());
  }
  NlpEval ev;
  try {
    nlp.evaluate(out.y, false, ev);
    out.f = ev.f;
    for (int k = 0; k < ev.ci.size(); ++k) out.violation = std::max(out.violation, ev.ci[k]);
  } catch (const DomainError&) {
    out.f = HUGE_VAL;
  }
  return out;
}

}  // namespace svf
