#include <cmath>

#include "svf/smooth.hpp"

namespace svf {

ShiftPair shift(double g, double s, double r, double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("shift: rho must be positive");
  if (r < 0.0) throw std::invalid_argument("shift: r must be nonnegative");
  ShiftPair sp{0.0, 0.0, g, s, r, rho};
  const double t = rho * s + g;
  const double root = std::hypot(t, 2.0 * std::sqrt(r * rho));
  if (t >= 0.0) {
    sp.kappa = 0.5 * (root + t);
    sp.z = sp.kappa > 0.0 ? rho * r / sp.kappa : 0.0;
  } else {
    sp.z = 0.5 * (root - t);
    sp.kappa = rho * r / sp.z;
  }
  return sp;
}

ShiftDerivatives shift_derivatives(double g, double s, std::span<const double> grad_g, double r,
                                   double rho) {
  ShiftPair sp = shift(g, s, r, rho);
  const double sum = sp.z + sp.kappa;
  if (!(r > 0.0) || !(sum > 0.0))
    throw SingularShift("shift_derivatives: singular shift (requires r > 0)");
  const double a = sp.kappa / sum;
  const double b = sp.z / sum;
  ShiftDerivatives out;
  out.dz.resize(grad_g.size());
  out.dkappa.resize(grad_g.size());
  for (std::size_t k = 0; k < grad_g.size(); ++k) {
    out.dz[k] = -b * grad_g[k];
    out.dkappa[k] = a * grad_g[k];
  }
  out.dz_ds = -rho * b;
  out.dkappa_ds = rho * a;
  return out;
}

SmoothedInstance::SmoothedInstance(const MpecInstance& base, double r, double rho)
    : base_(&base), r_(r), rho_(rho), layout_(base.layout) {
  if (!(r > 0.0)) throw std::invalid_argument("smooth_instance: r must be positive");
  if (!(rho > 0.0)) throw std::invalid_argument("smooth_instance: rho must be positive");
  F_ = CompiledFunction(base.objective, layout_);
  f_low_ = CompiledFunction(base.lower_f, layout_);
  for (const Expr& e : base.lower_grad_f) df_.emplace_back(e, layout_);
  for (int i = 0; i < base.m; ++i) {
    g_.emplace_back(base.lower_g[i], layout_);
    dg_.emplace_back();
    for (const Expr& e : base.lower_grad_g[i]) dg_.back().emplace_back(e, layout_);
  }
  for (std::size_t k = 0; k < base.inequalities.size(); ++k) {
    RowRole role = base.roles[k];
    bool comp_row = false;
    for (const CompPair& cp : base.comp_pairs) comp_row = comp_row || cp.row == static_cast<int>(k);
    if (role == RowRole::s_nonneg || comp_row || role == RowRole::lower_at_u) continue;
    kept_.push_back(static_cast<int>(k));
    ineq_.emplace_back(base.inequalities[k], layout_);
  }
  s_offset_ = layout_.has(Block::s) ? layout_.offset[static_cast<int>(Block::s)] : 0;
}

SmoothedInstance smooth_instance(const MpecInstance& base, double r, double rho) {
  return SmoothedInstance(base, r, rho);
}

std::vector<ShiftPair> SmoothedInstance::shifts(std::span<const double> w) const {
  std::vector<ShiftPair> out;
  out.reserve(g_.size());
  for (std::size_t i = 0; i < g_.size(); ++i)
    out.push_back(shift(g_[i].value(w), w[s_offset_ + i], r_, rho_));
  return out;
}

namespace {

void add_row(const CompiledFunction& fn, std::span<const double> w, double scale,
             Eigen::MatrixXd& J, int row) {
  const auto& slots = fn.slots();
  for (std::size_t k = 0; k < slots.size(); ++k) J(row, slots[k]) += scale * fn.partial(k, w);
}

}  // namespace

void SmoothedInstance::evaluate(std::span<const double> w, bool derivatives, NlpEval& out) const {
  const int n = base_->n, l = base_->l, m = base_->m;
  const int ne = l + m, ni = num_inequalities();
  out.f = F_.value(w);
  out.ce.resize(ne);
  out.ci.resize(ni);
  if (derivatives) {
    out.grad = Eigen::VectorXd::Zero(n);
    F_.add_gradient(w, 1.0, {out.grad.data(), static_cast<std::size_t>(n)});
    out.Je = Eigen::MatrixXd::Zero(ne, n);
    out.Ji = Eigen::MatrixXd::Zero(ni, n);
  }

  std::vector<ShiftPair> sp = shifts(w);
  std::vector<double> a(m);
  for (int i = 0; i < m; ++i) a[i] = sp[i].kappa / (sp[i].z + sp[i].kappa);

  for (int j = 0; j < l; ++j) {
    double v = df_[j].value(w);
    if (derivatives) add_row(df_[j], w, 1.0, out.Je, j);
    for (int i = 0; i < m; ++i) {
      const double h = dg_[i][j].value(w);
      const double mult = sp[i].kappa / rho_;
      v += mult * h;
      if (derivatives) {
        add_row(dg_[i][j], w, mult, out.Je, j);
        add_row(g_[i], w, h * a[i] / rho_, out.Je, j);
        out.Je(j, s_offset_ + i) += h * a[i];
      }
    }
    out.ce[j] = v;
  }
  for (int i = 0; i < m; ++i) {
    out.ce[l + i] = sp[i].z + sp[i].g;
    if (derivatives) {
      add_row(g_[i], w, a[i], out.Je, l + i);
      out.Je(l + i, s_offset_ + i) += -rho_ * (1.0 - a[i]);
    }
  }
  for (int k = 0; k < ni; ++k) {
    out.ci[k] = ineq_[k].value(w);
    if (derivatives) add_row(ineq_[k], w, 1.0, out.Ji, k);
  }
}

double SmoothedInstance::equality_weight(int row, std::span<const double> w) const {
  const int l = base_->l;
  if (row < l) return 1.0;
  const int i = row - l;
  const double g = g_[i].value(w);
  return std::max(1.0, std::fabs(rho_ * w[s_offset_ + i] - g) / rho_);
}

double SmoothedInstance::augmented_objective(std::span<const double> w,
                                             std::vector<double>* grad) const {
  double v = f_low_.value(w);
  if (grad) {
    grad->assign(base_->n, 0.0);
    f_low_.add_gradient(w, 1.0, *grad);
  }
  for (std::size_t i = 0; i < g_.size(); ++i) {
    const double s = w[s_offset_ + i];
    ShiftPair sp = shift(g_[i].value(w), s, r_, rho_);
    if (!(sp.z > 0.0)) throw std::domain_error("augmented_objective: nonpositive shift z");
    const double psi = sp.z + sp.g;
    v += -r_ * std::log(sp.z) + s * psi + psi * psi / (2.0 * rho_);
    if (grad) {
      g_[i].add_gradient(w, sp.kappa / rho_, *grad);
      (*grad)[s_offset_ + i] += psi;
    }
  }
  return v;
}

}  // namespace svf
