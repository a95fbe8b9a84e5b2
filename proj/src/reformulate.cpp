#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "svf/mpec.hpp"

namespace svf {

const char* kind_name(MpecKind k) { return k == MpecKind::svf ? "SVF" : "KP"; }

Point MpecInstance::split(std::span<const double> w) const {
  Point pt;
  pt.x = block(w, Block::x);
  pt.y = block(w, Block::y);
  pt.u = block(w, Block::u);
  pt.s = block(w, Block::s);
  return pt;
}

std::span<const double> MpecInstance::block(std::span<const double> w, Block b) const {
  if (!layout.has(b)) return {};
  int k = static_cast<int>(b);
  return w.subspan(layout.offset[k], layout.size[k]);
}

std::vector<double> MpecInstance::pack(std::span<const double> x, std::span<const double> y,
                                       std::span<const double> u,
                                       std::span<const double> s) const {
  std::vector<double> w(n, 0.0);
  auto put = [&](Block b, std::span<const double> v) {
    if (!layout.has(b)) return;
    int k = static_cast<int>(b);
    if (static_cast<int>(v.size()) != layout.size[k])
      throw std::invalid_argument(std::string("block ") + block_name(b) + " has wrong length");
    std::copy(v.begin(), v.end(), w.begin() + layout.offset[k]);
  };
  put(Block::x, x);
  put(Block::y, y);
  put(Block::u, u);
  put(Block::s, s);
  return w;
}

namespace {

void set_block(BlockLayout& lay, Block b, int offset, int size) {
  lay.offset[static_cast<int>(b)] = offset;
  lay.size[static_cast<int>(b)] = size;
}

// Stationarity pieces of the lower problem posed at block `at`.
void stationarity(const BilevelProblem& prob, Block at, MpecInstance& inst) {
  auto move = [&](const Expr& e) { return at == Block::y ? e : substitute_block(e, Block::y, at); };
  Expr f_at = move(prob.f);
  inst.stationary_block = at;
  inst.lower_f = f_at;
  inst.lower_grad_f = gradient_block(f_at, at, prob.l);
  inst.lower_grad_g.clear();
  inst.lower_g.clear();
  for (const Expr& gi : prob.g) {
    Expr g_at = move(gi);
    inst.lower_g.push_back(g_at);
    inst.lower_grad_g.push_back(gradient_block(g_at, at, prob.l));
  }
  for (int j = 0; j < prob.l; ++j) {
    Expr row = inst.lower_grad_f[j];
    for (int i = 0; i < prob.m(); ++i)
      row = row + Expr::variable(Block::s, i) * inst.lower_grad_g[i][j];
    inst.equalities.push_back(row);
  }
}

void add_row(MpecInstance& inst, Expr e, RowRole role) {
  inst.inequalities.push_back(std::move(e));
  inst.roles.push_back(role);
}

void common_header(const BilevelProblem& prob, MpecInstance& inst) {
  inst.d = prob.d;
  inst.l = prob.l;
  inst.m = prob.m();
  inst.p = prob.p();
  inst.objective = prob.F;
}

}  // namespace

MpecInstance build_svf(const BilevelProblem& prob) {
  MpecInstance inst;
  inst.kind = MpecKind::svf;
  common_header(prob, inst);
  const int d = prob.d, l = prob.l, m = prob.m();
  set_block(inst.layout, Block::x, 0, d);
  set_block(inst.layout, Block::y, d, l);
  set_block(inst.layout, Block::u, d + l, l);
  set_block(inst.layout, Block::s, d + 2 * l, m);
  inst.n = d + 2 * l + m;

  stationarity(prob, Block::u, inst);

  add_row(inst, prob.f - substitute_block(prob.f, Block::y, Block::u), RowRole::dominance);
  for (const Expr& gi : prob.g) add_row(inst, gi, RowRole::lower_at_y);
  for (int i = 0; i < m; ++i) {
    inst.comp_pairs.push_back({i, static_cast<int>(inst.inequalities.size())});
    add_row(inst, inst.lower_g[i], RowRole::lower_at_u);
  }
  for (const Expr& Gj : prob.G) add_row(inst, Gj, RowRole::upper);
  for (int i = 0; i < m; ++i) add_row(inst, -Expr::variable(Block::s, i), RowRole::s_nonneg);
  return inst;
}

MpecInstance build_kp(const BilevelProblem& prob) {
  MpecInstance inst;
  inst.kind = MpecKind::kp;
  common_header(prob, inst);
  const int d = prob.d, l = prob.l, m = prob.m();
  set_block(inst.layout, Block::x, 0, d);
  set_block(inst.layout, Block::y, d, l);
  set_block(inst.layout, Block::s, d + l, m);
  inst.n = d + l + m;

  stationarity(prob, Block::y, inst);

  for (int i = 0; i < m; ++i) {
    inst.comp_pairs.push_back({i, static_cast<int>(inst.inequalities.size())});
    add_row(inst, prob.g[i], RowRole::lower_at_y);
  }
  for (const Expr& Gj : prob.G) add_row(inst, Gj, RowRole::upper);
  for (int i = 0; i < m; ++i) add_row(inst, -Expr::variable(Block::s, i), RowRole::s_nonneg);
  return inst;
}

double ResidualBreakdown::max() const {
  return std::max({equality_inf_norm, inequality_violation_inf_norm, complementarity_inf_norm,
                   dominance_violation});
}

ResidualBreakdown mpec_residual(const MpecInstance& inst, std::span<const double> w) {
  if (static_cast<int>(w.size()) != inst.n)
    throw std::invalid_argument("mpec_residual: point has wrong dimension");
  Point pt = inst.split(w);
  ResidualBreakdown r;
  for (const Expr& e : inst.equalities)
    r.equality_inf_norm = std::max(r.equality_inf_norm, std::fabs(evaluate(e, pt)));
  std::vector<double> vals(inst.inequalities.size());
  for (std::size_t k = 0; k < vals.size(); ++k) {
    vals[k] = evaluate(inst.inequalities[k], pt);
    double viol = std::max(0.0, vals[k]);
    if (inst.roles[k] == RowRole::dominance)
      r.dominance_violation = std::max(r.dominance_violation, viol);
    else
      r.inequality_violation_inf_norm = std::max(r.inequality_violation_inf_norm, viol);
  }
  for (const CompPair& cp : inst.comp_pairs)
    r.complementarity_inf_norm =
        std::max(r.complementarity_inf_norm, std::fabs(pt.s[cp.s_index] * vals[cp.row]));
  return r;
}

std::string to_json(const MpecInstance& inst, int indent) {
  using nlohmann::json;
  static const char* kRole[] = {"dominance", "lower_at_y", "lower_at_u", "upper", "s_nonneg"};
  json j;
  j["kind"] = kind_name(inst.kind);
  j["n"] = inst.n;
  json blocks = json::object();
  for (Block b : {Block::x, Block::y, Block::u, Block::s}) {
    if (!inst.layout.has(b)) continue;
    int k = static_cast<int>(b);
    blocks[std::string(1, block_name(b))] = {{"offset", inst.layout.offset[k]},
                                             {"size", inst.layout.size[k]}};
  }
  j["blocks"] = blocks;
  j["objective"] = to_string(inst.objective);
  j["equalities"] = json::array();
  for (const Expr& e : inst.equalities) j["equalities"].push_back(to_string(e));
  j["inequalities"] = json::array();
  for (std::size_t k = 0; k < inst.inequalities.size(); ++k)
    j["inequalities"].push_back(
        {{"role", kRole[static_cast<int>(inst.roles[k])]}, {"expr", to_string(inst.inequalities[k])}});
  j["comp_pairs"] = json::array();
  for (const CompPair& cp : inst.comp_pairs) j["comp_pairs"].push_back({cp.s_index, cp.row});
  return j.dump(indent);
}

}  // namespace svf
