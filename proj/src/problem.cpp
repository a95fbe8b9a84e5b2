#include "svf/problem.hpp"

namespace svf {

BlockLayout BilevelProblem::layout() const {
  BlockLayout lay;
  lay.offset[static_cast<int>(Block::x)] = 0;
  lay.size[static_cast<int>(Block::x)] = d;
  lay.offset[static_cast<int>(Block::y)] = d;
  lay.size[static_cast<int>(Block::y)] = l;
  return lay;
}

std::vector<double> BilevelProblem::start_x() const {
  return meta.x0.empty() ? std::vector<double>(d, 0.0) : meta.x0;
}

std::vector<double> BilevelProblem::start_y() const {
  return meta.y0.empty() ? std::vector<double>(l, 0.0) : meta.y0;
}

Box BilevelProblem::oracle_x_box() const {
  return meta.x_box ? *meta.x_box : Box::uniform(d, -10.0, 10.0);
}

Box BilevelProblem::oracle_y_box() const {
  return meta.y_box ? *meta.y_box : Box::uniform(l, -10.0, 10.0);
}

int block_dim(const BilevelProblem& p, Block b) {
  switch (b) {
    case Block::x: return p.d;
    case Block::y: return p.l;
    case Block::u: return p.l;
    case Block::s: return p.m();
  }
  return 0;
}

std::vector<Expr> gradient_block(const Expr& e, Block block, int dim) {
  std::vector<Expr> out;
  out.reserve(dim);
  for (int i = 0; i < dim; ++i) out.push_back(differentiate(e, {block, i}));
  return out;
}

std::vector<std::vector<Expr>> hessian_block(const Expr& e, Block row_block, int row_dim,
                                             Block col_block, int col_dim) {
  std::vector<std::vector<Expr>> h;
  h.reserve(row_dim);
  for (const Expr& gi : gradient_block(e, row_block, row_dim))
    h.push_back(gradient_block(gi, col_block, col_dim));
  return h;
}

}  // namespace svf
