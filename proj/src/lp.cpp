#include <cmath>
#include <vector>

#include "svf/lp.hpp"

namespace svf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

LinearProgram::LinearProgram(int n)
    : c(VectorXd::Zero(n)),
      A_eq(0, n),
      b_eq(0),
      A_ub(0, n),
      b_ub(0),
      lo(VectorXd::Zero(n)),
      hi(VectorXd::Constant(n, kInf)) {}

void LinearProgram::add_eq(const Eigen::RowVectorXd& row, double rhs) {
  A_eq.conservativeResize(A_eq.rows() + 1, num_vars());
  A_eq.row(A_eq.rows() - 1) = row;
  b_eq.conservativeResize(b_eq.size() + 1);
  b_eq[b_eq.size() - 1] = rhs;
}

void LinearProgram::add_ub(const Eigen::RowVectorXd& row, double rhs) {
  A_ub.conservativeResize(A_ub.rows() + 1, num_vars());
  A_ub.row(A_ub.rows() - 1) = row;
  b_ub.conservativeResize(b_ub.size() + 1);
  b_ub[b_ub.size() - 1] = rhs;
}

const char* lp_status_name(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::iteration_limit: return "iteration-limit";
  }
  return "?";
}

namespace {

// Tableau for  min c'x, A x = b, x >= 0  with b >= 0 and a known feasible basis.
class Tableau {
 public:
  Tableau(MatrixXd A, VectorXd b, std::vector<int> basis)
      : T_(A.rows() + 1, A.cols() + 1), m_(static_cast<int>(A.rows())),
        n_(static_cast<int>(A.cols())), basis_(std::move(basis)) {
    T_.topLeftCorner(m_, n_) = A;
    T_.topRightCorner(m_, 1) = b;
    T_.row(m_).setZero();
  }

  void set_objective(const VectorXd& c) {
    T_.row(m_).setZero();
    T_.row(m_).head(n_) = c.transpose();
    for (int i = 0; i < m_; ++i) {
      const double cb = T_(m_, basis_[i]);
      if (cb != 0.0) T_.row(m_) -= cb * T_.row(i);
    }
  }

  // Bland's rule; `allowed` marks columns that may enter.
  // With `bounded` set the objective is known to be bounded below, so a column
  // without a pivot row is numerical noise and is dropped instead.
  LpStatus run(std::vector<bool> allowed, int& pivots, bool bounded) {
    const double tol = 1e-10;
    for (int iter = 0; iter < 50000; ++iter) {
      int enter = -1;
      for (int j = 0; j < n_; ++j) {
        if (allowed[j] && T_(m_, j) < -tol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return LpStatus::optimal;
      int leave = -1;
      double best = kInf;
      const double piv_tol = 1e-9 * std::max(1.0, T_.col(enter).head(m_).cwiseAbs().maxCoeff());
      for (int i = 0; i < m_; ++i) {
        const double a = T_(i, enter);
        if (a > piv_tol) {
          const double ratio = T_(i, n_) / a;
          if (ratio < best - 1e-14 ||
              (std::fabs(ratio - best) <= 1e-14 && leave >= 0 && basis_[i] < basis_[leave])) {
            best = ratio;
            leave = i;
          }
        }
      }
      if (leave < 0) {
        if (!bounded) return LpStatus::unbounded;
        allowed[enter] = false;
        continue;
      }
      pivot(leave, enter);
      ++pivots;
    }
    return LpStatus::iteration_limit;
  }

  void pivot(int row, int col) {
    T_.row(row) /= T_(row, col);
    for (int i = 0; i <= m_; ++i) {
      if (i == row) continue;
      const double f = T_(i, col);
      if (f != 0.0) T_.row(i) -= f * T_.row(row);
    }
    basis_[row] = col;
  }

  double objective() const { return -T_(m_, n_); }
  VectorXd solution() const {
    VectorXd x = VectorXd::Zero(n_);
    for (int i = 0; i < m_; ++i) x[basis_[i]] = T_(i, n_);
    return x;
  }
  int rows() const { return m_; }
  int basis(int i) const { return basis_[i]; }
  double at(int i, int j) const { return T_(i, j); }

 private:
  MatrixXd T_;
  int m_, n_;
  std::vector<int> basis_;
};

}  // namespace

LpResult solve_lp(const LinearProgram& lp) {
  const int n = lp.num_vars();
  // Column map from original variables to nonnegative standard-form columns:
  // x_j = lo_j + p  (finite lo),  x_j = hi_j - p  (only hi finite),  x_j = p - q  (free).
  struct Col {
    int plus = -1, minus = -1;
    double shift = 0.0;
    double sign = 1.0;
  };
  std::vector<Col> map(n);
  int ncols = 0;
  std::vector<std::pair<int, double>> upper_rows;  // (column, bound) for boxed variables
  for (int j = 0; j < n; ++j) {
    const double lo = lp.lo[j], hi = lp.hi[j];
    if (std::isfinite(lo)) {
      map[j] = {ncols++, -1, lo, 1.0};
      if (std::isfinite(hi)) upper_rows.push_back({map[j].plus, hi - lo});
    } else if (std::isfinite(hi)) {
      map[j] = {ncols++, -1, hi, -1.0};
    } else {
      map[j].plus = ncols++;
      map[j].minus = ncols++;
    }
  }
  const int n_ub = static_cast<int>(lp.A_ub.rows()) + static_cast<int>(upper_rows.size());
  const int n_eq = static_cast<int>(lp.A_eq.rows());
  const int rows = n_eq + n_ub;
  const int n_struct = ncols + n_ub;  // structural + slack columns

  MatrixXd A = MatrixXd::Zero(rows, n_struct);
  VectorXd b = VectorXd::Zero(rows);
  VectorXd c = VectorXd::Zero(n_struct);
  auto place = [&](int row, const Eigen::RowVectorXd& coeffs, double rhs) {
    double r = rhs;
    for (int j = 0; j < n; ++j) {
      const double a = coeffs[j];
      if (a == 0.0) continue;
      const Col& col = map[j];
      if (col.minus >= 0) {
        A(row, col.plus) += a;
        A(row, col.minus) -= a;
      } else {
        A(row, col.plus) += a * col.sign;
        r -= a * col.shift;
      }
    }
    b[row] = r;
  };
  for (int i = 0; i < n_eq; ++i) place(i, lp.A_eq.row(i), lp.b_eq[i]);
  for (int i = 0; i < lp.A_ub.rows(); ++i) {
    place(n_eq + i, lp.A_ub.row(i), lp.b_ub[i]);
    A(n_eq + i, ncols + i) = 1.0;
  }
  for (std::size_t k = 0; k < upper_rows.size(); ++k) {
    const int row = n_eq + static_cast<int>(lp.A_ub.rows()) + static_cast<int>(k);
    A(row, upper_rows[k].first) = 1.0;
    b[row] = upper_rows[k].second;
    A(row, ncols + static_cast<int>(lp.A_ub.rows()) + static_cast<int>(k)) = 1.0;
  }
  for (int j = 0; j < n; ++j) {
    const Col& col = map[j];
    if (col.minus >= 0) {
      c[col.plus] += lp.c[j];
      c[col.minus] -= lp.c[j];
    } else {
      c[col.plus] += lp.c[j] * col.sign;
    }
  }
  for (int i = 0; i < rows; ++i) {
    if (b[i] < 0.0) {
      A.row(i) *= -1.0;
      b[i] = -b[i];
    }
  }

  // Phase one: one artificial per row.
  const int total = n_struct + rows;
  MatrixXd A1(rows, total);
  A1 << A, MatrixXd::Identity(rows, rows);
  std::vector<int> basis(rows);
  for (int i = 0; i < rows; ++i) basis[i] = n_struct + i;
  Tableau tab(A1, b, basis);
  VectorXd c1 = VectorXd::Zero(total);
  c1.tail(rows).setOnes();
  tab.set_objective(c1);
  LpResult res;
  std::vector<bool> allowed(total, true);
  LpStatus st = tab.run(allowed, res.pivots, true);
  const double scale = std::max(1.0, b.lpNorm<Eigen::Infinity>());
  if (st != LpStatus::optimal || tab.objective() > 1e-9 * scale) {
    res.status = st == LpStatus::iteration_limit ? st : LpStatus::infeasible;
    return res;
  }
  // Drive remaining artificials out of the basis where possible.
  for (int i = 0; i < tab.rows(); ++i) {
    if (tab.basis(i) < n_struct) continue;
    for (int j = 0; j < n_struct; ++j) {
      if (std::fabs(tab.at(i, j)) > 1e-9) {
        tab.pivot(i, j);
        ++res.pivots;
        break;
      }
    }
  }
  for (int j = n_struct; j < total; ++j) allowed[j] = false;
  VectorXd c2 = VectorXd::Zero(total);
  c2.head(n_struct) = c;
  tab.set_objective(c2);
  st = tab.run(allowed, res.pivots, false);
  if (st != LpStatus::optimal) {
    res.status = st;
    return res;
  }
  VectorXd z = tab.solution();
  res.x.resize(n);
  for (int j = 0; j < n; ++j) {
    const Col& col = map[j];
    if (col.minus >= 0)
      res.x[j] = z[col.plus] - z[col.minus];
    else
      res.x[j] = col.shift + col.sign * z[col.plus];
  }
  res.objective = lp.c.dot(res.x);
  res.status = LpStatus::optimal;
  return res;
}

ChebyshevResult min_inf_norm(const MatrixXd& M, const VectorXd& q,
                             const std::vector<bool>& nonneg) {
  const int rows = static_cast<int>(M.rows()), k = static_cast<int>(M.cols());
  // Column equilibration; the multipliers are rescaled afterwards.
  VectorXd colscale = VectorXd::Ones(k);
  for (int j = 0; j < k; ++j) {
    const double mx = M.col(j).cwiseAbs().maxCoeff();
    if (mx > 0.0) colscale[j] = 1.0 / mx;
  }
  LinearProgram lp(k + 1);
  lp.c[k] = 1.0;
  for (int j = 0; j < k; ++j)
    if (!nonneg[j]) lp.lo[j] = -kInf;
  for (int i = 0; i < rows; ++i) {
    Eigen::RowVectorXd row(k + 1);
    Eigen::RowVectorXd scaled = M.row(i).cwiseProduct(colscale.transpose());
    row << scaled, -1.0;
    lp.add_ub(row, q[i]);
    row << -scaled, -1.0;
    lp.add_ub(row, -q[i]);
  }
  ChebyshevResult out;
  LpResult r = solve_lp(lp);
  if (r.status != LpStatus::optimal) return out;
  out.ok = true;
  out.v = r.x.head(k).cwiseProduct(colscale);
  out.residual = rows > 0 ? (M * out.v - q).lpNorm<Eigen::Infinity>() : 0.0;
  return out;
}

}  // namespace svf
