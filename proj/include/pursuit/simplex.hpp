#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <vector>

namespace pursuit {

struct LpResult {
  bool feasible = false;
  double value = 0.0;
  Eigen::VectorXd x;
};

// Dense two-phase primal simplex for  min c'x  s.t.  Ax = b, x >= 0.
// Bland's rule on both the entering and leaving choice, so it cannot cycle.
// Intended for desk-scale exact oracles (tens of rows/columns), not for
// serious optimization work.
inline LpResult solve_lp_equality(Eigen::MatrixXd A, Eigen::VectorXd b,
                                  const Eigen::VectorXd& c, double tol = 1e-9,
                                  int max_iter = 20000) {
  const int rows = static_cast<int>(A.rows());
  const int vars = static_cast<int>(A.cols());
  if (b.size() != rows || c.size() != vars)
    throw std::invalid_argument("solve_lp_equality: shape mismatch");

  for (int i = 0; i < rows; ++i)
    if (b(i) < 0) {
      A.row(i) = -A.row(i);
      b(i) = -b(i);
    }

  // Tableau: [A | I | b], artificial basis.  Row `rows` is the objective row.
  const int total = vars + rows;
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(rows + 1, total + 1);
  t.topLeftCorner(rows, vars) = A;
  t.block(0, vars, rows, rows).setIdentity();
  t.col(total).head(rows) = b;
  std::vector<int> basis(rows);
  for (int i = 0; i < rows; ++i) basis[i] = vars + i;

  auto pivot = [&](int pr, int pc) {
    t.row(pr) /= t(pr, pc);
    for (int i = 0; i <= rows; ++i) {
      if (i == pr) continue;
      const double f = t(i, pc);
      if (f != 0.0) t.row(i) -= f * t.row(pr);
    }
    basis[pr] = pc;
  };

  auto run = [&](int allowed_cols) {
    for (int it = 0; it < max_iter; ++it) {
      int enter = -1;
      for (int j = 0; j < allowed_cols; ++j)
        if (t(rows, j) < -tol) {
          enter = j;
          break;
        }
      if (enter < 0) return;
      int leave = -1;
      double best_ratio = 0.0;
      for (int i = 0; i < rows; ++i) {
        if (t(i, enter) > tol) {
          const double ratio = t(i, total) / t(i, enter);
          if (leave < 0 || ratio < best_ratio - 1e-15 ||
              (ratio < best_ratio + 1e-15 && basis[i] < basis[leave])) {
            leave = i;
            best_ratio = ratio;
          }
        }
      }
      if (leave < 0) throw std::runtime_error("solve_lp_equality: unbounded");
      pivot(leave, enter);
    }
    throw std::runtime_error("solve_lp_equality: iteration limit");
  };

  // Phase 1: minimize the sum of artificials.
  for (int i = 0; i < rows; ++i) t.row(rows) -= t.row(i);
  t.block(rows, vars, 1, rows).setZero();
  run(vars);
  if (-t(rows, total) > 1e-7) return {};  // infeasible

  // Drive leftover artificials out of the basis where possible.
  for (int i = 0; i < rows; ++i) {
    if (basis[i] < vars) continue;
    int col = -1;
    for (int j = 0; j < vars; ++j)
      if (std::abs(t(i, j)) > tol) {
        col = j;
        break;
      }
    if (col >= 0) pivot(i, col);
    // else: redundant row; the artificial stays basic at value zero.
  }

  // Phase 2 objective row.
  t.row(rows).setZero();
  t.row(rows).head(vars) = c.transpose();
  for (int i = 0; i < rows; ++i)
    if (basis[i] < vars) t.row(rows) -= c(basis[i]) * t.row(i);
  run(vars);

  LpResult out;
  out.feasible = true;
  out.x = Eigen::VectorXd::Zero(vars);
  for (int i = 0; i < rows; ++i)
    if (basis[i] < vars) out.x(basis[i]) = t(i, total);
  out.value = c.dot(out.x);
  return out;
}

}  // namespace pursuit
