#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "invpath/error.hpp"

namespace invpath {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// minimize c^T x  subject to  A_ub x <= b_ub,  A_eq x = b_eq,  x free.
struct LpProblem {
  VectorXd c;
  MatrixXd A_ub;
  VectorXd b_ub;
  MatrixXd A_eq;
  VectorXd b_eq;
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  VectorXd x;
  double objective = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

// Dense tableau simplex with Bland's rule. Sized for the small programs this
// library generates (tens of rows and columns); not a general-purpose solver.
class SimplexTableau {
 public:
  SimplexTableau(MatrixXd A, VectorXd b) : A_(std::move(A)), b_(std::move(b)) {}

  MatrixXd A_;   // m x n
  VectorXd b_;   // m, kept >= 0
  VectorXd z_;   // n reduced costs
  double obj_ = 0.0;
  std::vector<int> basis_;

  static constexpr double kPivotTol = 1e-11;
  static constexpr double kCostTol = 1e-11;

  void pivot(int row, int col) {
    const double p = A_(row, col);
    A_.row(row) /= p;
    b_(row) /= p;
    for (int r = 0; r < A_.rows(); ++r) {
      if (r == row) continue;
      const double f = A_(r, col);
      if (f == 0.0) continue;
      A_.row(r) -= f * A_.row(row);
      b_(r) -= f * b_(row);
    }
    const double fz = z_(col);
    if (fz != 0.0) {
      z_ -= fz * A_.row(row).transpose();
      obj_ -= fz * b_(row);
    }
    basis_[static_cast<size_t>(row)] = col;
  }

  // Returns true on optimal, false on unbounded.
  bool iterate(const std::vector<bool>& allowed) {
    const int m = static_cast<int>(A_.rows());
    const int n = static_cast<int>(A_.cols());
    const long max_iters = 2000L + 50L * static_cast<long>(m + n);
    for (long it = 0; it < max_iters; ++it) {
      int enter = -1;
      for (int j = 0; j < n; ++j) {
        if (allowed[static_cast<size_t>(j)] && z_(j) < -kCostTol) {
          enter = j;  // Bland: lowest eligible index
          break;
        }
      }
      if (enter < 0) return true;
      int leave = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (int r = 0; r < m; ++r) {
        const double a = A_(r, enter);
        if (a > kPivotTol) {
          const double ratio = b_(r) / a;
          if (ratio < best_ratio - 1e-12 ||
              (ratio < best_ratio + 1e-12 &&
               (leave < 0 || basis_[static_cast<size_t>(r)] < basis_[static_cast<size_t>(leave)]))) {
            best_ratio = ratio;
            leave = r;
          }
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
    fail(ErrorCode::SolverFailure, "simplex iteration limit");
  }
};

}  // namespace detail

inline LpResult solve_lp(const LpProblem& prob) {
  const int n = static_cast<int>(prob.c.size());
  const int m_ub = static_cast<int>(prob.b_ub.size());
  const int m_eq = static_cast<int>(prob.b_eq.size());
  const int m = m_ub + m_eq;
  require(prob.A_ub.rows() == m_ub && (m_ub == 0 || prob.A_ub.cols() == n),
          ErrorCode::DimensionError, "A_ub shape");
  require(prob.A_eq.rows() == m_eq && (m_eq == 0 || prob.A_eq.cols() == n),
          ErrorCode::DimensionError, "A_eq shape");

  // Standard form: x = xp - xm with xp, xm >= 0, slack per <= row, then
  // phase-1 artificials. Rows are equilibrated to unit max coefficient.
  const int n_real = 2 * n + m_ub;
  MatrixXd A = MatrixXd::Zero(m, n_real + m);
  VectorXd b(m);
  for (int i = 0; i < m; ++i) {
    const bool ub = i < m_ub;
    const auto row = ub ? prob.A_ub.row(i) : prob.A_eq.row(i - m_ub);
    A.block(i, 0, 1, n) = row;
    A.block(i, n, 1, n) = -row;
    if (ub) A(i, 2 * n + i) = 1.0;
    b(i) = ub ? prob.b_ub(i) : prob.b_eq(i - m_ub);
    double scale = std::max(A.row(i).cwiseAbs().maxCoeff(), std::abs(b(i)));
    if (scale <= 0.0) scale = 1.0;
    A.row(i) /= scale;
    b(i) /= scale;
    if (b(i) < 0.0) {
      A.row(i) = -A.row(i);
      b(i) = -b(i);
    }
    A(i, n_real + i) = 1.0;  // artificial
  }

  detail::SimplexTableau tab(std::move(A), std::move(b));
  tab.basis_.resize(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) tab.basis_[static_cast<size_t>(i)] = n_real + i;

  // Phase 1: minimize the sum of artificials.
  tab.z_ = VectorXd::Zero(n_real + m);
  tab.obj_ = 0.0;
  for (int i = 0; i < m; ++i) {
    tab.z_ -= tab.A_.row(i).transpose();
    tab.obj_ -= tab.b_(i);
  }
  for (int j = n_real; j < n_real + m; ++j) tab.z_(j) = 0.0;
  std::vector<bool> allow_all(static_cast<size_t>(n_real + m), true);
  tab.iterate(allow_all);
  if (-tab.obj_ > 1e-7) return {LpStatus::Infeasible, VectorXd(), 0.0};

  // Drive any artificial still in the basis to a real column, or drop the
  // (redundant) row from consideration by leaving it fixed at level zero.
  for (int r = 0; r < m; ++r) {
    const int bv = tab.basis_[static_cast<size_t>(r)];
    if (bv < n_real) continue;
    for (int j = 0; j < n_real; ++j) {
      if (std::abs(tab.A_(r, j)) > 1e-8) {
        tab.pivot(r, j);
        break;
      }
    }
  }

  // Phase 2: original objective; artificial columns become forbidden.
  std::vector<bool> allow_real(static_cast<size_t>(n_real + m), true);
  for (int j = n_real; j < n_real + m; ++j) allow_real[static_cast<size_t>(j)] = false;
  tab.z_ = VectorXd::Zero(n_real + m);
  tab.z_.segment(0, n) = prob.c;
  tab.z_.segment(n, n) = -prob.c;
  tab.obj_ = 0.0;
  for (int r = 0; r < m; ++r) {
    const int bv = tab.basis_[static_cast<size_t>(r)];
    const double cb = tab.z_(bv);
    if (cb != 0.0) {
      tab.z_ -= cb * tab.A_.row(r).transpose();
      tab.obj_ -= cb * tab.b_(r);
    }
  }
  if (!tab.iterate(allow_real)) return {LpStatus::Unbounded, VectorXd(), 0.0};

  VectorXd xs = VectorXd::Zero(n_real + m);
  for (int r = 0; r < m; ++r) xs(tab.basis_[static_cast<size_t>(r)]) = tab.b_(r);
  LpResult res;
  res.status = LpStatus::Optimal;
  res.x = xs.segment(0, n) - xs.segment(n, n);
  res.objective = prob.c.dot(res.x);
  return res;
}

// Convenience wrapper: maximize c^T x under the same constraints.
inline LpResult maximize_lp(LpProblem prob) {
  prob.c = -prob.c;
  LpResult res = solve_lp(prob);
  if (res.status == LpStatus::Optimal) res.objective = -res.objective;
  return res;
}

}  // namespace invpath
