#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

#include "invpath/error.hpp"
#include "invpath/linalg.hpp"

namespace invpath {

// Symmetric matrix-valued affine function A0 + sum_i z_i * coeff[i]. A
// size-zero coefficient stands for a variable the block does not touch.
struct AffineBlock {
  MatrixXd A0;
  std::vector<MatrixXd> coeff;

  int size() const { return static_cast<int>(A0.rows()); }

  MatrixXd eval(const VectorXd& z) const {
    MatrixXd G = A0;
    for (size_t i = 0; i < coeff.size(); ++i)
      if (coeff[i].size() > 0) G += z(static_cast<int>(i)) * coeff[i];
    return G;
  }
};

// maximize logdet objective(z) subject to blocks[b](z) >= 0 (and the
// objective block positive definite). Concave; solved by a barrier
// path-following method with exact Newton steps.
struct MaxDetProblem {
  int num_vars = 0;
  AffineBlock objective;
  std::vector<AffineBlock> blocks;
};

struct MaxDetOptions {
  double gap_target = 1e-9;  // suboptimality bound in logdet units
  double t0 = 1.0;
  double mu = 10.0;
  int max_newton_per_stage = 200;
};

struct MaxDetResult {
  VectorXd z;
  double logdet = std::numeric_limits<double>::quiet_NaN();
  double gap = std::numeric_limits<double>::infinity();
  int newton_iters = 0;
  bool converged = false;
};

namespace detail {

// logdet of a PD matrix through its Cholesky factor; NaN when not PD.
inline double logdet_pd(const MatrixXd& G, Eigen::LLT<MatrixXd>& llt) {
  llt.compute(G);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::quiet_NaN();
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

class BarrierObjective {
 public:
  explicit BarrierObjective(const MaxDetProblem& prob) : prob_(prob) {}

  // f_t(z) = -logdet D(z) - (1/t) sum_b logdet G_b(z); NaN outside the
  // domain. The 1/t normalization keeps |f_t| at logdet scale for every t, so
  // the line search can still resolve small decrements late on the path; the
  // Newton step is unchanged by the uniform rescaling.
  double value(const VectorXd& z, double t) const {
    Eigen::LLT<MatrixXd> llt;
    double f = -logdet_pd(prob_.objective.eval(z), llt);
    if (std::isnan(f)) return f;
    for (const auto& blk : prob_.blocks) {
      const double ld = logdet_pd(blk.eval(z), llt);
      if (std::isnan(ld)) return ld;
      f -= ld / t;
    }
    return f;
  }

  // Exact gradient and Hessian of f_t. Requires z strictly feasible.
  void derivatives(const VectorXd& z, double t, VectorXd& g, MatrixXd& H) const {
    const int p = prob_.num_vars;
    g = VectorXd::Zero(p);
    H = MatrixXd::Zero(p, p);
    auto accumulate = [&](const AffineBlock& blk, double weight) {
      const MatrixXd G = blk.eval(z);
      Eigen::LLT<MatrixXd> llt(G);
      require(llt.info() == Eigen::Success, ErrorCode::SolverFailure,
              "barrier evaluated at an infeasible point");
      const MatrixXd Ginv = llt.solve(MatrixXd::Identity(blk.size(), blk.size()));
      std::vector<MatrixXd> M(static_cast<size_t>(p));
      for (int i = 0; i < p; ++i) {
        const MatrixXd& Ci = blk.coeff[static_cast<size_t>(i)];
        if (Ci.size() == 0) continue;
        M[static_cast<size_t>(i)] = Ginv * Ci;
        g(i) -= weight * M[static_cast<size_t>(i)].trace();
      }
      for (int i = 0; i < p; ++i) {
        if (M[static_cast<size_t>(i)].size() == 0) continue;
        for (int j = i; j < p; ++j) {
          if (M[static_cast<size_t>(j)].size() == 0) continue;
          const double hij =
              weight *
              M[static_cast<size_t>(i)].cwiseProduct(M[static_cast<size_t>(j)].transpose()).sum();
          H(i, j) += hij;
          if (j != i) H(j, i) += hij;
        }
      }
    };
    accumulate(prob_.objective, 1.0);
    for (const auto& blk : prob_.blocks) accumulate(blk, 1.0 / t);
  }

 private:
  const MaxDetProblem& prob_;
};

}  // namespace detail

// Symmetric matrices enter the solver through their upper triangle, row by
// row: (0,0), (0,1), ..., (0,n-1), (1,1), ... Off-diagonal basis elements
// carry both mirrored entries.
inline int symmetric_dim(int n) { return n * (n + 1) / 2; }

inline std::vector<MatrixXd> symmetric_basis(int n) {
  std::vector<MatrixXd> basis;
  basis.reserve(static_cast<size_t>(symmetric_dim(n)));
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      MatrixXd E = MatrixXd::Zero(n, n);
      E(i, j) = 1.0;
      E(j, i) = 1.0;
      basis.push_back(E);
    }
  return basis;
}

inline VectorXd vec_symmetric(const MatrixXd& S) {
  const int n = static_cast<int>(S.rows());
  VectorXd z(symmetric_dim(n));
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) z(k++) = S(i, j);
  return z;
}

inline MatrixXd unvec_symmetric(const VectorXd& z, int n, int offset = 0) {
  MatrixXd S(n, n);
  int k = offset;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      S(i, j) = z(k);
      S(j, i) = z(k);
      ++k;
    }
  return S;
}

// Barrier parameter: total size of the constraint blocks.
inline double maxdet_nu(const MaxDetProblem& prob) {
  double nu = 0.0;
  for (const auto& blk : prob.blocks) nu += blk.size();
  return nu;
}

inline MaxDetResult solve_maxdet(const MaxDetProblem& prob, const VectorXd& z0,
                                 const MaxDetOptions& opt = {}) {
  require(prob.num_vars == z0.size(), ErrorCode::DimensionError, "start dimension mismatch");
  require(prob.objective.size() > 0, ErrorCode::DimensionError, "objective block missing");
  for (const auto& blk : prob.blocks)
    require(static_cast<int>(blk.coeff.size()) == prob.num_vars, ErrorCode::DimensionError,
            "block coefficient count mismatch");
  require(static_cast<int>(prob.objective.coeff.size()) == prob.num_vars,
          ErrorCode::DimensionError, "objective coefficient count mismatch");

  detail::BarrierObjective barrier(prob);
  require(!std::isnan(barrier.value(z0, 1.0)), ErrorCode::SolverFailure,
          "start point is not strictly feasible");

  const double nu = maxdet_nu(prob);
  MaxDetResult res;
  res.z = z0;
  double t = opt.t0;
  bool stalled = false;
  for (;;) {
    // Center at the current t. A line-search stall with a tiny remaining
    // decrement is the numerical floor, not a failure.
    double f = barrier.value(res.z, t);
    double decrement = std::numeric_limits<double>::infinity();
    for (int it = 0; it < opt.max_newton_per_stage; ++it) {
      VectorXd g;
      MatrixXd H;
      barrier.derivatives(res.z, t, g, H);
      VectorXd dz;
      double reg = 0.0;
      for (;;) {
        Eigen::LDLT<MatrixXd> ldlt(H + reg * MatrixXd::Identity(prob.num_vars, prob.num_vars));
        dz = ldlt.solve(-g);
        // Accept any non-ascent direction; a ~zero gradient solves to ~zero
        // decrement and ends the centering below.
        if (ldlt.info() == Eigen::Success && g.dot(dz) <= 1e-12 * (1.0 + std::abs(f))) break;
        reg = reg == 0.0 ? 1e-10 * std::max(1.0, H.trace()) : 10.0 * reg;
        if (reg > 1e12 * std::max(1.0, H.trace()))
          fail(ErrorCode::SolverFailure, "Newton system is numerically singular");
      }
      decrement = -g.dot(dz);
      ++res.newton_iters;
      if (decrement <= 1e-10) break;
      double alpha = 1.0;
      double f_new = std::numeric_limits<double>::quiet_NaN();
      while (alpha > 1e-14) {
        f_new = barrier.value(res.z + alpha * dz, t);
        if (!std::isnan(f_new) && f_new <= f - 0.01 * alpha * decrement) break;
        alpha *= 0.5;
      }
      if (alpha <= 1e-14) break;
      res.z += alpha * dz;
      f = f_new;
    }
    stalled = decrement > 1e-6;
    res.gap = nu / t;
    if (stalled || res.gap <= opt.gap_target) break;
    t *= opt.mu;
  }
  Eigen::LLT<MatrixXd> llt;
  res.logdet = detail::logdet_pd(prob.objective.eval(res.z), llt);
  res.converged = !stalled && res.gap <= opt.gap_target && !std::isnan(res.logdet);
  return res;
}

}  // namespace invpath
