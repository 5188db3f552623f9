#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "invpath/error.hpp"
#include "invpath/linalg.hpp"

namespace invpath {

// Closed-loop eigenvalues must clear the unit circle by this much.
inline constexpr double kSchurTol = 1e-9;

struct ContinuousOrigin {
  MatrixXd A_c;
  MatrixXd B_c;
  double sample_period = 0.0;  // seconds
};

// x(t+1) = A x(t) + B u(t), y(t) = C x(t).
struct LTISystem {
  MatrixXd A;
  MatrixXd B;
  MatrixXd C;
  std::optional<ContinuousOrigin> origin;

  int nx() const { return static_cast<int>(A.rows()); }
  int nu() const { return static_cast<int>(B.cols()); }
  int ny() const { return static_cast<int>(C.rows()); }

  MatrixXd controllability_matrix() const {
    MatrixXd ctrb(nx(), nx() * nu());
    MatrixXd AkB = B;
    for (int k = 0; k < nx(); ++k) {
      ctrb.middleCols(k * nu(), nu()) = AkB;
      AkB = A * AkB;
    }
    return ctrb;
  }

  void validate() const {
    require(A.rows() == A.cols(), ErrorCode::DimensionError, "A must be square");
    require(B.rows() == A.rows(), ErrorCode::DimensionError, "B row count");
    require(C.cols() == A.rows(), ErrorCode::DimensionError, "C column count");
    require(numeric_rank(controllability_matrix()) == nx(), ErrorCode::NotControllable,
            "(A, B) is not controllable");
    require(numeric_rank(C) == ny(), ErrorCode::DimensionError, "C must have full row rank");
  }
};

struct Equilibrium {
  VectorXd xbar;
  VectorXd ubar;
  VectorXd ybar;
  bool unique = true;
};

// Affine solution set of the equilibrium equations for one output: any
// (xbar, ubar) = base + basis * theta satisfies them. Kept as a family so a
// later program can pick the member that maximizes invariant-set size.
struct EquilibriumFamily {
  Equilibrium base;     // minimum-norm particular solution, unique = false
  MatrixXd x_basis;     // n_x x dof
  MatrixXd u_basis;     // n_u x dof
  int dof = 0;
};

using EquilibriumResult = std::variant<Equilibrium, EquilibriumFamily>;

// For callers that assume away input redundancy (the set-design programs do).
inline const Equilibrium& require_unique(const EquilibriumResult& r) {
  require(std::holds_alternative<Equilibrium>(r), ErrorCode::NonUniqueEquilibrium,
          "equilibrium for this output is not unique");
  return std::get<Equilibrium>(r);
}

struct CostModel {
  MatrixXd Q;
  MatrixXd R;

  void validate() const {
    require(Q.rows() == Q.cols(), ErrorCode::DimensionError, "Q must be square");
    require(R.rows() == R.cols(), ErrorCode::DimensionError, "R must be square");
    require(is_positive_semidefinite(Q), ErrorCode::NotPositiveDefinite, "Q must be PSD");
    require(is_positive_definite(R), ErrorCode::NotPositiveDefinite, "R must be PD");
  }
};

// Zero-order hold: A = exp(A_c T), B = (integral of exp(A_c s) ds) B_c, both
// read off one exponential of the augmented matrix [[A_c, B_c], [0, 0]] T.
inline std::pair<MatrixXd, MatrixXd> zoh_discretize(const MatrixXd& A_c, const MatrixXd& B_c,
                                                    double T) {
  require(T > 0.0, ErrorCode::DimensionError, "sample period must be positive");
  require(A_c.rows() == A_c.cols() && B_c.rows() == A_c.rows(), ErrorCode::DimensionError,
          "continuous matrices shape mismatch");
  const int n = static_cast<int>(A_c.rows());
  const int m = static_cast<int>(B_c.cols());
  MatrixXd aug = MatrixXd::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = A_c * T;
  aug.topRightCorner(n, m) = B_c * T;
  const MatrixXd E = aug.exp();
  return {E.topLeftCorner(n, n), E.topRightCorner(n, m)};
}

// Solve [[A - I, B], [C, 0]] [xbar; ubar] = [0; ybar]. Unique solutions come
// back as a single Equilibrium; extra input freedom comes back as an affine
// family with an orthonormal nullspace basis.
inline EquilibriumResult equilibrium_for_output(const LTISystem& sys, const VectorXd& ybar) {
  require(ybar.size() == sys.ny(), ErrorCode::DimensionError, "output dimension mismatch");
  const int nx = sys.nx(), nu = sys.nu(), ny = sys.ny();
  MatrixXd M = MatrixXd::Zero(nx + ny, nx + nu);
  M.topLeftCorner(nx, nx) = sys.A - MatrixXd::Identity(nx, nx);
  M.topRightCorner(nx, nu) = sys.B;
  M.bottomLeftCorner(ny, nx) = sys.C;
  VectorXd rhs = VectorXd::Zero(nx + ny);
  rhs.tail(ny) = ybar;

  Eigen::JacobiSVD<MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  svd.setThreshold(1e-8);
  const int rank = smax > 0.0 ? static_cast<int>(svd.rank()) : 0;
  const VectorXd z = svd.solve(rhs);  // minimum-norm least squares
  const double residual = (M * z - rhs).norm();
  require(residual <= 1e-9 * (1.0 + ybar.norm()), ErrorCode::NoEquilibrium,
          "no equilibrium produces the requested output");

  Equilibrium eq;
  eq.xbar = z.head(nx);
  eq.ubar = z.tail(nu);
  eq.ybar = sys.C * eq.xbar;
  if (rank == nx + nu) {
    eq.unique = true;
    return eq;
  }
  eq.unique = false;
  EquilibriumFamily fam;
  fam.dof = nx + nu - rank;
  const MatrixXd null_basis = svd.matrixV().rightCols(fam.dof);
  fam.base = eq;
  fam.x_basis = null_basis.topRows(nx);
  fam.u_basis = null_basis.bottomRows(nu);
  return fam;
}

inline bool is_schur(const MatrixXd& A_cl) {
  require(A_cl.rows() == A_cl.cols(), ErrorCode::DimensionError, "matrix must be square");
  return spectral_radius(A_cl) < 1.0 - kSchurTol;
}

inline double dare_residual(const LTISystem& sys, const CostModel& cost, const MatrixXd& P) {
  const MatrixXd BtPA = sys.B.transpose() * P * sys.A;
  const MatrixXd G = cost.R + sys.B.transpose() * P * sys.B;
  const MatrixXd res = sys.A.transpose() * P * sys.A - P -
                       BtPA.transpose() * G.llt().solve(BtPA) + cost.Q;
  return res.norm() / std::max(1.0, P.norm());
}

struct DareSolution {
  MatrixXd P;
  MatrixXd F;  // u = F x stabilizes and is LQ-optimal
};

// Structure-preserving doubling for the DARE
//   P = A' P A - A' P B (R + B' P B)^{-1} B' P A + Q.
inline DareSolution solve_dare(const LTISystem& sys, const CostModel& cost) {
  cost.validate();
  require(cost.Q.rows() == sys.nx() && cost.R.rows() == sys.nu(), ErrorCode::DimensionError,
          "cost dimensions mismatch");
  const int n = sys.nx();
  const MatrixXd I = MatrixXd::Identity(n, n);
  MatrixXd Ak = sys.A;
  MatrixXd Gk = sys.B * cost.R.llt().solve(sys.B.transpose());
  MatrixXd Hk = cost.Q;
  bool converged = false;
  for (int it = 0; it < 100; ++it) {
    const Eigen::PartialPivLU<MatrixXd> lu(I + Gk * Hk);
    const MatrixXd V1 = lu.solve(Ak);           // (I + G H)^{-1} A
    const MatrixXd V2 = lu.solve(Gk);           // (I + G H)^{-1} G
    const MatrixXd H_next = Hk + Ak.transpose() * Hk * V1;
    const double step = (H_next - Hk).norm();
    Gk = symmetrized(Gk + Ak * V2 * Ak.transpose());
    Hk = symmetrized(H_next);
    Ak = Ak * V1;
    if (step <= 1e-14 * std::max(1.0, Hk.norm())) {
      converged = true;
      break;
    }
  }
  const double res = dare_residual(sys, cost, Hk);
  require(converged && res <= 1e-8, ErrorCode::SolverFailure,
          "Riccati iteration residual " + std::to_string(res));
  DareSolution sol;
  sol.P = Hk;
  const MatrixXd G = cost.R + sys.B.transpose() * Hk * sys.B;
  sol.F = -G.llt().solve(sys.B.transpose() * Hk * sys.A);
  require(is_positive_definite(sol.P, 0.0), ErrorCode::SolverFailure,
          "Riccati solution not positive definite");
  require(is_schur(sys.A + sys.B * sol.F), ErrorCode::NotStable,
          "Riccati gain does not stabilize");
  return sol;
}

// A_cl' S A_cl - S = -W by the Kronecker linearization
// (I - A_cl' (x) A_cl') vec(S) = vec(W). Fine for the state dimensions here.
inline MatrixXd solve_discrete_lyapunov(const MatrixXd& A_cl, const MatrixXd& W) {
  const int n = static_cast<int>(A_cl.rows());
  require(A_cl.cols() == n && W.rows() == n && W.cols() == n, ErrorCode::DimensionError,
          "Lyapunov operand shapes");
  require(is_schur(A_cl), ErrorCode::NotStable, "closed loop is not Schur");
  const MatrixXd At = A_cl.transpose();
  const MatrixXd lhs = MatrixXd::Identity(n * n, n * n) - kronecker(At, At);
  const VectorXd w = Eigen::Map<const VectorXd>(W.data(), n * n);
  const VectorXd s = Eigen::PartialPivLU<MatrixXd>(lhs).solve(w);
  MatrixXd S = symmetrized(Eigen::Map<const MatrixXd>(s.data(), n, n));
  const double res = (At * S * A_cl - S + W).norm() / std::max(1.0, S.norm());
  require(res <= 1e-9, ErrorCode::SolverFailure,
          "Lyapunov residual " + std::to_string(res));
  require(is_positive_semidefinite(S), ErrorCode::SolverFailure,
          "Lyapunov solution not PSD");
  return S;
}

struct Trajectory {
  std::vector<VectorXd> x;  // horizon + 1 states
  std::vector<VectorXd> u;  // horizon inputs
  std::vector<VectorXd> y;  // horizon + 1 outputs

  int steps() const { return static_cast<int>(u.size()); }
};

template <class Policy>
Trajectory simulate(const LTISystem& sys, const VectorXd& x0, Policy&& policy, int horizon) {
  require(horizon >= 0, ErrorCode::DimensionError, "horizon must be non-negative");
  require(x0.size() == sys.nx(), ErrorCode::DimensionError, "state dimension mismatch");
  Trajectory traj;
  traj.x.reserve(static_cast<size_t>(horizon) + 1);
  traj.u.reserve(static_cast<size_t>(horizon));
  traj.y.reserve(static_cast<size_t>(horizon) + 1);
  VectorXd x = x0;
  traj.x.push_back(x);
  traj.y.push_back(sys.C * x);
  for (int t = 0; t < horizon; ++t) {
    VectorXd u = policy(x);
    require(u.size() == sys.nu(), ErrorCode::DimensionError, "input dimension mismatch");
    x = sys.A * x + sys.B * u;
    traj.u.push_back(std::move(u));
    traj.x.push_back(x);
    traj.y.push_back(sys.C * x);
  }
  return traj;
}

}  // namespace invpath
