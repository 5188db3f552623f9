#pragma once

#include <Eigen/Dense>

#include <optional>
#include <random>
#include <sstream>
#include <string>

#include "invpath/error.hpp"
#include "invpath/geometry.hpp"
#include "invpath/linalg.hpp"
#include "invpath/lti.hpp"
#include "invpath/maxdet.hpp"
#include "invpath/scaling.hpp"

namespace invpath {

// Samples whose equilibrium sits closer than this to a constraint face are
// rejected: the squared-slack corners of the row blocks degenerate there.
inline constexpr double kSlackReject = 1e-6;

// Acceptance threshold for independently verified constraint margins.
inline constexpr double kVerifyTol = -1e-7;

struct SynthesisResult {
  MatrixXd F;
  MatrixXd P;
  double log_det_Pinv = std::numeric_limits<double>::quiet_NaN();
  double gap = std::numeric_limits<double>::infinity();  // solver suboptimality bound
  int newton_iters = 0;
};

struct SynthesisOptions {
  // Stabilizing start for the gain-free program; identity-cost LQR when absent.
  std::optional<DareSolution> seed;
  MaxDetOptions solver;
  double slack_reject = kSlackReject;
};

// Solver-independent certificate for a designed controller and set level.
// Margins are relative; simulation runs only when sim_samples > 0.
struct VerifyReport {
  bool schur = false;
  double invariance_margin = -std::numeric_limits<double>::infinity();
  double worst_input_margin = std::numeric_limits<double>::infinity();
  double worst_output_margin = std::numeric_limits<double>::infinity();
  int simulated_states = 0;
  int simulation_violations = 0;

  double worst() const {
    double w = std::min(invariance_margin, std::min(worst_input_margin, worst_output_margin));
    if (!schur || simulation_violations > 0) w = -std::numeric_limits<double>::infinity();
    return w;
  }
  bool ok(double tol = kVerifyTol) const { return worst() >= tol; }
};

inline VerifyReport verify_synthesis(const LTISystem& sys, const MatrixXd& F, const MatrixXd& P,
                                     double rho, const Equilibrium& eq, const Polytope& Y_k,
                                     const Polytope& U, int sim_samples = 0,
                                     unsigned rng_seed = 1234u) {
  VerifyReport rep;
  const MatrixXd A_cl = sys.A + sys.B * F;
  rep.schur = is_schur(A_cl);

  Eigen::LLT<MatrixXd> llt(symmetrized(P));
  if (llt.info() != Eigen::Success) return rep;  // not PD: every margin stays at the floor
  const MatrixXd decrease = symmetrized(P - A_cl.transpose() * P * A_cl);
  rep.invariance_margin = min_eigenvalue(decrease) / std::max(1.0, P.cwiseAbs().maxCoeff());

  auto row_margin = [&](const Polytope& poly, const MatrixXd& map, const VectorXd& point,
                        double& worst) {
    for (int j = 0; j < poly.rows(); ++j) {
      const VectorXd v = (poly.H.row(j) * map).transpose();
      const double reach = rho * ellipsoid_support(P, v, llt);
      const double slack = poly.K(j) - poly.H.row(j).dot(point);
      worst = std::min(worst, (slack - reach) / std::max({1.0, std::abs(slack), reach}));
    }
  };
  row_margin(U, F, eq.ubar, rep.worst_input_margin);
  row_margin(Y_k, sys.C, eq.ybar, rep.worst_output_margin);

  if (sim_samples > 0) {
    const MatrixXd Phalf_inv = inverse_sqrt(symmetrized(P));
    // d'Pd evaluates to about eps*cond(P) relative accuracy at best, and once
    // x has collapsed onto xbar the computed level is cancellation noise near
    // (eps*|xbar|)^2*|P|, where ordering successive values is meaningless.
    // Containment widens with cond(P); monotonicity carries an absolute floor
    // twelve orders below the set level.
    const double eps = std::numeric_limits<double>::epsilon();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrized(P), Eigen::EigenvaluesOnly);
    const double cond_P =
        es.eigenvalues()(P.rows() - 1) / std::max(es.eigenvalues()(0), eps);
    const double level_tol = 1e-9 + 64.0 * eps * cond_P;
    const double level_floor = 1e-12 * rho * rho;
    std::mt19937 rng(rng_seed);
    std::normal_distribution<double> g(0.0, 1.0);
    rep.simulated_states = sim_samples;
    for (int s = 0; s < sim_samples; ++s) {
      VectorXd dir(sys.nx());
      for (int i = 0; i < sys.nx(); ++i) dir(i) = g(rng);
      dir /= dir.norm();
      VectorXd x = eq.xbar + rho * (Phalf_inv * dir);
      double v_prev = std::numeric_limits<double>::infinity();
      bool bad = false;
      for (int t = 0; t < 200 && !bad; ++t) {
        const VectorXd d = x - eq.xbar;
        const double v = d.dot(P * d);
        if (v > rho * rho * (1.0 + level_tol) || v > v_prev * (1.0 + level_tol) + level_floor)
          bad = true;
        v_prev = v;
        const VectorXd u = F * d + eq.ubar;
        if (!U.contains(u, 1e-9) || !Y_k.contains(sys.C * x, 1e-9)) bad = true;
        x = sys.A * x + sys.B * u;
      }
      if (bad) ++rep.simulation_violations;
    }
  }
  return rep;
}

namespace detail {

struct PreparedSynthesis {
  MaxDetProblem problem;
  VectorXd z0;
  MatrixXd L;       // recovered X = L Xt L'
  bool gain_free = false;
  int n = 0, m = 0;
};

inline void check_slacks(const Polytope& poly, const VectorXd& point, double slack_reject) {
  for (int j = 0; j < poly.rows(); ++j)
    require(poly.K(j) - poly.H.row(j).dot(point) >= slack_reject, ErrorCode::InfeasibleSample,
            "equilibrium too close to a constraint face");
}

// Strictly feasible start from a scaled contraction pair: the 0.99-shrunk
// largest scaled set satisfies every block with margin.
inline MatrixXd feasible_start(const LTISystem& sys, const MatrixXd& F0, const MatrixXd& P0,
                               const Equilibrium& eq, const Polytope& Y_k, const Polytope& U) {
  const double rho0 = max_scale_closed_form(sys, F0, P0, eq, Y_k, U);
  require(rho0 > 0.0, ErrorCode::InfeasibleSample, "no positive scale at this sample");
  const double c = 0.99 * rho0;
  Eigen::LLT<MatrixXd> llt(symmetrized(P0));
  const MatrixXd X0 = c * c * llt.solve(MatrixXd::Identity(P0.rows(), P0.cols()));
  return symmetrized(X0);
}

// Shared scaffolding: change variables X = L Xt L' with L = chol(X0), so the
// start is Xt = I and the row blocks carry unit corners.
inline MatrixXd chol_factor(const MatrixXd& X0) {
  Eigen::LLT<MatrixXd> llt(X0);
  require(llt.info() == Eigen::Success, ErrorCode::NotPositiveDefinite,
          "start matrix lost definiteness");
  return llt.matrixL();
}

// Gain-free program: variables are the upper triangle of Xt followed by the
// entries of Wt (row major), where X = L Xt L', F X = Wt L'.
inline PreparedSynthesis prepare_gain_free(const LTISystem& sys, const MatrixXd& F0,
                                           const MatrixXd& P0, const Equilibrium& eq,
                                           const Polytope& Y_k, const Polytope& U,
                                           double slack_reject) {
  check_slacks(U, eq.ubar, slack_reject);
  check_slacks(Y_k, eq.ybar, slack_reject);
  const int n = sys.nx(), m = sys.nu();
  PreparedSynthesis out;
  out.gain_free = true;
  out.n = n;
  out.m = m;

  const MatrixXd X0 = feasible_start(sys, F0, P0, eq, Y_k, U);
  out.L = chol_factor(X0);
  const MatrixXd At = out.L.triangularView<Eigen::Lower>().solve(sys.A * out.L);
  const MatrixXd Bt = out.L.triangularView<Eigen::Lower>().solve(sys.B);
  const MatrixXd Ct = sys.C * out.L;

  const int px = symmetric_dim(n);
  const int p = px + n * m;
  const auto xbasis = symmetric_basis(n);
  auto w_index = [&](int r, int c) { return px + r * n + c; };  // Wt(r, c), r < m

  out.problem.num_vars = p;
  out.problem.objective.A0 = MatrixXd::Zero(n, n);
  out.problem.objective.coeff.assign(static_cast<size_t>(p), MatrixXd());
  for (int v = 0; v < px; ++v)
    out.problem.objective.coeff[static_cast<size_t>(v)] = xbasis[static_cast<size_t>(v)];

  // Contraction block [[Xt, (At Xt + Bt Wt)'], [At Xt + Bt Wt, Xt]] >= delta.
  AffineBlock inv;
  inv.A0 = MatrixXd::Zero(2 * n, 2 * n);
  inv.coeff.assign(static_cast<size_t>(p), MatrixXd());
  for (int v = 0; v < px; ++v) {
    const MatrixXd& E = xbasis[static_cast<size_t>(v)];
    MatrixXd Cv = MatrixXd::Zero(2 * n, 2 * n);
    Cv.topLeftCorner(n, n) = E;
    Cv.bottomRightCorner(n, n) = E;
    const MatrixXd AE = At * E;
    Cv.bottomLeftCorner(n, n) += AE;
    Cv.topRightCorner(n, n) += AE.transpose();
    inv.coeff[static_cast<size_t>(v)] = Cv;
  }
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < n; ++c) {
      MatrixXd Cv = MatrixXd::Zero(2 * n, 2 * n);
      MatrixXd BW = MatrixXd::Zero(n, n);
      BW.col(c) = Bt.col(r);  // Bt * unit(r, c)
      Cv.bottomLeftCorner(n, n) = BW;
      Cv.topRightCorner(n, n) = BW.transpose();
      inv.coeff[static_cast<size_t>(w_index(r, c))] = Cv;
    }
  // Strictness margin relative to the start's trace scale (identity blocks).
  const double delta = 1e-9;
  inv.A0 -= delta * MatrixXd::Identity(2 * n, 2 * n);
  out.problem.blocks.push_back(std::move(inv));

  // Input rows: [[Xt, (Hu W)'/s], [Hu W/s, 1]] >= 0 with Hu W = Hu Wt L'.
  for (int j = 0; j < U.rows(); ++j) {
    const double s = U.K(j) - U.H.row(j).dot(eq.ubar);
    AffineBlock blk;
    blk.A0 = MatrixXd::Zero(n + 1, n + 1);
    blk.A0(n, n) = 1.0;
    blk.coeff.assign(static_cast<size_t>(p), MatrixXd());
    for (int v = 0; v < px; ++v) {
      MatrixXd Cv = MatrixXd::Zero(n + 1, n + 1);
      Cv.topLeftCorner(n, n) = xbasis[static_cast<size_t>(v)];
      blk.coeff[static_cast<size_t>(v)] = Cv;
    }
    for (int r = 0; r < m; ++r) {
      const double h = U.H(j, r);
      if (h == 0.0) continue;
      for (int c = 0; c < n; ++c) {
        MatrixXd Cv = MatrixXd::Zero(n + 1, n + 1);
        Cv(n, c) = h / s;
        Cv(c, n) = h / s;
        const int idx = w_index(r, c);
        if (blk.coeff[static_cast<size_t>(idx)].size() == 0)
          blk.coeff[static_cast<size_t>(idx)] = Cv;
        else
          blk.coeff[static_cast<size_t>(idx)] += Cv;
      }
    }
    out.problem.blocks.push_back(std::move(blk));
  }

  // Output rows: [[Xt, (c Xt)'/s], [c Xt/s, 1]] >= 0 with c = Hy C L.
  for (int j = 0; j < Y_k.rows(); ++j) {
    const double s = Y_k.K(j) - Y_k.H.row(j).dot(eq.ybar);
    const Eigen::RowVectorXd c_row = Y_k.H.row(j) * Ct / s;
    AffineBlock blk;
    blk.A0 = MatrixXd::Zero(n + 1, n + 1);
    blk.A0(n, n) = 1.0;
    blk.coeff.assign(static_cast<size_t>(p), MatrixXd());
    for (int v = 0; v < px; ++v) {
      const MatrixXd& E = xbasis[static_cast<size_t>(v)];
      MatrixXd Cv = MatrixXd::Zero(n + 1, n + 1);
      Cv.topLeftCorner(n, n) = E;
      const Eigen::RowVectorXd cE = c_row * E;
      Cv.block(n, 0, 1, n) = cE;
      Cv.block(0, n, n, 1) = cE.transpose();
      blk.coeff[static_cast<size_t>(v)] = Cv;
    }
    out.problem.blocks.push_back(std::move(blk));
  }

  out.z0 = VectorXd::Zero(p);
  out.z0.head(px) = vec_symmetric(MatrixXd::Identity(n, n));
  const MatrixXd Wt0 = F0 * out.L;
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < n; ++c) out.z0(w_index(r, c)) = Wt0(r, c);
  return out;
}

// Fixed-gain program: variables are the upper triangle of Xt alone; rows
// whose mapped normal vanishes (zero gain rows, for instance) are skipped.
inline PreparedSynthesis prepare_fixed_gain(const LTISystem& sys, const MatrixXd& F,
                                            const MatrixXd& P0, const Equilibrium& eq,
                                            const Polytope& Y_k, const Polytope& U,
                                            double slack_reject) {
  check_slacks(U, eq.ubar, slack_reject);
  check_slacks(Y_k, eq.ybar, slack_reject);
  const int n = sys.nx();
  PreparedSynthesis out;
  out.n = n;
  out.m = sys.nu();

  const MatrixXd X0 = feasible_start(sys, F, P0, eq, Y_k, U);
  out.L = chol_factor(X0);
  const MatrixXd A_cl = sys.A + sys.B * F;
  const MatrixXd Mt = out.L.triangularView<Eigen::Lower>().solve(A_cl * out.L);

  const int p = symmetric_dim(n);
  const auto xbasis = symmetric_basis(n);
  out.problem.num_vars = p;
  out.problem.objective.A0 = MatrixXd::Zero(n, n);
  out.problem.objective.coeff.assign(xbasis.begin(), xbasis.end());

  // Contraction: Xt - Mt Xt Mt' >= delta.
  AffineBlock inv;
  inv.A0 = -1e-9 * MatrixXd::Identity(n, n);
  inv.coeff.reserve(static_cast<size_t>(p));
  for (const auto& E : xbasis) inv.coeff.push_back(E - Mt * E * Mt.transpose());
  out.problem.blocks.push_back(std::move(inv));

  // Scalar rows 1 - v Xt v' >= 0 with v the mapped, slack-normalized normal.
  auto add_row = [&](const Eigen::RowVectorXd& mapped, double s, double raw_norm) {
    if (mapped.norm() <= kInactiveRowTol * std::max(1.0, raw_norm)) return;
    const Eigen::RowVectorXd v = mapped / s;
    AffineBlock blk;
    blk.A0 = MatrixXd::Constant(1, 1, 1.0);
    blk.coeff.reserve(static_cast<size_t>(p));
    for (const auto& E : xbasis)
      blk.coeff.push_back(MatrixXd::Constant(1, 1, -(v * E * v.transpose())(0, 0)));
    out.problem.blocks.push_back(std::move(blk));
  };
  for (int j = 0; j < U.rows(); ++j)
    add_row(U.H.row(j) * F * out.L, U.K(j) - U.H.row(j).dot(eq.ubar), U.H.row(j).norm());
  for (int j = 0; j < Y_k.rows(); ++j)
    add_row(Y_k.H.row(j) * sys.C * out.L, Y_k.K(j) - Y_k.H.row(j).dot(eq.ybar),
            Y_k.H.row(j).norm());

  out.z0 = vec_symmetric(MatrixXd::Identity(n, n));
  return out;
}

inline std::pair<MatrixXd, MatrixXd> recover_solution(const PreparedSynthesis& prep,
                                                      const VectorXd& z) {
  const MatrixXd Xt = unvec_symmetric(z, prep.n);
  const MatrixXd X = symmetrized(prep.L * Xt * prep.L.transpose());
  if (!prep.gain_free) return {X, MatrixXd()};
  MatrixXd Wt(prep.m, prep.n);
  const int px = symmetric_dim(prep.n);
  for (int r = 0; r < prep.m; ++r)
    for (int c = 0; c < prep.n; ++c) Wt(r, c) = z(px + r * prep.n + c);
  return {X, Wt * prep.L.transpose()};
}

inline DareSolution default_seed(const LTISystem& sys) {
  CostModel unit;
  unit.Q = MatrixXd::Identity(sys.nx(), sys.nx());
  unit.R = MatrixXd::Identity(sys.nu(), sys.nu());
  return solve_dare(sys, unit);
}

inline SynthesisResult finish(const LTISystem& sys, const MatrixXd& F, const MatrixXd& X,
                              const MaxDetResult& res, const Equilibrium& eq,
                              const Polytope& Y_k, const Polytope& U) {
  SynthesisResult out;
  out.F = F;
  Eigen::LLT<MatrixXd> llt(X);
  require(llt.info() == Eigen::Success, ErrorCode::SolverFailure, "optimal X lost definiteness");
  out.P = symmetrized(llt.solve(MatrixXd::Identity(X.rows(), X.cols())));
  out.log_det_Pinv = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  out.gap = res.gap;
  out.newton_iters = res.newton_iters;
  require(res.converged, ErrorCode::SolverFailure, "design program did not converge");
  const VerifyReport rep = verify_synthesis(sys, F, out.P, 1.0, eq, Y_k, U);
  require(rep.ok(), ErrorCode::SolverFailure,
          "designed set failed verification, worst margin " + std::to_string(rep.worst()));
  return out;
}

}  // namespace detail

// Jointly design the gain and the largest-volume invariant set at one
// equilibrium, subject to input and output containment.
inline SynthesisResult synthesize_controller(const LTISystem& sys, const Equilibrium& eq,
                                             const Polytope& Y_k, const Polytope& U,
                                             const SynthesisOptions& opt = {}) {
  require(Y_k.dim() == sys.ny() && U.dim() == sys.nu(), ErrorCode::DimensionError,
          "constraint set dimensions");
  const DareSolution seed = opt.seed ? *opt.seed : detail::default_seed(sys);
  auto prep =
      detail::prepare_gain_free(sys, seed.F, seed.P, eq, Y_k, U, opt.slack_reject);
  const MaxDetResult res = solve_maxdet(prep.problem, prep.z0, opt.solver);
  auto [X, W] = detail::recover_solution(prep, res.z);
  Eigen::LLT<MatrixXd> llt(X);
  require(llt.info() == Eigen::Success, ErrorCode::SolverFailure, "optimal X lost definiteness");
  const MatrixXd F = llt.solve(W.transpose()).transpose();
  return detail::finish(sys, F, X, res, eq, Y_k, U);
}

// Same objective with the gain held fixed; only the set shape is designed.
inline SynthesisResult synthesize_pi_set_fixed_gain(const LTISystem& sys, const MatrixXd& F,
                                                    const Equilibrium& eq, const Polytope& Y_k,
                                                    const Polytope& U,
                                                    const SynthesisOptions& opt = {}) {
  require(Y_k.dim() == sys.ny() && U.dim() == sys.nu(), ErrorCode::DimensionError,
          "constraint set dimensions");
  require(is_schur(sys.A + sys.B * F), ErrorCode::NotStable, "gain does not stabilize");
  const MatrixXd P0 = solve_discrete_lyapunov(sys.A + sys.B * F,
                                              MatrixXd::Identity(sys.nx(), sys.nx()));
  auto prep = detail::prepare_fixed_gain(sys, F, P0, eq, Y_k, U, opt.slack_reject);
  const MaxDetResult res = solve_maxdet(prep.problem, prep.z0, opt.solver);
  auto [X, W] = detail::recover_solution(prep, res.z);
  (void)W;
  return detail::finish(sys, F, X, res, eq, Y_k, U);
}

// Text dump of the assembled matrix-block program, for external cross-checks.
inline std::string dump_synthesis_problem(const LTISystem& sys, const Equilibrium& eq,
                                          const Polytope& Y_k, const Polytope& U,
                                          const SynthesisOptions& opt = {}) {
  const DareSolution seed = opt.seed ? *opt.seed : detail::default_seed(sys);
  auto prep =
      detail::prepare_gain_free(sys, seed.F, seed.P, eq, Y_k, U, opt.slack_reject);
  std::ostringstream os;
  os << "maxdet problem\nvariables " << prep.problem.num_vars << "\n";
  Eigen::IOFormat fmt(Eigen::FullPrecision, 0, " ", "\n", "", "", "", "");
  auto dump_block = [&](const AffineBlock& blk, const std::string& name) {
    os << name << " size " << blk.size() << "\nconstant\n" << blk.A0.format(fmt) << "\n";
    for (size_t v = 0; v < blk.coeff.size(); ++v) {
      if (blk.coeff[v].size() == 0) continue;
      os << "coeff " << v << "\n" << blk.coeff[v].format(fmt) << "\n";
    }
  };
  dump_block(prep.problem.objective, "objective");
  for (size_t b = 0; b < prep.problem.blocks.size(); ++b)
    dump_block(prep.problem.blocks[b], "block " + std::to_string(b));
  os << "start\n" << prep.z0.transpose().format(fmt) << "\n";
  return os.str();
}

}  // namespace invpath
