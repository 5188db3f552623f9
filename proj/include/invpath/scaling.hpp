#pragma once

#include <Eigen/Dense>

#include <utility>
#include <vector>

#include "invpath/error.hpp"
#include "invpath/geometry.hpp"
#include "invpath/linalg.hpp"
#include "invpath/lp.hpp"
#include "invpath/lti.hpp"

namespace invpath {

// Rows whose transformed normal vanishes (for example every input row when
// F = 0) cannot bind the scale and are skipped.
inline constexpr double kInactiveRowTol = 1e-12;

namespace detail {

inline bool row_inactive(const VectorXd& v, double row_norm) {
  return v.norm() <= kInactiveRowTol * std::max(1.0, row_norm);
}

}  // namespace detail

// Largest rho such that the rho-level set of (x - xbar)' P (x - xbar), run
// under u = F (x - xbar) + ubar, keeps inputs in U and outputs in Y_k:
//   rho* = min_j (K_j - H_j ubar) / ||H_j F P^{-1/2}||   over input rows
//        min_j (K_j - H_j ybar) / ||H_j C P^{-1/2}||   over output rows.
// Requires the unique-equilibrium case; a negative numerator means the
// equilibrium itself violates a constraint.
inline double max_scale_closed_form(const LTISystem& sys, const MatrixXd& F, const MatrixXd& P,
                                    const Equilibrium& eq, const Polytope& Y_k,
                                    const Polytope& U) {
  require(Y_k.dim() == sys.ny() && U.dim() == sys.nu(), ErrorCode::DimensionError,
          "constraint set dimensions");
  Eigen::LLT<MatrixXd> llt(symmetrized(P));
  require(llt.info() == Eigen::Success, ErrorCode::NotPositiveDefinite, "P not PD");

  double rho = std::numeric_limits<double>::infinity();
  bool any_active = false;
  auto fold_rows = [&](const Polytope& poly, const MatrixXd& map, const VectorXd& point) {
    for (int j = 0; j < poly.rows(); ++j) {
      const double numer = poly.K(j) - poly.H.row(j).dot(point);
      require(numer >= 0.0, ErrorCode::InfeasibleSample,
              "equilibrium violates a constraint row");
      const VectorXd v = (poly.H.row(j) * map).transpose();
      if (detail::row_inactive(v, poly.H.row(j).norm())) continue;
      any_active = true;
      rho = std::min(rho, numer / ellipsoid_support(P, v, llt));
    }
  };
  fold_rows(U, F, eq.ubar);
  fold_rows(Y_k, sys.C, eq.ybar);
  require(any_active, ErrorCode::Unbounded, "no constraint row limits the scale");
  return rho;
}

struct MaxScaleResult {
  double rho = 0.0;
  Equilibrium eq;
};

// Same maximization posed as a linear program. With a unique equilibrium the
// only variable is rho; with input redundancy the equilibrium itself joins
// the decision vector, so the program may pick the family member admitting
// the largest set.
inline MaxScaleResult max_scale_lp(const LTISystem& sys, const MatrixXd& F, const MatrixXd& P,
                                   const VectorXd& ybar, const Polytope& Y_k, const Polytope& U) {
  require(Y_k.dim() == sys.ny() && U.dim() == sys.nu(), ErrorCode::DimensionError,
          "constraint set dimensions");
  require(Y_k.contains(ybar, 1e-12), ErrorCode::InfeasibleSample,
          "sample outside the chosen component");
  Eigen::LLT<MatrixXd> llt(symmetrized(P));
  require(llt.info() == Eigen::Success, ErrorCode::NotPositiveDefinite, "P not PD");

  EquilibriumResult eqr = equilibrium_for_output(sys, ybar);
  Equilibrium base;
  MatrixXd u_basis(sys.nu(), 0), x_basis(sys.nx(), 0);
  if (std::holds_alternative<Equilibrium>(eqr)) {
    base = std::get<Equilibrium>(eqr);
  } else {
    const auto& fam = std::get<EquilibriumFamily>(eqr);
    base = fam.base;
    u_basis = fam.u_basis;
    x_basis = fam.x_basis;
  }
  const int dof = static_cast<int>(u_basis.cols());

  // Variables z = [rho; theta]. Input rows depend on theta, output rows on
  // the fixed ybar only.
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> rhs;
  for (int j = 0; j < U.rows(); ++j) {
    const VectorXd v = (U.H.row(j) * F).transpose();
    Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(1 + dof);
    if (!detail::row_inactive(v, U.H.row(j).norm())) r(0) = ellipsoid_support(P, v, llt);
    r.tail(dof) = U.H.row(j) * u_basis;
    rows.push_back(r);
    rhs.push_back(U.K(j) - U.H.row(j).dot(base.ubar));
  }
  for (int j = 0; j < Y_k.rows(); ++j) {
    const VectorXd v = (Y_k.H.row(j) * sys.C).transpose();
    Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(1 + dof);
    if (!detail::row_inactive(v, Y_k.H.row(j).norm())) r(0) = ellipsoid_support(P, v, llt);
    rows.push_back(r);
    rhs.push_back(Y_k.K(j) - Y_k.H.row(j).dot(ybar));
  }

  LpProblem lp;
  lp.c = VectorXd::Zero(1 + dof);
  lp.c(0) = 1.0;
  lp.A_ub = MatrixXd(static_cast<int>(rows.size()), 1 + dof);
  lp.b_ub = VectorXd(static_cast<int>(rows.size()));
  for (size_t j = 0; j < rows.size(); ++j) {
    lp.A_ub.row(static_cast<int>(j)) = rows[j];
    lp.b_ub(static_cast<int>(j)) = rhs[j];
  }
  // rho >= 0 keeps the program meaningful when an input row has negative
  // slack at the base equilibrium but theta can repair it.
  MatrixXd nonneg = MatrixXd::Zero(1, 1 + dof);
  nonneg(0, 0) = -1.0;
  lp.A_ub.conservativeResize(lp.A_ub.rows() + 1, Eigen::NoChange);
  lp.A_ub.row(lp.A_ub.rows() - 1) = nonneg;
  lp.b_ub.conservativeResize(lp.b_ub.size() + 1);
  lp.b_ub(lp.b_ub.size() - 1) = 0.0;

  LpResult res = maximize_lp(lp);
  if (res.status == LpStatus::Infeasible)
    fail(ErrorCode::InfeasibleSample, "no feasible equilibrium input for this sample");
  require(res.status == LpStatus::Optimal, ErrorCode::SolverFailure, "scale LP did not solve");

  MaxScaleResult out;
  out.rho = res.x(0);
  out.eq = base;
  if (dof > 0) {
    const VectorXd theta = res.x.tail(dof);
    out.eq.xbar += x_basis * theta;
    out.eq.ubar += u_basis * theta;
    out.eq.ybar = sys.C * out.eq.xbar;
  }
  require(out.rho >= 0.0, ErrorCode::InfeasibleSample, "sample admits no positive scale");
  return out;
}

// One scaling result per free-space component, ready to become a graph node.
struct ScaledPISet {
  int component = -1;
  double rho = 0.0;
  Equilibrium eq;
};

struct ScaleFailure {
  int component = -1;
  ErrorCode code = ErrorCode::InfeasibleSample;
  std::string what;
};

// Solve the scaling once per component containing ybar. Components where the
// program is infeasible are reported, not fatal; a sample in no component at
// all is an error.
inline std::vector<ScaledPISet> best_component_scale(const LTISystem& sys, const MatrixXd& F,
                                                     const MatrixXd& P, const VectorXd& ybar,
                                                     const UnionOfPolytopes& Y, const Polytope& U,
                                                     std::vector<ScaleFailure>* failures = nullptr) {
  const std::vector<int> comps = Y.containing_components(ybar);
  require(!comps.empty(), ErrorCode::OutsideFreeSpace, "sample outside the free space");
  std::vector<ScaledPISet> out;
  for (int k : comps) {
    try {
      MaxScaleResult r = max_scale_lp(sys, F, P, ybar, Y.components[static_cast<size_t>(k)], U);
      out.push_back(ScaledPISet{k, r.rho, r.eq});
    } catch (const Error& e) {
      if (failures) failures->push_back(ScaleFailure{k, e.code(), e.what()});
      if (e.code() != ErrorCode::InfeasibleSample) throw;
    }
  }
  return out;
}

}  // namespace invpath
