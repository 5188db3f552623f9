#pragma once

#include <Eigen/Dense>

#include <optional>
#include <utility>
#include <vector>

#include "invpath/error.hpp"
#include "invpath/linalg.hpp"
#include "invpath/lp.hpp"

namespace invpath {

// Numeric margin standing in for "non-empty interior" / strict containment.
// Absolute, in problem units.
inline constexpr double kInteriorTol = 1e-9;

// Intersection of half-spaces H y <= K, one row per half-space.
struct Polytope {
  MatrixXd H;
  VectorXd K;

  int dim() const { return static_cast<int>(H.cols()); }
  int rows() const { return static_cast<int>(H.rows()); }

  bool contains(const VectorXd& y, double tol = 0.0) const {
    return ((H * y - K).array() <= tol).all();
  }

  bool strictly_contains(const VectorXd& y, double margin = kInteriorTol) const {
    return ((H * y - K).array() <= -margin).all();
  }

  void validate() const {
    require(H.rows() == K.size(), ErrorCode::DimensionError, "row/offset count mismatch");
    for (int i = 0; i < H.rows(); ++i)
      require(H.row(i).norm() > 0.0, ErrorCode::DimensionError, "zero-normal row");
  }

  // Axis-aligned box from per-coordinate bounds lo <= y <= hi.
  static Polytope box(const VectorXd& lo, const VectorXd& hi) {
    const int n = static_cast<int>(lo.size());
    Polytope p;
    p.H = MatrixXd::Zero(2 * n, n);
    p.K = VectorXd(2 * n);
    for (int i = 0; i < n; ++i) {
      p.H(2 * i, i) = 1.0;
      p.K(2 * i) = hi(i);
      p.H(2 * i + 1, i) = -1.0;
      p.K(2 * i + 1) = -lo(i);
    }
    return p;
  }
};

// Stack the rows of two polytopes in the same space.
inline Polytope intersect(const Polytope& a, const Polytope& b) {
  require(a.dim() == b.dim(), ErrorCode::DimensionError, "polytope dimension mismatch");
  Polytope out;
  out.H = MatrixXd(a.rows() + b.rows(), a.dim());
  out.H << a.H, b.H;
  out.K = VectorXd(a.rows() + b.rows());
  out.K << a.K, b.K;
  return out;
}

struct ChebyshevBall {
  VectorXd center;
  double radius = 0.0;
};

// Largest inscribed ball: max r s.t. H c + r ||H_j|| <= K for every row.
// The radius is unique; in degenerate directions the center is one optimal
// representative.
inline ChebyshevBall chebyshev(const Polytope& poly) {
  poly.validate();
  const int n = poly.dim();
  LpProblem lp;
  lp.c = VectorXd::Zero(n + 1);
  lp.c(n) = 1.0;  // maximize r
  lp.A_ub = MatrixXd(poly.rows(), n + 1);
  lp.A_ub.leftCols(n) = poly.H;
  for (int i = 0; i < poly.rows(); ++i) lp.A_ub(i, n) = poly.H.row(i).norm();
  lp.b_ub = poly.K;
  LpResult res = maximize_lp(lp);
  if (res.status == LpStatus::Unbounded)
    fail(ErrorCode::Unbounded, "Chebyshev radius unbounded");
  if (res.status == LpStatus::Infeasible || res.objective < -kInteriorTol)
    fail(ErrorCode::EmptySet, "polytope is empty");
  ChebyshevBall ball;
  ball.center = res.x.head(n);
  ball.radius = std::max(0.0, res.objective);
  return ball;
}

// Support value max_{y in poly} d^T y, or nullopt when unbounded along d.
inline std::optional<double> support_value(const Polytope& poly, const VectorXd& d) {
  LpProblem lp;
  lp.c = d;
  lp.A_ub = poly.H;
  lp.b_ub = poly.K;
  LpResult res = maximize_lp(lp);
  if (res.status == LpStatus::Unbounded) return std::nullopt;
  if (res.status == LpStatus::Infeasible) fail(ErrorCode::EmptySet, "polytope is empty");
  return res.objective;
}

// Every coordinate direction must have a finite support value both ways.
inline bool is_bounded(const Polytope& poly) {
  const int n = poly.dim();
  VectorXd d = VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    d(i) = 1.0;
    if (!support_value(poly, d)) return false;
    d(i) = -1.0;
    if (!support_value(poly, d)) return false;
    d(i) = 0.0;
  }
  return true;
}

inline VectorXd bounding_box_low(const Polytope& poly) {
  const int n = poly.dim();
  VectorXd lo(n), d = VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    d(i) = -1.0;
    auto s = support_value(poly, d);
    require(s.has_value(), ErrorCode::Unbounded, "polytope unbounded below");
    lo(i) = -*s;
    d(i) = 0.0;
  }
  return lo;
}

inline VectorXd bounding_box_high(const Polytope& poly) {
  const int n = poly.dim();
  VectorXd hi(n), d = VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    d(i) = 1.0;
    auto s = support_value(poly, d);
    require(s.has_value(), ErrorCode::Unbounded, "polytope unbounded above");
    hi(i) = *s;
    d(i) = 0.0;
  }
  return hi;
}

inline bool intersection_interior_nonempty(const Polytope& a, const Polytope& b,
                                           double margin = kInteriorTol) {
  require(a.dim() == b.dim(), ErrorCode::DimensionError, "polytope dimension mismatch");
  try {
    return chebyshev(intersect(a, b)).radius > margin;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::EmptySet) return false;
    if (e.code() == ErrorCode::Unbounded) return true;  // arbitrarily large balls fit
    throw;
  }
}

// Finite union of full-dimensional compact polytopes, all in output space.
struct UnionOfPolytopes {
  std::vector<Polytope> components;

  int dim() const { return components.empty() ? 0 : components.front().dim(); }

  void validate() const {
    require(!components.empty(), ErrorCode::EmptySet, "union has no components");
    for (size_t k = 0; k < components.size(); ++k) {
      const auto& p = components[k];
      p.validate();
      require(p.dim() == dim(), ErrorCode::DimensionError, "component dimension mismatch");
      require(is_bounded(p), ErrorCode::Unbounded,
              "component " + std::to_string(k) + " is unbounded");
      require(chebyshev(p).radius > kInteriorTol, ErrorCode::EmptySet,
              "component " + std::to_string(k) + " is not full-dimensional");
    }
  }

  bool contains(const VectorXd& y, double tol = 0.0) const {
    for (const auto& p : components)
      if (p.contains(y, tol)) return true;
    return false;
  }

  std::vector<int> containing_components(const VectorXd& y, double tol = 0.0) const {
    std::vector<int> out;
    for (size_t k = 0; k < components.size(); ++k)
      if (components[k].contains(y, tol)) out.push_back(static_cast<int>(k));
    return out;
  }

  std::vector<int> strictly_containing_components(const VectorXd& y,
                                                  double margin = kInteriorTol) const {
    std::vector<int> out;
    for (size_t k = 0; k < components.size(); ++k)
      if (components[k].strictly_contains(y, margin)) out.push_back(static_cast<int>(k));
    return out;
  }
};

// { x : (x - center)^T P (x - center) <= rho2 } with P symmetric positive definite.
struct Ellipsoid {
  VectorXd center;
  MatrixXd P;
  double rho2 = 1.0;

  bool contains(const VectorXd& x, double tol = 0.0) const {
    const VectorXd d = x - center;
    return d.dot(P * d) <= rho2 * (1.0 + tol);
  }

  void validate() const {
    require(P.rows() == P.cols() && P.rows() == center.size(), ErrorCode::DimensionError,
            "ellipsoid shape mismatch");
    require(is_symmetric(P, 1e-10), ErrorCode::NotPositiveDefinite, "shape not symmetric");
    require(min_eigenvalue(P) > 0.0, ErrorCode::NotPositiveDefinite, "shape not PD");
    require(rho2 > 0.0, ErrorCode::NotPositiveDefinite, "level must be positive");
  }
};

// Support-function containment test for M * ell inside poly:
// for every row j, H_j M c + rho * ||H_j M P^{-1/2}|| <= K_j.
// A negative slack_tol tightens the test, a positive one loosens it.
inline bool ellipsoid_in_polytope(const Ellipsoid& ell, const Polytope& poly, const MatrixXd& M,
                                  double slack_tol = 0.0) {
  require(M.rows() == poly.dim() && M.cols() == ell.center.size(), ErrorCode::DimensionError,
          "map shape mismatch");
  require(is_symmetric(ell.P, 1e-10), ErrorCode::NotPositiveDefinite, "shape not symmetric");
  Eigen::LLT<MatrixXd> llt(symmetrized(ell.P));
  require(llt.info() == Eigen::Success, ErrorCode::NotPositiveDefinite, "shape not PD");
  const double rho = std::sqrt(ell.rho2);
  for (int j = 0; j < poly.rows(); ++j) {
    const VectorXd v = (poly.H.row(j) * M).transpose();
    const double lhs = poly.H.row(j).dot(M * ell.center) + rho * ellipsoid_support(ell.P, v, llt);
    if (lhs > poly.K(j) + slack_tol) return false;
  }
  return true;
}

// Worst row violation of the support-function test; positive means the image
// of the ellipsoid sticks out of the polytope.
inline double ellipsoid_in_polytope_violation(const Ellipsoid& ell, const Polytope& poly,
                                              const MatrixXd& M) {
  Eigen::LLT<MatrixXd> llt(symmetrized(ell.P));
  require(llt.info() == Eigen::Success, ErrorCode::NotPositiveDefinite, "shape not PD");
  const double rho = std::sqrt(ell.rho2);
  double worst = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < poly.rows(); ++j) {
    const VectorXd v = (poly.H.row(j) * M).transpose();
    const double viol =
        poly.H.row(j).dot(M * ell.center) + rho * ellipsoid_support(ell.P, v, llt) - poly.K(j);
    worst = std::max(worst, viol);
  }
  return worst;
}

struct NormalizedPolytope {
  Polytope poly;
  std::vector<int> inactive_rows;  // rows whose transformed normal vanished
};

// Rescale each row so that ||H_j T|| = 1 for the supplied map T (for example
// F P^{-1/2} or C P^{-1/2}); the represented set is unchanged. Rows with a
// vanishing transformed normal are left as-is and reported inactive: their
// support term is zero, so they bind only through the constant part.
inline NormalizedPolytope normalize(const Polytope& poly, const MatrixXd& T) {
  poly.validate();
  require(T.rows() == poly.dim(), ErrorCode::DimensionError, "map shape mismatch");
  NormalizedPolytope out;
  out.poly = poly;
  for (int j = 0; j < poly.rows(); ++j) {
    const double s = (poly.H.row(j) * T).norm();
    if (s <= 1e-14 * std::max(1.0, poly.H.row(j).norm() * T.cwiseAbs().maxCoeff())) {
      out.inactive_rows.push_back(j);
      continue;
    }
    out.poly.H.row(j) /= s;
    out.poly.K(j) /= s;
  }
  return out;
}

inline NormalizedPolytope normalize(const Polytope& poly) {
  return normalize(poly, MatrixXd::Identity(poly.dim(), poly.dim()));
}

}  // namespace invpath
