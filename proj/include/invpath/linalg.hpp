#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "invpath/error.hpp"

namespace invpath {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd symmetrized(const MatrixXd& M) { return 0.5 * (M + M.transpose()); }

inline bool is_symmetric(const MatrixXd& M, double tol = 1e-10) {
  if (M.rows() != M.cols()) return false;
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  return (M - M.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

inline double min_eigenvalue(const MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrized(M), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline bool is_positive_definite(const MatrixXd& M, double tol = 0.0) {
  return is_symmetric(M) && min_eigenvalue(M) > tol;
}

inline bool is_positive_semidefinite(const MatrixXd& M, double tol = 1e-10) {
  if (!is_symmetric(M)) return false;
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  return min_eigenvalue(M) >= -tol * scale;
}

// Symmetric inverse square root P^{-1/2} of a positive definite matrix.
inline MatrixXd inverse_sqrt(const MatrixXd& P) {
  require(is_symmetric(P), ErrorCode::NotPositiveDefinite, "matrix not symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrized(P));
  require(es.eigenvalues().minCoeff() > 0.0, ErrorCode::NotPositiveDefinite,
          "matrix not positive definite");
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

// sqrt(v^T P^{-1} v), the support value of the P-unit ellipsoid along v.
// Equals ||v^T P^{-1/2}||_2 without forming the matrix square root.
inline double ellipsoid_support(const MatrixXd& P, const VectorXd& v,
                                const Eigen::LLT<MatrixXd>& llt) {
  (void)P;
  const VectorXd w = llt.solve(v);
  const double q = v.dot(w);
  return q > 0.0 ? std::sqrt(q) : 0.0;
}

inline double spectral_radius(const MatrixXd& A) {
  Eigen::EigenSolver<MatrixXd> es(A, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline MatrixXd kronecker(const MatrixXd& A, const MatrixXd& B) {
  MatrixXd K(A.rows() * B.rows(), A.cols() * B.cols());
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j) K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return K;
}

// Numeric rank with a tolerance relative to the largest singular value.
inline int numeric_rank(const MatrixXd& M, double rel_tol = 1e-8) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(M);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int r = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > rel_tol * s(0)) ++r;
  return r;
}

}  // namespace invpath
