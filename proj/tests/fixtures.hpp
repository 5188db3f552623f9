#pragma once

#include <random>

#include "invpath/geometry.hpp"
#include "invpath/lti.hpp"

// Shared rendezvous scenario used across the suites: in-plane relative orbit
// dynamics, a rectangular debris keep-out zone inside a bounding box, and
// per-axis thrust limits.
namespace fixtures {

using invpath::CostModel;
using invpath::LTISystem;
using invpath::MatrixXd;
using invpath::Polytope;
using invpath::UnionOfPolytopes;
using invpath::VectorXd;

inline constexpr double kMeanMotion = 1.1e-3;  // 1/s
inline constexpr double kSamplePeriod = 30.0;  // s
inline constexpr double kThrustLimit = 1e-2;   // per-axis input bound

inline void hcw_matrices(MatrixXd& A_c, MatrixXd& B_c, MatrixXd& C) {
  const double n = kMeanMotion;
  A_c = MatrixXd::Zero(4, 4);
  A_c(0, 2) = 1.0;
  A_c(1, 3) = 1.0;
  A_c(2, 0) = 3.0 * n * n;
  A_c(2, 3) = 2.0 * n;
  A_c(3, 2) = -2.0 * n;
  B_c = MatrixXd::Zero(4, 2);
  B_c(2, 0) = 1.0;
  B_c(3, 1) = 1.0;
  C = MatrixXd::Zero(2, 4);
  C(0, 0) = 1.0;
  C(1, 1) = 1.0;
}

inline LTISystem spacecraft_system() {
  MatrixXd A_c, B_c, C;
  hcw_matrices(A_c, B_c, C);
  LTISystem sys;
  auto [A, B] = invpath::zoh_discretize(A_c, B_c, kSamplePeriod);
  sys.A = A;
  sys.B = B;
  sys.C = C;
  sys.origin = invpath::ContinuousOrigin{A_c, B_c, kSamplePeriod};
  return sys;
}

inline CostModel spacecraft_cost() {
  CostModel cost;
  cost.Q = VectorXd{{1e2, 1e2, 1e7, 1e7}}.asDiagonal();
  cost.R = 2e7 * MatrixXd::Identity(2, 2);
  return cost;
}

inline Polytope input_box(double limit = kThrustLimit) {
  VectorXd lo = VectorXd::Constant(2, -limit), hi = VectorXd::Constant(2, limit);
  return Polytope::box(lo, hi);
}

// Bounding box [-400, 1000] x [-400, 1100] minus the debris square
// [250, 350] x [350, 450], covered by four overlapping slabs.
inline UnionOfPolytopes rendezvous_free_space() {
  VectorXd lo(2), hi(2);
  lo << -400.0, -400.0;
  hi << 1000.0, 1100.0;
  const Polytope bounds = Polytope::box(lo, hi);
  auto half = [](double a, double b, double k) {
    Polytope p;
    p.H = MatrixXd(1, 2);
    p.H << a, b;
    p.K = VectorXd(1);
    p.K << k;
    return p;
  };
  UnionOfPolytopes Y;
  Y.components.push_back(intersect(bounds, half(1, 0, 250.0)));    // left of debris
  Y.components.push_back(intersect(bounds, half(-1, 0, -350.0)));  // right of debris
  Y.components.push_back(intersect(bounds, half(0, 1, 350.0)));    // below debris
  Y.components.push_back(intersect(bounds, half(0, -1, -450.0)));  // above debris
  return Y;
}

inline VectorXd start_output() {
  VectorXd y(2);
  y << 450.0, 650.0;
  return y;
}

inline VectorXd goal_output() { return VectorXd::Zero(2); }

inline MatrixXd random_matrix(int r, int c, std::mt19937& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> unif(-scale, scale);
  MatrixXd M(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) M(i, j) = unif(rng);
  return M;
}

inline MatrixXd random_spd(int n, std::mt19937& rng) {
  const MatrixXd G = random_matrix(n, n, rng);
  return (G * G.transpose() + MatrixXd::Identity(n, n)).eval();
}

}  // namespace fixtures
