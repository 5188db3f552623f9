#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fixtures.hpp"
#include "invpath/scaling.hpp"
#include "test_support.hpp"

using namespace invpath;

namespace {

// Double-integrator-like 2-state plant with identity output, used for the
// hand-checkable instances.
LTISystem simple_plant() {
  LTISystem sys;
  sys.A = 0.5 * MatrixXd::Identity(2, 2);
  sys.B = MatrixXd::Identity(2, 2);
  sys.C = MatrixXd::Identity(2, 2);
  return sys;
}

Polytope unit_box(int n) {
  return Polytope::box(VectorXd::Constant(n, -1.0), VectorXd::Constant(n, 1.0));
}

}  // namespace

TEST_CASE("unit instance scales to the inscribed ball") {
  LTISystem sys = simple_plant();
  const MatrixXd F = MatrixXd::Identity(2, 2);
  const MatrixXd P = MatrixXd::Identity(2, 2);
  auto lp = max_scale_lp(sys, F, P, VectorXd::Zero(2), unit_box(2), unit_box(2));
  CHECK(lp.rho == Catch::Approx(1.0).margin(1e-9));
  CHECK(lp.eq.xbar.norm() <= 1e-10);
  const double cf = max_scale_closed_form(sys, F, P, lp.eq, unit_box(2), unit_box(2));
  CHECK(cf == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("shifted center halves the scale through the output row") {
  LTISystem sys = simple_plant();
  const MatrixXd F = MatrixXd::Identity(2, 2);
  const MatrixXd P = MatrixXd::Identity(2, 2);
  VectorXd y(2);
  y << 0.5, 0.0;
  auto lp = max_scale_lp(sys, F, P, y, unit_box(2), unit_box(2));
  CHECK(lp.rho == Catch::Approx(0.5).margin(1e-9));
  // The binding row is the output bound y1 <= 1: slack 0.5, unit denominator.
  const double cf = max_scale_closed_form(sys, F, P, lp.eq, unit_box(2), unit_box(2));
  CHECK(cf == Catch::Approx(0.5).margin(1e-10));
}

TEST_CASE("linear program agrees with the closed form on random instances") {
  std::mt19937 rng(2024u);
  int checked = 0;
  while (checked < 100) {
    // Random 4-state, 2-input, 2-output plant with a unique equilibrium.
    LTISystem sys;
    sys.A = fixtures::random_matrix(4, 4, rng, 0.6);
    sys.B = fixtures::random_matrix(4, 2, rng);
    sys.C = fixtures::random_matrix(2, 4, rng);
    if (numeric_rank(sys.C) < 2) continue;
    VectorXd ybar = fixtures::random_matrix(2, 1, rng, 0.5);
    EquilibriumResult eqr;
    try {
      eqr = equilibrium_for_output(sys, ybar);
    } catch (const Error&) {
      continue;
    }
    if (!std::holds_alternative<Equilibrium>(eqr)) continue;
    const auto& eq = std::get<Equilibrium>(eqr);
    // Constraint boxes with guaranteed interior slack at the equilibrium.
    const double umax = eq.ubar.cwiseAbs().maxCoeff() + 0.5 + 0.5 * std::abs(fixtures::random_matrix(1, 1, rng)(0, 0));
    const double ymax = ybar.cwiseAbs().maxCoeff() + 0.5;
    const Polytope U = Polytope::box(VectorXd::Constant(2, -umax), VectorXd::Constant(2, umax));
    const Polytope Yk = Polytope::box(VectorXd::Constant(2, -ymax), VectorXd::Constant(2, ymax));
    const MatrixXd P = fixtures::random_spd(4, rng);
    const MatrixXd F = fixtures::random_matrix(2, 4, rng);

    const double cf = max_scale_closed_form(sys, F, P, eq, Yk, U);
    const auto lp = max_scale_lp(sys, F, P, ybar, Yk, U);
    CHECK(lp.rho == Catch::Approx(cf).epsilon(1e-8));
    ++checked;
  }
}

TEST_CASE("spacecraft sample scale matches between both solvers") {
  LTISystem sys = fixtures::spacecraft_system();
  auto sol = solve_dare(sys, fixtures::spacecraft_cost());
  UnionOfPolytopes Y = fixtures::rendezvous_free_space();
  Polytope U = fixtures::input_box();
  VectorXd y(2);
  y << 100.0, 100.0;
  const Polytope& Y3 = Y.components[2];  // below the debris square
  const auto eq = std::get<Equilibrium>(equilibrium_for_output(sys, y));
  const double cf = max_scale_closed_form(sys, sol.F, sol.P, eq, Y3, U);
  const auto lp = max_scale_lp(sys, sol.F, sol.P, y, Y3, U);
  CHECK(lp.rho == Catch::Approx(cf).epsilon(1e-8));
  CHECK(cf > 0.0);
}

TEST_CASE("zero gain rows drop out and outputs bind alone") {
  LTISystem sys = simple_plant();
  const MatrixXd F = MatrixXd::Zero(2, 2);
  MatrixXd P(2, 2);
  P << 4.0, 0.0, 0.0, 1.0;
  VectorXd y(2);
  y << 0.2, 0.0;
  const auto eq = std::get<Equilibrium>(equilibrium_for_output(sys, y));
  // ubar = 0.5 * ybar is strictly inside a tiny box, yet no input row can
  // bind because F = 0 kills every denominator.
  const Polytope U = Polytope::box(VectorXd::Constant(2, -0.11), VectorXd::Constant(2, 0.11));
  const double cf = max_scale_closed_form(sys, F, P, eq, unit_box(2), U);
  // Output rows only: min((1 - 0.2)/sqrt(1/4), (1 + 0.2)/sqrt(1/4), 1/1, 1/1) = 1.
  CHECK(cf == Catch::Approx(1.0).margin(1e-10));
  const auto lp = max_scale_lp(sys, F, P, y, unit_box(2), U);
  CHECK(lp.rho == Catch::Approx(cf).epsilon(1e-9));
}

TEST_CASE("equilibrium outside a constraint set is rejected") {
  LTISystem sys = simple_plant();
  const MatrixXd F = MatrixXd::Identity(2, 2);
  const MatrixXd P = MatrixXd::Identity(2, 2);
  VectorXd y(2);
  y << 2.0, 0.0;  // outside the unit output box
  const auto eq = std::get<Equilibrium>(equilibrium_for_output(sys, y));
  CHECK_THROWS_MATCHES(max_scale_closed_form(sys, F, P, eq, unit_box(2), unit_box(2)), Error,
                       ErrorCodeIs(ErrorCode::InfeasibleSample));
  CHECK_THROWS_MATCHES(max_scale_lp(sys, F, P, y, unit_box(2), unit_box(2)), Error,
                       ErrorCodeIs(ErrorCode::InfeasibleSample));
  // Tiny input box making ubar = (1, 0) infeasible while y stays feasible.
  VectorXd y2(2);
  y2 << 0.9, 0.0;
  const Polytope U_small = Polytope::box(VectorXd::Constant(2, -0.1), VectorXd::Constant(2, 0.1));
  CHECK_THROWS_MATCHES(max_scale_lp(sys, F, P, y2, unit_box(2), U_small), Error,
                       ErrorCodeIs(ErrorCode::InfeasibleSample));
}

TEST_CASE("redundant inputs let the program move the equilibrium") {
  // Two inputs acting on one state: x+ = 0.5 x + u1 + u2, y = x. The base
  // minimum-norm equilibrium splits the effort evenly; with u1 capped tight
  // the program must shift effort to u2 to keep any scale at all.
  LTISystem sys;
  sys.A = MatrixXd::Constant(1, 1, 0.5);
  sys.B = MatrixXd::Ones(1, 2);
  sys.C = MatrixXd::Identity(1, 1);
  VectorXd y(1);
  y << 0.8;  // needs u1 + u2 = 0.4
  Polytope U;  // u1 <= 0.05, u1 >= -1, |u2| <= 1
  U.H = MatrixXd(4, 2);
  U.H << 1, 0, -1, 0, 0, 1, 0, -1;
  U.K = VectorXd(4);
  U.K << 0.05, 1.0, 1.0, 1.0;
  const MatrixXd F = MatrixXd::Ones(2, 1);
  const MatrixXd P = MatrixXd::Identity(1, 1);
  const auto lp = max_scale_lp(sys, F, P, y, unit_box(1), U);
  CHECK(lp.rho > 0.0);
  CHECK(lp.eq.ubar.sum() == Catch::Approx(0.4).margin(1e-9));
  CHECK(lp.eq.ubar(0) <= 0.05 + 1e-9);
  CHECK((sys.A * lp.eq.xbar + sys.B * lp.eq.ubar - lp.eq.xbar).norm() <= 1e-9);
}

TEST_CASE("strictly interior samples always scale positively") {
  std::mt19937 rng(555u);
  LTISystem sys = fixtures::spacecraft_system();
  auto sol = solve_dare(sys, fixtures::spacecraft_cost());
  UnionOfPolytopes Y = fixtures::rendezvous_free_space();
  Polytope U = fixtures::input_box();
  std::uniform_real_distribution<double> ux(-390.0, 990.0), uy(-390.0, 340.0);
  int done = 0;
  while (done < 25) {
    VectorXd y(2);
    y << ux(rng), uy(rng);
    const Polytope& Y3 = Y.components[2];
    if (!Y3.strictly_contains(y, 1.0)) continue;
    const auto lp = max_scale_lp(sys, sol.F, sol.P, y, Y3, U);
    CHECK(lp.rho > 0.0);
    ++done;
  }
}

TEST_CASE("tightening any bound never grows the scale") {
  std::mt19937 rng(808u);
  LTISystem sys = fixtures::spacecraft_system();
  auto sol = solve_dare(sys, fixtures::spacecraft_cost());
  UnionOfPolytopes Y = fixtures::rendezvous_free_space();
  Polytope U = fixtures::input_box();
  VectorXd y(2);
  y << -100.0, 200.0;
  const auto eq = std::get<Equilibrium>(equilibrium_for_output(sys, y));
  Polytope Yk = Y.components[0];
  const double base = max_scale_closed_form(sys, sol.F, sol.P, eq, Yk, U);
  std::uniform_real_distribution<double> shrink(0.0, 0.5);
  for (int trial = 0; trial < 20; ++trial) {
    Polytope Yk2 = Yk;
    Polytope U2 = U;
    for (int j = 0; j < Yk2.rows(); ++j) {
      const double slack = Yk2.K(j) - Yk2.H.row(j).dot(y);
      Yk2.K(j) -= shrink(rng) * slack;
    }
    for (int j = 0; j < U2.rows(); ++j) {
      const double slack = U2.K(j) - U2.H.row(j).dot(eq.ubar);
      U2.K(j) -= shrink(rng) * slack;
    }
    const double tightened = max_scale_closed_form(sys, sol.F, sol.P, eq, Yk2, U2);
    CHECK(tightened <= base + 1e-12);
  }
}

TEST_CASE("component enumeration at overlaps and inside the obstacle") {
  LTISystem sys = fixtures::spacecraft_system();
  auto sol = solve_dare(sys, fixtures::spacecraft_cost());
  UnionOfPolytopes Y = fixtures::rendezvous_free_space();
  Polytope U = fixtures::input_box();

  // Origin lies in both the left slab and the lower slab.
  auto sets = best_component_scale(sys, sol.F, sol.P, VectorXd::Zero(2), Y, U);
  REQUIRE(sets.size() == 2);
  CHECK(sets[0].component == 0);
  CHECK(sets[1].component == 2);
  for (const auto& s : sets) CHECK(s.rho > 0.0);
  // Same equilibrium either way; the level differs with the component shape.
  CHECK((sets[0].eq.xbar - sets[1].eq.xbar).norm() <= 1e-12);

  VectorXd single(2);
  single << 300.0, 0.0;  // below the debris square only
  auto one = best_component_scale(sys, sol.F, sol.P, single, Y, U);
  REQUIRE(one.size() == 1);
  CHECK(one[0].component == 2);

  VectorXd blocked(2);
  blocked << 300.0, 400.0;  // inside the debris square
  CHECK_THROWS_MATCHES(best_component_scale(sys, sol.F, sol.P, blocked, Y, U), Error,
                       ErrorCodeIs(ErrorCode::OutsideFreeSpace));
}

TEST_CASE("scaled set is invariant under the local controller") {
  std::mt19937 rng(4242u);
  LTISystem sys = fixtures::spacecraft_system();
  auto sol = solve_dare(sys, fixtures::spacecraft_cost());
  UnionOfPolytopes Y = fixtures::rendezvous_free_space();
  Polytope U = fixtures::input_box();
  VectorXd y(2);
  y << 100.0, 100.0;
  const Polytope& Yk = Y.components[2];
  const auto eq = std::get<Equilibrium>(equilibrium_for_output(sys, y));
  const double rho = max_scale_closed_form(sys, sol.F, sol.P, eq, Yk, U);
  REQUIRE(rho > 0.0);
  const MatrixXd Phalf_inv = inverse_sqrt(sol.P);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int s = 0; s < 100; ++s) {
    VectorXd u(4);
    for (int i = 0; i < 4; ++i) u(i) = g(rng);
    u /= u.norm();
    VectorXd x = eq.xbar + rho * (Phalf_inv * u);
    double v_prev = std::numeric_limits<double>::infinity();
    for (int t = 0; t < 200; ++t) {
      const VectorXd d = x - eq.xbar;
      const double v = d.dot(sol.P * d);
      CHECK(v <= rho * rho * (1.0 + 1e-9));
      CHECK(v <= v_prev * (1.0 + 1e-9));
      v_prev = v;
      const VectorXd uin = sol.F * d + eq.ubar;
      CHECK(U.contains(uin, 1e-9));
      CHECK(Yk.contains(sys.C * x, 1e-9));
      x = sys.A * x + sys.B * uin;
    }
  }
}
