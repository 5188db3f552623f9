#pragma once
// Runs a planned controller sequence on the closed-loop system: hold each
// node's feedback law until the state enters the next node's set, then switch.
// Also provides the cost functional and an unswitched LQR run for comparison.

#include <limits>
#include <vector>

#include <invpath/graph.hpp>

namespace invpath {

enum class StopReason { Converged, Timeout };

inline const char* to_string(StopReason r) {
  return r == StopReason::Converged ? "converged" : "timeout";
}

struct Termination {
  double output_tol = 1.0;  // stop when |y - yf|_2 falls below this
  int max_steps = 2000;
};

// One executed run. Columns of x and y are steps 0..N, columns of u are steps
// 0..N-1 where N = steps(). switch_times is aligned with the planned path:
// entry k is the first step with node path[k] active, -1 if the run never
// activated it (skip-ahead jumps, or termination before reaching it).
struct PlanResult {
  std::vector<int> path;
  std::vector<int> switch_times;
  MatrixXd x;
  MatrixXd u;
  MatrixXd y;
  std::vector<int> node_at;     // active node id per input column; -1 for runs without nodes
  std::vector<bool> feasible_u; // per input column, membership in U with interior slack
  std::vector<bool> feasible_y; // per state column, membership in Y with interior slack
  double cost = 0.0;
  StopReason reason = StopReason::Converged;

  int steps() const { return static_cast<int>(u.cols()); }
};

// J = sum_{t<N} (x - xf)'Q(x - xf) + (u - uf)'R(u - uf), plus the state term
// at N itself, all about the target equilibrium. stop_time < 0 means the full
// recorded run.
inline double evaluate_cost(const PlanResult& run, const CostModel& cost,
                            const Equilibrium& target, int stop_time = -1) {
  const int N = stop_time < 0 ? run.steps() : stop_time;
  require(N >= 0 && N <= run.steps() && run.x.cols() > N, ErrorCode::DimensionError,
          "trajectory shorter than the requested stop time");
  double J = 0.0;
  for (int t = 0; t < N; ++t) {
    const VectorXd dx = run.x.col(t) - target.xbar;
    const VectorXd du = run.u.col(t) - target.ubar;
    J += dx.dot(cost.Q * dx) + du.dot(cost.R * du);
  }
  const VectorXd dx = run.x.col(N) - target.xbar;
  return J + dx.dot(cost.Q * dx);
}

namespace detail {

struct RunRecorder {
  std::vector<VectorXd> xs, us, ys;

  void pack(PlanResult& out) const {
    const int N = static_cast<int>(us.size());
    out.x.resize(xs.front().size(), N + 1);
    out.y.resize(ys.front().size(), N + 1);
    out.u.resize(N > 0 ? us.front().size() : 0, N);
    for (int t = 0; t <= N; ++t) {
      out.x.col(t) = xs[t];
      out.y.col(t) = ys[t];
    }
    for (int t = 0; t < N; ++t) out.u.col(t) = us[t];
  }
};

}  // namespace detail

// Closed-loop execution of a node sequence from x0. At each step the state is
// tested against the next node's set and the index advances on membership,
// otherwise the current law is held; the run stops once the final node is
// active and the output is within termination.output_tol of the target
// equilibrium output, or with reason Timeout after max_steps inputs. A path
// whose last node parks farther from the target than the tolerance therefore
// times out rather than claiming convergence. skip_ahead instead advances to
// the farthest path node whose set contains the state; it is off by default
// because it changes which sets certify the run.
inline PlanResult execute(const LTISystem& sys, const ControllerGraph& g,
                          const UnionOfPolytopes& Y, const Polytope& U,
                          const CostModel& cost, const std::vector<int>& path,
                          const Equilibrium& target, const VectorXd& x0,
                          const Termination& term = {}, bool skip_ahead = false) {
  require(!path.empty(), ErrorCode::A1Violated, "empty controller sequence");
  const int last = static_cast<int>(path.size()) - 1;
  for (int id : path)
    require(id >= 0 && id < g.num_nodes(), ErrorCode::DimensionError,
            "path references a missing node");
  require(g.nodes[path[0]].set_contains(x0), ErrorCode::A2Violated,
          "start state is outside the first controller's set");

  PlanResult out;
  out.path = path;
  out.switch_times.assign(path.size(), -1);
  out.switch_times[0] = 0;

  detail::RunRecorder rec;
  VectorXd x = x0;
  int i = 0;
  for (int t = 0;; ++t) {
    const VectorXd y = sys.C * x;
    rec.xs.push_back(x);
    rec.ys.push_back(y);
    out.feasible_y.push_back(Y.contains(y, kInteriorTol));

    if (skip_ahead) {
      for (int j = last; j > i; --j)
        if (g.nodes[path[j]].set_contains(x)) {
          i = j;
          out.switch_times[j] = t;
          break;
        }
    } else if (i < last && g.nodes[path[i + 1]].set_contains(x)) {
      ++i;
      out.switch_times[i] = t;
    }

    if (i == last && (y - target.ybar).norm() <= term.output_tol) {
      out.reason = StopReason::Converged;
      break;
    }
    if (t == term.max_steps) {
      out.reason = StopReason::Timeout;
      break;
    }

    const LocalController& nd = g.nodes[path[i]];
    const VectorXd u = nd.F * (x - nd.eq.xbar) + nd.eq.ubar;
    rec.us.push_back(u);
    out.node_at.push_back(nd.id);
    out.feasible_u.push_back(U.contains(u, kInteriorTol));
    x = sys.A * x + sys.B * u;
  }

  rec.pack(out);
  out.cost = evaluate_cost(out, cost, target);
  return out;
}

// Unswitched LQR regulation to the target equilibrium from x0, recording the
// same per-step feasibility annotations. No set membership is enforced, so
// the annotations are where constraint violations show up.
inline PlanResult baseline_lqr_run(const LTISystem& sys, const CostModel& cost,
                                   const UnionOfPolytopes& Y, const Polytope& U,
                                   const Equilibrium& target, const VectorXd& x0,
                                   const Termination& term = {}) {
  const DareSolution lqr = solve_dare(sys, cost);

  PlanResult out;
  detail::RunRecorder rec;
  VectorXd x = x0;
  for (int t = 0;; ++t) {
    const VectorXd y = sys.C * x;
    rec.xs.push_back(x);
    rec.ys.push_back(y);
    out.feasible_y.push_back(Y.contains(y, kInteriorTol));

    if ((y - target.ybar).norm() <= term.output_tol) {
      out.reason = StopReason::Converged;
      break;
    }
    if (t == term.max_steps) {
      out.reason = StopReason::Timeout;
      break;
    }

    const VectorXd u = lqr.F * (x - target.xbar) + target.ubar;
    rec.us.push_back(u);
    out.node_at.push_back(-1);
    out.feasible_u.push_back(U.contains(u, kInteriorTol));
    x = sys.A * x + sys.B * u;
  }

  rec.pack(out);
  out.cost = evaluate_cost(out, cost, target);
  return out;
}

}  // namespace invpath
