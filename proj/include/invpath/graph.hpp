#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "invpath/error.hpp"
#include "invpath/geometry.hpp"
#include "invpath/lti.hpp"
#include "invpath/parallel.hpp"
#include "invpath/scaling.hpp"
#include "invpath/synthesis.hpp"

namespace invpath {

// An edge requires the source equilibrium strictly inside the target set;
// strictness is a relative margin on the level value.
inline constexpr double kEdgeMargin = 1e-9;

enum class DesignMethod { FixedGainLqr, Sdp, SdpFixedGain };

inline std::string to_string(DesignMethod m) {
  switch (m) {
    case DesignMethod::FixedGainLqr: return "fixed-gain-lqr";
    case DesignMethod::Sdp: return "sdp";
    case DesignMethod::SdpFixedGain: return "sdp-fixed-gain";
  }
  return "unknown";
}

inline std::optional<DesignMethod> parse_design_method(const std::string& name) {
  for (DesignMethod m : {DesignMethod::FixedGainLqr, DesignMethod::Sdp, DesignMethod::SdpFixedGain})
    if (name == to_string(m)) return m;
  return std::nullopt;
}

// One local controller: u = F (x - xbar) + ubar, valid on the rho-level set
// of (x - xbar)' P (x - xbar), designed inside free-space component k.
struct LocalController {
  int id = -1;
  MatrixXd F;
  MatrixXd P;
  double rho = 1.0;
  Equilibrium eq;
  int component = -1;

  double level(const VectorXd& x) const {
    const VectorXd d = x - eq.xbar;
    return d.dot(P * d);
  }
  bool set_contains(const VectorXd& x, double tol = 0.0) const {
    return level(x) <= rho * rho * (1.0 + tol);
  }
  Ellipsoid set() const { return Ellipsoid{eq.xbar, P, rho * rho}; }
};

struct GraphEdge {
  int from = -1;
  int to = -1;
  double weight = 0.0;
};

// Immutable after build; edges live in one array sorted by source with CSR
// offsets for traversal.
struct ControllerGraph {
  std::vector<LocalController> nodes;
  std::vector<GraphEdge> edges;
  std::vector<int> first;  // first[i]..first[i+1] index i's outgoing edges

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }

  void rebuild_index() {
    const int n = num_nodes();
    for (int i = 0; i < n; ++i)
      require(nodes[static_cast<size_t>(i)].id == i, ErrorCode::DimensionError,
              "node ids must equal their positions");
    for (const auto& e : edges) {
      require(e.from >= 0 && e.from < n && e.to >= 0 && e.to < n, ErrorCode::DimensionError,
              "edge endpoint out of range");
      require(e.from != e.to, ErrorCode::DimensionError, "self edges are excluded");
      require(e.weight >= 0.0, ErrorCode::DimensionError, "negative edge weight");
    }
    std::sort(edges.begin(), edges.end(), [](const GraphEdge& a, const GraphEdge& b) {
      return a.from != b.from ? a.from < b.from : a.to < b.to;
    });
    first.assign(static_cast<size_t>(n) + 1, 0);
    for (const auto& e : edges) ++first[static_cast<size_t>(e.from) + 1];
    for (int i = 0; i < n; ++i) first[static_cast<size_t>(i) + 1] += first[static_cast<size_t>(i)];
  }
};

// Convex free-space components with edges where interiors overlap.
struct FreeSpaceGraph {
  int count = 0;
  std::vector<std::pair<int, int>> edges;  // i < j; adjacency is symmetric
  std::vector<std::vector<int>> adj;

  bool connected() const {
    if (count <= 1) return true;
    std::vector<char> seen(static_cast<size_t>(count), 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    int reached = 1;
    while (!q.empty()) {
      const int v = q.front();
      q.pop();
      for (int w : adj[static_cast<size_t>(v)])
        if (!seen[static_cast<size_t>(w)]) {
          seen[static_cast<size_t>(w)] = 1;
          ++reached;
          q.push(w);
        }
    }
    return reached == count;
  }
};

inline FreeSpaceGraph build_free_space_graph(const UnionOfPolytopes& Y) {
  Y.validate();
  FreeSpaceGraph g;
  g.count = static_cast<int>(Y.components.size());
  g.adj.resize(static_cast<size_t>(g.count));
  for (int i = 0; i < g.count; ++i)
    for (int j = i + 1; j < g.count; ++j)
      if (intersection_interior_nonempty(Y.components[static_cast<size_t>(i)],
                                         Y.components[static_cast<size_t>(j)])) {
        g.edges.emplace_back(i, j);
        g.adj[static_cast<size_t>(i)].push_back(j);
        g.adj[static_cast<size_t>(j)].push_back(i);
      }
  return g;
}

// True iff some component holding y0 reaches some component holding yf.
inline bool existence_check(const UnionOfPolytopes& Y, const FreeSpaceGraph& g, const VectorXd& y0,
                            const VectorXd& yf) {
  require(g.count == static_cast<int>(Y.components.size()), ErrorCode::DimensionError,
          "free-space graph does not match the union");
  const std::vector<int> from = Y.containing_components(y0, kInteriorTol);
  require(!from.empty(), ErrorCode::OutsideFreeSpace, "initial output outside the free space");
  const std::vector<int> to = Y.containing_components(yf, kInteriorTol);
  require(!to.empty(), ErrorCode::OutsideFreeSpace, "target output outside the free space");

  std::vector<char> seen(static_cast<size_t>(g.count), 0);
  std::vector<char> is_goal(static_cast<size_t>(g.count), 0);
  for (int k : to) is_goal[static_cast<size_t>(k)] = 1;
  std::queue<int> q;
  for (int k : from) {
    seen[static_cast<size_t>(k)] = 1;
    q.push(k);
  }
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    if (is_goal[static_cast<size_t>(v)]) return true;
    for (int w : g.adj[static_cast<size_t>(v)])
      if (!seen[static_cast<size_t>(w)]) {
        seen[static_cast<size_t>(w)] = 1;
        q.push(w);
      }
  }
  return false;
}

struct OutputSample {
  VectorXd y;
  std::vector<int> components;
};

// Axis-aligned lattice over the bounding box of the union, anchored at the
// low corner. A sample survives when some component holds it within the
// interior tolerance; it is tagged with every such component.
inline std::vector<OutputSample> sample_grid(const UnionOfPolytopes& Y, const VectorXd& spacing) {
  const int d = Y.dim();
  require(spacing.size() == d, ErrorCode::DimensionError, "spacing dimension mismatch");
  require((spacing.array() > 0.0).all(), ErrorCode::DimensionError, "spacing must be positive");
  require(!Y.components.empty(), ErrorCode::EmptySet, "union has no components");

  VectorXd lo = bounding_box_low(Y.components.front());
  VectorXd hi = bounding_box_high(Y.components.front());
  for (size_t k = 1; k < Y.components.size(); ++k) {
    lo = lo.cwiseMin(bounding_box_low(Y.components[k]));
    hi = hi.cwiseMax(bounding_box_high(Y.components[k]));
  }

  std::vector<int> counts(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i)
    counts[static_cast<size_t>(i)] =
        static_cast<int>(std::floor((hi(i) - lo(i)) / spacing(i) + 1e-9)) + 1;

  std::vector<OutputSample> out;
  std::vector<int> idx(static_cast<size_t>(d), 0);
  for (;;) {
    VectorXd y(d);
    for (int i = 0; i < d; ++i) y(i) = lo(i) + idx[static_cast<size_t>(i)] * spacing(i);
    std::vector<int> comps = Y.containing_components(y, kInteriorTol);
    if (!comps.empty()) out.push_back(OutputSample{std::move(y), std::move(comps)});
    int i = d - 1;
    while (i >= 0 && ++idx[static_cast<size_t>(i)] >= counts[static_cast<size_t>(i)]) {
      idx[static_cast<size_t>(i)] = 0;
      --i;
    }
    if (i < 0) break;
  }
  require(!out.empty(), ErrorCode::EmptyGrid, "no grid sample lies in the free space");
  return out;
}

inline std::vector<OutputSample> sample_grid(const UnionOfPolytopes& Y, double spacing) {
  return sample_grid(Y, VectorXd::Constant(Y.dim(), spacing));
}

// Append one sample (start or target output) unless the lattice already hit
// that exact point.
inline void inject_sample(std::vector<OutputSample>& samples, const UnionOfPolytopes& Y,
                          const VectorXd& y) {
  for (const auto& s : samples)
    if ((s.y - y).lpNorm<Eigen::Infinity>() <= 1e-9) return;
  std::vector<int> comps = Y.containing_components(y, kInteriorTol);
  require(!comps.empty(), ErrorCode::OutsideFreeSpace, "injected sample outside the free space");
  samples.push_back(OutputSample{y, std::move(comps)});
}

struct NodeFailure {
  int sample = -1;
  int component = -1;
  ErrorCode code = ErrorCode::InfeasibleSample;
  std::string what;
};

struct GraphBuildOptions {
  DesignMethod method = DesignMethod::FixedGainLqr;
  SynthesisOptions synthesis;  // seed defaults to the shared LQR solution
};

// Wall-clock split of a build: controller construction versus weights, edge
// membership tests, and indexing.
struct GraphBuildTimings {
  double nodes = 0.0;
  double edges = 0.0;
};

// One node per (sample, component) pair whose design succeeds; recoverable
// per-sample failures are reported through `failures` and skipped. Weights
// use the infinite-horizon cost of steering the source equilibrium to the
// target one under the target's controller.
inline ControllerGraph build_graph(const LTISystem& sys, const std::vector<OutputSample>& samples,
                                   const UnionOfPolytopes& Y, const Polytope& U,
                                   const CostModel& cost, const GraphBuildOptions& opt = {},
                                   std::vector<NodeFailure>* failures = nullptr,
                                   GraphBuildTimings* timings = nullptr) {
  const auto t_start = std::chrono::steady_clock::now();
  const auto elapsed = [](std::chrono::steady_clock::time_point from) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - from).count();
  };
  const DareSolution lqr = solve_dare(sys, cost);
  SynthesisOptions syn = opt.synthesis;
  if (!syn.seed) syn.seed = lqr;

  struct Candidate {
    int sample;
    int component;
  };
  std::vector<Candidate> cand;
  for (size_t s = 0; s < samples.size(); ++s)
    for (int k : samples[s].components) cand.push_back(Candidate{static_cast<int>(s), k});

  std::vector<std::optional<LocalController>> made(cand.size());
  std::vector<std::optional<NodeFailure>> failed(cand.size());
  parallel_for(
      static_cast<int>(cand.size()),
      [&](int i) {
        const Candidate& c = cand[static_cast<size_t>(i)];
        const VectorXd& y = samples[static_cast<size_t>(c.sample)].y;
        const Polytope& Yk = Y.components[static_cast<size_t>(c.component)];
        try {
          LocalController node;
          node.component = c.component;
          if (opt.method == DesignMethod::FixedGainLqr) {
            EquilibriumResult eqr = equilibrium_for_output(sys, y);
            if (std::holds_alternative<Equilibrium>(eqr)) {
              node.eq = std::get<Equilibrium>(eqr);
              node.rho = max_scale_closed_form(sys, lqr.F, lqr.P, node.eq, Yk, U);
            } else {
              MaxScaleResult r = max_scale_lp(sys, lqr.F, lqr.P, y, Yk, U);
              node.eq = r.eq;
              node.rho = r.rho;
            }
            // Same slack gate as the design programs, so both methods accept
            // the same samples and near-boundary roundoff cannot sneak in a
            // vanishing set.
            detail::check_slacks(U, node.eq.ubar, syn.slack_reject);
            detail::check_slacks(Yk, node.eq.ybar, syn.slack_reject);
            require(node.rho > 0.0, ErrorCode::InfeasibleSample, "sample admits no positive scale");
            node.F = lqr.F;
            node.P = lqr.P;
          } else {
            node.eq = require_unique(equilibrium_for_output(sys, y));
            const SynthesisResult r =
                opt.method == DesignMethod::Sdp
                    ? synthesize_controller(sys, node.eq, Yk, U, syn)
                    : synthesize_pi_set_fixed_gain(sys, lqr.F, node.eq, Yk, U, syn);
            node.F = r.F;
            node.P = r.P;
            node.rho = 1.0;
          }
          made[static_cast<size_t>(i)] = std::move(node);
        } catch (const Error& e) {
          switch (e.code()) {
            case ErrorCode::InfeasibleSample:
            case ErrorCode::SolverFailure:
            case ErrorCode::NonUniqueEquilibrium:
            case ErrorCode::NoEquilibrium:
              failed[static_cast<size_t>(i)] =
                  NodeFailure{c.sample, c.component, e.code(), e.what()};
              break;
            default:
              throw;
          }
        }
      },
      1);

  ControllerGraph g;
  for (size_t i = 0; i < cand.size(); ++i) {
    if (made[i]) {
      made[i]->id = static_cast<int>(g.nodes.size());
      g.nodes.push_back(std::move(*made[i]));
    } else if (failed[i] && failures) {
      failures->push_back(std::move(*failed[i]));
    }
  }
  require(!g.nodes.empty(), ErrorCode::EmptyGraph, "no sample produced a controller");
  if (timings) timings->nodes = elapsed(t_start);
  const auto t_edges = std::chrono::steady_clock::now();

  const int n = g.num_nodes();
  std::vector<MatrixXd> S(static_cast<size_t>(n));
  if (opt.method == DesignMethod::FixedGainLqr) {
    // Shared gain: the steering cost matrix is the Riccati solution itself.
    for (auto& Sj : S) Sj = lqr.P;
  } else {
    parallel_for(
        n,
        [&](int j) {
          const LocalController& c = g.nodes[static_cast<size_t>(j)];
          S[static_cast<size_t>(j)] = solve_discrete_lyapunov(
              sys.A + sys.B * c.F, cost.Q + c.F.transpose() * cost.R * c.F);
        },
        4);
  }

  // lam_min(P) |d|^2 <= d'Pd, so any center farther than reach[j] from node j
  // cannot satisfy the membership test; the prune is exact.
  std::vector<double> reach2(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j) {
    const LocalController& c = g.nodes[static_cast<size_t>(j)];
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(c.P, Eigen::EigenvaluesOnly);
    reach2[static_cast<size_t>(j)] =
        c.rho * c.rho * (1.0 - kEdgeMargin) / es.eigenvalues().minCoeff();
  }

  std::vector<std::vector<GraphEdge>> rows(static_cast<size_t>(n));
  parallel_for(
      n,
      [&](int i) {
        for (int j = 0; j < n; ++j) {
          if (j == i) continue;
          const LocalController& target = g.nodes[static_cast<size_t>(j)];
          const VectorXd d = g.nodes[static_cast<size_t>(i)].eq.xbar - target.eq.xbar;
          if (d.squaredNorm() >= reach2[static_cast<size_t>(j)]) continue;
          if (d.dot(target.P * d) < target.rho * target.rho * (1.0 - kEdgeMargin))
            rows[static_cast<size_t>(i)].push_back(
                GraphEdge{i, j, d.dot(S[static_cast<size_t>(j)] * d)});
        }
      },
      8);
  for (auto& r : rows)
    for (auto& e : r) g.edges.push_back(e);
  g.rebuild_index();
  if (timings) timings->edges = elapsed(t_edges);
  return g;
}

// Re-run the solver-independent certificate on every stored node.
inline std::vector<VerifyReport> verify_graph(const LTISystem& sys, const ControllerGraph& g,
                                              const UnionOfPolytopes& Y, const Polytope& U,
                                              int sim_samples = 0, unsigned rng_seed = 1234u) {
  std::vector<VerifyReport> reps(g.nodes.size());
  parallel_for(
      g.num_nodes(),
      [&](int i) {
        const LocalController& c = g.nodes[static_cast<size_t>(i)];
        reps[static_cast<size_t>(i)] =
            verify_synthesis(sys, c.F, c.P, c.rho, c.eq, Y.components[static_cast<size_t>(c.component)],
                             U, sim_samples, rng_seed + static_cast<unsigned>(c.id));
      },
      1);
  return reps;
}

inline std::vector<int> nodes_containing_state(const ControllerGraph& g, const VectorXd& x,
                                               double tol = 0.0) {
  std::vector<int> out;
  for (const auto& c : g.nodes)
    if (c.set_contains(x, tol)) out.push_back(c.id);
  return out;
}

// Nodes whose set holds the target equilibrium state; with redundant inputs
// the minimum-norm family member stands in for it.
inline std::vector<int> nodes_for_goal(const ControllerGraph& g, const LTISystem& sys,
                                       const VectorXd& yf, double tol = 0.0) {
  EquilibriumResult r = equilibrium_for_output(sys, yf);
  const VectorXd xf = std::holds_alternative<Equilibrium>(r)
                          ? std::get<Equilibrium>(r).xbar
                          : std::get<EquilibriumFamily>(r).base.xbar;
  return nodes_containing_state(g, xf, tol);
}

// Nodes a run may terminate at: holding such a node drives the output to its
// equilibrium, which sits within the convergence tolerance of the target.
inline std::vector<int> nodes_for_target_output(const ControllerGraph& g, const VectorXd& yf,
                                                double output_tol) {
  std::vector<int> out;
  for (const auto& c : g.nodes)
    if ((c.eq.ybar - yf).norm() <= output_tol) out.push_back(c.id);
  return out;
}

struct PathResult {
  std::vector<int> nodes;
  double cost = std::numeric_limits<double>::infinity();
};

// Multi-source label-setting search; ties broken toward the smallest node id
// so repeated runs pick the same path.
inline PathResult shortest_path(const ControllerGraph& g, const std::vector<int>& start,
                                const std::vector<int>& goal) {
  require(!goal.empty(), ErrorCode::A1Violated, "no controller covers the target output");
  require(!start.empty(), ErrorCode::A2Violated, "no controller set holds the initial state");
  const int n = g.num_nodes();
  require(static_cast<int>(g.first.size()) == n + 1, ErrorCode::DimensionError,
          "graph index not built");
  auto in_range = [n](int v) { return v >= 0 && v < n; };

  std::vector<char> is_goal(static_cast<size_t>(n), 0);
  for (int v : goal) {
    require(in_range(v), ErrorCode::DimensionError, "goal id out of range");
    is_goal[static_cast<size_t>(v)] = 1;
  }
  std::vector<double> dist(static_cast<size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<int> pred(static_cast<size_t>(n), -1);
  std::vector<char> done(static_cast<size_t>(n), 0);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  for (int v : start) {
    require(in_range(v), ErrorCode::DimensionError, "start id out of range");
    if (dist[static_cast<size_t>(v)] != 0.0) {
      dist[static_cast<size_t>(v)] = 0.0;
      pq.emplace(0.0, v);
    }
  }

  while (!pq.empty()) {
    const auto [d, v] = pq.top();
    pq.pop();
    if (done[static_cast<size_t>(v)]) continue;
    done[static_cast<size_t>(v)] = 1;
    if (is_goal[static_cast<size_t>(v)]) {
      PathResult out;
      out.cost = d;
      for (int w = v; w != -1; w = pred[static_cast<size_t>(w)]) out.nodes.push_back(w);
      std::reverse(out.nodes.begin(), out.nodes.end());
      return out;
    }
    for (int e = g.first[static_cast<size_t>(v)]; e < g.first[static_cast<size_t>(v) + 1]; ++e) {
      const GraphEdge& edge = g.edges[static_cast<size_t>(e)];
      const double nd = d + edge.weight;
      if (nd < dist[static_cast<size_t>(edge.to)]) {
        dist[static_cast<size_t>(edge.to)] = nd;
        pred[static_cast<size_t>(edge.to)] = v;
        pq.emplace(nd, edge.to);
      }
    }
  }
  fail(ErrorCode::A3Violated, "no controller path from start to goal");
}

// Plain-text dump: one line per node and per edge, full precision.
inline std::string graph_adjacency_text(const ControllerGraph& g) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "controller-graph\n";
  os << "nodes " << g.num_nodes() << "\n";
  for (const auto& c : g.nodes) {
    os << "node " << c.id << " component " << c.component << " rho " << c.rho << " ybar";
    for (int i = 0; i < c.eq.ybar.size(); ++i) os << " " << c.eq.ybar(i);
    os << "\n";
  }
  os << "edges " << g.num_edges() << "\n";
  for (const auto& e : g.edges) os << "edge " << e.from << " " << e.to << " " << e.weight << "\n";
  return os.str();
}

inline std::string graph_dot(const ControllerGraph& g) {
  std::ostringstream os;
  os << "digraph controller_graph {\n";
  for (const auto& c : g.nodes)
    os << "  n" << c.id << " [label=\"" << c.id << " k" << c.component << "\"];\n";
  os << std::setprecision(4);
  for (const auto& e : g.edges)
    os << "  n" << e.from << " -> n" << e.to << " [label=\"" << e.weight << "\"];\n";
  os << "}\n";
  return os.str();
}

}  // namespace invpath
