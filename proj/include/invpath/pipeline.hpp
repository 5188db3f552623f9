#pragma once
// Runs a scenario end to end: free-space existence check, lattice sampling,
// controller synthesis, cost-weighted search, switched execution, and export
// of the artifact bundle. Every artifact except timings.json is deterministic
// for a fixed scenario, so bundles can be compared byte for byte.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <invpath/planner.hpp>
#include <invpath/scenario.hpp>

namespace invpath {

enum class PipelineStage { Check, Build, Plan, Run };

// graph.dot is skipped above this edge count; the text dump is always written.
inline constexpr int kDotEdgeCap = 200000;

struct PipelineOptions {
  PipelineStage until = PipelineStage::Run;
  std::string out_dir;  // empty: nothing is written
  bool skip_ahead = false;
};

// Wall-clock seconds per stage. `artifacts` is the export stage; it excludes
// the write of timings.json itself.
struct StageTimings {
  double check = 0.0;
  double grid = 0.0;
  double synthesize = 0.0;
  double graph = 0.0;
  double search = 0.0;
  double execute = 0.0;
  double artifacts = 0.0;
  double total = 0.0;

  double stage_sum() const {
    return check + grid + synthesize + graph + search + execute + artifacts;
  }
};

struct PipelineResult {
  FreeSpaceGraph free_graph;
  bool exists = false;
  std::vector<OutputSample> samples;
  ControllerGraph graph;
  std::vector<NodeFailure> failures;
  VectorXd x0;
  PathResult path;
  std::optional<PlanResult> run;
  bool dot_written = false;
  StageTimings timings;
};

// Projected set geometry, one line per node then one per edge. A node's row
// holds the output-space center C xbar and the row-major shape matrix M with
// C O_i = {y : (y - c)' M (y - c) <= 1}, the image of the state-space set
// under C for full-row-rank C.
inline std::string export_sets(const ControllerGraph& g, const MatrixXd& C) {
  const Eigen::Index d = C.rows();
  std::ostringstream os;
  os << std::setprecision(17);
  os << "projected-sets\n";
  os << "dim " << d << "\n";
  os << "nodes " << g.num_nodes() << "\n";
  for (const auto& c : g.nodes) {
    const MatrixXd shape =
        (c.rho * c.rho * C * c.P.llt().solve(C.transpose())).inverse();
    os << "node " << c.id << " component " << c.component << " center";
    for (Eigen::Index i = 0; i < d; ++i) os << " " << c.eq.ybar(i);
    os << " shape";
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) os << " " << shape(i, j);
    os << "\n";
  }
  os << "edges " << g.num_edges() << "\n";
  for (const auto& e : g.edges) os << "edge " << e.from << " " << e.to << " " << e.weight << "\n";
  return os.str();
}

// Comma-separated run table. The final row carries the terminal state and
// output only; its input, node, and input-feasibility cells stay empty.
inline std::string trajectory_csv(const PlanResult& run) {
  const Eigen::Index nx = run.x.rows();
  const Eigen::Index nu = run.u.rows();
  const Eigen::Index ny = run.y.rows();
  std::ostringstream os;
  os << std::setprecision(17);
  os << "t";
  for (Eigen::Index i = 0; i < nx; ++i) os << ",x" << i;
  for (Eigen::Index i = 0; i < nu; ++i) os << ",u" << i;
  for (Eigen::Index i = 0; i < ny; ++i) os << ",y" << i;
  os << ",node_id,feasible_u,feasible_y\n";
  const int N = run.steps();
  for (int t = 0; t <= N; ++t) {
    os << t;
    for (Eigen::Index i = 0; i < nx; ++i) os << "," << run.x(i, t);
    for (Eigen::Index i = 0; i < nu; ++i) {
      os << ",";
      if (t < N) os << run.u(i, t);
    }
    for (Eigen::Index i = 0; i < ny; ++i) os << "," << run.y(i, t);
    os << ",";
    if (t < N) os << run.node_at[static_cast<size_t>(t)];
    os << ",";
    if (t < N) os << (run.feasible_u[static_cast<size_t>(t)] ? 1 : 0);
    os << "," << (run.feasible_y[static_cast<size_t>(t)] ? 1 : 0) << "\n";
  }
  return os.str();
}

namespace detail {

inline Equilibrium goal_equilibrium(const LTISystem& sys, const VectorXd& y) {
  EquilibriumResult r = equilibrium_for_output(sys, y);
  return std::holds_alternative<Equilibrium>(r) ? std::get<Equilibrium>(r)
                                                : std::get<EquilibriumFamily>(r).base;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::IoError, "cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  require(out.good(), ErrorCode::IoError, "error while writing '" + path + "'");
}

inline nlohmann::json pipeline_summary(const Scenario& scn, const PipelineOptions& opt,
                                       const PipelineResult& res) {
  nlohmann::json j;
  j["name"] = scn.name;
  j["method"] = to_string(scn.method);
  j["seed"] = scn.seed;
  j["existence"] = res.exists;
  j["flags"] = {{"grid_defaulted", scn.grid_defaulted},
                {"dot_written", res.dot_written},
                {"skip_ahead", opt.skip_ahead}};
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& e : res.free_graph.edges) comps.push_back({e.first, e.second});
  j["free_space"] = {{"components", res.free_graph.count}, {"overlaps", std::move(comps)}};
  if (!res.samples.empty()) {
    j["grid"] = {{"spacing", to_json(scn.grid_spacing)}, {"samples", res.samples.size()}};
    j["graph"] = {{"nodes", res.graph.num_nodes()},
                  {"edges", res.graph.num_edges()},
                  {"failures", res.failures.size()}};
  }
  if (!res.path.nodes.empty()) {
    j["path"] = {{"nodes", res.path.nodes}, {"weight", res.path.cost}};
  }
  if (res.run) {
    const PlanResult& run = *res.run;
    int bad_u = 0, bad_y = 0;
    for (bool ok : run.feasible_u) bad_u += ok ? 0 : 1;
    for (bool ok : run.feasible_y) bad_y += ok ? 0 : 1;
    j["run"] = {{"steps", run.steps()},
                {"reason", to_string(run.reason)},
                {"cost", run.cost},
                {"final_output_error", (run.y.col(run.steps()) - scn.yf).norm()},
                {"switch_times", run.switch_times},
                {"input_violations", bad_u},
                {"output_violations", bad_y}};
  }
  return j;
}

inline nlohmann::json timings_json(const StageTimings& t) {
  return {{"check", t.check},     {"grid", t.grid},       {"synthesize", t.synthesize},
          {"graph", t.graph},     {"search", t.search},   {"execute", t.execute},
          {"export", t.artifacts}, {"total", t.total}};
}

}  // namespace detail

inline PipelineResult run_pipeline(const Scenario& scn, const PipelineOptions& opt = {}) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  auto last = t0;
  auto lap = [&last] {
    const auto now = clock::now();
    const double s = std::chrono::duration<double>(now - last).count();
    last = now;
    return s;
  };

  PipelineResult res;
  scn.sys.validate();
  scn.U.validate();
  scn.Y.validate();
  scn.cost.validate();
  res.free_graph = build_free_space_graph(scn.Y);
  res.exists = existence_check(scn.Y, res.free_graph, scn.y0, scn.yf);
  res.timings.check = lap();

  if (opt.until >= PipelineStage::Build) {
    require(res.exists, ErrorCode::A3Violated,
            "existence check failed: the free space admits no route from y0 to yf");
    res.samples = sample_grid(scn.Y, scn.grid_spacing);
    inject_sample(res.samples, scn.Y, scn.y0);
    inject_sample(res.samples, scn.Y, scn.yf);
    res.timings.grid = lap();

    GraphBuildOptions gopt;
    gopt.method = scn.method;
    GraphBuildTimings bt;
    res.graph = build_graph(scn.sys, res.samples, scn.Y, scn.U, scn.cost, gopt, &res.failures, &bt);
    const double build_wall = lap();
    res.timings.synthesize = bt.nodes;
    res.timings.graph = build_wall - bt.nodes;
  }

  if (opt.until >= PipelineStage::Plan) {
    res.x0 = scn.x0 ? *scn.x0 : detail::goal_equilibrium(scn.sys, scn.y0).xbar;
    const std::vector<int> start = nodes_containing_state(res.graph, res.x0);
    // Terminate only at nodes able to satisfy the stop rule: holding the node's
    // controller converges to its equilibrium output, which must lie within the
    // output tolerance of yf.  The injected yf sample guarantees at least one.
    const std::vector<int> goal =
        nodes_for_target_output(res.graph, scn.yf, scn.termination.output_tol);
    res.path = shortest_path(res.graph, start, goal);
    res.timings.search = lap();
  }

  if (opt.until >= PipelineStage::Run) {
    const Equilibrium target = detail::goal_equilibrium(scn.sys, scn.yf);
    res.run = execute(scn.sys, res.graph, scn.Y, scn.U, scn.cost, res.path.nodes, target, res.x0,
                      scn.termination, opt.skip_ahead);
    res.timings.execute = lap();
  }

  if (!opt.out_dir.empty()) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(opt.out_dir, ec);
    require(!ec, ErrorCode::IoError, "cannot create output directory '" + opt.out_dir + "'");
    const auto in_dir = [&](const char* name) { return (fs::path(opt.out_dir) / name).string(); };

    if (opt.until >= PipelineStage::Build) {
      detail::write_text_file(in_dir("graph.txt"), graph_adjacency_text(res.graph));
      if (res.graph.num_edges() <= kDotEdgeCap) {
        detail::write_text_file(in_dir("graph.dot"), graph_dot(res.graph));
        res.dot_written = true;
      }
      if (res.graph.num_nodes() == 0)
        std::cerr << "warning: graph has no nodes; set export is empty\n";
      detail::write_text_file(in_dir("sets.txt"), export_sets(res.graph, scn.sys.C));
    }
    if (res.run) detail::write_text_file(in_dir("trajectory.csv"), trajectory_csv(*res.run));
    detail::write_text_file(in_dir("summary.json"),
                            detail::pipeline_summary(scn, opt, res).dump(2) + "\n");
    res.timings.artifacts = lap();
    res.timings.total = std::chrono::duration<double>(clock::now() - t0).count();
    detail::write_text_file(in_dir("timings.json"),
                            detail::timings_json(res.timings).dump(2) + "\n");
  } else {
    res.timings.total = std::chrono::duration<double>(clock::now() - t0).count();
  }
  return res;
}

}  // namespace invpath
