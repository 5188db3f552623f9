// Command-line front end for the planning pipeline. Subcommands cut the
// pipeline at its stage boundaries; every subcommand accepts the same flags.
// Exit codes: 0 success, 2 scenario or validation problem, 3 I/O failure,
// 4 run hit the step limit, 10/11/12 planning assumption violations, 1 other.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <invpath/pipeline.hpp>

namespace {

struct Options {
  std::string scenario;
  std::string method;
  std::optional<double> grid;
  std::optional<unsigned> seed;
  std::string out_dir;
  bool skip_ahead = false;
};

int exit_code_for(invpath::ErrorCode code) {
  using invpath::ErrorCode;
  switch (code) {
    case ErrorCode::IoError: return 3;
    case ErrorCode::A1Violated: return 10;
    case ErrorCode::A2Violated: return 11;
    case ErrorCode::A3Violated: return 12;
    case ErrorCode::ParseError:
    case ErrorCode::InvalidScenario:
    case ErrorCode::DimensionError:
    case ErrorCode::OutsideFreeSpace:
    case ErrorCode::EmptySet:
    case ErrorCode::Unbounded:
    case ErrorCode::NotPositiveDefinite:
    case ErrorCode::NotControllable:
    case ErrorCode::NoEquilibrium:
    case ErrorCode::NoInteriorEquilibrium:
    case ErrorCode::NonUniqueEquilibrium:
    case ErrorCode::InfeasibleSample:
    case ErrorCode::EmptyGrid:
    case ErrorCode::EmptyGraph:
      return 2;
    default:
      return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Plans constraint-satisfying trajectories over a graph of invariant-set controllers"};
  app.require_subcommand(1);

  Options o;
  auto add_common = [&o](CLI::App* cmd, bool out_required) {
    cmd->add_option("--scenario", o.scenario, "scenario file to load")->required();
    cmd->add_option("--method", o.method,
                    "design method override: fixed-gain-lqr, sdp, or sdp-fixed-gain");
    cmd->add_option("--grid", o.grid, "uniform grid spacing override");
    cmd->add_option("--seed", o.seed, "random seed override");
    auto* od = cmd->add_option("--out-dir", o.out_dir, "directory for the artifact bundle");
    if (out_required) od->required();
    cmd->add_flag("--skip-ahead", o.skip_ahead,
                  "switch to the farthest path controller whose set holds the state");
  };
  add_common(app.add_subcommand("check", "validate the scenario and test route existence"), false);
  add_common(app.add_subcommand("build", "construct the controller graph"), false);
  add_common(app.add_subcommand("plan", "search the graph for a controller sequence"), false);
  add_common(app.add_subcommand("run", "execute the planned sequence in closed loop"), false);
  add_common(app.add_subcommand("export", "run and write the full artifact bundle"), true);

  CLI11_PARSE(app, argc, argv);
  const std::string cmd = app.get_subcommands().front()->get_name();

  try {
    invpath::Scenario scn = invpath::load_scenario(o.scenario);
    if (!o.method.empty()) {
      const auto m = invpath::parse_design_method(o.method);
      if (!m) {
        std::cerr << "error: unknown design method '" << o.method << "'\n";
        return 2;
      }
      scn.method = *m;
    }
    if (o.grid) {
      if (*o.grid <= 0.0) {
        std::cerr << "error: grid spacing must be positive\n";
        return 2;
      }
      scn.grid_spacing = invpath::VectorXd::Constant(scn.sys.ny(), *o.grid);
      scn.grid_defaulted = false;
    }
    if (o.seed) scn.seed = *o.seed;

    invpath::PipelineOptions popt;
    popt.out_dir = o.out_dir;
    popt.skip_ahead = o.skip_ahead;
    popt.until = cmd == "check"   ? invpath::PipelineStage::Check
                 : cmd == "build" ? invpath::PipelineStage::Build
                 : cmd == "plan"  ? invpath::PipelineStage::Plan
                                  : invpath::PipelineStage::Run;

    const invpath::PipelineResult res = invpath::run_pipeline(scn, popt);

    std::cout << "scenario: " << (scn.name.empty() ? o.scenario : scn.name) << " ["
              << invpath::to_string(scn.method) << "]\n";
    std::cout << "free space: " << res.free_graph.count << " components, "
              << res.free_graph.edges.size() << " overlaps; "
              << (res.exists ? "route available" : "no route") << "\n";
    if (cmd == "check") return res.exists ? 0 : 12;

    std::cout << "grid: " << res.samples.size() << " samples at spacing";
    for (Eigen::Index i = 0; i < scn.grid_spacing.size(); ++i)
      std::cout << " " << scn.grid_spacing(i);
    std::cout << "\n";
    std::cout << "graph: " << res.graph.num_nodes() << " nodes, " << res.graph.num_edges()
              << " edges, " << res.failures.size() << " rejected samples\n";
    std::cout << "build time: " << res.timings.synthesize << " s synthesis, "
              << res.timings.graph << " s edges\n";
    if (cmd == "build") {
      if (!o.out_dir.empty()) std::cout << "artifacts: " << o.out_dir << "\n";
      return 0;
    }

    std::cout << "path: " << res.path.nodes.size() << " controllers, weight " << res.path.cost
              << ", ids";
    for (int id : res.path.nodes) std::cout << " " << id;
    std::cout << "\n";
    if (cmd == "plan") {
      if (!o.out_dir.empty()) std::cout << "artifacts: " << o.out_dir << "\n";
      return 0;
    }

    const invpath::PlanResult& run = *res.run;
    int bad_u = 0, bad_y = 0;
    for (bool ok : run.feasible_u) bad_u += ok ? 0 : 1;
    for (bool ok : run.feasible_y) bad_y += ok ? 0 : 1;
    std::cout << "run: " << run.steps() << " steps, " << invpath::to_string(run.reason)
              << ", cost " << run.cost << "\n";
    std::cout << "final output error: " << (run.y.col(run.steps()) - scn.yf).norm() << "\n";
    std::cout << "constraint violations: " << bad_u << " input, " << bad_y << " output\n";
    if (!o.out_dir.empty()) std::cout << "artifacts: " << o.out_dir << "\n";
    return run.reason == invpath::StopReason::Timeout ? 4 : 0;
  } catch (const invpath::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
