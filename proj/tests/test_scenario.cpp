#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "invpath/scenario.hpp"

#include "fixtures.hpp"
#include "test_support.hpp"

using namespace invpath;

namespace {

std::string bundled_path() { return std::string(REPO_ROOT) + "/scenarios/spacecraft.json"; }

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

nlohmann::json bundled_json() { return nlohmann::json::parse(read_file(bundled_path())); }

double max_abs_diff(const MatrixXd& a, const MatrixXd& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  return (a - b).cwiseAbs().maxCoeff();
}

// Minimal discrete-form file: a double integrator with one output interval.
const char* kIntegratorText = R"({
  "system": {"A": [[1.0, 1.0], [0.0, 1.0]], "B": [[0.5], [1.0]], "C": [[1.0, 0.0]]},
  "input": {"H": [[1.0], [-1.0]], "K": [10.0, 10.0]},
  "output_components": [{"H": [[1.0], [-1.0]], "K": [60.0, 60.0]}],
  "y0": [-5.0],
  "yf": [5.0],
  "x0": [-5.0, 0.0],
  "method": "sdp",
  "cost": {"Q": [[1.0, 0.0], [0.0, 1.0]], "R": [[1.0]]}
})";

}  // namespace

TEST_CASE("bundled spacecraft scenario matches the shared fixtures") {
  const Scenario scn = load_scenario(bundled_path());
  CHECK(scn.name == "spacecraft-rendezvous");
  CHECK(scn.sys.nx() == 4);
  CHECK(scn.sys.nu() == 2);
  CHECK(scn.sys.ny() == 2);
  CHECK(scn.Y.components.size() == 4);
  REQUIRE(scn.sys.origin.has_value());
  CHECK(scn.sys.origin->sample_period == fixtures::kSamplePeriod);

  const LTISystem fix = fixtures::spacecraft_system();
  CHECK(max_abs_diff(scn.sys.A, fix.A) == 0.0);
  CHECK(max_abs_diff(scn.sys.B, fix.B) == 0.0);
  CHECK(max_abs_diff(scn.sys.C, fix.C) == 0.0);

  const Polytope U = fixtures::input_box();
  CHECK(max_abs_diff(scn.U.H, U.H) == 0.0);
  CHECK(max_abs_diff(scn.U.K, U.K) == 0.0);
  const UnionOfPolytopes Y = fixtures::rendezvous_free_space();
  for (size_t k = 0; k < 4; ++k) {
    CHECK(max_abs_diff(scn.Y.components[k].H, Y.components[k].H) == 0.0);
    CHECK(max_abs_diff(scn.Y.components[k].K, Y.components[k].K) == 0.0);
  }

  CHECK(max_abs_diff(scn.y0, fixtures::start_output()) == 0.0);
  CHECK(max_abs_diff(scn.yf, fixtures::goal_output()) == 0.0);
  CHECK_FALSE(scn.x0.has_value());
  CHECK(max_abs_diff(scn.grid_spacing, VectorXd::Constant(2, 16.0)) == 0.0);
  CHECK_FALSE(scn.grid_defaulted);
  CHECK(scn.method == DesignMethod::FixedGainLqr);

  const CostModel cost = fixtures::spacecraft_cost();
  CHECK(max_abs_diff(scn.cost.Q, cost.Q) == 0.0);
  CHECK(max_abs_diff(scn.cost.R, cost.R) == 0.0);
  CHECK(scn.termination.output_tol == 1.0);
  CHECK(scn.termination.max_steps == 2000);
  CHECK(scn.seed == 0u);
}

TEST_CASE("discrete-form scenario loads with defaults") {
  const Scenario scn = parse_scenario(kIntegratorText);
  CHECK(scn.name.empty());
  CHECK_FALSE(scn.sys.origin.has_value());
  CHECK(scn.sys.nx() == 2);
  CHECK(scn.sys.nu() == 1);
  CHECK(scn.sys.ny() == 1);
  REQUIRE(scn.x0.has_value());
  CHECK(max_abs_diff(*scn.x0, VectorXd{{-5.0, 0.0}}) == 0.0);
  CHECK(scn.method == DesignMethod::Sdp);
  CHECK(scn.grid_defaulted);
  CHECK(max_abs_diff(scn.grid_spacing, VectorXd::Constant(1, kDefaultGridSpacing)) == 0.0);
  CHECK(scn.termination.output_tol == 1.0);
  CHECK(scn.termination.max_steps == 2000);
  CHECK(scn.seed == 0u);
}

TEST_CASE("endpoints outside the free space are rejected at load") {
  nlohmann::json j = bundled_json();
  j["y0"] = {300.0, 400.0};  // keep-out square center
  CHECK_THROWS_MATCHES(parse_scenario(j.dump()), Error, ErrorCodeIs(ErrorCode::OutsideFreeSpace));

  j = bundled_json();
  j["yf"] = {260.0, 360.0};
  CHECK_THROWS_MATCHES(parse_scenario(j.dump()), Error, ErrorCodeIs(ErrorCode::OutsideFreeSpace));
}

TEST_CASE("dimension mismatches are rejected at load") {
  SECTION("input matrix column count") {
    nlohmann::json j = bundled_json();
    j["system"]["continuous_B"] = {{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, {1.0, 0.0, 0.0},
                                   {0.0, 1.0, 0.0}};
    CHECK_THROWS_MATCHES(parse_scenario(j.dump()), Error, ErrorCodeIs(ErrorCode::DimensionError));
  }
  SECTION("endpoint length") {
    nlohmann::json j = bundled_json();
    j["y0"] = {450.0};
    CHECK_THROWS_MATCHES(parse_scenario(j.dump()), Error, ErrorCodeIs(ErrorCode::DimensionError));
  }
  SECTION("start state length") {
    nlohmann::json j = bundled_json();
    j["x0"] = {450.0, 650.0};
    CHECK_THROWS_MATCHES(parse_scenario(j.dump()), Error, ErrorCodeIs(ErrorCode::DimensionError));
  }
  SECTION("grid spacing length") {
    nlohmann::json j = bundled_json();
    j["grid_spacing"] = {16.0};
    CHECK_THROWS_MATCHES(parse_scenario(j.dump()), Error, ErrorCodeIs(ErrorCode::DimensionError));
  }
  SECTION("output component column count") {
    nlohmann::json j = bundled_json();
    j["output_components"][0]["H"] = {{1.0, 0.0, 0.0}};
    j["output_components"][0]["K"] = {250.0};
    CHECK_THROWS_MATCHES(parse_scenario(j.dump()), Error, ErrorCodeIs(ErrorCode::DimensionError));
  }
}

TEST_CASE("malformed scenario text is rejected with distinct codes") {
  CHECK_THROWS_MATCHES(parse_scenario("not json at all {"), Error,
                       ErrorCodeIs(ErrorCode::ParseError));
  CHECK_THROWS_MATCHES(parse_scenario("[1, 2, 3]"), Error,
                       ErrorCodeIs(ErrorCode::InvalidScenario));

  nlohmann::json j = bundled_json();
  j.erase("y0");
  CHECK_THROWS_MATCHES(parse_scenario(j.dump()), Error, ErrorCodeIs(ErrorCode::InvalidScenario));

  j = bundled_json();
  j["method"] = "gradient-descent";
  CHECK_THROWS_MATCHES(parse_scenario(j.dump()), Error, ErrorCodeIs(ErrorCode::InvalidScenario));

  j = bundled_json();
  j["grid_spacing"] = -5.0;
  CHECK_THROWS_MATCHES(parse_scenario(j.dump()), Error, ErrorCodeIs(ErrorCode::InvalidScenario));

  j = bundled_json();
  j["input"]["K"] = {0.01, 0.01};
  CHECK_THROWS_MATCHES(parse_scenario(j.dump()), Error, ErrorCodeIs(ErrorCode::InvalidScenario));

  j = bundled_json();
  j["system"]["C"] = {{1.0, 0.0, 0.0, 0.0}, {0.0, 1.0}};
  CHECK_THROWS_MATCHES(parse_scenario(j.dump()), Error, ErrorCodeIs(ErrorCode::InvalidScenario));

  j = bundled_json();
  j["system"]["sample_period"] = 0.0;
  CHECK_THROWS_MATCHES(parse_scenario(j.dump()), Error, ErrorCodeIs(ErrorCode::InvalidScenario));

  j = bundled_json();
  j["termination"]["max_steps"] = 0;
  CHECK_THROWS_MATCHES(parse_scenario(j.dump()), Error, ErrorCodeIs(ErrorCode::InvalidScenario));

  j = bundled_json();
  j["seed"] = -1;
  CHECK_THROWS_MATCHES(parse_scenario(j.dump()), Error, ErrorCodeIs(ErrorCode::InvalidScenario));
}

TEST_CASE("missing files raise an i/o error") {
  CHECK_THROWS_MATCHES(load_scenario(std::string(REPO_ROOT) + "/scenarios/absent.json"), Error,
                       ErrorCodeIs(ErrorCode::IoError));
}

TEST_CASE("per-axis grid spacing is honored") {
  nlohmann::json j = bundled_json();
  j["grid_spacing"] = {16.0, 20.0};
  const Scenario scn = parse_scenario(j.dump());
  CHECK(scn.grid_spacing(0) == 16.0);
  CHECK(scn.grid_spacing(1) == 20.0);
  CHECK_FALSE(scn.grid_defaulted);
}

TEST_CASE("save and load round-trip field for field") {
  SECTION("bundled continuous-form scenario") {
    const Scenario first = load_scenario(bundled_path());
    const std::string saved = scenario_to_text(first);
    const Scenario second = parse_scenario(saved);
    CHECK(scenario_to_text(second) == saved);

    CHECK(second.name == first.name);
    CHECK(max_abs_diff(second.sys.A, first.sys.A) == 0.0);
    CHECK(max_abs_diff(second.sys.B, first.sys.B) == 0.0);
    CHECK(max_abs_diff(second.sys.C, first.sys.C) == 0.0);
    REQUIRE(second.sys.origin.has_value());
    CHECK(max_abs_diff(second.sys.origin->A_c, first.sys.origin->A_c) == 0.0);
    CHECK(second.sys.origin->sample_period == first.sys.origin->sample_period);
    CHECK(max_abs_diff(second.U.H, first.U.H) == 0.0);
    REQUIRE(second.Y.components.size() == first.Y.components.size());
    for (size_t k = 0; k < first.Y.components.size(); ++k)
      CHECK(max_abs_diff(second.Y.components[k].K, first.Y.components[k].K) == 0.0);
    CHECK(max_abs_diff(second.y0, first.y0) == 0.0);
    CHECK(max_abs_diff(second.yf, first.yf) == 0.0);
    CHECK(second.x0.has_value() == first.x0.has_value());
    CHECK(max_abs_diff(second.grid_spacing, first.grid_spacing) == 0.0);
    CHECK(second.grid_defaulted == first.grid_defaulted);
    CHECK(second.method == first.method);
    CHECK(max_abs_diff(second.cost.Q, first.cost.Q) == 0.0);
    CHECK(max_abs_diff(second.cost.R, first.cost.R) == 0.0);
    CHECK(second.termination.output_tol == first.termination.output_tol);
    CHECK(second.termination.max_steps == first.termination.max_steps);
    CHECK(second.seed == first.seed);
  }
  SECTION("discrete-form scenario through a file") {
    const Scenario first = parse_scenario(kIntegratorText);
    const std::string path = "roundtrip_scenario.json";
    save_scenario(first, path);
    const Scenario second = load_scenario(path);
    CHECK(scenario_to_text(second) == scenario_to_text(first));
    CHECK_FALSE(second.sys.origin.has_value());
    CHECK(second.grid_defaulted);  // defaulted spacing is not written out
    REQUIRE(second.x0.has_value());
    CHECK(max_abs_diff(*second.x0, *first.x0) == 0.0);
  }
}
