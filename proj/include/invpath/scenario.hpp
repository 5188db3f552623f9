#pragma once
// Scenario files: a JSON description of one planning problem (system, sets,
// endpoints, cost, method). Matrices are nested row-major arrays. The schema
// is documented in the README next to the bundled files.

#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include <invpath/graph.hpp>
#include <invpath/planner.hpp>

namespace invpath {

// Spacing used when a scenario omits its grid block. Recorded in the run
// metadata so coarse defaults are visible in the artifacts.
inline constexpr double kDefaultGridSpacing = 50.0;

struct Scenario {
  std::string name;
  LTISystem sys;  // discrete; sys.origin holds the continuous form if given
  Polytope U;
  UnionOfPolytopes Y;
  VectorXd y0;
  VectorXd yf;
  std::optional<VectorXd> x0;  // absent: start from the equilibrium for y0
  VectorXd grid_spacing;       // per output dimension
  bool grid_defaulted = false;
  DesignMethod method = DesignMethod::FixedGainLqr;
  CostModel cost;
  Termination termination;
  unsigned seed = 0;
};

namespace detail {

using nlohmann::json;

inline const json& member(const json& j, const char* key, const char* where) {
  auto it = j.find(key);
  require(it != j.end(), ErrorCode::InvalidScenario,
          std::string(where) + ": missing field '" + key + "'");
  return *it;
}

inline double scalar_field(const json& j, const char* where) {
  require(j.is_number(), ErrorCode::InvalidScenario,
          std::string(where) + ": expected a number");
  return j.get<double>();
}

inline VectorXd vector_field(const json& j, const char* where) {
  require(j.is_array(), ErrorCode::InvalidScenario,
          std::string(where) + ": expected an array of numbers");
  VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i)
    v(static_cast<Eigen::Index>(i)) =
        scalar_field(j[i], (std::string(where) + "[" + std::to_string(i) + "]").c_str());
  return v;
}

inline MatrixXd matrix_field(const json& j, const char* where) {
  require(j.is_array() && !j.empty(), ErrorCode::InvalidScenario,
          std::string(where) + ": expected a non-empty array of rows");
  MatrixXd M;
  for (size_t i = 0; i < j.size(); ++i) {
    const VectorXd row =
        vector_field(j[i], (std::string(where) + "[" + std::to_string(i) + "]").c_str());
    if (i == 0) M.resize(static_cast<Eigen::Index>(j.size()), row.size());
    require(row.size() == M.cols(), ErrorCode::InvalidScenario,
            std::string(where) + ": ragged rows");
    M.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return M;
}

inline Polytope polytope_field(const json& j, const char* where) {
  Polytope p;
  p.H = matrix_field(member(j, "H", where), (std::string(where) + ".H").c_str());
  p.K = vector_field(member(j, "K", where), (std::string(where) + ".K").c_str());
  require(p.K.size() == p.H.rows(), ErrorCode::InvalidScenario,
          std::string(where) + ": K length must match H rows");
  return p;
}

inline json to_json(const MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(i, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json to_json(const VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

}  // namespace detail

inline Scenario parse_scenario(const std::string& text, const std::string& origin = "scenario") {
  using detail::member;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::ParseError, origin + ": " + e.what());
  }
  require(j.is_object(), ErrorCode::InvalidScenario, origin + ": top level must be an object");

  Scenario scn;
  if (j.contains("name")) {
    require(j["name"].is_string(), ErrorCode::InvalidScenario, origin + ": name must be a string");
    scn.name = j["name"].get<std::string>();
  }

  const auto& sysj = member(j, "system", origin.c_str());
  scn.sys.C = detail::matrix_field(member(sysj, "C", "system"), "system.C");
  if (sysj.contains("continuous_A")) {
    const MatrixXd A_c = detail::matrix_field(sysj["continuous_A"], "system.continuous_A");
    const MatrixXd B_c =
        detail::matrix_field(member(sysj, "continuous_B", "system"), "system.continuous_B");
    const double T =
        detail::scalar_field(member(sysj, "sample_period", "system"), "system.sample_period");
    require(T > 0.0, ErrorCode::InvalidScenario, "system.sample_period must be positive");
    require(A_c.rows() == A_c.cols() && B_c.rows() == A_c.rows(), ErrorCode::DimensionError,
            "system: continuous matrices have inconsistent shapes");
    auto [A, B] = zoh_discretize(A_c, B_c, T);
    scn.sys.A = A;
    scn.sys.B = B;
    scn.sys.origin = ContinuousOrigin{A_c, B_c, T};
  } else {
    scn.sys.A = detail::matrix_field(member(sysj, "A", "system"), "system.A");
    scn.sys.B = detail::matrix_field(member(sysj, "B", "system"), "system.B");
  }
  scn.sys.validate();

  scn.U = detail::polytope_field(member(j, "input", origin.c_str()), "input");
  require(scn.U.H.cols() == scn.sys.nu(), ErrorCode::DimensionError,
          "input: H column count must equal the input dimension");
  scn.U.validate();

  const auto& comps = member(j, "output_components", origin.c_str());
  require(comps.is_array() && !comps.empty(), ErrorCode::InvalidScenario,
          "output_components: expected a non-empty array");
  for (size_t k = 0; k < comps.size(); ++k) {
    const std::string where = "output_components[" + std::to_string(k) + "]";
    Polytope Yk = detail::polytope_field(comps[k], where.c_str());
    require(Yk.H.cols() == scn.sys.ny(), ErrorCode::DimensionError,
            where + ": H column count must equal the output dimension");
    scn.Y.components.push_back(std::move(Yk));
  }
  scn.Y.validate();

  scn.y0 = detail::vector_field(member(j, "y0", origin.c_str()), "y0");
  scn.yf = detail::vector_field(member(j, "yf", origin.c_str()), "yf");
  require(scn.y0.size() == scn.sys.ny() && scn.yf.size() == scn.sys.ny(),
          ErrorCode::DimensionError, "y0/yf length must equal the output dimension");
  require(scn.Y.contains(scn.y0, kInteriorTol), ErrorCode::OutsideFreeSpace,
          "y0 is outside the output set");
  require(scn.Y.contains(scn.yf, kInteriorTol), ErrorCode::OutsideFreeSpace,
          "yf is outside the output set");

  if (j.contains("x0")) {
    VectorXd x0 = detail::vector_field(j["x0"], "x0");
    require(x0.size() == scn.sys.nx(), ErrorCode::DimensionError,
            "x0 length must equal the state dimension");
    scn.x0 = std::move(x0);
  }

  if (j.contains("grid_spacing")) {
    const auto& gj = j["grid_spacing"];
    scn.grid_spacing = gj.is_number()
                           ? VectorXd::Constant(scn.sys.ny(), gj.get<double>()).eval()
                           : detail::vector_field(gj, "grid_spacing");
    require(scn.grid_spacing.size() == scn.sys.ny(), ErrorCode::DimensionError,
            "grid_spacing length must equal the output dimension");
    require((scn.grid_spacing.array() > 0.0).all(), ErrorCode::InvalidScenario,
            "grid_spacing entries must be positive");
  } else {
    scn.grid_spacing = VectorXd::Constant(scn.sys.ny(), kDefaultGridSpacing);
    scn.grid_defaulted = true;
  }

  const auto& mj = member(j, "method", origin.c_str());
  require(mj.is_string(), ErrorCode::InvalidScenario, "method must be a string");
  const auto parsed = parse_design_method(mj.get<std::string>());
  require(parsed.has_value(), ErrorCode::InvalidScenario,
          "method: unknown design method '" + mj.get<std::string>() + "'");
  scn.method = *parsed;

  const auto& cj = member(j, "cost", origin.c_str());
  scn.cost.Q = detail::matrix_field(member(cj, "Q", "cost"), "cost.Q");
  scn.cost.R = detail::matrix_field(member(cj, "R", "cost"), "cost.R");
  require(scn.cost.Q.rows() == scn.sys.nx(), ErrorCode::DimensionError,
          "cost.Q must be state-dimensioned");
  require(scn.cost.R.rows() == scn.sys.nu(), ErrorCode::DimensionError,
          "cost.R must be input-dimensioned");
  scn.cost.validate();

  if (j.contains("termination")) {
    const auto& tj = j["termination"];
    if (tj.contains("output_tol"))
      scn.termination.output_tol = detail::scalar_field(tj["output_tol"], "termination.output_tol");
    if (tj.contains("max_steps")) {
      require(tj["max_steps"].is_number_integer(), ErrorCode::InvalidScenario,
              "termination.max_steps: expected an integer");
      scn.termination.max_steps = tj["max_steps"].get<int>();
    }
    require(scn.termination.output_tol > 0.0 && scn.termination.max_steps > 0,
            ErrorCode::InvalidScenario, "termination values must be positive");
  }

  if (j.contains("seed")) {
    require(j["seed"].is_number_unsigned(), ErrorCode::InvalidScenario,
            "seed: expected a non-negative integer");
    scn.seed = j["seed"].get<unsigned>();
  }
  return scn;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::IoError, "cannot open scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  require(!in.bad(), ErrorCode::IoError, "error while reading '" + path + "'");
  return parse_scenario(buf.str(), path);
}

inline std::string scenario_to_text(const Scenario& scn) {
  using detail::to_json;
  nlohmann::json j;
  if (!scn.name.empty()) j["name"] = scn.name;
  nlohmann::json sysj;
  if (scn.sys.origin) {
    sysj["continuous_A"] = to_json(scn.sys.origin->A_c);
    sysj["continuous_B"] = to_json(scn.sys.origin->B_c);
    sysj["sample_period"] = scn.sys.origin->sample_period;
  } else {
    sysj["A"] = to_json(scn.sys.A);
    sysj["B"] = to_json(scn.sys.B);
  }
  sysj["C"] = to_json(scn.sys.C);
  j["system"] = std::move(sysj);
  j["input"] = {{"H", to_json(scn.U.H)}, {"K", to_json(scn.U.K)}};
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& Yk : scn.Y.components)
    comps.push_back({{"H", to_json(Yk.H)}, {"K", to_json(Yk.K)}});
  j["output_components"] = std::move(comps);
  j["y0"] = to_json(scn.y0);
  j["yf"] = to_json(scn.yf);
  if (scn.x0) j["x0"] = to_json(*scn.x0);
  if (!scn.grid_defaulted) j["grid_spacing"] = to_json(scn.grid_spacing);
  j["method"] = to_string(scn.method);
  j["cost"] = {{"Q", to_json(scn.cost.Q)}, {"R", to_json(scn.cost.R)}};
  j["termination"] = {{"output_tol", scn.termination.output_tol},
                      {"max_steps", scn.termination.max_steps}};
  j["seed"] = scn.seed;
  return j.dump(2) + "\n";
}

inline void save_scenario(const Scenario& scn, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot open '" + path + "' for writing");
  out << scenario_to_text(scn);
  out.flush();
  require(out.good(), ErrorCode::IoError, "error while writing '" + path + "'");
}

}  // namespace invpath
