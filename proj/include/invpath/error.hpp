#pragma once

#include <stdexcept>
#include <string>

namespace invpath {

// Failure categories surfaced by the library. Planning-assumption failures
// (A1/A2/A3) map to the switching-law prerequisites: a controller at the
// target output, a PI set containing the initial state, and graph
// connectivity between them.
enum class ErrorCode {
  EmptySet,
  Unbounded,
  DimensionError,
  NotPositiveDefinite,
  NotControllable,
  NoEquilibrium,
  NoInteriorEquilibrium,
  NonUniqueEquilibrium,
  SolverFailure,
  NotStable,
  InfeasibleSample,
  OutsideFreeSpace,
  EmptyGrid,
  EmptyGraph,
  A1Violated,
  A2Violated,
  A3Violated,
  ParseError,
  IoError,
  InvalidScenario,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::Unbounded: return "Unbounded";
    case ErrorCode::DimensionError: return "DimensionError";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::NotControllable: return "NotControllable";
    case ErrorCode::NoEquilibrium: return "NoEquilibrium";
    case ErrorCode::NoInteriorEquilibrium: return "NoInteriorEquilibrium";
    case ErrorCode::NonUniqueEquilibrium: return "NonUniqueEquilibrium";
    case ErrorCode::SolverFailure: return "SolverFailure";
    case ErrorCode::NotStable: return "NotStable";
    case ErrorCode::InfeasibleSample: return "InfeasibleSample";
    case ErrorCode::OutsideFreeSpace: return "OutsideFreeSpace";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::EmptyGraph: return "EmptyGraph";
    case ErrorCode::A1Violated: return "A1Violated";
    case ErrorCode::A2Violated: return "A2Violated";
    case ErrorCode::A3Violated: return "A3Violated";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidScenario: return "InvalidScenario";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace invpath
