#ifndef FPT_SCENARIO_HPP
#define FPT_SCENARIO_HPP

#include <string>

#include "fpt/geometry.hpp"
#include "fpt/montecarlo.hpp"
#include "fpt/volterra.hpp"

namespace fpt {

inline constexpr const char* kScenarioFormat = "fpt-scenario/1";

/// Closed-form reference the validate command compares the solver against.
enum class OracleKind { none, disk, halfplane };

/// Everything one CLI run needs. Thread counts are not part of it: they never change results.
struct Scenario {
  std::string name;
  ReferenceBoundary boundary;
  Vec2 marker = Vec2::Zero();
  VelocityField velocity;
  double flow_step = 1e-3;
  double horizon = 1.0;
  SourceSpec source;
  SolverConfig solver;
  McConfig montecarlo;  // horizon is always the domain horizon
  int survival_stride = 1;
  OracleKind oracle = OracleKind::none;
  std::string output = "out";

  MovingDomain domain() const;
  Vec2 start() const { return source.location(); }
  /// Range checks that need more than one field; throws ConfigError.
  void validate() const;
};

/// Parses scenario JSON. Syntax errors name `origin:line:column`, schema errors the dotted field
/// path. Both throw ConfigError.
Scenario parse_scenario(const std::string& text, const std::string& origin = "scenario");
Scenario load_scenario(const std::string& path);

/// Canonical JSON: every field present, fixed key order, two-space indent.
std::string serialize(const Scenario& scenario);
/// The same document on one line, for file headers.
std::string serialize_compact(const Scenario& scenario);

}  // namespace fpt

#endif  // FPT_SCENARIO_HPP
