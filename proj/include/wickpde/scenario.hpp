#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wickpde/propagator.hpp"

namespace wickpde {

/// One coefficient of a scenario field: either an inline value array or a
/// named analytic shape scaled by an amplitude.
struct FieldEntrySpec {
  MultiIndex index;
  std::string kind;  // "constant" | "sine" | "bump" | "values"
  double amplitude = 0.0;
  int mode = 1;         // sine: sin(mode pi x)
  double center = 0.5;  // bump parameters
  double width = 0.1;
  std::vector<double> values;  // kind == "values": J + 1 samples
};

/// Family rule filling every admitted index that has no explicit entry with
/// the shape scaled by amplitude(gamma) = a * r^{|gamma|} * weight_2N(gamma)^{-rho}.
struct DecaySpec {
  std::string kind = "sine";
  double a = 0.0;
  double r = 0.5;
  double rho = 1.0;
  int mode = 1;
  double center = 0.5;
  double width = 0.1;
};

struct FieldSpec {
  std::vector<FieldEntrySpec> entries;
  std::optional<DecaySpec> decay;
};

GridField realize_entry(const FieldEntrySpec& spec, int J, Boundary bc);
ChaosField realize_field(const FieldSpec& spec, const TruncationSpec& trunc, int J, Boundary bc);

/// A parsed scenario: the solver-ready data plus run configuration.
struct LoadedScenario {
  ScenarioData data;
  std::uint64_t seed = 123456789;
  std::string output_dir;
  std::vector<double> p_list{2.0, 4.0, 6.0, 8.0};
  std::vector<std::string> warnings;  // potential clipping + hypothesis notes
};

/// Builds a scenario from parsed JSON; error messages name the offending key.
LoadedScenario scenario_from_json(const nlohmann::json& j);

/// Parses scenario text; parse errors are reported as origin:line:column.
LoadedScenario load_scenario_string(const std::string& text, const std::string& origin);
LoadedScenario load_scenario_file(const std::string& path);

/// Seeded scenario family used by cross-path agreement checks: sparse random
/// sine coefficients with the mean potential dominating every other one.
ScenarioData random_chaos_scenario(std::uint64_t seed, const TruncationSpec& trunc,
                                   const OperatorSpec& op);

}  // namespace wickpde
