#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "spectralflow/flow.hpp"

namespace spectralflow {

/// Full run configuration: flow parameters plus file-IO sections.
struct RunConfig {
  FlowConfig flow;
  std::string reference_file;      // [reference] file=...; empty disables l2_error
  std::string output_dir = "out";  // [output] dir=...
};

/// Parses the key=value config format with [flow], [potential], [reference]
/// and [output] sections. Keys before any section header are routed by name
/// (flow keys plus "potential"), so a two-line "d=2, potential=..." file is
/// valid. Unknown keys raise ConfigError naming the key and line; values are
/// validated before returning. '#'-prefixed lines are comments.
RunConfig parse_config(std::string_view text);

/// Canonical serialization; parse(serialize(c)) reproduces c and
/// serialize(parse(s)) is a fixed point.
std::string serialize_config(const RunConfig& cfg);

/// Canonical [flow]+[potential] snapshot stored inside run records.
std::string serialize_flow_config(const FlowConfig& cfg);

/// FNV-1a hash of the canonical serialization, used to key sweep outputs.
std::uint64_t config_hash(const RunConfig& cfg);

/// JSON sidecar describing one run (config echo, init stats, final metrics,
/// row diagnostics including timing and energy standard errors).
std::string run_record_json(const RunConfig& cfg, const RunRecord& record);

}  // namespace spectralflow
