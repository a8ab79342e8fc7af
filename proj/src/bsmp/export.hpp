#pragma once

#include "bsmp/adjoint.hpp"
#include "bsmp/bsde.hpp"
#include "bsmp/maximum_principle.hpp"
#include "bsmp/relaxed.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

namespace bsmp {

inline constexpr const char* kToolVersion = "1.0.0";

/// Replay metadata embedded in every artifact.
struct RunMetadata {
  std::string command;
  std::string problem;
  std::uint64_t seed = 0;
  int steps = 0;
  int paths = 0;
  RegressionConfig regression;
};

nlohmann::ordered_json metadata_json(const RunMetadata& meta);

nlohmann::ordered_json to_json(const CostEstimate& cost);
nlohmann::ordered_json to_json(const ViolationReport& report);
nlohmann::ordered_json to_json(const SufficiencyReport& report);

/// CSV with `# key: value` metadata header lines. At most `max_paths` paths
/// are written (all when negative).
std::string trajectory_csv(const Trajectory& traj, const RunMetadata& meta, int max_paths);
std::string adjoint_csv(const AdjointPath& adj, const RunMetadata& meta, int max_paths);

/// CSV of a table given as an array of flat JSON objects (column order of the first row).
std::string table_csv(const nlohmann::ordered_json& rows, const RunMetadata& meta);

/// Writes through a temporary file in the same directory and renames it into
/// place. Throws IoError-coded Error on failure.
void write_file_atomic(const std::string& path, const std::string& content);

/// Shortest round-trip decimal form.
std::string format_number(double value);

}  // namespace bsmp
