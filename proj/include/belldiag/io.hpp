#pragma once

// JSON files: topologies, measurement sets and reports. Qubits are 1-based on
// disk.

#include "belldiag/diagnostics.hpp"
#include "belldiag/network.hpp"
#include "belldiag/report.hpp"

#include "json.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace belldiag {

using Json = nlohmann::ordered_json;

Json topology_to_json(const Topology& top);
Topology topology_from_json(const Json& j);

struct MeasurementSet {
  std::map<int, std::string> labels;
  std::vector<Observation> observations;
};

MeasurementSet measurements_from_json(const Json& j);
Json measurements_to_json(const MeasurementSet& m);

Json report_to_json(const Report& r);
Report report_from_json(const Json& j);

Json selftest_to_json(const SelftestReport& r);

/// Parses a file, mapping parse errors to ValidationError.
Json read_json_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace belldiag
