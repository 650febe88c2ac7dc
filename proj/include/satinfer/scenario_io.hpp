#pragma once

#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>

#include "satinfer/sim.hpp"

namespace satinfer::io {

using Json = nlohmann::ordered_json;

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Parses a scenario document. Unknown keys, missing required keys
// (stations, sim.horizon_s, sim.seed), type errors and every module
// invariant are collected into one ValidationError.
sim::Scenario scenario_from_json(const Json& doc);
sim::Scenario parse_scenario(const std::string& text);
// Throws IoError when the file cannot be read.
sim::Scenario load_scenario(const std::filesystem::path& path);

// Fully resolved scenario; parsing it back yields an identical scenario.
Json scenario_to_json(const sim::Scenario& scenario);

struct Provenance {
    std::uint64_t seed = 0;
    std::optional<std::uint64_t> seed_override;
};

Json report_to_json(const sim::Report& report, const sim::Scenario& scenario, const Provenance& provenance);

// Text form used for report files: two-space indent, trailing newline.
std::string dump(const Json& doc);

// Writes to a sibling temp file, then renames over `path`. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

}  // namespace satinfer::io
