#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace satinfer::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitIo = 3;

// Directory searched for bare scenario names such as "baoyun_default".
inline constexpr const char* kScenarioDirEnv = "SATINFER_SCENARIO_DIR";

// An existing path is used as is; otherwise "<name>" and "<name>.json" are
// looked up in $SATINFER_SCENARIO_DIR, then in the bundled scenarios/ dir.
std::filesystem::path resolve_scenario_path(const std::string& arg);

// Empty out_path writes to `out`.
int cmd_run(const std::string& scenario, std::optional<std::uint64_t> seed_override, const std::string& out_path,
            std::ostream& out, std::ostream& err);
int cmd_windows(const std::string& scenario, const std::string& out_path, std::ostream& out, std::ostream& err);
int cmd_eval_map(const std::string& gt_path, const std::string& pred_path, double iou_threshold, std::ostream& out,
                 std::ostream& err);
int cmd_sweep(const std::string& scenario, const std::string& parameter, const std::vector<double>& values,
              const std::string& out_path, unsigned threads, std::ostream& out, std::ostream& err);
// Writes a copy of the scenario whose detector profiles are calibrated.
int cmd_calibrate(const std::string& scenario, double target_onboard_map, double target_gain, int calibration_batches,
                  int max_evaluations, const std::string& out_path, std::ostream& out, std::ostream& err);
// Exports the scenario's synthetic corpus as line-delimited annotations.
int cmd_corpus(const std::string& scenario, const std::string& out_path, std::ostream& out, std::ostream& err);

// Header of the sweep table, also used by tests.
std::string sweep_header();

}  // namespace satinfer::cli
