#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "satinfer/energy.hpp"
#include "satinfer/imaging.hpp"
#include "satinfer/inference.hpp"
#include "satinfer/link.hpp"
#include "satinfer/orbit.hpp"

namespace satinfer::sim {

// One simulated deployment: a single satellite, its ground stations, and the
// whole capture-to-downlink pipeline.
struct Scenario {
    std::string name = "scenario";
    std::string sat_id = "sat-0";
    orbit::OrbitSpec orbit;
    std::vector<orbit::GroundStation> stations;
    link::LinkSpec link;
    imaging::CorpusSpec corpus;
    imaging::FilterPolicy filter;
    inference::DetectorProfile onboard_profile;
    inference::DetectorProfile ground_profile;
    inference::RoutingPolicy policy;
    inference::ResultEncoding encoding;
    energy::PowerProfile power = energy::PowerProfile::baoyun();
    double capture_period_s = 900.0;
    double horizon_s = 86400.0;
    std::uint64_t seed = 1;
    std::uint64_t buffer_capacity_bytes = 16ULL << 30;
    double coarse_step_s = 30.0;
    double iou_threshold = 0.5;
    bool timeline = false;
    // Names of values that are calibrations rather than measured constants.
    std::vector<std::string> calibrated_inputs;

    std::vector<std::string> violations() const;
};

class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<std::string> violations);
    const std::vector<std::string>& violations() const { return violations_; }

private:
    std::vector<std::string> violations_;
};

// Throws ValidationError listing every violated field.
void validate(const Scenario& scenario);

// Uncalibrated defaults: one mid-latitude station, a 40 Mbps downlink, the
// dota_v1_like corpus and measured Baoyun powers.
Scenario default_scenario();

// Ties at equal time resolve by this order, then by insertion sequence.
enum class EventKind { ContactStart, TileReady, TransferProgress, ContactEnd, Capture, SimEnd };
const char* to_string(EventKind kind);

struct TimelineEntry {
    double t_s = 0.0;
    EventKind kind = EventKind::SimEnd;
    std::string detail;
};

struct DataAccounting {
    std::uint64_t frames_captured = 0;
    std::uint64_t tiles_total = 0;
    std::uint64_t tiles_kept = 0;
    std::uint64_t tiles_processed = 0;
    std::uint64_t tiles_offloaded = 0;
    std::uint64_t tiles_pending_compute = 0;
    std::uint64_t tiles_ground_processed = 0;

    std::uint64_t bytes_raw = 0;
    std::uint64_t bytes_filtered_out = 0;
    std::uint64_t bytes_resolved_as_results = 0;  // tile bytes summarized into result messages
    std::uint64_t bytes_result_msgs = 0;          // result-message bytes delivered
    std::uint64_t bytes_result_msgs_pending = 0;
    std::uint64_t bytes_tiles_downlinked = 0;
    std::uint64_t bytes_buffered_at_end = 0;      // queued tile bytes + tiles still awaiting compute
    std::uint64_t bytes_dropped = 0;
    double reduction_fraction = 0.0;

    // Both sides of the byte-conservation identity.
    bool conserved() const;
};

struct Accuracy {
    bool defined = false;
    std::optional<double> onboard_only_map;
    std::optional<double> collaborative_map;
    std::optional<double> relative_gain;
    double offload_fraction = 0.0;
};

struct EnergyReading {
    energy::EnergyLedger ledger;
    energy::EnergyFractions fractions;
    bool fractions_defined = false;
};

struct EnergyReport {
    EnergyReading constant_power;
    EnergyReading duty_cycled;
    double compute_active_s = 0.0;
    double comm_active_s = 0.0;
};

struct WindowReport {
    orbit::ContactWindow window;
    std::uint64_t delivered_bytes = 0;
    double busy_s = 0.0;
};

struct Report {
    DataAccounting data;
    Accuracy accuracy;
    double filter_rate = 0.0;
    EnergyReport energy;
    std::vector<WindowReport> windows;
    std::vector<TimelineEntry> timeline;
};

// Deterministic in the scenario (including its seed). Throws ValidationError.
Report run(const Scenario& scenario);

struct AccuracyComparison {
    std::optional<double> onboard_only_map;
    std::optional<double> collaborative_map;
    std::optional<double> relative_gain;
};

// Runs the scenario twice on identical substreams: once with the threshold
// forced to 0 (nothing offloaded) and once as configured.
AccuracyComparison compare_accuracy(const Scenario& scenario);

// Runs independent scenarios on up to `threads` workers; results keep input order.
std::vector<Report> run_batch(std::span<const Scenario> scenarios, unsigned threads = 1);

// Parameters accepted by sweep, as "section.key".
const std::vector<std::string>& sweep_parameters();

// Sets one allowlisted parameter. Throws ValidationError for unknown names.
void apply_parameter(Scenario& scenario, const std::string& parameter, double value);

// One run per value, all on the base scenario's seed.
std::vector<std::pair<double, Report>> sweep(const Scenario& base, const std::string& parameter,
                                             std::span<const double> values, unsigned threads = 1);

// Tiles that survive filtering for a corpus drawn from `seed`.
std::vector<imaging::Tile> kept_tiles(const imaging::CorpusSpec& corpus, const imaging::FilterPolicy& filter,
                                      std::uint64_t seed);

// Frames a run of this scenario captures.
std::size_t captured_frames(const Scenario& scenario);

// Seed of the i-th calibration batch; far from the small seeds used in runs.
std::uint64_t calibration_seed(std::uint64_t base_seed, int index);

// Calibrates the scenario's onboard profile against its ground profile on
// `batches` run-sized corpora (captured_frames each, seeds from
// calibration_seed), matching the per-run means. Throws
// inference::CalibrationError.
inference::CalibrationResult calibrate_scenario(const Scenario& scenario, double target_onboard_map,
                                                double target_gain, int batches, int max_evaluations = 400);

}  // namespace satinfer::sim
