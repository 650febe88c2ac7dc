#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "satinfer/box.hpp"
#include "satinfer/imaging.hpp"
#include "satinfer/rng.hpp"

namespace satinfer::inference {

// Beta(alpha, beta) on [0, 1]. alpha == 0 is a point mass at 0 and
// beta == 0 a point mass at 1.
struct BetaParams {
    double alpha = 2.0;
    double beta = 2.0;

    double quantile(double u) const;
    bool operator==(const BetaParams&) const = default;
};

// Parametric stand-in for a trained detector. recall has one entry per class.
struct DetectorProfile {
    std::string name = "detector";
    std::vector<double> recall{0.9, 0.9, 0.9};
    double fp_rate = 0.1;
    double loc_noise_px = 2.0;
    BetaParams conf_tp{8.0, 2.0};
    BetaParams conf_fp{2.0, 5.0};
    double latency_s_per_tile = 0.5;
    double energy_j_per_tile = 0.0;
    int fp_box_min_px = 24;
    int fp_box_max_px = 96;

    int num_classes() const { return static_cast<int>(recall.size()); }
    std::vector<std::string> violations(const std::string& prefix = "detector") const;
    bool operator==(const DetectorProfile&) const = default;
};

struct Detection {
    Box box;
    int class_id = 0;
    double score = 0.0;

    bool operator==(const Detection&) const = default;
};

enum class Aggregation { Max, Mean };

struct RoutingPolicy {
    double confidence_threshold = 0.5;
    Aggregation aggregation = Aggregation::Max;

    std::vector<std::string> violations() const;
};

// Size model of a serialized result message.
struct ResultEncoding {
    std::uint64_t header_bytes = 256;
    std::uint64_t bytes_per_detection = 64;
    std::uint64_t max_message_bytes = 65536;
};

struct RouteDecision {
    enum class Kind { SendResults, SendImage };
    Kind kind = Kind::SendImage;
    std::uint64_t payload_bytes = 0;

    bool sends_results() const { return kind == Kind::SendResults; }
};

// Every uniform is drawn whether or not it is used (six per ground-truth
// object, one for the false-positive count, six per false positive), and
// scores come from inverse-CDF sampling. Two profiles run on the same stream
// therefore see the same underlying randomness object by object.
std::vector<Detection> detect(const DetectorProfile& profile, const imaging::Tile& tile, Engine& rng);

// Max or mean of detection scores; 0 when there are none.
double tile_confidence(std::span<const Detection> dets, const RoutingPolicy& policy);

// SendResults iff confidence >= threshold and the message fits the cap.
RouteDecision route(const imaging::Tile& tile, std::span<const Detection> dets, const RoutingPolicy& policy,
                    const ResultEncoding& encoding = {});

double iou(const Box& a, const Box& b);

struct GtRecord {
    std::string tile_id;
    int class_id = 0;
    Box box;
};

struct PredRecord {
    std::string tile_id;
    int class_id = 0;
    Box box;
    double score = 0.0;
};

struct MapResult {
    double map = 0.0;
    std::map<int, double> ap_per_class;  // classes with at least one gt
};

// Per class: predictions in descending score (ties by tile id, then box),
// each greedily matched to the highest-IoU unmatched gt in its tile when that
// IoU >= iou_threshold. AP is the area under the precision envelope over
// recall (all-point). Throws std::invalid_argument with no ground truth.
MapResult evaluate_map(std::span<const GtRecord> gt, std::span<const PredRecord> preds,
                       double iou_threshold = 0.5);

// Line-delimited interchange: "tile_id,class_id,x_min,y_min,x_max,y_max,score".
// A header line starting with "tile_id" and '#' comments are skipped; the
// score column is optional for ground truth.
void write_predictions(std::ostream& os, std::span<const PredRecord> preds);
void write_ground_truth(std::ostream& os, std::span<const GtRecord> gt);
std::vector<PredRecord> read_predictions(std::istream& is);
std::vector<GtRecord> read_ground_truth(std::istream& is);

// --- collaboration and calibration ---------------------------------------

// Common per-tile stream shared by the onboard and ground detectors.
inline constexpr const char* kDetectStream = "detect";

struct CollaborationOutcome {
    std::optional<double> onboard_map;        // empty when there is no gt
    std::optional<double> collaborative_map;
    std::optional<double> relative_gain;      // empty when onboard mAP is 0
    double offload_fraction = 0.0;
    std::size_t tiles = 0;
    std::size_t offloaded = 0;
};

// Onboard-only (every tile keeps its onboard detections) against
// collaborative (offloaded tiles re-detected by the ground profile), both
// scored on the ground truth of `tiles`.
CollaborationOutcome evaluate_collaboration(std::span<const imaging::Tile> tiles, const DetectorProfile& onboard,
                                            const DetectorProfile& ground, const RoutingPolicy& policy,
                                            const ResultEncoding& encoding, std::uint64_t seed,
                                            double iou_threshold = 0.5);

struct CalibrationOptions {
    DetectorProfile ground;
    DetectorProfile onboard_start;
    RoutingPolicy policy;
    ResultEncoding encoding;
    std::uint64_t seed = 1;
    double map_tolerance = 0.02;
    double gain_tolerance = 0.03;
    int max_evaluations = 400;
};

struct CalibrationResult {
    DetectorProfile onboard;
    DetectorProfile ground;
    double onboard_map = 0.0;
    double collaborative_map = 0.0;
    double gain = 0.0;
    double offload_fraction = 0.0;
    int evaluations = 0;
};

class CalibrationError : public std::runtime_error {
public:
    CalibrationError(const std::string& what, CalibrationResult best)
        : std::runtime_error(what), best_(std::move(best)) {}
    const CalibrationResult& best() const { return best_; }

private:
    CalibrationResult best_;
};

// Coordinate descent of the onboard profile over a fixed grid:
//   recall (all classes)  0.05 .. 0.99, step 0.01
//   fp_rate               0.00 .. 4.00, step 0.05
//   conf_tp.alpha         0.5  .. 12.0, step 0.1
// with step multiples 16, 8, 4, 2, 1, minimizing
// (dmap/map_tol)^2 + (dgain/gain_tol)^2. The ground profile itself is tried
// first as the onboard candidate. Throws CalibrationError when the budget is
// spent without meeting both tolerances.
CalibrationResult calibrate_profiles(double target_onboard_map, double target_gain,
                                     std::span<const imaging::Tile> corpus, const CalibrationOptions& options);

// A corpus together with the seed its detections are drawn from.
struct CalibrationBatch {
    std::vector<imaging::Tile> tiles;
    std::uint64_t seed = 1;
};

// Same search, matching the means of onboard mAP and gain over the batches
// (options.seed is ignored). Each batch is scored on its own, the way one
// simulation run is.
CalibrationResult calibrate_profiles(double target_onboard_map, double target_gain,
                                     std::span<const CalibrationBatch> batches, const CalibrationOptions& options);

}  // namespace satinfer::inference
