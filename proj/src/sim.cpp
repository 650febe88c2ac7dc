#include "satinfer/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <queue>
#include <sstream>
#include <thread>
#include <tuple>
#include <unordered_map>

#include "satinfer/rng.hpp"

namespace satinfer::sim {

namespace {

std::string join(const std::vector<std::string>& v) {
    std::ostringstream os;
    os << "invalid scenario:";
    for (const auto& s : v) os << "\n  " << s;
    return os.str();
}

void append(std::vector<std::string>& out, std::vector<std::string> more) {
    out.insert(out.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
}

struct Event {
    double t = 0.0;
    EventKind kind = EventKind::SimEnd;
    std::uint64_t seq = 0;
    std::uint64_t payload = 0;
};

struct Later {
    bool operator()(const Event& a, const Event& b) const {
        return std::tuple(a.t, static_cast<int>(a.kind), a.seq) > std::tuple(b.t, static_cast<int>(b.kind), b.seq);
    }
};

void append_preds(std::vector<inference::PredRecord>& out, const std::string& id,
                  const std::vector<inference::Detection>& dets) {
    for (const auto& d : dets) out.push_back({id, d.class_id, d.box, d.score});
}

class Simulation {
public:
    explicit Simulation(const Scenario& s)
        : s_(s), streams_(s.seed), channel_(link::goodput_mbps(s.link, link::Direction::Down)) {}

    Report run();

private:
    void push(double t, EventKind kind, std::uint64_t payload = 0) {
        if (t > s_.horizon_s) return;
        events_.push({t, kind, seq_++, payload});
    }
    void note(double t, EventKind kind, std::string detail) {
        if (s_.timeline) report_.timeline.push_back({t, kind, std::move(detail)});
    }
    void on_capture(double t, std::size_t frame_index);
    void on_tile_ready(double t, std::size_t tile_index);
    void enqueue(double t, const link::TransferJob& job);
    void book(std::vector<link::TransferRecord>& records);
    void reschedule_transfer();
    void finish();

    const Scenario& s_;
    RngStreams streams_;
    link::Channel channel_;
    std::priority_queue<Event, std::vector<Event>, Later> events_;
    std::uint64_t seq_ = 0;
    Report report_;

    std::vector<orbit::ContactWindow> windows_;
    std::vector<imaging::ImageFrame> corpus_;
    std::vector<imaging::Tile> tiles_;      // kept tiles, indexed by TileReady payload
    std::vector<char> tile_done_;
    double compute_free_s_ = 0.0;
    std::uint64_t next_job_id_ = 0;
    std::optional<double> scheduled_progress_;
    std::uint64_t progress_version_ = 0;

    std::vector<inference::GtRecord> gt_;
    std::vector<inference::PredRecord> solo_;
    std::vector<inference::PredRecord> collab_;
};

Report Simulation::run() {
    std::vector<orbit::ContactWindow> raw;
    for (const auto& st : s_.stations) {
        auto w = orbit::contact_windows(s_.orbit, st, s_.horizon_s, s_.coarse_step_s, s_.sat_id);
        raw.insert(raw.end(), w.begin(), w.end());
    }
    windows_ = orbit::merge_windows(std::move(raw));
    report_.windows.reserve(windows_.size());
    for (std::size_t i = 0; i < windows_.size(); ++i) {
        report_.windows.push_back({windows_[i], 0, 0.0});
        push(windows_[i].start_s, EventKind::ContactStart, i);
        push(windows_[i].end_s, EventKind::ContactEnd, i);
    }

    const std::size_t captures = captured_frames(s_);
    if (captures > 0) {
        imaging::CorpusSpec spec = s_.corpus;
        corpus_ = imaging::generate_corpus(spec, s_.seed);
        corpus_.resize(captures);
    }
    for (std::size_t k = 0; k < captures; ++k)
        push(static_cast<double>(k + 1) * s_.capture_period_s, EventKind::Capture, k);
    push(s_.horizon_s, EventKind::SimEnd);

    std::vector<link::TransferRecord> records;
    while (!events_.empty()) {
        const Event e = events_.top();
        events_.pop();
        channel_.advance_to(e.t, records);
        book(records);
        switch (e.kind) {
            case EventKind::ContactStart:
                channel_.open(windows_[e.payload], e.payload, s_.link.per_pass_overhead_s);
                note(e.t, e.kind, "window " + std::to_string(e.payload) + " station " + windows_[e.payload].station_id);
                break;
            case EventKind::ContactEnd:
                channel_.close(records);
                book(records);
                scheduled_progress_.reset();
                ++progress_version_;
                note(e.t, e.kind, "window " + std::to_string(e.payload));
                break;
            case EventKind::TransferProgress:
                if (e.payload == progress_version_) {
                    scheduled_progress_.reset();
                    channel_.begin_next();
                }
                break;
            case EventKind::Capture: on_capture(e.t, e.payload); break;
            case EventKind::TileReady: on_tile_ready(e.t, e.payload); break;
            case EventKind::SimEnd: note(e.t, e.kind, ""); break;
        }
        reschedule_transfer();
    }
    finish();
    return std::move(report_);
}

void Simulation::on_capture(double t, std::size_t frame_index) {
    auto& frame = corpus_[frame_index];
    frame.capture_s = t;
    auto& d = report_.data;
    ++d.frames_captured;
    d.bytes_raw += frame.payload_bytes();
    auto split = imaging::filter_redundant(imaging::split_frame(frame, s_.corpus.tile_px), s_.filter);
    d.tiles_total += split.kept.size() + split.discarded.size();
    d.tiles_kept += split.kept.size();
    for (const auto& tile : split.discarded) d.bytes_filtered_out += tile.payload_bytes;
    note(t, EventKind::Capture,
         "frame " + std::to_string(frame.id) + " kept " + std::to_string(split.kept.size()) + " discarded " +
             std::to_string(split.discarded.size()));

    const double latency = s_.onboard_profile.latency_s_per_tile;
    for (auto& tile : split.kept) {
        const double start = std::max(t, compute_free_s_);
        const double ready = start + latency;
        compute_free_s_ = ready;
        if (start < s_.horizon_s) report_.energy.compute_active_s += std::min(ready, s_.horizon_s) - start;
        tiles_.push_back(std::move(tile));
        tile_done_.push_back(0);
        push(ready, EventKind::TileReady, tiles_.size() - 1);
    }
}

void Simulation::on_tile_ready(double t, std::size_t tile_index) {
    const auto& tile = tiles_[tile_index];
    tile_done_[tile_index] = 1;
    auto& d = report_.data;
    ++d.tiles_processed;

    Engine rng = streams_.stream(inference::kDetectStream, tile.key());
    const auto dets = inference::detect(s_.onboard_profile, tile, rng);
    const auto decision = inference::route(tile, dets, s_.policy, s_.encoding);

    const std::string id = tile.id();
    for (const auto& o : tile.objects) gt_.push_back({id, o.class_id, o.box});
    append_preds(solo_, id, dets);

    link::TransferJob job;
    if (decision.sends_results()) {
        d.bytes_resolved_as_results += tile.payload_bytes;
        append_preds(collab_, id, dets);
        job = link::TransferJob::make(next_job_id_++, link::Direction::Down, decision.payload_bytes, t,
                                      link::JobKind::ResultMessage);
    } else {
        ++d.tiles_offloaded;
        // Ground re-detection replaces the onboard result for offloaded tiles.
        Engine ground_rng = streams_.stream(inference::kDetectStream, tile.key());
        append_preds(collab_, id, inference::detect(s_.ground_profile, tile, ground_rng));
        job = link::TransferJob::make(next_job_id_++, link::Direction::Down, decision.payload_bytes, t,
                                      link::JobKind::ImageTile);
    }
    note(t, EventKind::TileReady,
         id + (decision.sends_results() ? " results " : " image ") + std::to_string(decision.payload_bytes));
    enqueue(t, job);
}

void Simulation::enqueue(double t, const link::TransferJob& job) {
    channel_.enqueue(job);
    std::vector<link::TransferRecord> records;
    while (channel_.queued_bytes() > s_.buffer_capacity_bytes) {
        auto dropped = channel_.drop_oldest(link::JobKind::ImageTile, t, records);
        if (!dropped) break;
        report_.data.bytes_dropped += dropped->dropped_bytes;
        note(t, EventKind::TileReady,
             "buffer overflow: dropped job " + std::to_string(dropped->job.id) + " (" +
                 std::to_string(dropped->dropped_bytes) + " bytes)");
        // The in-flight job may have been cut; its completion event is stale.
        scheduled_progress_.reset();
        ++progress_version_;
    }
    book(records);
}

void Simulation::book(std::vector<link::TransferRecord>& records) {
    for (const auto& r : records) {
        auto& w = report_.windows[r.window_index];
        w.delivered_bytes += r.delivered_bytes;
        w.busy_s += r.end_s - r.start_s;
        report_.energy.comm_active_s += r.end_s - r.start_s;
        if (r.kind == link::JobKind::ImageTile) {
            report_.data.bytes_tiles_downlinked += r.delivered_bytes;
            if (r.completes_job) ++report_.data.tiles_ground_processed;
        } else {
            report_.data.bytes_result_msgs += r.delivered_bytes;
        }
        note(r.end_s, EventKind::TransferProgress,
             std::string(link::to_string(r.kind)) + " job " + std::to_string(r.job_id) + " " +
                 std::to_string(r.delivered_bytes) + " bytes" + (r.completes_job ? " done" : " partial"));
    }
    records.clear();
}

void Simulation::reschedule_transfer() {
    const auto next = channel_.next_event_time();
    if (!next) return;
    if (scheduled_progress_ && *scheduled_progress_ == *next) return;
    scheduled_progress_ = next;
    push(*next, EventKind::TransferProgress, ++progress_version_);
}

void Simulation::finish() {
    auto& d = report_.data;
    for (const auto& pj : channel_.pending()) {
        if (pj.job.kind == link::JobKind::ImageTile) d.bytes_buffered_at_end += pj.remaining_bytes;
        else d.bytes_result_msgs_pending += pj.remaining_bytes;
    }
    for (std::size_t i = 0; i < tiles_.size(); ++i) {
        if (tile_done_[i]) continue;
        ++d.tiles_pending_compute;
        d.bytes_buffered_at_end += tiles_[i].payload_bytes;
    }
    d.reduction_fraction =
        d.bytes_raw == 0 ? 0.0
                         : 1.0 - static_cast<double>(d.bytes_result_msgs + d.bytes_tiles_downlinked) /
                                     static_cast<double>(d.bytes_raw);
    report_.filter_rate = d.tiles_total == 0 ? 0.0 : static_cast<double>(d.tiles_total - d.tiles_kept) /
                                                         static_cast<double>(d.tiles_total);

    auto& acc = report_.accuracy;
    acc.offload_fraction =
        d.tiles_processed == 0 ? 0.0 : static_cast<double>(d.tiles_offloaded) / static_cast<double>(d.tiles_processed);
    if (!gt_.empty()) {
        acc.defined = true;
        acc.onboard_only_map = inference::evaluate_map(gt_, solo_, s_.iou_threshold).map;
        acc.collaborative_map = inference::evaluate_map(gt_, collab_, s_.iou_threshold).map;
        if (*acc.onboard_only_map > 0.0)
            acc.relative_gain = (*acc.collaborative_map - *acc.onboard_only_map) / *acc.onboard_only_map;
    }

    auto& en = report_.energy;
    en.constant_power.ledger = energy::constant_power_ledger(s_.power, s_.horizon_s);
    en.duty_cycled.ledger = energy::duty_cycled_ledger(s_.power, s_.horizon_s, en.compute_active_s, en.comm_active_s);
    for (auto* r : {&en.constant_power, &en.duty_cycled}) {
        if (r->ledger.total_j() > 0.0) {
            r->fractions = energy::fractions(r->ledger);
            r->fractions_defined = true;
        }
    }
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> violations)
    : std::runtime_error(join(violations)), violations_(std::move(violations)) {}

const char* to_string(EventKind kind) {
    switch (kind) {
        case EventKind::ContactStart: return "contact-start";
        case EventKind::TileReady: return "tile-ready";
        case EventKind::TransferProgress: return "transfer-progress";
        case EventKind::ContactEnd: return "contact-end";
        case EventKind::Capture: return "capture";
        case EventKind::SimEnd: return "sim-end";
    }
    return "?";
}

bool DataAccounting::conserved() const {
    return bytes_raw ==
           bytes_filtered_out + bytes_tiles_downlinked + bytes_buffered_at_end + bytes_dropped + bytes_resolved_as_results;
}

std::vector<std::string> Scenario::violations() const {
    std::vector<std::string> out;
    if (sat_id.empty()) out.emplace_back("sim.sat_id: must be non-empty");
    append(out, orbit.violations());
    if (stations.empty()) out.emplace_back("stations: at least one ground station is required");
    for (const auto& st : stations) append(out, st.violations());
    for (std::size_t i = 0; i < stations.size(); ++i)
        for (std::size_t j = i + 1; j < stations.size(); ++j)
            if (stations[i].id == stations[j].id) out.push_back("stations[" + stations[i].id + "].id: duplicate id");
    append(out, link.violations());
    append(out, corpus.violations());
    append(out, filter.violations());
    append(out, onboard_profile.violations("detectors.onboard"));
    append(out, ground_profile.violations("detectors.ground"));
    if (onboard_profile.num_classes() != corpus.num_classes)
        out.emplace_back("detectors.onboard.recall: needs one entry per corpus class");
    if (ground_profile.num_classes() != corpus.num_classes)
        out.emplace_back("detectors.ground.recall: needs one entry per corpus class");
    append(out, policy.violations());
    if (encoding.header_bytes + encoding.bytes_per_detection == 0)
        out.emplace_back("policy.result_header_bytes: result messages must be non-empty");
    append(out, power.violations());
    if (!(capture_period_s > 0.0)) out.emplace_back("sim.capture_period_s: must be > 0");
    if (!(horizon_s > 0.0) || !std::isfinite(horizon_s)) out.emplace_back("sim.horizon_s: must be > 0");
    if (buffer_capacity_bytes == 0) out.emplace_back("sim.buffer_capacity_bytes: must be > 0");
    if (!(coarse_step_s > 0.0)) out.emplace_back("sim.coarse_step_s: must be > 0");
    if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) out.emplace_back("sim.iou_threshold: must be in (0, 1]");
    return out;
}

void validate(const Scenario& scenario) {
    if (auto v = scenario.violations(); !v.empty()) throw ValidationError(std::move(v));
}

Scenario default_scenario() {
    Scenario s;
    s.name = "default";
    s.sat_id = "baoyun";
    s.stations.push_back({"gs-beijing", 40.0, 116.3, 10.0});
    s.corpus = imaging::dota_v1_like();
    s.onboard_profile.name = "onboard-tiny";
    s.onboard_profile.recall = {0.6, 0.6, 0.6};
    s.onboard_profile.fp_rate = 0.8;
    s.onboard_profile.loc_noise_px = 4.0;
    s.onboard_profile.conf_tp = {3.0, 2.0};
    s.onboard_profile.conf_fp = {2.0, 4.0};
    s.onboard_profile.latency_s_per_tile = 0.5;
    s.onboard_profile.energy_j_per_tile = 0.5 * 8.78;
    s.ground_profile.name = "ground-full";
    s.ground_profile.recall = {0.95, 0.95, 0.95};
    s.ground_profile.fp_rate = 0.1;
    s.ground_profile.loc_noise_px = 2.0;
    s.ground_profile.conf_tp = {8.0, 2.0};
    s.ground_profile.conf_fp = {2.0, 5.0};
    s.ground_profile.latency_s_per_tile = 0.05;
    s.calibrated_inputs = {"corpus.redundant_fraction", "detectors.onboard", "detectors.ground"};
    return s;
}

Report run(const Scenario& scenario) {
    validate(scenario);
    return Simulation(scenario).run();
}

AccuracyComparison compare_accuracy(const Scenario& scenario) {
    Scenario solo = scenario;
    solo.policy.confidence_threshold = 0.0;
    solo.timeline = false;
    Scenario collab = scenario;
    collab.timeline = false;
    const auto a = run(solo);
    const auto b = run(collab);
    AccuracyComparison out;
    out.onboard_only_map = a.accuracy.collaborative_map;
    out.collaborative_map = b.accuracy.collaborative_map;
    if (out.onboard_only_map && out.collaborative_map && *out.onboard_only_map > 0.0)
        out.relative_gain = (*out.collaborative_map - *out.onboard_only_map) / *out.onboard_only_map;
    return out;
}

std::vector<Report> run_batch(std::span<const Scenario> scenarios, unsigned threads) {
    for (const auto& s : scenarios) validate(s);
    std::vector<Report> out(scenarios.size());
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(scenarios.size())));
    if (threads <= 1) {
        for (std::size_t i = 0; i < scenarios.size(); ++i) out[i] = run(scenarios[i]);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(scenarios.size());
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < scenarios.size(); i = next++) {
                try {
                    out[i] = run(scenarios[i]);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

const std::vector<std::string>& sweep_parameters() {
    static const std::vector<std::string> names{
        "policy.confidence_threshold", "link.loss_prob",         "link.downlink_mbps",
        "link.uplink_mbps",            "link.per_pass_overhead_s", "corpus.tile_px",
        "corpus.redundant_fraction",   "filter.cloud_threshold", "sim.capture_period_s",
        "sim.seed",
    };
    return names;
}

void apply_parameter(Scenario& s, const std::string& parameter, double value) {
    if (parameter == "policy.confidence_threshold") s.policy.confidence_threshold = value;
    else if (parameter == "link.loss_prob") s.link.loss_prob = value;
    else if (parameter == "link.downlink_mbps") s.link.downlink_mbps = value;
    else if (parameter == "link.uplink_mbps") s.link.uplink_mbps = value;
    else if (parameter == "link.per_pass_overhead_s") s.link.per_pass_overhead_s = value;
    else if (parameter == "corpus.tile_px") s.corpus.tile_px = static_cast<int>(std::lround(value));
    else if (parameter == "corpus.redundant_fraction") s.corpus.redundant_fraction = value;
    else if (parameter == "filter.cloud_threshold") s.filter.cloud_threshold = value;
    else if (parameter == "sim.capture_period_s") s.capture_period_s = value;
    else if (parameter == "sim.seed") {
        if (!(value >= 0.0)) throw ValidationError({"sim.seed: must be >= 0"});
        s.seed = static_cast<std::uint64_t>(value);
    } else {
        std::string allowed;
        for (const auto& n : sweep_parameters()) allowed += (allowed.empty() ? "" : ", ") + n;
        throw ValidationError({"sweep parameter '" + parameter + "': unknown (allowed: " + allowed + ")"});
    }
}

std::vector<std::pair<double, Report>> sweep(const Scenario& base, const std::string& parameter,
                                             std::span<const double> values, unsigned threads) {
    std::vector<Scenario> runs;
    runs.reserve(values.size());
    for (double v : values) {
        runs.push_back(base);
        apply_parameter(runs.back(), parameter, v);
    }
    if (values.empty()) {
        const auto& names = sweep_parameters();
        if (std::find(names.begin(), names.end(), parameter) == names.end()) {
            Scenario probe = base;
            apply_parameter(probe, parameter, 0.0);
        }
    }
    auto reports = run_batch(runs, threads);
    std::vector<std::pair<double, Report>> out;
    out.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out.emplace_back(values[i], std::move(reports[i]));
    return out;
}

std::vector<imaging::Tile> kept_tiles(const imaging::CorpusSpec& corpus, const imaging::FilterPolicy& filter,
                                      std::uint64_t seed) {
    std::vector<imaging::Tile> out;
    for (const auto& frame : imaging::generate_corpus(corpus, seed)) {
        auto r = imaging::filter_redundant(imaging::split_frame(frame, corpus.tile_px), filter);
        std::move(r.kept.begin(), r.kept.end(), std::back_inserter(out));
    }
    return out;
}

std::size_t captured_frames(const Scenario& scenario) {
    if (!(scenario.capture_period_s < scenario.horizon_s)) return 0;
    const auto captures = static_cast<std::size_t>(std::ceil(scenario.horizon_s / scenario.capture_period_s)) - 1;
    return std::min(captures, static_cast<std::size_t>(scenario.corpus.num_frames));
}

std::uint64_t calibration_seed(std::uint64_t base_seed, int index) {
    return splitmix64(base_seed ^ 0xca11b7a7e5eedULL) + static_cast<std::uint64_t>(index);
}

inference::CalibrationResult calibrate_scenario(const Scenario& scenario, double target_onboard_map,
                                                double target_gain, int batches, int max_evaluations) {
    validate(scenario);
    if (batches < 1) throw ValidationError({"calibration batches must be >= 1"});
    imaging::CorpusSpec corpus = scenario.corpus;
    corpus.num_frames = static_cast<int>(captured_frames(scenario));
    if (corpus.num_frames == 0) throw ValidationError({"scenario captures no frames; nothing to calibrate on"});
    std::vector<inference::CalibrationBatch> set;
    for (int i = 0; i < batches; ++i) {
        const auto seed = calibration_seed(scenario.seed, i);
        set.push_back({kept_tiles(corpus, scenario.filter, seed), seed});
    }
    inference::CalibrationOptions opts;
    opts.ground = scenario.ground_profile;
    opts.onboard_start = scenario.onboard_profile;
    opts.policy = scenario.policy;
    opts.encoding = scenario.encoding;
    opts.max_evaluations = max_evaluations;
    return inference::calibrate_profiles(target_onboard_map, target_gain, set, opts);
}

}  // namespace satinfer::sim
