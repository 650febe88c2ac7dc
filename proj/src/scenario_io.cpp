#include "satinfer/scenario_io.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

namespace satinfer::io {

namespace {

// Reads keys from one JSON object, remembering which were consumed so the
// leftovers can be reported as unknown.
class Section {
public:
    Section(const Json* obj, std::string path, std::vector<std::string>& errors)
        : obj_(obj), path_(std::move(path)), errors_(errors) {
        if (obj_ && !obj_->is_object()) {
            errors_.push_back(path_ + ": expected an object");
            obj_ = nullptr;
        }
    }

    const Json* raw(const char* key, bool required) {
        seen_.insert(key);
        if (!obj_ || !obj_->contains(key)) {
            if (required) errors_.push_back(name(key) + ": required key missing");
            return nullptr;
        }
        return &(*obj_)[key];
    }

    void number(const char* key, double& out, bool required = false) {
        if (const Json* v = raw(key, required)) {
            if (v->is_number()) out = v->get<double>();
            else errors_.push_back(name(key) + ": expected a number");
        }
    }

    template <class Int>
    void integer(const char* key, Int& out, bool required = false) {
        if (const Json* v = raw(key, required)) {
            if (v->is_number_unsigned() || (v->is_number_integer() && v->get<long long>() >= 0) ||
                (std::is_signed_v<Int> && v->is_number_integer()))
                out = v->get<Int>();
            else errors_.push_back(name(key) + ": expected an integer" +
                                   (std::is_signed_v<Int> ? "" : " >= 0"));
        }
    }

    void boolean(const char* key, bool& out) {
        if (const Json* v = raw(key, false)) {
            if (v->is_boolean()) out = v->get<bool>();
            else errors_.push_back(name(key) + ": expected true or false");
        }
    }

    void string(const char* key, std::string& out, bool required = false) {
        if (const Json* v = raw(key, required)) {
            if (v->is_string()) out = v->get<std::string>();
            else errors_.push_back(name(key) + ": expected a string");
        }
    }

    void strings(const char* key, std::vector<std::string>& out) {
        if (const Json* v = raw(key, false)) {
            if (!v->is_array()) {
                errors_.push_back(name(key) + ": expected an array of strings");
                return;
            }
            out.clear();
            for (const auto& e : *v) {
                if (!e.is_string()) {
                    errors_.push_back(name(key) + ": expected an array of strings");
                    return;
                }
                out.push_back(e.get<std::string>());
            }
        }
    }

    // A scalar is broadcast to `count` classes.
    void per_class(const char* key, std::vector<double>& out, int count) {
        if (const Json* v = raw(key, false)) {
            if (v->is_number()) {
                out.assign(static_cast<std::size_t>(std::max(count, 0)), v->get<double>());
            } else if (v->is_array() && std::all_of(v->begin(), v->end(), [](const Json& e) { return e.is_number(); })) {
                out = v->get<std::vector<double>>();
            } else {
                errors_.push_back(name(key) + ": expected a number or an array of numbers");
            }
        } else if (static_cast<int>(out.size()) != count) {
            const double fill = out.empty() ? 0.9 : out.front();
            out.assign(static_cast<std::size_t>(std::max(count, 0)), fill);
        }
    }

    std::string name(const char* key) const { return path_ + "." + key; }

    void finish() {
        if (!obj_) return;
        for (const auto& [k, _] : obj_->items())
            if (!seen_.count(k)) errors_.push_back(path_ + "." + k + ": unknown key");
    }

private:
    const Json* obj_;
    std::string path_;
    std::vector<std::string>& errors_;
    std::set<std::string> seen_;
};

const Json* child(const Json& doc, const char* key) {
    return doc.is_object() && doc.contains(key) ? &doc[key] : nullptr;
}

void read_profile(const Json* obj, const std::string& path, inference::DetectorProfile& p, int classes,
                  std::vector<std::string>& errors) {
    Section s(obj, path, errors);
    s.string("name", p.name);
    s.per_class("recall", p.recall, classes);
    s.number("fp_rate", p.fp_rate);
    s.number("loc_noise_px", p.loc_noise_px);
    s.number("conf_tp_alpha", p.conf_tp.alpha);
    s.number("conf_tp_beta", p.conf_tp.beta);
    s.number("conf_fp_alpha", p.conf_fp.alpha);
    s.number("conf_fp_beta", p.conf_fp.beta);
    s.number("latency_s_per_tile", p.latency_s_per_tile);
    s.number("energy_j_per_tile", p.energy_j_per_tile);
    s.integer("fp_box_min_px", p.fp_box_min_px);
    s.integer("fp_box_max_px", p.fp_box_max_px);
    s.finish();
}

Json profile_json(const inference::DetectorProfile& p) {
    Json j;
    j["name"] = p.name;
    j["recall"] = p.recall;
    j["fp_rate"] = p.fp_rate;
    j["loc_noise_px"] = p.loc_noise_px;
    j["conf_tp_alpha"] = p.conf_tp.alpha;
    j["conf_tp_beta"] = p.conf_tp.beta;
    j["conf_fp_alpha"] = p.conf_fp.alpha;
    j["conf_fp_beta"] = p.conf_fp.beta;
    j["latency_s_per_tile"] = p.latency_s_per_tile;
    j["energy_j_per_tile"] = p.energy_j_per_tile;
    j["fp_box_min_px"] = p.fp_box_min_px;
    j["fp_box_max_px"] = p.fp_box_max_px;
    return j;
}

Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json ledger_json(const sim::EnergyReading& r) {
    using energy::SubsystemId;
    Json j;
    Json joules;
    for (std::size_t i = 0; i < energy::kSubsystemCount; ++i)
        joules[energy::to_string(static_cast<SubsystemId>(i))] = r.ledger.joules(static_cast<SubsystemId>(i));
    j["joules"] = std::move(joules);
    j["payloads_j"] = r.ledger.payloads_j();
    j["payload_children_j"] = r.ledger.payload_children_j();
    j["payload_discrepancy_j"] = r.ledger.payload_discrepancy_j();
    j["payload_bus_metered"] = r.ledger.payload_bus_metered();
    j["total_j"] = r.ledger.total_j();
    j["elapsed_s"] = r.ledger.total_elapsed_s();
    if (r.fractions_defined) {
        Json f;
        for (auto id : energy::kBusSubsystems) f[energy::to_string(id)] = r.fractions.of_total[energy::index(id)];
        f["payloads"] = r.fractions.payloads_over_total;
        j["top_level_fractions"] = std::move(f);
        Json c;
        for (auto id : energy::kPayloadSubsystems) c[energy::to_string(id)] = r.fractions.of_total[energy::index(id)];
        j["payload_child_fractions_of_total"] = std::move(c);
        j["payloads_over_total"] = r.fractions.payloads_over_total;
        j["compute_over_payloads"] = r.fractions.compute_over_payloads;
        j["compute_over_total"] = r.fractions.compute_over_total;
    } else {
        j["top_level_fractions"] = nullptr;
        j["payloads_over_total"] = nullptr;
        j["compute_over_payloads"] = nullptr;
        j["compute_over_total"] = nullptr;
    }
    return j;
}

}  // namespace

sim::Scenario scenario_from_json(const Json& doc) {
    std::vector<std::string> errors;
    sim::Scenario sc = sim::default_scenario();
    sc.stations.clear();
    if (!doc.is_object()) throw sim::ValidationError({"scenario: expected a JSON object at top level"});

    {
        Section top(&doc, "scenario", errors);
        top.string("name", sc.name);
        for (const char* k : {"orbit", "stations", "link", "corpus", "detectors", "policy", "filter", "power", "sim"})
            top.raw(k, std::string(k) == "stations" || std::string(k) == "sim");
        top.finish();
    }
    {
        Section s(child(doc, "orbit"), "orbit", errors);
        s.number("altitude_km", sc.orbit.altitude_km);
        s.number("inclination_deg", sc.orbit.inclination_deg);
        s.number("raan_deg", sc.orbit.raan_deg);
        s.number("phase_deg", sc.orbit.phase_deg);
        s.number("epoch_s", sc.orbit.epoch_s);
        s.finish();
    }
    if (const Json* st = child(doc, "stations")) {
        if (!st->is_array()) {
            errors.emplace_back("stations: expected an array");
        } else {
            for (std::size_t i = 0; i < st->size(); ++i) {
                orbit::GroundStation g;
                g.id = "gs-" + std::to_string(i);
                Section s(&(*st)[i], "stations[" + std::to_string(i) + "]", errors);
                s.string("id", g.id);
                s.number("lat_deg", g.lat_deg, true);
                s.number("lon_deg", g.lon_deg, true);
                s.number("min_elevation_deg", g.min_elevation_deg);
                s.finish();
                sc.stations.push_back(g);
            }
        }
    }
    {
        Section s(child(doc, "link"), "link", errors);
        s.number("uplink_mbps", sc.link.uplink_mbps);
        s.number("downlink_mbps", sc.link.downlink_mbps);
        s.number("loss_prob", sc.link.loss_prob);
        s.number("per_pass_overhead_s", sc.link.per_pass_overhead_s);
        s.finish();
    }
    {
        const Json* c = child(doc, "corpus");
        std::string preset;
        Section s(c, "corpus", errors);
        s.string("preset", preset);
        if (preset == "dota_v1_like") sc.corpus = imaging::dota_v1_like();
        else if (preset == "dota_v2_like") sc.corpus = imaging::dota_v2_like();
        else if (!preset.empty()) errors.push_back("corpus.preset: unknown preset '" + preset + "'");
        auto& cs = sc.corpus;
        s.integer("num_frames", cs.num_frames);
        s.integer("frame_px", cs.frame_px);
        s.integer("tile_px", cs.tile_px);
        s.integer("bytes_per_px", cs.bytes_per_px);
        s.number("redundant_fraction", cs.redundant_fraction);
        s.number("objects_per_nonredundant_tile", cs.objects_per_nonredundant_tile);
        s.integer("num_classes", cs.num_classes);
        s.number("cloudy_share", cs.cloudy_share);
        s.number("clear_cloud_max", cs.clear_cloud_max);
        s.number("cloudy_cloud_min", cs.cloudy_cloud_min);
        s.integer("object_min_px", cs.object_min_px);
        s.integer("object_max_px", cs.object_max_px);
        s.finish();
    }
    {
        const Json* d = child(doc, "detectors");
        Section s(d, "detectors", errors);
        const Json* on = s.raw("onboard", false);
        const Json* gr = s.raw("ground", false);
        s.finish();
        read_profile(on, "detectors.onboard", sc.onboard_profile, sc.corpus.num_classes, errors);
        read_profile(gr, "detectors.ground", sc.ground_profile, sc.corpus.num_classes, errors);
    }
    {
        Section s(child(doc, "policy"), "policy", errors);
        s.number("confidence_threshold", sc.policy.confidence_threshold);
        std::string agg = sc.policy.aggregation == inference::Aggregation::Max ? "max" : "mean";
        s.string("aggregation", agg);
        if (agg == "max") sc.policy.aggregation = inference::Aggregation::Max;
        else if (agg == "mean") sc.policy.aggregation = inference::Aggregation::Mean;
        else errors.push_back("policy.aggregation: expected \"max\" or \"mean\"");
        s.integer("result_header_bytes", sc.encoding.header_bytes);
        s.integer("result_bytes_per_det", sc.encoding.bytes_per_detection);
        s.integer("result_cap_bytes", sc.encoding.max_message_bytes);
        s.finish();
    }
    {
        Section s(child(doc, "filter"), "filter", errors);
        s.number("cloud_threshold", sc.filter.cloud_threshold);
        s.boolean("drop_empty", sc.filter.drop_empty);
        s.number("min_object_area_px", sc.filter.min_object_area_px);
        s.finish();
    }
    {
        Section s(child(doc, "power"), "power", errors);
        for (std::size_t i = 0; i < energy::kSubsystemCount; ++i) {
            const std::string key = std::string(energy::to_string(static_cast<energy::SubsystemId>(i))) + "_w";
            s.number(key.c_str(), sc.power.watts[i]);
        }
        s.number("payloads_bus_w", sc.power.payloads_bus_w);
        s.number("compute_idle_w", sc.power.compute_idle_w);
        s.number("compute_active_w", sc.power.compute_active_w);
        s.number("comm_idle_w", sc.power.comm_idle_w);
        s.number("comm_active_w", sc.power.comm_active_w);
        s.finish();
    }
    {
        Section s(child(doc, "sim"), "sim", errors);
        s.string("sat_id", sc.sat_id);
        s.number("capture_period_s", sc.capture_period_s);
        s.number("horizon_s", sc.horizon_s, true);
        s.integer("seed", sc.seed, true);
        s.integer("buffer_capacity_bytes", sc.buffer_capacity_bytes);
        s.number("coarse_step_s", sc.coarse_step_s);
        s.number("iou_threshold", sc.iou_threshold);
        s.boolean("timeline", sc.timeline);
        s.strings("calibrated_inputs", sc.calibrated_inputs);
        s.finish();
    }

    auto more = sc.violations();
    errors.insert(errors.end(), more.begin(), more.end());
    if (!errors.empty()) throw sim::ValidationError(std::move(errors));
    return sc;
}

sim::Scenario parse_scenario(const std::string& text) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw sim::ValidationError({std::string("scenario: not valid JSON (") + e.what() + ")"});
    }
    return scenario_from_json(doc);
}

sim::Scenario load_scenario(const std::filesystem::path& path) { return parse_scenario(read_file(path)); }

Json scenario_to_json(const sim::Scenario& sc) {
    Json j;
    j["name"] = sc.name;
    j["orbit"] = {{"altitude_km", sc.orbit.altitude_km},
                  {"inclination_deg", sc.orbit.inclination_deg},
                  {"raan_deg", sc.orbit.raan_deg},
                  {"phase_deg", sc.orbit.phase_deg},
                  {"epoch_s", sc.orbit.epoch_s}};
    Json st = Json::array();
    for (const auto& g : sc.stations)
        st.push_back({{"id", g.id}, {"lat_deg", g.lat_deg}, {"lon_deg", g.lon_deg},
                      {"min_elevation_deg", g.min_elevation_deg}});
    j["stations"] = std::move(st);
    j["link"] = {{"uplink_mbps", sc.link.uplink_mbps},
                 {"downlink_mbps", sc.link.downlink_mbps},
                 {"loss_prob", sc.link.loss_prob},
                 {"per_pass_overhead_s", sc.link.per_pass_overhead_s}};
    const auto& c = sc.corpus;
    j["corpus"] = {{"num_frames", c.num_frames},
                   {"frame_px", c.frame_px},
                   {"tile_px", c.tile_px},
                   {"bytes_per_px", c.bytes_per_px},
                   {"redundant_fraction", c.redundant_fraction},
                   {"objects_per_nonredundant_tile", c.objects_per_nonredundant_tile},
                   {"num_classes", c.num_classes},
                   {"cloudy_share", c.cloudy_share},
                   {"clear_cloud_max", c.clear_cloud_max},
                   {"cloudy_cloud_min", c.cloudy_cloud_min},
                   {"object_min_px", c.object_min_px},
                   {"object_max_px", c.object_max_px}};
    j["detectors"] = {{"onboard", profile_json(sc.onboard_profile)}, {"ground", profile_json(sc.ground_profile)}};
    j["policy"] = {{"confidence_threshold", sc.policy.confidence_threshold},
                   {"aggregation", sc.policy.aggregation == inference::Aggregation::Max ? "max" : "mean"},
                   {"result_header_bytes", sc.encoding.header_bytes},
                   {"result_bytes_per_det", sc.encoding.bytes_per_detection},
                   {"result_cap_bytes", sc.encoding.max_message_bytes}};
    j["filter"] = {{"cloud_threshold", sc.filter.cloud_threshold},
                   {"drop_empty", sc.filter.drop_empty},
                   {"min_object_area_px", sc.filter.min_object_area_px}};
    Json p;
    for (std::size_t i = 0; i < energy::kSubsystemCount; ++i)
        p[std::string(energy::to_string(static_cast<energy::SubsystemId>(i))) + "_w"] = sc.power.watts[i];
    p["payloads_bus_w"] = sc.power.payloads_bus_w;
    p["compute_idle_w"] = sc.power.compute_idle_w;
    p["compute_active_w"] = sc.power.compute_active_w;
    p["comm_idle_w"] = sc.power.comm_idle_w;
    p["comm_active_w"] = sc.power.comm_active_w;
    j["power"] = std::move(p);
    j["sim"] = {{"sat_id", sc.sat_id},
                {"capture_period_s", sc.capture_period_s},
                {"horizon_s", sc.horizon_s},
                {"seed", sc.seed},
                {"buffer_capacity_bytes", sc.buffer_capacity_bytes},
                {"coarse_step_s", sc.coarse_step_s},
                {"iou_threshold", sc.iou_threshold},
                {"timeline", sc.timeline},
                {"calibrated_inputs", sc.calibrated_inputs}};
    return j;
}

Json report_to_json(const sim::Report& r, const sim::Scenario& sc, const Provenance& prov) {
    Json j;
    j["schema_version"] = kReportSchemaVersion;
    j["scenario"] = scenario_to_json(sc);
    j["provenance"] = {
        {"seed", prov.seed},
        {"seed_override", prov.seed_override ? Json(*prov.seed_override) : Json(nullptr)},
        {"tool_version", kToolVersion},
        {"calibrated_inputs", sc.calibrated_inputs},
        {"measured_constants",
         {"orbit.altitude_km", "link.uplink_mbps", "link.downlink_mbps", "power (bus and payload draws)"}},
        {"map_convention", "IoU >= " + format_double(sc.iou_threshold) + ", all-point interpolation"},
        {"accuracy_semantics", "offloaded tiles scored with ground detections on eventual delivery"},
    };
    const auto& d = r.data;
    j["data"] = {{"frames_captured", d.frames_captured},
                 {"tiles_total", d.tiles_total},
                 {"tiles_kept", d.tiles_kept},
                 {"tiles_processed", d.tiles_processed},
                 {"tiles_offloaded", d.tiles_offloaded},
                 {"tiles_pending_compute", d.tiles_pending_compute},
                 {"tiles_ground_processed", d.tiles_ground_processed},
                 {"bytes_raw", d.bytes_raw},
                 {"bytes_filtered_out", d.bytes_filtered_out},
                 {"bytes_resolved_as_results", d.bytes_resolved_as_results},
                 {"bytes_result_msgs", d.bytes_result_msgs},
                 {"bytes_result_msgs_pending", d.bytes_result_msgs_pending},
                 {"bytes_tiles_downlinked", d.bytes_tiles_downlinked},
                 {"bytes_buffered_at_end", d.bytes_buffered_at_end},
                 {"bytes_dropped", d.bytes_dropped},
                 {"reduction_fraction", d.reduction_fraction},
                 {"conserved", d.conserved()}};
    j["filter_rate"] = r.filter_rate;
    j["accuracy"] = {{"defined", r.accuracy.defined},
                     {"onboard_only_map", opt(r.accuracy.onboard_only_map)},
                     {"collaborative_map", opt(r.accuracy.collaborative_map)},
                     {"relative_gain", opt(r.accuracy.relative_gain)},
                     {"offload_fraction", r.accuracy.offload_fraction}};
    j["energy"] = {{"constant_power", ledger_json(r.energy.constant_power)},
                   {"duty_cycled", ledger_json(r.energy.duty_cycled)},
                   {"compute_active_s", r.energy.compute_active_s},
                   {"comm_active_s", r.energy.comm_active_s}};
    Json w = Json::array();
    for (const auto& win : r.windows)
        w.push_back({{"sat", win.window.sat_id},
                     {"station", win.window.station_id},
                     {"start_s", win.window.start_s},
                     {"end_s", win.window.end_s},
                     {"duration_s", win.window.duration_s()},
                     {"delivered_bytes", win.delivered_bytes},
                     {"busy_s", win.busy_s}});
    j["windows"] = std::move(w);
    if (sc.timeline) {
        Json t = Json::array();
        for (const auto& e : r.timeline) t.push_back({{"t_s", e.t_s}, {"kind", sim::to_string(e.kind)}, {"detail", e.detail}});
        j["timeline"] = std::move(t);
    }
    return j;
}

std::string dump(const Json& doc) { return doc.dump(2) + "\n"; }

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    const auto tmp = path.string() + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp + " for writing");
        os << contents;
        os.flush();
        if (!os) throw IoError("write failed for " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot move report into place at " + path.string());
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace satinfer::io
