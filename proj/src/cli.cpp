#include "satinfer/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "satinfer/scenario_io.hpp"
#include "satinfer/sim.hpp"

#ifndef SATINFER_BUNDLED_SCENARIO_DIR
#define SATINFER_BUNDLED_SCENARIO_DIR "scenarios"
#endif

namespace satinfer::cli {

namespace fs = std::filesystem;

namespace {

int report_validation(const sim::ValidationError& e, std::ostream& err) {
    err << "invalid scenario:\n";
    for (const auto& v : e.violations()) err << "  " << v << '\n';
    return kExitValidation;
}

// Runs `body`, mapping library exceptions onto exit codes.
template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const sim::ValidationError& e) {
        return report_validation(e, err);
    } catch (const io::IoError& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::runtime_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    }
}

void emit(const std::string& text, const std::string& out_path, std::ostream& out) {
    if (out_path.empty())
        out << text;
    else
        io::write_file_atomic(out_path, text);
}

sim::Scenario load(const std::string& arg) { return io::load_scenario(resolve_scenario_path(arg)); }

std::string opt(const std::optional<double>& v) { return v ? io::format_double(*v) : std::string(); }

std::string fixed(double v, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

}  // namespace

fs::path resolve_scenario_path(const std::string& arg) {
    fs::path p(arg);
    if (fs::exists(p)) return p;
    std::vector<fs::path> dirs;
    if (const char* env = std::getenv(kScenarioDirEnv); env && *env) dirs.emplace_back(env);
    dirs.emplace_back(SATINFER_BUNDLED_SCENARIO_DIR);
    for (const auto& d : dirs) {
        for (const auto& candidate : {d / arg, d / (arg + ".json")})
            if (fs::is_regular_file(candidate)) return candidate;
    }
    throw io::IoError("scenario not found: " + arg);
}

int cmd_run(const std::string& scenario, std::optional<std::uint64_t> seed_override, const std::string& out_path,
            std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        auto sc = load(scenario);
        io::Provenance prov{sc.seed, seed_override};
        if (seed_override) {
            sc.seed = *seed_override;
            prov.seed = *seed_override;
        }
        const auto report = sim::run(sc);
        const auto doc = io::report_to_json(report, sc, prov);
        if (out_path.empty()) {
            out << io::dump(doc);
            return kExitOk;
        }
        io::write_file_atomic(out_path, io::dump(doc));
        const auto& d = report.data;
        out << "scenario " << sc.name << " seed " << sc.seed << '\n'
            << "  frames " << d.frames_captured << ", tiles kept " << d.tiles_kept << "/" << d.tiles_total
            << ", offloaded " << d.tiles_offloaded << '\n'
            << "  downlink reduction " << fixed(d.reduction_fraction, 4) << ", filter rate "
            << fixed(report.filter_rate, 4) << '\n';
        if (report.accuracy.defined && report.accuracy.relative_gain)
            out << "  mAP onboard " << fixed(*report.accuracy.onboard_only_map, 4) << ", collaborative "
                << fixed(*report.accuracy.collaborative_map, 4) << ", gain "
                << fixed(*report.accuracy.relative_gain, 4) << '\n';
        const auto& cp = report.energy.constant_power;
        if (cp.fractions_defined)
            out << "  energy compute/total " << fixed(cp.fractions.compute_over_total, 4) << ", payloads/total "
                << fixed(cp.fractions.payloads_over_total, 4) << ", compute/payloads "
                << fixed(cp.fractions.compute_over_payloads, 4) << " (constant power)\n";
        out << "  report written to " << out_path << '\n';
        return kExitOk;
    });
}

int cmd_windows(const std::string& scenario, const std::string& out_path, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto sc = load(scenario);
        std::vector<orbit::ContactWindow> all;
        for (const auto& st : sc.stations) {
            auto w = orbit::contact_windows(sc.orbit, st, sc.horizon_s, sc.coarse_step_s, sc.sat_id);
            all.insert(all.end(), w.begin(), w.end());
        }
        std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.start_s < b.start_s; });
        std::ostringstream os;
        os << "sat,station,start_s,end_s,duration_s\n";
        for (const auto& w : all)
            os << w.sat_id << ',' << w.station_id << ',' << fixed(w.start_s, 3) << ',' << fixed(w.end_s, 3) << ','
               << fixed(w.duration_s(), 3) << '\n';
        emit(os.str(), out_path, out);
        return kExitOk;
    });
}

int cmd_eval_map(const std::string& gt_path, const std::string& pred_path, double iou_threshold, std::ostream& out,
                 std::ostream& err) {
    return guarded(err, [&] {
        std::ifstream gt_in(gt_path), pred_in(pred_path);
        if (!gt_in) throw io::IoError("cannot open " + gt_path);
        if (!pred_in) throw io::IoError("cannot open " + pred_path);
        const auto gt = inference::read_ground_truth(gt_in);
        const auto preds = inference::read_predictions(pred_in);
        const auto result = inference::evaluate_map(gt, preds, iou_threshold);
        for (const auto& [cls, ap] : result.ap_per_class) out << "class " << cls << " AP " << fixed(ap, 4) << '\n';
        out << "mAP " << fixed(result.map, 4) << '\n';
        return kExitOk;
    });
}

std::string sweep_header() {
    return "parameter,value,reduction_fraction,bytes_delivered,bytes_tiles_downlinked,bytes_result_msgs,bytes_dropped,"
           "offload_fraction,onboard_map,collaborative_map,relative_gain,energy_total_j,compute_fraction";
}

int cmd_sweep(const std::string& scenario, const std::string& parameter, const std::vector<double>& values,
              const std::string& out_path, unsigned threads, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto sc = load(scenario);
        const auto rows = sim::sweep(sc, parameter, values, threads);
        std::ostringstream os;
        os << sweep_header() << '\n';
        for (const auto& [value, r] : rows) {
            const auto& cp = r.energy.constant_power;
            os << parameter << ',' << io::format_double(value) << ',' << io::format_double(r.data.reduction_fraction)
               << ',' << r.data.bytes_tiles_downlinked + r.data.bytes_result_msgs << ',' << r.data.bytes_tiles_downlinked << ',' << r.data.bytes_result_msgs << ','
               << r.data.bytes_dropped << ',' << io::format_double(r.accuracy.offload_fraction) << ','
               << opt(r.accuracy.onboard_only_map) << ',' << opt(r.accuracy.collaborative_map) << ','
               << opt(r.accuracy.relative_gain) << ',' << io::format_double(cp.ledger.total_j()) << ','
               << (cp.fractions_defined ? io::format_double(cp.fractions.compute_over_total) : std::string()) << '\n';
        }
        emit(os.str(), out_path, out);
        return kExitOk;
    });
}

int cmd_calibrate(const std::string& scenario, double target_onboard_map, double target_gain, int calibration_batches,
                  int max_evaluations, const std::string& out_path, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        auto sc = load(scenario);
        inference::CalibrationResult result;
        bool converged = true;
        try {
            result = sim::calibrate_scenario(sc, target_onboard_map, target_gain, calibration_batches, max_evaluations);
        } catch (const inference::CalibrationError& e) {
            err << "warning: " << e.what() << '\n';
            result = e.best();
            converged = false;
        }
        sc.onboard_profile = result.onboard;
        sc.ground_profile = result.ground;
        for (const char* name : {"detectors.onboard", "detectors.ground"}) {
            if (std::find(sc.calibrated_inputs.begin(), sc.calibrated_inputs.end(), name) ==
                sc.calibrated_inputs.end())
                sc.calibrated_inputs.emplace_back(name);
        }
        const std::string text = io::dump(io::scenario_to_json(sc));
        std::ostream& log = out_path.empty() ? err : out;
        log << "onboard mAP " << fixed(result.onboard_map, 4) << ", collaborative mAP "
            << fixed(result.collaborative_map, 4) << ", gain " << fixed(result.gain, 4) << ", offload "
            << fixed(result.offload_fraction, 4) << " after " << result.evaluations << " evaluations\n";
        emit(text, out_path, out);
        return converged ? kExitOk : kExitValidation;
    });
}

int cmd_corpus(const std::string& scenario, const std::string& out_path, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto sc = load(scenario);
        std::ostringstream os;
        imaging::write_corpus(os, imaging::generate_corpus(sc.corpus, sc.seed));
        emit(os.str(), out_path, out);
        return kExitOk;
    });
}

}  // namespace satinfer::cli
