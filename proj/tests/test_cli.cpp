#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "satinfer/cli.hpp"
#include "satinfer/scenario_io.hpp"

using namespace satinfer;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("satinfer_cli_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path write(const std::string& name, const std::string& text) const {
        std::ofstream(path / name) << text;
        return path / name;
    }
};

std::vector<std::vector<std::string>> csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(cells);
    }
    return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name) {
    return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
}

// A short version of the default scenario, written to disk.
fs::path quick_scenario(const TempDir& dir, const std::string& extra_sim = "") {
    return dir.write("quick.json", R"({
  "name": "quick",
  "stations": [{"id": "gs-beijing", "lat_deg": 40.0, "lon_deg": 116.3}],
  "corpus": {"num_frames": 12},
  "sim": {"horizon_s": 43200, "seed": 3, "capture_period_s": 1800)" + extra_sim + R"(}
})");
}

const char* kGt =
    "tile_id,class_id,x_min,y_min,x_max,y_max\n"
    "t,0,0,0,10,10\n"
    "t,0,50,50,60,60\n";

}  // namespace

TEST(ResolvePath, BareNameFindsBundledScenario) {
    EXPECT_TRUE(fs::exists(cli::resolve_scenario_path("baoyun_default")));
    EXPECT_THROW(cli::resolve_scenario_path("no_such_scenario"), io::IoError);
}

TEST(ResolvePath, EnvironmentDirectoryTakesPrecedence) {
    TempDir dir;
    dir.write("baoyun_default.json", "{}");
    ::setenv(cli::kScenarioDirEnv, dir.path.c_str(), 1);
    EXPECT_EQ(cli::resolve_scenario_path("baoyun_default"), dir.path / "baoyun_default.json");
    ::unsetenv(cli::kScenarioDirEnv);
}

TEST(Run, BundledDefaultSummary) {
    TempDir dir;
    std::ostringstream out, err;
    ASSERT_EQ(cli::cmd_run("baoyun_default", std::nullopt, (dir.path / "r.json").string(), out, err), cli::kExitOk)
        << err.str();
    const auto text = out.str();
    const auto red = std::stod(text.substr(text.find("downlink reduction ") + 19));
    EXPECT_GE(red, 0.90);
    const auto comp = std::stod(text.substr(text.find("compute/total ") + 14));
    EXPECT_NEAR(comp, 0.17, 0.007);
    const auto report = io::Json::parse(io::read_file(dir.path / "r.json"));
    EXPECT_EQ(report["provenance"]["seed_override"], nullptr);
}

TEST(Run, NegativeAltitudeIsExitTwoNamingTheField) {
    TempDir dir;
    const auto p = dir.write("bad.json", R"({"orbit": {"altitude_km": -1},
        "stations": [{"id": "g", "lat_deg": 0, "lon_deg": 0}], "sim": {"horizon_s": 10, "seed": 1}})");
    std::ostringstream out, err;
    EXPECT_EQ(cli::cmd_run(p.string(), std::nullopt, "", out, err), cli::kExitValidation);
    EXPECT_NE(err.str().find("orbit.altitude_km"), std::string::npos) << err.str();
    EXPECT_TRUE(out.str().empty());
}

TEST(Run, MissingScenarioIsExitThree) {
    std::ostringstream out, err;
    EXPECT_EQ(cli::cmd_run("/nonexistent/s.json", std::nullopt, "", out, err), cli::kExitIo);
}

TEST(Run, UnwritableOutputIsExitThree) {
    TempDir dir;
    std::ostringstream out, err;
    EXPECT_EQ(cli::cmd_run(quick_scenario(dir).string(), std::nullopt, "/nonexistent/dir/r.json", out, err),
              cli::kExitIo);
}

TEST(Run, SeedOverrideRecordedInProvenance) {
    TempDir dir;
    std::ostringstream out, err;
    ASSERT_EQ(cli::cmd_run(quick_scenario(dir).string(), 42, "", out, err), cli::kExitOk) << err.str();
    const auto j = io::Json::parse(out.str());
    EXPECT_EQ(j["provenance"]["seed"], 42);
    EXPECT_EQ(j["provenance"]["seed_override"], 42);
    EXPECT_EQ(j["scenario"]["sim"]["seed"], 42);
}

TEST(Windows, RowsSortedPositiveAndMatchSamplingOracle) {
    std::ostringstream out, err;
    ASSERT_EQ(cli::cmd_windows("baoyun_default", "", out, err), cli::kExitOk) << err.str();
    const auto rows = csv(out.str());
    ASSERT_GE(rows.size(), 2u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"sat", "station", "start_s", "end_s", "duration_s"}));
    const auto s = io::load_scenario(cli::resolve_scenario_path("baoyun_default"));
    const auto ref = oracle::sampled_passes({s.orbit.altitude_km, s.orbit.inclination_deg, s.orbit.raan_deg,
                                             s.orbit.phase_deg},
                                            40.0, 116.3, 10.0, s.horizon_s);
    ASSERT_EQ(rows.size() - 1, ref.size());
    double prev = -1.0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double a = std::stod(rows[i][2]), b = std::stod(rows[i][3]), d = std::stod(rows[i][4]);
        EXPECT_GT(d, 0.0);
        EXPECT_GT(a, prev);
        prev = a;
        EXPECT_NEAR(a, ref[i - 1].start_s, 0.2);
        EXPECT_NEAR(b, ref[i - 1].end_s, 0.2);
    }
}

TEST(Windows, UnreachableMaskGivesHeaderOnly) {
    TempDir dir;
    const auto p = dir.write("m.json", R"({"stations": [{"id": "g", "lat_deg": 40, "lon_deg": 116.3,
        "min_elevation_deg": 89.9}], "sim": {"horizon_s": 86400, "seed": 1}})");
    std::ostringstream out, err;
    ASSERT_EQ(cli::cmd_windows(p.string(), "", out, err), cli::kExitOk);
    EXPECT_EQ(out.str(), "sat,station,start_s,end_s,duration_s\n");
}

TEST(EvalMap, PerfectEmptyAndHandCase) {
    TempDir dir;
    const auto gt = dir.write("gt.csv", kGt);
    const auto perfect = dir.write("p1.csv", "t,0,0,0,10,10,1.0\nt,0,50,50,60,60,1.0\n");
    const auto empty = dir.write("p0.csv", "tile_id,class_id,x_min,y_min,x_max,y_max,score\n");
    const auto hand = dir.write("p2.csv", "t,0,0,0,10,10,0.9\nt,0,100,100,110,110,0.8\nt,0,50,50,60,60,0.7\n");
    for (auto [pred, want] : {std::pair{perfect, "mAP 1.0000"}, std::pair{empty, "mAP 0.0000"},
                              std::pair{hand, "mAP 0.8333"}}) {
        std::ostringstream out, err;
        ASSERT_EQ(cli::cmd_eval_map(gt.string(), pred.string(), 0.5, out, err), cli::kExitOk) << err.str();
        EXPECT_NE(out.str().find(want), std::string::npos) << out.str();
    }
}

TEST(EvalMap, EmptyGroundTruthIsExitTwo) {
    TempDir dir;
    const auto gt = dir.write("gt.csv", "tile_id,class_id,x_min,y_min,x_max,y_max\n");
    const auto p = dir.write("p.csv", "t,0,0,0,10,10,1.0\n");
    std::ostringstream out, err;
    EXPECT_EQ(cli::cmd_eval_map(gt.string(), p.string(), 0.5, out, err), cli::kExitValidation);
    EXPECT_EQ(cli::cmd_eval_map((dir.path / "none.csv").string(), p.string(), 0.5, out, err), cli::kExitIo);
}

TEST(Sweep, ThresholdColumnMonotone) {
    TempDir dir;
    std::ostringstream out, err;
    ASSERT_EQ(cli::cmd_sweep(quick_scenario(dir).string(), "policy.confidence_threshold", {0, 0.25, 0.5, 0.75, 1},
                             "", 2, out, err),
              cli::kExitOk)
        << err.str();
    const auto rows = csv(out.str());
    ASSERT_EQ(rows.size(), 6u);
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')), cli::sweep_header());
    const auto c = column(rows[0], "offload_fraction");
    for (std::size_t i = 2; i < rows.size(); ++i) EXPECT_GE(std::stod(rows[i][c]), std::stod(rows[i - 1][c]));
}

TEST(Sweep, LossColumnRatioFiveToOne) {
    std::ostringstream out, err;
    ASSERT_EQ(cli::cmd_sweep("loss_stress", "link.loss_prob", {0.0, 0.8}, "", 1, out, err), cli::kExitOk)
        << err.str();
    const auto rows = csv(out.str());
    const auto c = column(rows[0], "bytes_delivered");
    const double a = std::stod(rows[1][c]), b = std::stod(rows[2][c]);
    EXPECT_NEAR(a / b, 5.0, 1e-6);
}

TEST(Sweep, SingleValueMatchesRun) {
    TempDir dir;
    const auto p = quick_scenario(dir);
    std::ostringstream sout, rout, err;
    ASSERT_EQ(cli::cmd_sweep(p.string(), "sim.seed", {3}, "", 1, sout, err), cli::kExitOk);
    ASSERT_EQ(cli::cmd_run(p.string(), std::nullopt, "", rout, err), cli::kExitOk);
    const auto rows = csv(sout.str());
    ASSERT_EQ(rows.size(), 2u);
    const auto j = io::Json::parse(rout.str());
    EXPECT_EQ(std::stod(rows[1][column(rows[0], "reduction_fraction")]), j["data"]["reduction_fraction"].get<double>());
    EXPECT_EQ(std::stoull(rows[1][column(rows[0], "bytes_tiles_downlinked")]),
              j["data"]["bytes_tiles_downlinked"].get<std::uint64_t>());
    EXPECT_EQ(std::stod(rows[1][column(rows[0], "offload_fraction")]),
              j["accuracy"]["offload_fraction"].get<double>());
}

TEST(Sweep, UnknownParameterIsExitTwo) {
    TempDir dir;
    std::ostringstream out, err;
    EXPECT_EQ(cli::cmd_sweep(quick_scenario(dir).string(), "orbit.colour", {1}, "", 1, out, err),
              cli::kExitValidation);
    EXPECT_NE(err.str().find("orbit.colour"), std::string::npos);
}

TEST(Corpus, ExportRoundTrips) {
    TempDir dir;
    std::ostringstream out, err;
    ASSERT_EQ(cli::cmd_corpus(quick_scenario(dir).string(), (dir.path / "c.jsonl").string(), out, err),
              cli::kExitOk);
    std::ifstream in(dir.path / "c.jsonl");
    const auto frames = imaging::read_corpus(in);
    EXPECT_EQ(frames.size(), 12u);
}

TEST(Calibrate, WritesLoadableCalibratedScenario) {
    TempDir dir;
    std::ostringstream out, err;
    const auto target = (dir.path / "cal.json").string();
    ASSERT_EQ(cli::cmd_calibrate(quick_scenario(dir, R"(, "horizon_s": 86400)").string(), 0.5, 0.44, 8, 400,
                                 target, out, err),
              cli::kExitOk)
        << err.str() << out.str();
    const auto s = io::load_scenario(target);
    EXPECT_NE(std::find(s.calibrated_inputs.begin(), s.calibrated_inputs.end(), "detectors.onboard"),
              s.calibrated_inputs.end());
    EXPECT_NE(out.str().find("gain"), std::string::npos);
}
