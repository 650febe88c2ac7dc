#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <thread>

#include "satinfer/cli.hpp"
#include "satinfer/sim.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Satellite-ground collaborative inference simulator"};
    app.require_subcommand(1);

    std::string scenario, out_path;
    std::optional<std::uint64_t> seed;

    auto* run = app.add_subcommand("run", "Simulate one scenario and write a JSON report");
    run->add_option("scenario", scenario, "Scenario file or bundled name")->required();
    run->add_option("--seed", seed, "Override the scenario seed");
    run->add_option("-o,--out", out_path, "Report path (default: stdout)");

    auto* windows = app.add_subcommand("windows", "List contact windows as CSV");
    windows->add_option("scenario", scenario)->required();
    windows->add_option("-o,--out", out_path);

    std::string gt_path, pred_path;
    double iou = 0.5;
    auto* eval = app.add_subcommand("eval-map", "Score predictions against ground truth");
    eval->add_option("--gt", gt_path)->required();
    eval->add_option("--pred", pred_path)->required();
    eval->add_option("--iou", iou)->check(CLI::Range(0.0, 1.0));

    std::string parameter;
    std::vector<double> values;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    auto* sweep = app.add_subcommand("sweep", "Run one scenario over a list of parameter values");
    sweep->add_option("scenario", scenario)->required();
    std::string names;
    for (const auto& n : satinfer::sim::sweep_parameters()) names += (names.empty() ? "" : ", ") + n;
    sweep->add_option("--param", parameter, "One of: " + names)->required();
    sweep->add_option("--values", values)->required()->delimiter(',');
    sweep->add_option("--threads", threads)->check(CLI::PositiveNumber);
    sweep->add_option("-o,--out", out_path);

    double target_map = 0.0, target_gain = 0.0;
    int batches = 20, max_evals = 400;
    auto* calibrate = app.add_subcommand("calibrate", "Fit the onboard detector profile to target accuracy");
    calibrate->add_option("scenario", scenario)->required();
    calibrate->add_option("--target-map", target_map)->required();
    calibrate->add_option("--target-gain", target_gain)->required();
    calibrate->add_option("--batches", batches, "Run-sized corpora to average over")->check(CLI::PositiveNumber);
    calibrate->add_option("--max-evals", max_evals)->check(CLI::PositiveNumber);
    calibrate->add_option("-o,--out", out_path);

    auto* corpus = app.add_subcommand("corpus", "Export the synthetic corpus as JSONL");
    corpus->add_option("scenario", scenario)->required();
    corpus->add_option("-o,--out", out_path);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : satinfer::cli::kExitValidation;
    }

    namespace cli = satinfer::cli;
    if (*run) return cli::cmd_run(scenario, seed, out_path, std::cout, std::cerr);
    if (*windows) return cli::cmd_windows(scenario, out_path, std::cout, std::cerr);
    if (*eval) return cli::cmd_eval_map(gt_path, pred_path, iou, std::cout, std::cerr);
    if (*sweep) return cli::cmd_sweep(scenario, parameter, values, out_path, threads, std::cout, std::cerr);
    if (*calibrate)
        return cli::cmd_calibrate(scenario, target_map, target_gain, batches, max_evals, out_path, std::cout, std::cerr);
    return cli::cmd_corpus(scenario, out_path, std::cout, std::cerr);
}
