#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "tierlearn/corpus.hpp"
#include "tierlearn/error.hpp"
#include "tierlearn/features.hpp"
#include "tierlearn/harness.hpp"
#include "tierlearn/trace.hpp"

namespace {

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    tierlearn::require(in.good(), "cannot open ", path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        tierlearn::fail(path, ": ", e.what());
    }
    return j;
}

nlohmann::json result_summary(const std::vector<tierlearn::RunResult>& results) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : results) {
        rows.push_back({{"trace", r.trace},
                        {"policy", r.policy},
                        {"seed", r.seed},
                        {"tags", r.tags},
                        {"avg_latency_ns", r.report.avg_latency_ns},
                        {"normalized_latency", r.normalized_latency},
                        {"iops", r.report.iops},
                        {"eviction_ratio", r.report.eviction_ratio},
                        {"fast_preference", r.report.fast_preference}});
    }
    return rows;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hybrid-storage placement simulator and learning harness"};
    app.require_subcommand(1);

    std::string config_path, grid_path, trace_path, dir;
    int tiers = 2;

    auto* cmd_run = app.add_subcommand("run", "Run the configured experiment");
    cmd_run->add_option("config", config_path, "experiment config JSON")->required();

    auto* cmd_sweep = app.add_subcommand("sweep", "Cross-product parameter sweep");
    cmd_sweep->add_option("config", config_path, "experiment config JSON")->required();
    cmd_sweep->add_option("grid", grid_path, "grid JSON")->required();

    auto* cmd_stats = app.add_subcommand("stats", "Workload statistics for a trace file");
    cmd_stats->add_option("trace", trace_path, "MSRC CSV trace")->required();

    auto* cmd_validate = app.add_subcommand("validate", "Validate a config and echo it");
    cmd_validate->add_option("config", config_path, "experiment config JSON")->required();

    auto* cmd_gen = app.add_subcommand("gen-traces", "Write the bundled trace corpus");
    cmd_gen->add_option("dir", dir, "output directory")->required();

    auto* cmd_bins = app.add_subcommand("dump-bins", "Observation bin boundaries as JSON");
    cmd_bins->add_option("--tiers", tiers, "tier count (default 2)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_run->parsed()) {
            auto config = tierlearn::ExperimentConfig::from_file(config_path);
            auto results = tierlearn::run_experiment(config);
            std::cout << nlohmann::json{{"output_dir", tierlearn::effective_output_dir(config)},
                                        {"results", result_summary(results)}}
                             .dump(2)
                      << "\n";
        } else if (cmd_sweep->parsed()) {
            auto config = tierlearn::ExperimentConfig::from_file(config_path);
            auto results = tierlearn::sweep(config, load_json(grid_path));
            std::cout << nlohmann::json{{"output_dir", tierlearn::effective_output_dir(config)},
                                        {"results", result_summary(results)}}
                             .dump(2)
                      << "\n";
        } else if (cmd_stats->parsed()) {
            auto trace = tierlearn::parse_msrc_file(trace_path);
            tierlearn::WorkloadStats s = tierlearn::workload_stats(trace);
            std::cout << nlohmann::json{{"trace", trace_path},
                                        {"requests", trace.size()},
                                        {"write_fraction", s.write_fraction},
                                        {"read_fraction", s.read_fraction},
                                        {"avg_request_size_pages", s.avg_request_size_pages},
                                        {"avg_access_count", s.avg_access_count},
                                        {"unique_pages", s.unique_pages},
                                        {"unique_requests", s.unique_requests}}
                             .dump(2)
                      << "\n";
        } else if (cmd_validate->parsed()) {
            auto config = tierlearn::ExperimentConfig::from_file(config_path);
            std::cout << nlohmann::json{{"ok", true},
                                        {"config_hash", config.config_hash()},
                                        {"config", config.to_json()}}
                             .dump(2)
                      << "\n";
        } else if (cmd_gen->parsed()) {
            nlohmann::json manifest = tierlearn::write_corpus(dir);
            std::cout << nlohmann::json{{"dir", dir}, {"traces", manifest.size()}}.dump(2)
                      << "\n";
        } else if (cmd_bins->parsed()) {
            tierlearn::ObservationLayout layout{tiers};
            std::cout << tierlearn::bin_boundaries(layout).dump(2) << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", e.what()}}.dump() << "\n";
        return 1;
    }
    return 0;
}
