#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tierlearn/agent.hpp"
#include "tierlearn/corpus.hpp"
#include "tierlearn/hss.hpp"
#include "tierlearn/policy.hpp"
#include "tierlearn/rlcore.hpp"
#include "tierlearn/trace.hpp"

#include "json.hpp"

namespace tierlearn {

// One experiment trace: a single MSRC file, several files interleaved with
// start offsets, or a synthetic spec.
struct TraceSpec {
    std::string name;
    std::vector<std::string> files;
    std::vector<int64_t> start_offsets_ns;  // parallel to files; empty = all zero
    bool has_synthetic = false;
    SyntheticSpec synthetic;

    std::vector<StorageRequest> load() const;
};

struct DeviceSpec {
    std::string preset;          // H, M, L, or L_SSD
    uint64_t capacity_pages = 0;  // absolute, or
    double capacity_percent = 0;  // percent of the trace working set, (0, 100]

    DeviceProfile resolve(uint64_t working_set_pages) const;
};

struct PolicySpec {
    std::string name;
    uint32_t hot_threshold = 4;       // cde_place, tri_heuristic_place
    uint32_t random_write_pages = 8;  // cde_place
    uint64_t epoch_requests = 1000;   // hps_place
    double eviction_penalty = 0.001;  // rl_place
    double fast_ref_latency_ns = 0;   // rl_place; 0 = derive from the fast tier
};

struct ExperimentConfig {
    int schema_version = 1;
    std::vector<TraceSpec> traces;
    std::vector<DeviceSpec> devices;  // fastest first
    bool charge_migration_read = true;
    PolicySpec policy;
    Hyperparams hyperparams;
    uint64_t seed = 1;
    ExecMode mode = ExecMode::Deterministic;
    std::string output_dir = "out";

    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig from_file(const std::string& path);
    nlohmann::json to_json() const;
    void validate() const;
    std::string config_hash() const;  // FNV-1a over the canonical JSON, hex
};

// TIERLEARN_OUT overrides the configured output directory.
std::string effective_output_dir(const ExperimentConfig& config);

struct RunResult {
    std::string trace;
    std::string policy;
    std::string config_hash;
    uint64_t seed = 0;
    nlohmann::json tags;  // sweep grid point, empty otherwise
    MetricsReport report;
    double fast_only_avg_latency_ns = 0;
    double normalized_latency = 0;

    nlohmann::json to_json() const;
};

// Frozen column order; documented in the README for plotting scripts.
std::string results_csv_header();
std::string results_csv_row(const RunResult& r);

std::unique_ptr<IPolicy> make_policy(const PolicySpec& spec, int n_tiers,
                                     const Hyperparams& hp, ExecMode mode, uint64_t seed);

// Runs the configured policy on every trace. The normalization denominator
// is a Fast-Only pass over a working-set-sized environment executed in the
// same batch. With write_files, emits results.csv plus one JSON document per
// (trace, policy) pair under the output directory.
std::vector<RunResult> run_experiment(const ExperimentConfig& config, bool write_files = true);

// Cross product over the grid axes gamma, alpha, epsilon,
// fast_capacity_percent, batch_size; each run tagged with its grid point.
// Errors on an empty grid. With write_files, emits sweep.csv.
std::vector<RunResult> sweep(const ExperimentConfig& base, const nlohmann::json& grid,
                             bool write_files = true);

}  // namespace tierlearn
