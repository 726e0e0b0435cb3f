#include "tierlearn/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "tierlearn/error.hpp"

namespace tierlearn {

namespace {

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= (uint8_t)c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Shortest round-trip formatting so identical doubles print identically and
// reruns produce byte-identical files.
std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                    const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        require(known.count(it.key()) > 0, "config ", where, ": unknown field '", it.key(), "'");
    }
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    if (auto it = j.find(key); it != j.end()) return it->get<T>();
    return fallback;
}

}  // namespace

std::vector<StorageRequest> TraceSpec::load() const {
    if (has_synthetic) return gen_synthetic(synthetic);
    std::vector<std::vector<StorageRequest>> sources;
    sources.reserve(files.size());
    for (const auto& f : files) sources.push_back(parse_msrc_file(f));
    if (sources.size() == 1) return std::move(sources[0]);
    std::vector<int64_t> offsets = start_offsets_ns;
    if (offsets.empty()) offsets.assign(sources.size(), 0);
    return mix_traces(sources, offsets);
}

DeviceProfile DeviceSpec::resolve(uint64_t working_set_pages) const {
    uint64_t cap = capacity_pages;
    if (cap == 0) {
        cap = (uint64_t)std::ceil((double)working_set_pages * capacity_percent / 100.0);
        cap = std::max<uint64_t>(cap, 1);
    }
    return preset_device(preset, cap);
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    require(j.is_object(), "config: top level must be a JSON object");
    reject_unknown(j,
                   {"schema_version", "traces", "devices", "charge_migration_read", "policy",
                    "hyperparams", "seed", "mode", "output_dir"},
                   "top level");

    ExperimentConfig c;
    c.schema_version = get_or(j, "schema_version", 1);
    require(c.schema_version == 1, "config schema_version: expected 1, got ", c.schema_version);

    require(j.contains("traces") && j["traces"].is_array(), "config traces: required array");
    size_t ti = 0;
    for (const auto& t : j["traces"]) {
        std::string where = "traces[" + std::to_string(ti++) + "]";
        reject_unknown(t, {"name", "files", "start_offsets_ns", "synthetic"}, where);
        TraceSpec spec;
        require(t.contains("name"), "config ", where, ".name: required");
        spec.name = t["name"].get<std::string>();
        if (t.contains("files")) spec.files = t["files"].get<std::vector<std::string>>();
        if (t.contains("start_offsets_ns"))
            spec.start_offsets_ns = t["start_offsets_ns"].get<std::vector<int64_t>>();
        if (t.contains("synthetic")) {
            const auto& s = t["synthetic"];
            reject_unknown(s,
                           {"n_requests", "hot_page_count", "cold_page_count",
                            "hot_access_fraction", "write_fraction", "request_size_dist",
                            "seed"},
                           where + ".synthetic");
            spec.has_synthetic = true;
            spec.synthetic.n_requests = get_or<uint64_t>(s, "n_requests", 0);
            spec.synthetic.hot_page_count = get_or<uint64_t>(s, "hot_page_count", 0);
            spec.synthetic.cold_page_count = get_or<uint64_t>(s, "cold_page_count", 0);
            spec.synthetic.hot_access_fraction = get_or<double>(s, "hot_access_fraction", 0);
            spec.synthetic.write_fraction = get_or<double>(s, "write_fraction", 0);
            spec.synthetic.request_size_dist =
                get_or<std::string>(s, "request_size_dist", "fixed:1");
            spec.synthetic.seed = get_or<uint64_t>(s, "seed", 1);
        }
        c.traces.push_back(std::move(spec));
    }

    require(j.contains("devices") && j["devices"].is_array(), "config devices: required array");
    size_t di = 0;
    for (const auto& d : j["devices"]) {
        std::string where = "devices[" + std::to_string(di++) + "]";
        reject_unknown(d, {"preset", "capacity_pages", "capacity_percent"}, where);
        DeviceSpec spec;
        require(d.contains("preset"), "config ", where, ".preset: required");
        spec.preset = d["preset"].get<std::string>();
        spec.capacity_pages = get_or<uint64_t>(d, "capacity_pages", 0);
        spec.capacity_percent = get_or<double>(d, "capacity_percent", 0);
        c.devices.push_back(spec);
    }

    c.charge_migration_read = get_or(j, "charge_migration_read", true);

    require(j.contains("policy") && j["policy"].is_object(), "config policy: required object");
    {
        const auto& p = j["policy"];
        reject_unknown(p,
                       {"name", "hot_threshold", "random_write_pages", "epoch_requests",
                        "eviction_penalty", "fast_ref_latency_ns"},
                       "policy");
        require(p.contains("name"), "config policy.name: required");
        c.policy.name = p["name"].get<std::string>();
        c.policy.hot_threshold = get_or<uint32_t>(p, "hot_threshold", 4);
        c.policy.random_write_pages = get_or<uint32_t>(p, "random_write_pages", 8);
        c.policy.epoch_requests = get_or<uint64_t>(p, "epoch_requests", 1000);
        c.policy.eviction_penalty = get_or<double>(p, "eviction_penalty", 0.001);
        c.policy.fast_ref_latency_ns = get_or<double>(p, "fast_ref_latency_ns", 0);
    }

    if (j.contains("hyperparams")) {
        const auto& h = j["hyperparams"];
        reject_unknown(h,
                       {"gamma", "alpha", "epsilon", "batch_size", "n_batches",
                        "buffer_capacity", "n_atoms", "v_min", "v_max"},
                       "hyperparams");
        c.hyperparams.gamma = get_or(h, "gamma", c.hyperparams.gamma);
        c.hyperparams.alpha = get_or(h, "alpha", c.hyperparams.alpha);
        c.hyperparams.epsilon = get_or(h, "epsilon", c.hyperparams.epsilon);
        c.hyperparams.batch_size = get_or(h, "batch_size", c.hyperparams.batch_size);
        c.hyperparams.n_batches = get_or(h, "n_batches", c.hyperparams.n_batches);
        c.hyperparams.buffer_capacity = get_or(h, "buffer_capacity", c.hyperparams.buffer_capacity);
        c.hyperparams.n_atoms = get_or(h, "n_atoms", c.hyperparams.n_atoms);
        c.hyperparams.v_min = get_or(h, "v_min", c.hyperparams.v_min);
        c.hyperparams.v_max = get_or(h, "v_max", c.hyperparams.v_max);
    }

    c.seed = get_or<uint64_t>(j, "seed", 1);
    std::string mode = get_or<std::string>(j, "mode", "deterministic");
    if (mode == "deterministic") {
        c.mode = ExecMode::Deterministic;
    } else if (mode == "two_threaded") {
        c.mode = ExecMode::TwoThreaded;
    } else {
        fail("config mode: expected 'deterministic' or 'two_threaded', got '", mode, "'");
    }
    c.output_dir = get_or<std::string>(j, "output_dir", "out");
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "config: cannot open ", path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail("config ", path, ": ", e.what());
    }
    return from_json(j);
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json traces_j = nlohmann::json::array();
    for (const auto& t : traces) {
        nlohmann::json tj = {{"name", t.name}};
        if (!t.files.empty()) tj["files"] = t.files;
        if (!t.start_offsets_ns.empty()) tj["start_offsets_ns"] = t.start_offsets_ns;
        if (t.has_synthetic) {
            tj["synthetic"] = {{"n_requests", t.synthetic.n_requests},
                               {"hot_page_count", t.synthetic.hot_page_count},
                               {"cold_page_count", t.synthetic.cold_page_count},
                               {"hot_access_fraction", t.synthetic.hot_access_fraction},
                               {"write_fraction", t.synthetic.write_fraction},
                               {"request_size_dist", t.synthetic.request_size_dist},
                               {"seed", t.synthetic.seed}};
        }
        traces_j.push_back(tj);
    }
    nlohmann::json devices_j = nlohmann::json::array();
    for (const auto& d : devices) {
        nlohmann::json dj = {{"preset", d.preset}};
        if (d.capacity_pages > 0) dj["capacity_pages"] = d.capacity_pages;
        if (d.capacity_percent > 0) dj["capacity_percent"] = d.capacity_percent;
        devices_j.push_back(dj);
    }
    return {{"schema_version", schema_version},
            {"traces", traces_j},
            {"devices", devices_j},
            {"charge_migration_read", charge_migration_read},
            {"policy",
             {{"name", policy.name},
              {"hot_threshold", policy.hot_threshold},
              {"random_write_pages", policy.random_write_pages},
              {"epoch_requests", policy.epoch_requests},
              {"eviction_penalty", policy.eviction_penalty},
              {"fast_ref_latency_ns", policy.fast_ref_latency_ns}}},
            {"hyperparams",
             {{"gamma", hyperparams.gamma},
              {"alpha", hyperparams.alpha},
              {"epsilon", hyperparams.epsilon},
              {"batch_size", hyperparams.batch_size},
              {"n_batches", hyperparams.n_batches},
              {"buffer_capacity", hyperparams.buffer_capacity},
              {"n_atoms", hyperparams.n_atoms},
              {"v_min", hyperparams.v_min},
              {"v_max", hyperparams.v_max}}},
            {"seed", seed},
            {"mode", mode == ExecMode::Deterministic ? "deterministic" : "two_threaded"},
            {"output_dir", output_dir}};
}

void ExperimentConfig::validate() const {
    require(!traces.empty(), "config traces: at least one trace required");
    std::set<std::string> names;
    for (size_t i = 0; i < traces.size(); ++i) {
        const auto& t = traces[i];
        std::string where = "traces[" + std::to_string(i) + "]";
        require(!t.name.empty(), "config ", where, ".name: must not be empty");
        require(names.insert(t.name).second, "config ", where, ".name: duplicate '", t.name,
                "'");
        require(t.has_synthetic != !t.files.empty(), "config ", where,
                ": exactly one of files and synthetic required");
        for (const auto& f : t.files) {
            require(std::filesystem::exists(f), "config ", where, ": trace file not found: ",
                    f);
        }
        if (!t.start_offsets_ns.empty()) {
            require(t.start_offsets_ns.size() == t.files.size(), "config ", where,
                    ".start_offsets_ns: needs one offset per file");
        }
        if (t.has_synthetic) {
            require(t.synthetic.n_requests > 0, "config ", where,
                    ".synthetic.n_requests: must be positive");
        }
    }
    require(devices.size() >= 2, "config devices: at least two tiers required");
    for (size_t i = 0; i < devices.size(); ++i) {
        const auto& d = devices[i];
        std::string where = "devices[" + std::to_string(i) + "]";
        require((d.capacity_pages > 0) != (d.capacity_percent > 0), "config ", where,
                ": exactly one of capacity_pages and capacity_percent required");
        if (d.capacity_percent > 0) {
            require(d.capacity_percent <= 100.0, "config ", where,
                    ".capacity_percent: must be in (0, 100], got ", d.capacity_percent);
        }
        preset_device(d.preset, 1);  // rejects unknown preset names
    }
    require(!policy.name.empty(), "config policy.name: must not be empty");
    hyperparams.validate();
}

std::string ExperimentConfig::config_hash() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  (unsigned long long)fnv1a64(to_json().dump()));
    return buf;
}

std::string effective_output_dir(const ExperimentConfig& config) {
    if (const char* env = std::getenv("TIERLEARN_OUT"); env && *env) return env;
    return config.output_dir;
}

nlohmann::json RunResult::to_json() const {
    return {{"trace", trace},
            {"policy", policy},
            {"config_hash", config_hash},
            {"seed", seed},
            {"tags", tags},
            {"fast_only_avg_latency_ns", fast_only_avg_latency_ns},
            {"normalized_latency", normalized_latency},
            {"report", report.to_json()}};
}

std::string results_csv_header() {
    return "workload,policy,config_hash,seed,tags,requests,total_latency_ns,avg_latency_ns,"
           "normalized_latency,iops,eviction_ratio,fast_preference,evicted_pages,"
           "total_eviction_latency_ns";
}

std::string results_csv_row(const RunResult& r) {
    std::string tags_s;
    for (auto it = r.tags.begin(); it != r.tags.end(); ++it) {
        if (!tags_s.empty()) tags_s += ';';
        tags_s += it.key();
        tags_s += '=';
        tags_s += it->is_string() ? it->get<std::string>() : it->dump();
    }
    std::string row = r.trace + "," + r.policy + "," + r.config_hash + "," +
                      std::to_string(r.seed) + "," + tags_s + "," +
                      std::to_string(r.report.requests) + "," + fmt(r.report.total_latency_ns) +
                      "," + fmt(r.report.avg_latency_ns) + "," + fmt(r.normalized_latency) +
                      "," + fmt(r.report.iops) + "," + fmt(r.report.eviction_ratio) + "," +
                      fmt(r.report.fast_preference) + "," +
                      std::to_string(r.report.evicted_pages) + "," +
                      fmt(r.report.total_eviction_latency_ns);
    return row;
}

std::unique_ptr<IPolicy> make_policy(const PolicySpec& spec, int n_tiers,
                                     const Hyperparams& hp, ExecMode mode, uint64_t seed) {
    if (spec.name == "fast_only") return std::make_unique<FastOnlyPolicy>();
    if (spec.name == "slow_only") return std::make_unique<SlowOnlyPolicy>();
    if (spec.name == "random_place") return std::make_unique<RandomPolicy>(seed);
    if (spec.name == "cde_place")
        return std::make_unique<CdePolicy>(spec.hot_threshold, spec.random_write_pages);
    if (spec.name == "hps_place") return std::make_unique<HpsPolicy>(spec.epoch_requests);
    if (spec.name == "tri_heuristic_place")
        return std::make_unique<TriHeuristicPolicy>(spec.hot_threshold);
    if (spec.name == "oracle_place") return std::make_unique<OraclePolicy>();
    if (spec.name == "rl_place") {
        RewardParams rp;
        rp.eviction_penalty = spec.eviction_penalty;
        rp.fast_ref_latency_ns = spec.fast_ref_latency_ns;
        return std::make_unique<RlAgent>(n_tiers, hp, rp, mode, seed);
    }
    fail("config policy.name: unknown policy '", spec.name,
         "'; valid: fast_only, slow_only, random_place, cde_place, hps_place, "
         "tri_heuristic_place, oracle_place, rl_place");
}

namespace {

RunResult run_one(const ExperimentConfig& config, const TraceSpec& spec,
                  const std::vector<StorageRequest>& trace) {
    require(!trace.empty(), "trace ", spec.name, ": empty trace");
    uint64_t ws = workload_stats(trace).unique_pages;

    // Normalization denominator: Fast-Only over tiers sized to the full
    // working set, so placement never hits a capacity wall.
    std::vector<DeviceProfile> ideal;
    ideal.reserve(config.devices.size());
    for (const auto& d : config.devices) {
        DeviceProfile p = d.resolve(ws);
        p.capacity_pages = ws;
        ideal.push_back(p);
    }
    HssEnv fast_env(ideal, config.charge_migration_read);
    FastOnlyPolicy fast_only;
    MetricsReport fast_rep = run_policy(fast_only, fast_env, trace);

    std::vector<DeviceProfile> tiers;
    tiers.reserve(config.devices.size());
    for (const auto& d : config.devices) tiers.push_back(d.resolve(ws));
    HssEnv env(tiers, config.charge_migration_read);
    auto policy = make_policy(config.policy, (int)tiers.size(), config.hyperparams,
                              config.mode, config.seed);
    MetricsReport rep = run_policy(*policy, env, trace);

    RunResult r;
    r.trace = spec.name;
    r.policy = rep.policy;
    r.config_hash = config.config_hash();
    r.seed = config.seed;
    r.report = std::move(rep);
    r.fast_only_avg_latency_ns = fast_rep.avg_latency_ns;
    r.normalized_latency = fast_rep.avg_latency_ns > 0
                               ? r.report.avg_latency_ns / fast_rep.avg_latency_ns
                               : 0.0;
    return r;
}

void write_results(const std::string& dir, const std::string& csv_name,
                   const std::vector<RunResult>& results, bool per_run_json) {
    std::filesystem::create_directories(dir);
    std::ofstream csv(std::filesystem::path(dir) / csv_name);
    require(csv.good(), "harness: cannot write ", csv_name, " under ", dir);
    csv << results_csv_header() << "\n";
    for (const auto& r : results) csv << results_csv_row(r) << "\n";
    if (!per_run_json) return;
    for (const auto& r : results) {
        std::string file = r.trace + "_" + r.policy + ".json";
        std::ofstream out(std::filesystem::path(dir) / file);
        require(out.good(), "harness: cannot write ", file, " under ", dir);
        out << r.to_json().dump(2) << "\n";
    }
}

}  // namespace

std::vector<RunResult> run_experiment(const ExperimentConfig& config, bool write_files) {
    config.validate();
    std::vector<RunResult> results;
    results.reserve(config.traces.size());
    for (const auto& spec : config.traces) {
        std::vector<StorageRequest> trace = spec.load();
        results.push_back(run_one(config, spec, trace));
    }
    if (write_files) write_results(effective_output_dir(config), "results.csv", results, true);
    return results;
}

std::vector<RunResult> sweep(const ExperimentConfig& base, const nlohmann::json& grid,
                             bool write_files) {
    require(grid.is_object() && !grid.empty(), "sweep grid: must be a non-empty object");
    reject_unknown(grid, {"gamma", "alpha", "epsilon", "fast_capacity_percent", "batch_size"},
                   "sweep grid");
    for (auto it = grid.begin(); it != grid.end(); ++it) {
        require(it->is_array() && !it->empty(), "sweep grid ", it.key(),
                ": must be a non-empty array");
    }

    std::vector<nlohmann::json> points = {nlohmann::json::object()};
    for (auto it = grid.begin(); it != grid.end(); ++it) {
        std::vector<nlohmann::json> expanded;
        expanded.reserve(points.size() * it->size());
        for (const auto& p : points) {
            for (const auto& v : *it) {
                nlohmann::json q = p;
                q[it.key()] = v;
                expanded.push_back(std::move(q));
            }
        }
        points = std::move(expanded);
    }

    std::vector<RunResult> all;
    for (const auto& point : points) {
        ExperimentConfig c = base;
        if (point.contains("gamma")) c.hyperparams.gamma = point["gamma"].get<double>();
        if (point.contains("alpha")) c.hyperparams.alpha = point["alpha"].get<double>();
        if (point.contains("epsilon")) c.hyperparams.epsilon = point["epsilon"].get<double>();
        if (point.contains("batch_size"))
            c.hyperparams.batch_size = point["batch_size"].get<uint32_t>();
        if (point.contains("fast_capacity_percent")) {
            require(!c.devices.empty(), "sweep: base config has no devices");
            c.devices[0].capacity_pages = 0;
            c.devices[0].capacity_percent = point["fast_capacity_percent"].get<double>();
        }
        for (RunResult& r : run_experiment(c, false)) {
            r.tags = point;
            all.push_back(std::move(r));
        }
    }
    if (write_files) write_results(effective_output_dir(base), "sweep.csv", all, false);
    return all;
}

}  // namespace tierlearn
