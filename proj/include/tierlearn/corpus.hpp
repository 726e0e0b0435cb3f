#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tierlearn/trace.hpp"

#include "json.hpp"

namespace tierlearn {

// Recipe for one synthetic enterprise workload. The generator reproduces the
// published summary statistics exactly where the accounting allows it: the
// trace covers unique_pages distinct pages, carries
// round(unique_pages * avg_access_count) page touches split into
// round(touches / avg_size_pages) requests, and write_fraction of the
// requests are writes. Structure comes from two pools: a hot region that
// absorbs every repeated touch, and a cold region swept sequentially once.
struct CorpusWorkload {
    std::string name;
    double write_fraction = 0;
    double avg_size_pages = 1;
    double avg_access_count = 1;
    uint64_t unique_pages = 0;
    // Fraction of unique pages in the hot region. Above the fast-tier share
    // used in the experiments this produces cache-thrash pressure; below it
    // the hot set is parkable.
    double hot_page_share = 0.1;

    uint64_t derived_seed() const;  // FNV-1a of the name
    uint64_t total_touches() const;
    uint64_t request_count() const;
};

// The 14 bundled enterprise-style workloads.
const std::vector<CorpusWorkload>& corpus_catalog();
const CorpusWorkload& corpus_workload(const std::string& name);

std::vector<StorageRequest> gen_workload(const CorpusWorkload& w);

// Three-temperature recipe for the three-tier experiments: a hot pool of
// small random re-touches, a warm pool of moderate reuse, and a cold
// sequential sweep.
struct TriWorkload {
    std::string name;
    uint64_t hot_pages = 0;
    uint64_t warm_pages = 0;
    uint64_t cold_pages = 0;
    double hot_touch_share = 0;   // of total touches
    double warm_touch_share = 0;  // of total touches
    uint64_t total_touches = 0;
    double write_fraction = 0;
    uint32_t hot_size = 1;
    uint32_t warm_size = 1;
    uint32_t cold_size = 1;

    uint64_t derived_seed() const;
};

const std::vector<TriWorkload>& tri_catalog();
const TriWorkload& tri_workload(const std::string& name);

std::vector<StorageRequest> gen_tri_workload(const TriWorkload& w);

// Writes every catalog trace to dir as MSRC CSV plus a manifest.json with
// the measured statistics; returns the manifest.
nlohmann::json write_corpus(const std::string& dir);

}  // namespace tierlearn
