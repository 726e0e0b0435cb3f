#include "tierlearn/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "tierlearn/error.hpp"
#include "tierlearn/rng.hpp"

namespace tierlearn {

namespace {

constexpr uint32_t kMaxRequestPages = 64;

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= (uint8_t)c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Next size for a pool that must spend `remaining` touches over `left`
// requests, each within [1, cap]. Jitters around the running mean while
// keeping the tail feasible, so the pool total lands exactly.
uint32_t next_size(uint64_t remaining, uint64_t left, uint32_t cap, Rng& rng) {
    double target = (double)remaining / (double)left;
    int64_t size = (int64_t)std::llround(target) + (int64_t)rng.below(5) - 2;
    int64_t lo = std::max<int64_t>(1, (int64_t)remaining - (int64_t)(left - 1) * cap);
    int64_t hi = std::min<int64_t>(cap, (int64_t)remaining - (int64_t)(left - 1));
    return (uint32_t)std::clamp(size, lo, hi);
}

int64_t next_timestamp(int64_t& t, Rng& rng) {
    t += (int64_t)(20 + rng.below(180)) * 1000;
    return t;
}

}  // namespace

uint64_t CorpusWorkload::derived_seed() const { return fnv1a64(name); }

uint64_t CorpusWorkload::total_touches() const {
    return (uint64_t)std::llround((double)unique_pages * avg_access_count);
}

uint64_t CorpusWorkload::request_count() const {
    return std::max<uint64_t>(1, (uint64_t)std::llround((double)total_touches() / avg_size_pages));
}

const std::vector<CorpusWorkload>& corpus_catalog() {
    // Summary statistics of the 14 enterprise block traces; hot_page_share
    // reconstructs the reuse structure (above ~0.1 the hot set outgrows the
    // 10% fast tier used in the experiments).
    static const std::vector<CorpusWorkload> catalog = {
        {"hm_1", 0.047, 15.2, 44.5, 6265, 0.25},
        {"mds_0", 0.881, 9.6, 3.5, 31933, 0.08},
        {"prn_1", 0.247, 20.0, 2.6, 6891, 0.30},
        {"proj_0", 0.875, 38.0, 48.3, 1381, 0.08},
        {"proj_2", 0.124, 42.4, 2.9, 27967, 0.30},
        {"proj_3", 0.052, 9.6, 3.6, 19397, 0.25},
        {"prxy_0", 0.969, 7.2, 95.7, 525, 0.08},
        {"prxy_1", 0.345, 12.8, 150.1, 6845, 0.08},
        {"rsrch_0", 0.907, 9.2, 34.7, 5504, 0.08},
        {"src1_0", 0.436, 43.2, 12.7, 13640, 0.30},
        {"stg_1", 0.363, 40.8, 1.1, 3787, 0.05},
        {"usr_0", 0.596, 22.8, 19.7, 2138, 0.08},
        {"wdev_2", 0.999, 8.0, 17.7, 4270, 0.08},
        {"web_1", 0.459, 29.6, 1.2, 6095, 0.05},
    };
    return catalog;
}

const CorpusWorkload& corpus_workload(const std::string& name) {
    for (const auto& w : corpus_catalog()) {
        if (w.name == name) return w;
    }
    fail("corpus: no workload named '", name, "'");
}

std::vector<StorageRequest> gen_workload(const CorpusWorkload& w) {
    require(w.unique_pages >= 2, "corpus ", w.name, ": needs at least two unique pages");
    require(w.avg_access_count >= 1.0, "corpus ", w.name, ": average access count below 1");
    require(w.avg_size_pages >= 1.0 && w.avg_size_pages <= kMaxRequestPages, "corpus ", w.name,
            ": average request size out of range");
    require(w.write_fraction >= 0 && w.write_fraction <= 1, "corpus ", w.name,
            ": write fraction out of range");

    Rng rng(w.derived_seed());
    const uint64_t unique = w.unique_pages;
    const uint64_t touches = w.total_touches();
    const uint64_t n_req = w.request_count();
    require(touches >= unique, "corpus ", w.name, ": touches below unique pages");

    uint64_t hot_pages =
        std::clamp<uint64_t>((uint64_t)std::llround((double)unique * w.hot_page_share), 1,
                             unique - 1);
    const uint64_t cold_pages = unique - hot_pages;
    const uint64_t hot_touches = touches - cold_pages;

    // Cold sweep: one sequential pass over [hot_pages, unique), large
    // requests. Its request count follows from the sweep sizes; everything
    // else is a hot request.
    uint32_t cold_size = (uint32_t)std::clamp<int64_t>(
        (int64_t)std::llround(w.avg_size_pages * 1.8), 1, kMaxRequestPages);
    struct Piece {
        uint64_t page;
        uint32_t size;
    };
    std::vector<Piece> cold;
    for (uint64_t pos = hot_pages; pos < unique;) {
        uint64_t left = unique - pos;
        uint32_t size = (uint32_t)std::clamp<int64_t>(
            (int64_t)cold_size + (int64_t)rng.below(5) - 2, 1, (int64_t)std::min<uint64_t>(
                                                                   left, kMaxRequestPages));
        cold.push_back({pos, size});
        pos += size;
    }
    require(cold.size() < n_req, "corpus ", w.name,
            ": cold sweep exceeds the request budget; lower hot_page_share");
    const uint64_t n_hot = n_req - cold.size();
    require(hot_touches >= n_hot, "corpus ", w.name, ": hot pool too thin for its requests");
    require(hot_touches <= n_hot * (uint64_t)kMaxRequestPages, "corpus ", w.name,
            ": hot pool cannot absorb its touches");

    // Hot pool: sweep [0, hot_pages) once for coverage, then uniform
    // re-touches. Overshoot past the hot boundary is allowed; it only
    // re-touches already-covered cold pages.
    std::vector<Piece> hot;
    hot.reserve(n_hot);
    uint64_t remaining = hot_touches;
    uint64_t cover_pos = 0;
    for (uint64_t i = 0; i < n_hot; ++i) {
        uint32_t size = next_size(remaining, n_hot - i, kMaxRequestPages, rng);
        remaining -= size;
        uint64_t page;
        if (cover_pos < hot_pages) {
            page = cover_pos;
            cover_pos += size;
        } else {
            uint64_t span = hot_pages > size ? hot_pages - size : 1;
            page = rng.below(span);
        }
        hot.push_back({page, size});
    }
    require(cover_pos >= hot_pages, "corpus ", w.name, ": hot region not fully covered");

    // Proportional merge keeps the cold sweep spread through the run.
    std::vector<StorageRequest> out;
    out.reserve(n_req);
    int64_t t = 0;
    size_t ci = 0, hi = 0;
    int64_t err = 0;
    for (uint64_t i = 0; i < n_req; ++i) {
        err += (int64_t)cold.size();
        Piece p;
        if (err >= (int64_t)n_req && ci < cold.size()) {
            err -= (int64_t)n_req;
            p = cold[ci++];
        } else if (hi < hot.size()) {
            p = hot[hi++];
        } else {
            p = cold[ci++];
        }
        StorageRequest r;
        r.timestamp_ns = next_timestamp(t, rng);
        r.page = p.page;
        r.size_pages = p.size;
        r.op = Op::Read;
        out.push_back(r);
    }
    require(ci == cold.size() && hi == hot.size(), "corpus ", w.name, ": merge lost requests");

    // Exact write count via a partial shuffle of the request indexes.
    uint64_t n_write = (uint64_t)std::llround(w.write_fraction * (double)n_req);
    std::vector<uint32_t> order(n_req);
    for (uint32_t i = 0; i < n_req; ++i) order[i] = i;
    for (uint64_t i = 0; i < n_write; ++i) {
        uint64_t j = i + rng.below(n_req - i);
        std::swap(order[i], order[j]);
        out[order[i]].op = Op::Write;
    }
    return out;
}

uint64_t TriWorkload::derived_seed() const { return fnv1a64(name); }

const std::vector<TriWorkload>& tri_catalog() {
    static const std::vector<TriWorkload> catalog = {
        {"tri_mixed", 300, 1500, 6000, 0.55, 0.35, 60000, 0.35, 4, 8, 32},
        {"tri_write", 200, 2500, 4000, 0.50, 0.42, 50000, 0.70, 2, 6, 48},
        {"tri_read", 400, 1000, 10000, 0.55, 0.325, 80000, 0.15, 8, 16, 64},
    };
    return catalog;
}

const TriWorkload& tri_workload(const std::string& name) {
    for (const auto& w : tri_catalog()) {
        if (w.name == name) return w;
    }
    fail("corpus: no tri workload named '", name, "'");
}

std::vector<StorageRequest> gen_tri_workload(const TriWorkload& w) {
    require(w.hot_pages >= 1 && w.warm_pages >= 1 && w.cold_pages >= 1, "tri corpus ", w.name,
            ": every pool needs pages");
    require(w.hot_touch_share + w.warm_touch_share < 1.0, "tri corpus ", w.name,
            ": touch shares leave nothing for the cold sweep");

    Rng rng(w.derived_seed());
    uint64_t budget[3] = {
        (uint64_t)std::llround(w.hot_touch_share * (double)w.total_touches),
        (uint64_t)std::llround(w.warm_touch_share * (double)w.total_touches),
        0,
    };
    budget[2] = w.total_touches - budget[0] - budget[1];
    const uint64_t base[3] = {0, w.hot_pages, w.hot_pages + w.warm_pages};
    const uint64_t span[3] = {w.hot_pages, w.warm_pages, w.cold_pages};
    const uint32_t sizes[3] = {w.hot_size, w.warm_size, w.cold_size};

    std::vector<StorageRequest> out;
    int64_t t = 0;
    uint64_t cold_pos = 0;
    while (budget[0] + budget[1] + budget[2] > 0) {
        uint64_t total = budget[0] + budget[1] + budget[2];
        uint64_t pick = rng.below(total);
        int pool = pick < budget[0] ? 0 : (pick < budget[0] + budget[1] ? 1 : 2);
        uint32_t size = (uint32_t)std::clamp<uint64_t>(
            sizes[pool] + rng.below(3), 1,
            std::min<uint64_t>(budget[pool], kMaxRequestPages));
        uint64_t page;
        if (pool == 2) {
            page = base[2] + cold_pos;
            cold_pos = (cold_pos + size) % span[2];
        } else {
            uint64_t start_span = span[pool] > size ? span[pool] - size : 1;
            page = base[pool] + rng.below(start_span);
        }
        StorageRequest r;
        r.timestamp_ns = next_timestamp(t, rng);
        r.page = page;
        r.size_pages = size;
        r.op = rng.bernoulli(w.write_fraction) ? Op::Write : Op::Read;
        out.push_back(r);
        budget[pool] -= size;
    }
    return out;
}

nlohmann::json write_corpus(const std::string& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest = nlohmann::json::object();
    auto add = [&](const std::string& name, const std::vector<StorageRequest>& reqs) {
        std::string file = name + ".csv";
        write_msrc_file((std::filesystem::path(dir) / file).string(), reqs, name);
        WorkloadStats stats = workload_stats(reqs);
        manifest[name] = {
            {"file", file},
            {"requests", reqs.size()},
            {"write_fraction", stats.write_fraction},
            {"avg_request_size_pages", stats.avg_request_size_pages},
            {"avg_access_count", stats.avg_access_count},
            {"unique_pages", stats.unique_pages},
            {"unique_requests", stats.unique_requests},
        };
    };
    for (const auto& w : corpus_catalog()) add(w.name, gen_workload(w));
    for (const auto& w : tri_catalog()) add(w.name, gen_tri_workload(w));

    std::ofstream out(std::filesystem::path(dir) / "manifest.json");
    require(out.good(), "corpus: cannot write manifest under ", dir);
    out << manifest.dump(2) << "\n";
    return manifest;
}

}  // namespace tierlearn
