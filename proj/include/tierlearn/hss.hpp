#pragma once

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "tierlearn/trace.hpp"

#include "json.hpp"

namespace tierlearn {

constexpr int kUnplaced = -1;

struct DeviceProfile {
    std::string name;
    uint64_t capacity_pages = 0;
    double read_ns_per_page = 0;
    double write_ns_per_page = 0;
    double seek_penalty_ns = 0;  // charged once per non-sequential request

    // Derives per-page latencies as max(page transfer time at the sequential
    // bandwidth, reciprocal random IOPS). Pass 0 IOPS when the datasheet only
    // gives a bandwidth. Rates in bytes/s and ops/s.
    static DeviceProfile from_rates(std::string name, uint64_t capacity_pages,
                                    double seq_read_bps, double seq_write_bps,
                                    double rand_read_iops, double rand_write_iops,
                                    double seek_penalty_ns);

    void validate() const;
};

// Built-in profiles: "H" (fast NVM SSD), "M" (mid SATA SSD), "L" (HDD with a
// 4 ms seek), "L_SSD" (entry-level SATA SSD).
DeviceProfile preset_device(const std::string& key, uint64_t capacity_pages);

// seek (if not sequential) + size * per-page latency, in ns.
double device_latency(const DeviceProfile& dev, Op op, uint32_t size_pages, bool sequential);

struct ServiceOutcome {
    double latency_ns = 0;           // foreground request latency L_t
    double eviction_latency_ns = 0;  // background migration cost L_e, > 0 iff pages moved out
    std::vector<uint64_t> evicted_pages;
    bool promoted = false;  // some covered page moved to a faster tier
};

struct RawFeatures {
    uint32_t size_pages = 1;
    Op op = Op::Read;
    int64_t access_interval = -1;  // steps since the first covered page was last touched, -1 = never
    uint32_t access_count = 0;     // before this request's increment
    double fast_remaining_fraction = 1.0;
    double mid_remaining_fraction = 1.0;  // tier 1 when three or more tiers, else 1
    int current_tier = kUnplaced;         // residency of the first covered page
};

// Multi-tier storage state. Tier 0 is fastest. Placement actions address a
// tier; capacity overflow evicts least-recently-used pages to the next
// slower tier (or asks the installed victim selector). Eviction traffic is
// background: it never lands in latency_ns, only in eviction_latency_ns.
class HssEnv {
public:
    explicit HssEnv(std::vector<DeviceProfile> tiers, bool charge_migration_read = true);

    int tier_count() const { return (int)tiers_.size(); }
    const DeviceProfile& tier(int t) const { return tiers_[(size_t)t]; }
    int64_t request_step() const { return step_; }
    uint64_t used(int t) const { return used_[(size_t)t]; }
    uint64_t remaining(int t) const { return tiers_[(size_t)t].capacity_pages - used_[(size_t)t]; }
    int tier_of(uint64_t page) const;  // kUnplaced when never placed
    uint32_t access_count(uint64_t page) const;

    RawFeatures snapshot_features(const StorageRequest& req) const;
    ServiceOutcome serve(const StorageRequest& req, int action_tier);

    // Background demotion used by epoch policies. Returns the migration
    // latency (read + write), accounted like eviction work.
    double migrate_page(uint64_t page, int dest_tier);

    std::vector<uint64_t> pages_in_tier(int t) const;

    // Clairvoyant policies override the eviction victim. The selector gets
    // the environment and the tier and must return a page resident there.
    using VictimSelector = std::function<uint64_t(const HssEnv& env, int tier)>;
    void set_victim_selector(VictimSelector fn) { victim_selector_ = std::move(fn); }

    using MoveListener = std::function<void(uint64_t page, int from_tier, int to_tier)>;
    void set_move_listener(MoveListener fn) { move_listener_ = std::move(fn); }

    uint64_t evicted_pages_total() const { return evicted_pages_total_; }
    uint64_t demoted_pages_total() const { return demoted_pages_total_; }
    double eviction_latency_total() const { return eviction_latency_total_; }

    nlohmann::json state_dump() const;

private:
    struct PageMeta {
        int tier = kUnplaced;
        uint32_t access_count = 0;
        int64_t last_access_step = -1;
    };

    void place(uint64_t page, int to_tier);  // moves residency, keeps recency
    void spill(int tier, ServiceOutcome& out);  // evict until tier fits
    double evict_one(int tier, std::vector<uint64_t>& evicted);

    std::vector<DeviceProfile> tiers_;
    bool charge_migration_read_;
    std::unordered_map<uint64_t, PageMeta> meta_;
    // Recency index per tier, keyed (last_access_step, page).
    std::vector<std::set<std::pair<int64_t, uint64_t>>> lru_;
    std::vector<uint64_t> used_;
    int64_t step_ = 0;
    int prev_tier_ = -1;
    int64_t prev_end_page_ = -2;
    uint64_t evicted_pages_total_ = 0;
    uint64_t demoted_pages_total_ = 0;
    double eviction_latency_total_ = 0;
    VictimSelector victim_selector_;
    MoveListener move_listener_;
};

}  // namespace tierlearn
