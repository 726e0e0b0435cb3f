#include "tierlearn/hss.hpp"

#include <algorithm>

#include "tierlearn/error.hpp"

namespace tierlearn {

DeviceProfile DeviceProfile::from_rates(std::string name, uint64_t capacity_pages,
                                        double seq_read_bps, double seq_write_bps,
                                        double rand_read_iops, double rand_write_iops,
                                        double seek_penalty_ns) {
    auto per_page = [](double seq_bps, double iops) {
        double bw_term = seq_bps > 0 ? (double)kPageBytes / seq_bps * 1e9 : 0;
        double iops_term = iops > 0 ? 1e9 / iops : 0;
        return std::max(bw_term, iops_term);
    };
    DeviceProfile d;
    d.name = std::move(name);
    d.capacity_pages = capacity_pages;
    d.read_ns_per_page = per_page(seq_read_bps, rand_read_iops);
    d.write_ns_per_page = per_page(seq_write_bps, rand_write_iops);
    d.seek_penalty_ns = seek_penalty_ns;
    d.validate();
    return d;
}

void DeviceProfile::validate() const {
    require(capacity_pages >= 1, "device '", name, "': capacity_pages must be >= 1");
    require(read_ns_per_page > 0, "device '", name, "': read latency must be > 0");
    require(write_ns_per_page > 0, "device '", name, "': write latency must be > 0");
    require(seek_penalty_ns >= 0, "device '", name, "': seek penalty must be >= 0");
}

DeviceProfile preset_device(const std::string& key, uint64_t capacity_pages) {
    // Datasheet rates: sequential bandwidth in bytes/s, random 4 KiB IOPS.
    if (key == "H")
        return DeviceProfile::from_rates("H", capacity_pages, 2.4e9, 2.0e9, 550000, 500000, 0);
    if (key == "M")
        return DeviceProfile::from_rates("M", capacity_pages, 550e6, 510e6, 895000, 21000, 0);
    if (key == "L")
        return DeviceProfile::from_rates("L", capacity_pages, 210e6, 210e6, 0, 0, 4e6);
    if (key == "L_SSD")
        return DeviceProfile::from_rates("L_SSD", capacity_pages, 520e6, 450e6, 0, 0, 0);
    fail("unknown device preset '", key, "' (expected H, M, L or L_SSD)");
}

double device_latency(const DeviceProfile& dev, Op op, uint32_t size_pages, bool sequential) {
    double per_page = op == Op::Read ? dev.read_ns_per_page : dev.write_ns_per_page;
    return (sequential ? 0.0 : dev.seek_penalty_ns) + (double)size_pages * per_page;
}

namespace {
double charge(const DeviceProfile& dev, Op op, uint64_t pages, bool sequential) {
    if (pages == 0) return 0;
    return device_latency(dev, op, (uint32_t)pages, sequential);
}
}  // namespace

HssEnv::HssEnv(std::vector<DeviceProfile> tiers, bool charge_migration_read)
    : tiers_(std::move(tiers)), charge_migration_read_(charge_migration_read) {
    require(tiers_.size() >= 2, "need at least two tiers");
    for (const auto& t : tiers_) t.validate();
    lru_.resize(tiers_.size());
    used_.assign(tiers_.size(), 0);
}

int HssEnv::tier_of(uint64_t page) const {
    auto it = meta_.find(page);
    return it == meta_.end() ? kUnplaced : it->second.tier;
}

uint32_t HssEnv::access_count(uint64_t page) const {
    auto it = meta_.find(page);
    return it == meta_.end() ? 0 : it->second.access_count;
}

RawFeatures HssEnv::snapshot_features(const StorageRequest& req) const {
    RawFeatures f;
    f.size_pages = req.size_pages;
    f.op = req.op;
    int64_t next_step = step_ + 1;  // the step this request will execute as
    auto it = meta_.find(req.page);
    if (it != meta_.end()) {
        f.access_interval = it->second.last_access_step >= 0
                                ? next_step - it->second.last_access_step
                                : -1;
        f.access_count = it->second.access_count;
        f.current_tier = it->second.tier;
    }
    f.fast_remaining_fraction = (double)remaining(0) / (double)tiers_[0].capacity_pages;
    f.mid_remaining_fraction =
        tier_count() >= 3 ? (double)remaining(1) / (double)tiers_[1].capacity_pages : 1.0;
    return f;
}

void HssEnv::place(uint64_t page, int to_tier) {
    PageMeta& m = meta_[page];
    int from = m.tier;
    if (from == to_tier) return;
    if (from >= 0) {
        lru_[(size_t)from].erase({m.last_access_step, page});
        --used_[(size_t)from];
    }
    m.tier = to_tier;
    if (to_tier >= 0) {
        lru_[(size_t)to_tier].insert({m.last_access_step, page});
        ++used_[(size_t)to_tier];
    }
    if (move_listener_) move_listener_(page, from, to_tier);
}

double HssEnv::evict_one(int tier, std::vector<uint64_t>& evicted) {
    if (tier + 1 >= tier_count())
        fail("capacity exhausted: slowest tier '", tiers_.back().name, "' is full");
    uint64_t victim;
    if (victim_selector_) {
        victim = victim_selector_(*this, tier);
        auto it = meta_.find(victim);
        require(it != meta_.end() && it->second.tier == tier,
                "victim selector returned page ", victim, " not resident in tier ", tier);
    } else {
        victim = lru_[(size_t)tier].begin()->second;
    }
    // Background migrations move batched, so no seek charge.
    double lat = charge(tiers_[(size_t)tier], Op::Read, 1, true) +
                 charge(tiers_[(size_t)tier + 1], Op::Write, 1, true);
    place(victim, tier + 1);
    evicted.push_back(victim);
    ++evicted_pages_total_;
    return lat;
}

void HssEnv::spill(int tier, ServiceOutcome& out) {
    for (int t = tier; t < tier_count(); ++t) {
        while (used_[(size_t)t] > tiers_[(size_t)t].capacity_pages)
            out.eviction_latency_ns += evict_one(t, out.evicted_pages);
    }
}

ServiceOutcome HssEnv::serve(const StorageRequest& req, int action_tier) {
    require(action_tier >= 0 && action_tier < tier_count(),
            "placement action ", action_tier, " out of range (", tier_count(), " tiers)");
    ++step_;

    bool sequential =
        action_tier == prev_tier_ && (int64_t)req.page == prev_end_page_ + 1;

    // Count residency per source tier before touching anything.
    uint64_t direct_pages = 0;  // already on the action tier, or brand new
    uint64_t moved_pages = 0;   // migrating in from another tier
    std::vector<uint64_t> per_source(tiers_.size(), 0);
    bool promoted = false;
    for (uint64_t p = req.page; p < req.page + req.size_pages; ++p) {
        int t = tier_of(p);
        if (t == action_tier || t == kUnplaced) {
            ++direct_pages;
        } else {
            ++moved_pages;
            ++per_source[(size_t)t];
            if (t > action_tier) promoted = true;
        }
    }

    ServiceOutcome out;
    out.promoted = promoted;
    const DeviceProfile& target = tiers_[(size_t)action_tier];
    if (req.op == Op::Read) {
        out.latency_ns += charge(target, Op::Read, direct_pages, sequential);
        if (charge_migration_read_) {
            for (size_t s = 0; s < per_source.size(); ++s)
                out.latency_ns += charge(tiers_[s], Op::Read, per_source[s], false);
        }
        out.latency_ns += charge(target, Op::Write, moved_pages, false);
    } else {
        // Writes land on the target whole; any stale copy is dropped.
        out.latency_ns += charge(target, Op::Write, req.size_pages, sequential);
    }

    // Apply residency and recency. Pages touched this step carry the newest
    // recency stamp, so the LRU scan below never picks them first.
    for (uint64_t p = req.page; p < req.page + req.size_pages; ++p) {
        PageMeta& m = meta_[p];
        if (m.tier != action_tier) place(p, action_tier);
        if (m.last_access_step != step_) {
            lru_[(size_t)action_tier].erase({m.last_access_step, p});
            lru_[(size_t)action_tier].insert({step_, p});
            m.last_access_step = step_;
        }
        ++m.access_count;
    }

    spill(action_tier, out);
    eviction_latency_total_ += out.eviction_latency_ns;

    prev_tier_ = action_tier;
    prev_end_page_ = (int64_t)(req.page + req.size_pages - 1);
    return out;
}

double HssEnv::migrate_page(uint64_t page, int dest_tier) {
    require(dest_tier >= 0 && dest_tier < tier_count(), "migrate_page: bad tier ", dest_tier);
    auto it = meta_.find(page);
    require(it != meta_.end() && it->second.tier != kUnplaced,
            "migrate_page: page ", page, " is not resident");
    int from = it->second.tier;
    if (from == dest_tier) return 0;
    double lat = charge(tiers_[(size_t)from], Op::Read, 1, true) +
                 charge(tiers_[(size_t)dest_tier], Op::Write, 1, true);
    place(page, dest_tier);
    ++demoted_pages_total_;
    ServiceOutcome scratch;
    spill(dest_tier, scratch);
    lat += scratch.eviction_latency_ns;
    eviction_latency_total_ += lat;
    return lat;
}

std::vector<uint64_t> HssEnv::pages_in_tier(int t) const {
    std::vector<uint64_t> out;
    out.reserve(lru_[(size_t)t].size());
    for (const auto& [step, page] : lru_[(size_t)t]) out.push_back(page);
    return out;
}

nlohmann::json HssEnv::state_dump() const {
    nlohmann::json tiers = nlohmann::json::array();
    for (size_t t = 0; t < tiers_.size(); ++t) {
        tiers.push_back({{"name", tiers_[t].name},
                         {"capacity_pages", tiers_[t].capacity_pages},
                         {"used_pages", used_[t]}});
    }
    return {{"tiers", tiers},
            {"tracked_pages", meta_.size()},
            {"request_step", step_},
            {"evicted_pages", evicted_pages_total_},
            {"demoted_pages", demoted_pages_total_},
            {"eviction_latency_ns", eviction_latency_total_}};
}

}  // namespace tierlearn
