#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "tierlearn/hss.hpp"
#include "tierlearn/rng.hpp"
#include "tierlearn/trace.hpp"

#include "json.hpp"

namespace tierlearn {

// Per-request placement decision maker. The runner calls begin once, then
// decide/after_serve per request in trace order, then finish.
class IPolicy {
  public:
    virtual ~IPolicy() = default;
    virtual std::string name() const = 0;
    virtual void begin(HssEnv& env, const std::vector<StorageRequest>& trace) {
        (void)env;
        (void)trace;
    }
    virtual int decide(HssEnv& env, const StorageRequest& req, size_t index) = 0;
    virtual void after_serve(HssEnv& env, const StorageRequest& req, size_t index, int action,
                             const ServiceOutcome& outcome) {
        (void)env;
        (void)req;
        (void)index;
        (void)action;
        (void)outcome;
    }
    virtual void finish(HssEnv& env) { (void)env; }
    virtual nlohmann::json report_extras() const { return nlohmann::json::object(); }
};

// Everything to the fast tier. Exists as the normalization denominator, so
// it refuses to run when the fast tier cannot hold the whole working set.
class FastOnlyPolicy : public IPolicy {
  public:
    std::string name() const override { return "fast_only"; }
    void begin(HssEnv& env, const std::vector<StorageRequest>& trace) override;
    int decide(HssEnv&, const StorageRequest&, size_t) override { return 0; }
};

class SlowOnlyPolicy : public IPolicy {
  public:
    std::string name() const override { return "slow_only"; }
    int decide(HssEnv& env, const StorageRequest&, size_t) override {
        return env.tier_count() - 1;
    }
};

class RandomPolicy : public IPolicy {
  public:
    explicit RandomPolicy(uint64_t seed) : rng_(Rng::stream(seed, 0x72616e64)) {}
    std::string name() const override { return "random_place"; }
    int decide(HssEnv& env, const StorageRequest&, size_t) override {
        return (int)rng_.below((uint64_t)env.tier_count());
    }

  private:
    Rng rng_;
};

// Cold-data eviction heuristic: hot pages and small (random) writes go fast,
// large cold writes go slow, cold reads stay wherever they live.
class CdePolicy : public IPolicy {
  public:
    CdePolicy(uint32_t hot_threshold = 4, uint32_t random_write_pages = 8)
        : t_hot_(hot_threshold), t_rand_(random_write_pages) {}
    std::string name() const override { return "cde_place"; }
    int decide(HssEnv& env, const StorageRequest& req, size_t index) override;
    nlohmann::json report_extras() const override {
        return {{"hot_threshold", t_hot_}, {"random_write_pages", t_rand_}};
    }

  private:
    uint32_t t_hot_;
    uint32_t t_rand_;
};

// Hot-page scheme: admit new pages to fast while it has room, keep residents
// in place, and at every epoch boundary demote the fast-resident pages whose
// epoch access count fell below the median.
class HpsPolicy : public IPolicy {
  public:
    explicit HpsPolicy(uint64_t epoch_requests = 1000) : epoch_(epoch_requests) {}
    std::string name() const override { return "hps_place"; }
    int decide(HssEnv& env, const StorageRequest& req, size_t index) override;
    void after_serve(HssEnv& env, const StorageRequest& req, size_t index, int action,
                     const ServiceOutcome& outcome) override;
    nlohmann::json report_extras() const override { return {{"epoch_requests", epoch_}}; }

  private:
    uint64_t epoch_;
    std::unordered_map<uint64_t, uint64_t> epoch_counts_;
};

// Three-tier heuristic: hot pages to the fast device, first-touch sequential
// runs to the slowest, everything else to the middle.
class TriHeuristicPolicy : public IPolicy {
  public:
    explicit TriHeuristicPolicy(uint32_t hot_threshold = 4) : t_hot_(hot_threshold) {}
    std::string name() const override { return "tri_heuristic_place"; }
    void begin(HssEnv& env, const std::vector<StorageRequest>& trace) override;
    int decide(HssEnv& env, const StorageRequest& req, size_t index) override;
    void after_serve(HssEnv&, const StorageRequest& req, size_t, int,
                     const ServiceOutcome&) override {
        prev_end_ = (int64_t)(req.page + req.size_pages - 1);
    }

  private:
    uint32_t t_hot_;
    int64_t prev_end_ = -2;
};

// Step index of each access per page, sorted ascending.
using AccessSchedule = std::unordered_map<uint64_t, std::vector<int64_t>>;

constexpr int64_t kNeverAccessed = std::numeric_limits<int64_t>::max();

AccessSchedule build_access_schedule(const std::vector<StorageRequest>& trace);

// Step of the first access of `page` strictly after `index`, kNeverAccessed
// when the schedule holds none.
int64_t next_access_after(const AccessSchedule& schedule, uint64_t page, int64_t index);

// Eviction hook that sacrifices the resident whose next access lies farthest
// ahead (ties to the highest page number). The current request index is read
// off the environment's step counter, so the selector stays valid across
// environment copies.
HssEnv::VictimSelector farthest_victim_selector(std::shared_ptr<const AccessSchedule> schedule);

// Clairvoyant policy over the full trace. Instances small enough to enumerate
// are solved outright: every placement sequence is replayed on a scratch copy
// of the environment and the cheapest one is kept. Longer traces fall back to
// a greedy rule: writes, first touches, and fast residents stay fast (the
// fast tier is the cheapest landing spot and evictions run in the
// background), while a slow-resident read is promoted only when the page
// returns sooner than the latest next access among the fast residents. Both
// paths evict the resident whose next access lies farthest ahead.
class OraclePolicy : public IPolicy {
  public:
    static constexpr int64_t kNever = kNeverAccessed;

    std::string name() const override { return "oracle_place"; }
    void begin(HssEnv& env, const std::vector<StorageRequest>& trace) override;
    int decide(HssEnv& env, const StorageRequest& req, size_t index) override;
    void finish(HssEnv& env) override;

    // Step of the first access of `page` strictly after `index`, kNever if none.
    int64_t next_access(uint64_t page, int64_t index) const;

  private:
    std::shared_ptr<const AccessSchedule> schedule_;
    std::vector<int> plan_;  // exact per-request actions, empty on the greedy path
};

}  // namespace tierlearn
