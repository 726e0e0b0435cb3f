#include "tierlearn/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "tierlearn/error.hpp"

namespace tierlearn {

void FastOnlyPolicy::begin(HssEnv& env, const std::vector<StorageRequest>& trace) {
    std::unordered_set<uint64_t> pages;
    for (const auto& r : trace) {
        for (uint64_t p = r.page; p < r.page + r.size_pages; ++p) pages.insert(p);
    }
    require(env.tier(0).capacity_pages >= pages.size(),
            "fast_only requires the fast tier to hold the working set: need ", pages.size(),
            " pages, capacity is ", env.tier(0).capacity_pages);
}

int CdePolicy::decide(HssEnv& env, const StorageRequest& req, size_t) {
    if (env.access_count(req.page) >= t_hot_) return 0;
    if (req.op == Op::Write)
        return req.size_pages <= t_rand_ ? 0 : env.tier_count() - 1;
    int resident = env.tier_of(req.page);
    return resident == kUnplaced ? env.tier_count() - 1 : resident;
}

int HpsPolicy::decide(HssEnv& env, const StorageRequest& req, size_t) {
    int resident = env.tier_of(req.page);
    if (resident != kUnplaced) return resident;
    return env.remaining(0) >= req.size_pages ? 0 : env.tier_count() - 1;
}

void HpsPolicy::after_serve(HssEnv& env, const StorageRequest& req, size_t index, int,
                            const ServiceOutcome&) {
    for (uint64_t p = req.page; p < req.page + req.size_pages; ++p) ++epoch_counts_[p];
    if ((index + 1) % epoch_ != 0) return;

    std::vector<uint64_t> fast_pages = env.pages_in_tier(0);
    if (!fast_pages.empty()) {
        auto count_of = [&](uint64_t p) {
            auto it = epoch_counts_.find(p);
            return it == epoch_counts_.end() ? (uint64_t)0 : it->second;
        };
        std::vector<uint64_t> counts;
        counts.reserve(fast_pages.size());
        for (uint64_t p : fast_pages) counts.push_back(count_of(p));
        std::nth_element(counts.begin(), counts.begin() + (ptrdiff_t)(counts.size() / 2),
                         counts.end());
        uint64_t median = counts[counts.size() / 2];
        for (uint64_t p : fast_pages) {
            if (count_of(p) < median) env.migrate_page(p, 1);
        }
    }
    epoch_counts_.clear();
}

void TriHeuristicPolicy::begin(HssEnv& env, const std::vector<StorageRequest>&) {
    require(env.tier_count() >= 3, "tri_heuristic_place needs at least 3 tiers, got ",
            env.tier_count());
    prev_end_ = -2;
}

int TriHeuristicPolicy::decide(HssEnv& env, const StorageRequest& req, size_t) {
    uint32_t count = env.access_count(req.page);
    if (count >= t_hot_) return 0;
    bool sequential = (int64_t)req.page == prev_end_ + 1;
    if (count == 0 && sequential) return env.tier_count() - 1;
    return 1;
}

AccessSchedule build_access_schedule(const std::vector<StorageRequest>& trace) {
    AccessSchedule schedule;
    for (size_t i = 0; i < trace.size(); ++i) {
        for (uint64_t p = trace[i].page; p < trace[i].page + trace[i].size_pages; ++p)
            schedule[p].push_back((int64_t)i);
    }
    return schedule;
}

int64_t next_access_after(const AccessSchedule& schedule, uint64_t page, int64_t index) {
    auto it = schedule.find(page);
    if (it == schedule.end()) return kNeverAccessed;
    const auto& steps = it->second;
    auto sit = std::upper_bound(steps.begin(), steps.end(), index);
    return sit == steps.end() ? kNeverAccessed : *sit;
}

HssEnv::VictimSelector farthest_victim_selector(
    std::shared_ptr<const AccessSchedule> schedule) {
    return [schedule = std::move(schedule)](const HssEnv& env, int tier) {
        // serve() bumps the step counter on entry, so the in-flight request
        // has index step - 1 and a covered page keys on its future reuse.
        int64_t now = env.request_step() - 1;
        bool found = false;
        uint64_t victim = 0;
        int64_t victim_next = -1;
        for (uint64_t p : env.pages_in_tier(tier)) {
            int64_t next = next_access_after(*schedule, p, now);
            if (!found || next > victim_next || (next == victim_next && p > victim)) {
                victim = p;
                victim_next = next;
                found = true;
            }
        }
        require(found, "farthest victim selector: tier ", tier, " has no residents");
        return victim;
    };
}

namespace {

// Caps exact planning at leaf_count * trace_length environment replays.
constexpr size_t kPlanMaxRequests = 16;
constexpr double kPlanMaxLeafWork = 2e6;

std::vector<int> solve_by_enumeration(const HssEnv& pristine,
                                      const std::vector<StorageRequest>& trace,
                                      const std::shared_ptr<const AccessSchedule>& schedule) {
    int n_tiers = pristine.tier_count();
    std::vector<int> actions(trace.size(), 0);
    std::vector<int> best_actions = actions;
    double best = std::numeric_limits<double>::infinity();
    while (true) {
        HssEnv env = pristine;
        env.set_victim_selector(farthest_victim_selector(schedule));
        double total = 0;
        for (size_t i = 0; i < trace.size(); ++i)
            total += env.serve(trace[i], actions[i]).latency_ns;
        if (total < best) {
            best = total;
            best_actions = actions;
        }
        size_t i = 0;
        for (; i < actions.size(); ++i) {
            if (++actions[i] < n_tiers) break;
            actions[i] = 0;
        }
        if (i == actions.size()) break;
    }
    return best_actions;
}

}  // namespace

void OraclePolicy::begin(HssEnv& env, const std::vector<StorageRequest>& trace) {
    schedule_ = std::make_shared<const AccessSchedule>(build_access_schedule(trace));
    plan_.clear();
    double leaf_work =
        std::pow((double)env.tier_count(), (double)trace.size()) * (double)trace.size();
    if (trace.size() <= kPlanMaxRequests && leaf_work <= kPlanMaxLeafWork) {
        HssEnv pristine = env;
        pristine.set_victim_selector(nullptr);
        pristine.set_move_listener(nullptr);
        plan_ = solve_by_enumeration(pristine, trace, schedule_);
    }
    env.set_victim_selector(farthest_victim_selector(schedule_));
}

int64_t OraclePolicy::next_access(uint64_t page, int64_t index) const {
    if (!schedule_) return kNever;
    return next_access_after(*schedule_, page, index);
}

int OraclePolicy::decide(HssEnv& env, const StorageRequest& req, size_t index) {
    if (!plan_.empty()) return plan_[index];

    int resident = env.tier_of(req.page);
    if (resident == 0) return 0;
    // Foreground cost is lowest on the fast tier for writes and first
    // touches, and the displaced page only costs background traffic.
    if (req.op == Op::Write || resident == kUnplaced) return 0;

    // Slow-resident read: promoting pays a migration, so only pull the page
    // up when it is reused, and sooner than the most expendable fast page.
    int64_t mine = next_access(req.page, (int64_t)index);
    if (mine == kNever) return resident;
    if (env.remaining(0) >= req.size_pages) return 0;
    int64_t farthest = -1;
    for (uint64_t p : env.pages_in_tier(0))
        farthest = std::max(farthest, next_access(p, (int64_t)index));
    if (mine < farthest) return 0;
    return resident;
}

void OraclePolicy::finish(HssEnv& env) {
    env.set_victim_selector(nullptr);
}

}  // namespace tierlearn
