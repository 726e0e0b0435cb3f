#include "tierlearn/agent.hpp"

#include <algorithm>
#include <cmath>

#include "tierlearn/error.hpp"
#include "tierlearn/halffloat.hpp"

namespace tierlearn {

namespace {

constexpr uint64_t kExploreStream = 0x6578706c;
constexpr uint64_t kSampleStream = 0x73616d70;
constexpr uint64_t kPhaseRequests = 1000;

}  // namespace

void RewardParams::validate() const {
    require(eviction_penalty >= 0, "reward params: eviction penalty must be >= 0, got ",
            eviction_penalty);
    require(fast_ref_latency_ns > 0, "reward params: fast reference latency must be positive");
}

double default_fast_ref_latency(const HssEnv& env) {
    return device_latency(env.tier(0), Op::Read, 1, false);
}

double compute_reward(const ServiceOutcome& outcome, const RewardParams& params,
                      double max_reward) {
    require(outcome.latency_ns > 0, "reward: request latency must be positive");
    double r = params.fast_ref_latency_ns / outcome.latency_ns;
    if (outcome.eviction_latency_ns > 0) {
        double penalty = params.eviction_penalty * outcome.eviction_latency_ns /
                         params.fast_ref_latency_ns;
        r = std::max(0.0, r - penalty);
    }
    return std::clamp(r, 0.0, max_reward);
}

RlAgent::RlAgent(int n_tiers, const Hyperparams& hp, const RewardParams& rp, ExecMode mode,
                 uint64_t seed)
    : layout_{n_tiers},
      hp_(hp),
      rp_(rp),
      mode_(mode),
      training_(layout_.feature_count(), n_tiers, (int)hp.n_atoms, hp.v_min, hp.v_max, seed),
      inference_(layout_.feature_count(), n_tiers, (int)hp.n_atoms, hp.v_min, hp.v_max, seed),
      buffer_(hp.buffer_capacity, layout_),
      explore_rng_(Rng::stream(seed, kExploreStream)),
      sample_rng_(Rng::stream(seed, kSampleStream)) {
    hp_.validate();
    require(n_tiers >= 2, "rl agent: needs at least two tiers, got ", n_tiers);
    require(rp_.eviction_penalty >= 0, "reward params: eviction penalty must be >= 0");
    if (mode_ == ExecMode::TwoThreaded) worker_ = std::thread([this] { worker_main(); });
}

RlAgent::~RlAgent() { drain_and_stop(); }

void RlAgent::begin(HssEnv& env, const std::vector<StorageRequest>& trace) {
    require(env.tier_count() == layout_.n_tiers, "rl agent: built for ", layout_.n_tiers,
            " tiers, environment has ", env.tier_count());
    if (rp_.fast_ref_latency_ns <= 0) {
        double mean_pages = 1.0;
        if (!trace.empty()) {
            double total = 0;
            for (const auto& r : trace) total += r.size_pages;
            mean_pages = total / (double)trace.size();
        }
        rp_.fast_ref_latency_ns = default_fast_ref_latency(env) * mean_pages;
    }
    rp_.validate();
}

int RlAgent::decide(HssEnv& env, const StorageRequest& req, size_t index) {
    (void)index;
    ObservationVector obs = observe(env.snapshot_features(req), layout_);
    pending_state_ = pack_observation(obs, layout_);
    float x[7];
    normalize_observation(obs, layout_, x);
    inference_.forward(x, act_);
    ActionChoice choice = select_action(act_.q, hp_.epsilon, explore_rng_);
    ++decisions_;
    explored_ += choice.explored ? 1 : 0;
    return choice.action;
}

void RlAgent::after_serve(HssEnv& env, const StorageRequest& req, size_t index, int action,
                          const ServiceOutcome& outcome) {
    (void)env;
    (void)index;
    ++request_count_;
    double r = compute_reward(outcome, rp_, hp_.max_reward());
    // Appending before sealing puts this state in the ring first, so the
    // predecessor's seal can share it instead of spending overflow bytes.
    uint64_t ticket = buffer_.append(pending_state_, (uint8_t)action, float_to_half((float)r));
    if (auto it = pending_ticket_.find(req.workload_id); it != pending_ticket_.end()) {
        buffer_.seal(it->second, pending_state_);
    }
    pending_ticket_[req.workload_id] = ticket;
    if (request_count_ % hp_.buffer_capacity == 0 && buffer_.full()) {
        if (mode_ == ExecMode::Deterministic) {
            do_round();
        } else {
            enqueue_round();
        }
    }
}

void RlAgent::finish(HssEnv& env) {
    (void)env;
    drain_and_stop();
}

void RlAgent::do_round() {
    auto batches = buffer_.sample_batches(hp_.n_batches, hp_.batch_size, sample_rng_);
    double loss = train_step(training_, inference_, batches, hp_, layout_);
    sync_weights(training_, inference_);
    last_loss_.store(loss, std::memory_order_relaxed);
    training_rounds_.fetch_add(1, std::memory_order_relaxed);
    sync_count_.fetch_add(1, std::memory_order_relaxed);
}

void RlAgent::enqueue_round() {
    {
        std::lock_guard lock(m_);
        ++queued_;
    }
    cv_.notify_one();
}

void RlAgent::drain_and_stop() {
    if (!worker_.joinable()) return;
    {
        std::lock_guard lock(m_);
        stop_ = true;
    }
    cv_.notify_one();
    worker_.join();
}

void RlAgent::worker_main() {
    std::unique_lock lock(m_);
    while (true) {
        cv_.wait(lock, [&] { return queued_ > 0 || stop_; });
        if (queued_ == 0) return;  // stop requested and the queue is drained
        --queued_;
        lock.unlock();
        do_round();
        lock.lock();
    }
}

nlohmann::json RlAgent::report_extras() const {
    double rate = decisions_ ? (double)explored_ / (double)decisions_ : 0.0;
    return {
        {"exec_mode", mode_ == ExecMode::Deterministic ? "deterministic" : "two_threaded"},
        {"training_rounds", training_rounds()},
        {"weight_syncs", sync_count()},
        {"decisions", decisions_},
        {"explored_actions", explored_},
        {"exploration_rate", rate},
        {"final_loss", last_loss_.load(std::memory_order_relaxed)},
        {"replay_sealed", buffer_.sealed_count()},
        {"mac_count", training_.mac_count() + inference_.mac_count()},
        {"state_bytes",
         training_.state_bytes() + inference_.state_bytes() + buffer_.storage_bytes()},
        {"fast_ref_latency_ns", rp_.fast_ref_latency_ns},
    };
}

nlohmann::json EpochStats::to_json() const {
    double avg = requests ? total_latency_ns / (double)requests : 0.0;
    double pref = requests ? (double)fast_placements / (double)requests : 0.0;
    return {{"requests", requests},
            {"avg_latency_ns", avg},
            {"fast_preference", pref},
            {"evicted_pages", evicted_pages}};
}

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json phases = nlohmann::json::array();
    for (const auto& e : epochs) phases.push_back(e.to_json());
    return {{"policy", policy},
            {"requests", requests},
            {"total_latency_ns", total_latency_ns},
            {"avg_latency_ns", avg_latency_ns},
            {"iops", iops},
            {"evicted_pages", evicted_pages},
            {"eviction_ratio", eviction_ratio},
            {"fast_placements", fast_placements},
            {"fast_preference", fast_preference},
            {"total_eviction_latency_ns", total_eviction_latency_ns},
            {"phases", phases},
            {"policy_extras", policy_extras}};
}

MetricsReport run_policy(IPolicy& policy, HssEnv& env,
                         const std::vector<StorageRequest>& trace,
                         const StepObserver& observer) {
    policy.begin(env, trace);

    MetricsReport rep;
    rep.policy = policy.name();
    EpochStats cur;
    uint64_t phase_evict_base = env.evicted_pages_total() + env.demoted_pages_total();

    auto close_phase = [&] {
        uint64_t moved = env.evicted_pages_total() + env.demoted_pages_total();
        cur.evicted_pages = moved - phase_evict_base;
        phase_evict_base = moved;
        rep.epochs.push_back(cur);
        cur = EpochStats{};
    };

    for (size_t i = 0; i < trace.size(); ++i) {
        const StorageRequest& req = trace[i];
        int action = policy.decide(env, req, i);
        ServiceOutcome out = env.serve(req, action);
        policy.after_serve(env, req, i, action, out);

        ++rep.requests;
        rep.total_latency_ns += out.latency_ns;
        ++cur.requests;
        cur.total_latency_ns += out.latency_ns;
        if (action == 0) {
            ++rep.fast_placements;
            ++cur.fast_placements;
        }
        if (cur.requests == kPhaseRequests) close_phase();
        if (observer) observer(i, req, action, out);
    }
    policy.finish(env);
    if (cur.requests > 0) close_phase();

    rep.avg_latency_ns = rep.requests ? rep.total_latency_ns / (double)rep.requests : 0.0;
    rep.iops = rep.total_latency_ns > 0 ? (double)rep.requests / (rep.total_latency_ns * 1e-9)
                                        : 0.0;
    rep.evicted_pages = env.evicted_pages_total() + env.demoted_pages_total();
    rep.eviction_ratio = rep.requests ? (double)rep.evicted_pages / (double)rep.requests : 0.0;
    rep.fast_preference = rep.requests ? (double)rep.fast_placements / (double)rep.requests : 0.0;
    rep.total_eviction_latency_ns = env.eviction_latency_total();
    rep.policy_extras = policy.report_extras();
    return rep;
}

}  // namespace tierlearn
