#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "tierlearn/policy.hpp"
#include "tierlearn/rlcore.hpp"

#include "json.hpp"

namespace tierlearn {

struct RewardParams {
    // Multiplier on the background migration cost inside the reward.
    double eviction_penalty = 0.001;
    // Normalization anchor; 0 means "derive at begin": a fast-tier read of
    // the trace's average request size. Serving a typical request from the
    // fast tier then earns a reward near 1 whatever the workload's request
    // sizes are, so value magnitudes are comparable across traces.
    double fast_ref_latency_ns = 0;

    void validate() const;
};

double default_fast_ref_latency(const HssEnv& env);

// ref / L_t, with the scaled eviction cost subtracted when pages moved out,
// floored at zero. The clamp to max_reward keeps discounted returns on the
// value support.
double compute_reward(const ServiceOutcome& outcome, const RewardParams& params,
                      double max_reward);

enum class ExecMode {
    Deterministic,  // trains inline at the cadence point; bit-reproducible
    TwoThreaded,    // training runs on its own thread, overlapping decisions
};

// Online learner: observes each request, picks a tier with the inference
// network (epsilon-greedy), and stores <state, action, reward, next_state>
// where next_state is the observation at the stream's following request.
// Every buffer_capacity requests it samples the replay ring, updates the
// training network, and syncs the inference copy.
class RlAgent : public IPolicy {
  public:
    RlAgent(int n_tiers, const Hyperparams& hp, const RewardParams& rp, ExecMode mode,
            uint64_t seed);
    ~RlAgent() override;

    std::string name() const override { return "rl_place"; }
    void begin(HssEnv& env, const std::vector<StorageRequest>& trace) override;
    int decide(HssEnv& env, const StorageRequest& req, size_t index) override;
    void after_serve(HssEnv& env, const StorageRequest& req, size_t index, int action,
                     const ServiceOutcome& outcome) override;
    void finish(HssEnv& env) override;
    nlohmann::json report_extras() const override;

    const ValueNetwork& training_net() const { return training_; }
    const ValueNetwork& inference_net() const { return inference_; }
    const ExperienceBuffer& buffer() const { return buffer_; }
    const RewardParams& reward_params() const { return rp_; }
    uint64_t training_rounds() const { return training_rounds_.load(std::memory_order_relaxed); }
    uint64_t sync_count() const { return sync_count_.load(std::memory_order_relaxed); }
    uint64_t decision_count() const { return decisions_; }
    uint64_t explored_actions() const { return explored_; }
    void save_checkpoint(const std::string& path) const { training_.save_checkpoint(path); }

  private:
    void do_round();
    void enqueue_round();
    void drain_and_stop();
    void worker_main();

    ObservationLayout layout_;
    Hyperparams hp_;
    RewardParams rp_;
    ExecMode mode_;
    ValueNetwork training_;
    ValueNetwork inference_;
    ExperienceBuffer buffer_;
    Rng explore_rng_;
    Rng sample_rng_;

    uint64_t pending_state_ = 0;  // packed observation from the last decide
    std::unordered_map<uint16_t, uint64_t> pending_ticket_;  // per workload stream
    uint64_t request_count_ = 0;
    uint64_t decisions_ = 0;
    uint64_t explored_ = 0;
    std::atomic<uint64_t> training_rounds_{0};
    std::atomic<uint64_t> sync_count_{0};
    std::atomic<double> last_loss_{0};
    ValueNetwork::Activations act_;

    std::thread worker_;
    std::mutex m_;
    std::condition_variable cv_;
    size_t queued_ = 0;
    bool stop_ = false;
};

// Per-1000-request slice of a run, for phase breakdowns.
struct EpochStats {
    uint64_t requests = 0;
    double total_latency_ns = 0;
    uint64_t fast_placements = 0;
    uint64_t evicted_pages = 0;  // eviction + demotion traffic in the slice

    nlohmann::json to_json() const;
};

struct MetricsReport {
    std::string policy;
    uint64_t requests = 0;
    double total_latency_ns = 0;
    double avg_latency_ns = 0;
    double iops = 0;  // requests per second of simulated service time
    uint64_t evicted_pages = 0;
    double eviction_ratio = 0;  // evicted pages / requests
    uint64_t fast_placements = 0;
    double fast_preference = 0;  // fast placements / all placements
    double total_eviction_latency_ns = 0;
    std::vector<EpochStats> epochs;
    nlohmann::json policy_extras;

    nlohmann::json to_json() const;
};

using StepObserver =
    std::function<void(size_t index, const StorageRequest& req, int action,
                       const ServiceOutcome& outcome)>;

// Drives one policy over one trace: begin, decide/serve/after_serve per
// request in order, finish, then metric assembly.
MetricsReport run_policy(IPolicy& policy, HssEnv& env,
                         const std::vector<StorageRequest>& trace,
                         const StepObserver& observer = {});

}  // namespace tierlearn
