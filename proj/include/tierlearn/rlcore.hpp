#pragma once

#include <atomic>
#include <cstdint>
#include <shared_mutex>
#include <string>
#include <vector>

#include "tierlearn/features.hpp"
#include "tierlearn/replay.hpp"
#include "tierlearn/rng.hpp"

namespace tierlearn {

struct Hyperparams {
    double gamma = 0.9;
    double alpha = 1e-4;     // plain SGD learning rate
    double epsilon = 0.001;  // exploration probability
    uint32_t batch_size = 128;
    uint32_t n_batches = 8;           // batches per training round
    uint32_t buffer_capacity = 1000;  // replay records; also the train/sync cadence
    uint32_t n_atoms = 51;
    double v_min = 0.0;
    double v_max = 10.0;

    void validate() const;
    // Largest single-step reward that keeps a geometric return inside
    // [v_min, v_max]: (1 - gamma) * v_max.
    double max_reward() const { return (1.0 - gamma) * v_max; }
};

// x * sigmoid(x), the hidden-layer activation.
double swish(double x);

// Projects the transformed distribution (Tz_j = clamp(r + gamma * z_j)) back
// onto the support, splitting each atom's mass linearly between its two
// nearest support atoms. Output sums to the input mass.
std::vector<double> c51_project(double r, double gamma, const std::vector<double>& p_next,
                                const std::vector<double>& support);
void c51_project_into(double r, double gamma, const double* p_next, size_t n,
                      const std::vector<double>& support, std::vector<double>& out);

struct ActionChoice {
    int action = 0;
    bool explored = false;  // the uniform-random branch was taken
};

// With probability epsilon a uniform random action, otherwise argmax q with
// ties broken toward the faster (lower-index) tier.
ActionChoice select_action(const std::vector<double>& q, double epsilon, Rng& rng);

// Fully connected value-distribution network, input -> 20 -> 30 ->
// n_actions * n_atoms, swish on the hidden layers, softmax per action over
// the atom block, no biases. Weights live twice: full-precision masters that
// training updates, and the half-precision copies that serve decisions.
// Every forward evaluation adds one multiply-accumulate per weight to the
// MAC counter; backprop work is not counted.
class ValueNetwork {
  public:
    static constexpr int kHidden1 = 20;
    static constexpr int kHidden2 = 30;

    ValueNetwork(int n_inputs, int n_actions, int n_atoms, double v_min, double v_max,
                 uint64_t seed);
    explicit ValueNetwork(const std::string& checkpoint_path);

    ValueNetwork(const ValueNetwork&) = delete;
    ValueNetwork& operator=(const ValueNetwork&) = delete;

    int n_inputs() const { return in_; }
    int n_actions() const { return actions_; }
    int n_atoms() const { return atoms_; }
    double v_min() const { return v_min_; }
    double v_max() const { return v_max_; }
    const std::vector<double>& support() const { return support_; }
    size_t weight_count() const { return total_; }

    struct Activations {
        std::vector<double> z1, a1, z2, a2, logits;
        std::vector<double> probs;  // n_actions x n_atoms, flattened
        std::vector<double> q;      // per-action expectation over the support
    };

    // Deployment path over the half-precision weights; safe concurrently
    // with sync_weights.
    void forward(const float* x, Activations& act) const;
    // Training path over the masters; single-threaded (trainer-owned).
    void forward_master(const float* x, Activations& act) const;

    // Cross-entropy of the taken action's predicted distribution against
    // target (length n_atoms), plus dLoss/dw over the masters.
    double loss_and_gradient(const float* x, int action, const double* target,
                             Activations& act, std::vector<double>& grad) const;
    void apply_sgd(const std::vector<double>& grad, double alpha);
    void refresh_half();  // re-round masters into the half-precision copies

    uint64_t mac_count() const { return mac_count_.load(std::memory_order_relaxed); }
    void reset_mac_count() { mac_count_.store(0, std::memory_order_relaxed); }

    size_t state_bytes() const;
    void save_checkpoint(const std::string& path) const;

    const std::vector<uint16_t>& half_weights() const { return half_; }
    const std::vector<double>& master_weights() const { return master_; }
    void set_master_weights(const std::vector<double>& w);  // refreshes halves

    friend void sync_weights(const ValueNetwork& training, ValueNetwork& inference);

  private:
    void init_shape(int n_inputs, int n_actions, int n_atoms, double v_min, double v_max);
    template <class W>
    void run_forward(const W* weights, const float* x, Activations& act) const;

    int in_ = 0, actions_ = 0, atoms_ = 0;
    double v_min_ = 0, v_max_ = 0;
    std::vector<double> support_;
    size_t w1_ = 0, w2_ = 0, w3_ = 0, total_ = 0;  // layer offsets into the lanes
    std::vector<double> master_;
    std::vector<uint16_t> half_;
    std::vector<float> halff_;  // half-precision values widened once for speed
    mutable std::atomic<uint64_t> mac_count_{0};
    mutable std::shared_mutex sync_mu_;
};

// Copies the training network's half-precision weights (and masters) into
// the inference network, atomically with respect to its concurrent forwards.
void sync_weights(const ValueNetwork& training, ValueNetwork& inference);

// Bellman target for one experience: next action by argmax Q under the
// inference network, that action's distribution projected through the reward.
std::vector<double> compute_target(const ValueNetwork& inference, const Experience& e,
                                   const Hyperparams& hp, const ObservationLayout& layout);

// One training round: for every sampled experience, build the target from
// the frozen inference weights, take one SGD step on the masters, and report
// the mean cross-entropy; half-precision copies refreshed at the end.
double train_step(ValueNetwork& training, const ValueNetwork& inference,
                  const std::vector<std::vector<Experience>>& batches, const Hyperparams& hp,
                  const ObservationLayout& layout);

}  // namespace tierlearn
