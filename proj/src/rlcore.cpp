#include "tierlearn/rlcore.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include "tierlearn/error.hpp"
#include "tierlearn/halffloat.hpp"

namespace tierlearn {

namespace {

constexpr char kCheckpointMagic[8] = {'T', 'L', 'N', 'E', 'T', 'C', 'K', '1'};

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double swish_grad(double z) {
    double s = sigmoid(z);
    return s * (1.0 + z * (1.0 - s));
}

template <class T>
void write_raw(std::ostream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
void read_raw(std::istream& f, T& v) {
    f.read(reinterpret_cast<char*>(&v), sizeof v);
}

}  // namespace

double swish(double z) { return z * sigmoid(z); }

void Hyperparams::validate() const {
    require(gamma >= 0 && gamma < 1, "hyperparams: gamma must be in [0,1), got ", gamma);
    require(alpha > 0, "hyperparams: alpha must be > 0");
    require(epsilon >= 0 && epsilon <= 1, "hyperparams: epsilon must be in [0,1]");
    require(batch_size >= 1, "hyperparams: batch_size must be >= 1");
    require(n_batches >= 1, "hyperparams: n_batches must be >= 1");
    require(buffer_capacity >= 2, "hyperparams: buffer_capacity must be >= 2");
    require(n_atoms >= 1, "hyperparams: n_atoms must be >= 1");
    require(std::isfinite(v_min) && std::isfinite(v_max), "hyperparams: support must be finite");
    if (n_atoms >= 2)
        require(v_max > v_min, "hyperparams: v_max must exceed v_min for a multi-atom support");
    else
        require(v_max >= v_min, "hyperparams: v_max must be >= v_min");
}

void c51_project_into(double r, double gamma, const double* p_next, size_t n,
                      const std::vector<double>& support, std::vector<double>& out) {
    size_t m = support.size();
    require(n == m, "projection: distribution length ", n, " != support length ", m);
    out.assign(m, 0.0);
    if (m == 1) {
        for (size_t j = 0; j < n; ++j) out[0] += p_next[j];
        return;
    }
    double vmin = support.front();
    double vmax = support.back();
    double dz = (vmax - vmin) / (double)(m - 1);
    for (size_t j = 0; j < m; ++j) {
        double tz = std::clamp(r + gamma * support[j], vmin, vmax);
        double b = (tz - vmin) / dz;
        // clamp guards the b == m-1 boundary against rounding past the edge
        size_t l = (size_t)std::clamp(std::floor(b), 0.0, (double)(m - 1));
        size_t u = (size_t)std::clamp(std::ceil(b), 0.0, (double)(m - 1));
        if (l == u) {
            out[l] += p_next[j];
        } else {
            out[l] += p_next[j] * ((double)u - b);
            out[u] += p_next[j] * (b - (double)l);
        }
    }
}

std::vector<double> c51_project(double r, double gamma, const std::vector<double>& p_next,
                                const std::vector<double>& support) {
    std::vector<double> out;
    c51_project_into(r, gamma, p_next.data(), p_next.size(), support, out);
    return out;
}

ActionChoice select_action(const std::vector<double>& q, double epsilon, Rng& rng) {
    require(!q.empty(), "select_action: no actions");
    require(epsilon >= 0 && epsilon <= 1, "select_action: epsilon out of [0,1]");
    ActionChoice c;
    if (epsilon > 0 && rng.uniform() < epsilon) {
        c.explored = true;
        c.action = (int)rng.below(q.size());
        return c;
    }
    for (size_t a = 1; a < q.size(); ++a) {
        if (q[a] > q[(size_t)c.action]) c.action = (int)a;
    }
    return c;
}

void ValueNetwork::init_shape(int n_inputs, int n_actions, int n_atoms, double v_min,
                              double v_max) {
    require(n_inputs >= 1, "network: n_inputs must be >= 1");
    require(n_actions >= 1, "network: n_actions must be >= 1");
    require(n_atoms >= 1, "network: n_atoms must be >= 1");
    require(std::isfinite(v_min) && std::isfinite(v_max) && v_max >= v_min,
            "network: bad support bounds");
    if (n_atoms >= 2) require(v_max > v_min, "network: degenerate multi-atom support");
    in_ = n_inputs;
    actions_ = n_actions;
    atoms_ = n_atoms;
    v_min_ = v_min;
    v_max_ = v_max;
    support_.resize((size_t)n_atoms);
    double dz = n_atoms > 1 ? (v_max - v_min) / (double)(n_atoms - 1) : 0.0;
    for (int i = 0; i < n_atoms; ++i) support_[(size_t)i] = v_min + dz * i;
    w1_ = 0;
    w2_ = (size_t)in_ * kHidden1;
    w3_ = w2_ + (size_t)kHidden1 * kHidden2;
    total_ = w3_ + (size_t)kHidden2 * actions_ * atoms_;
    master_.assign(total_, 0.0);
    half_.assign(total_, 0);
    halff_.assign(total_, 0.0f);
}

ValueNetwork::ValueNetwork(int n_inputs, int n_actions, int n_atoms, double v_min,
                           double v_max, uint64_t seed) {
    init_shape(n_inputs, n_actions, n_atoms, v_min, v_max);
    Rng rng = Rng::stream(seed, 0x6e657477);
    struct Span {
        size_t off, count;
        double limit;
    };
    // Hidden layers use a swish-scaled fan-in limit so activations stay O(1)
    // on [0,1]-normalized inputs; with the table learning rate anything
    // smaller starves the gradient and the policy never leaves its init.
    // The output layer starts at zero: every value distribution opens exactly
    // uniform, so all actions tie and the tie-break picks the fastest tier.
    // Untried actions keep that uniform mean as a fixed reference point, and
    // each state's tried action drifts above or below it purely on reward,
    // which makes the early policy reward-driven instead of init luck.
    const double g_hidden = 3.0;
    const Span spans[2] = {
        {w1_, w2_ - w1_, g_hidden * std::sqrt(6.0 / (double)in_)},
        {w2_, w3_ - w2_, g_hidden * std::sqrt(6.0 / (double)kHidden1)},
    };
    for (const Span& s : spans) {
        for (size_t i = 0; i < s.count; ++i)
            master_[s.off + i] = rng.uniform(-s.limit, s.limit);
    }
    refresh_half();
}

template <class W>
void ValueNetwork::run_forward(const W* w, const float* x, Activations& act) const {
    act.z1.resize(kHidden1);
    act.a1.resize(kHidden1);
    act.z2.resize(kHidden2);
    act.a2.resize(kHidden2);
    size_t n_out = (size_t)actions_ * atoms_;
    act.logits.resize(n_out);
    act.probs.resize(n_out);
    act.q.resize((size_t)actions_);

    const W* w1 = w + w1_;
    for (int j = 0; j < kHidden1; ++j) {
        double z = 0;
        const W* row = w1 + (size_t)j * in_;
        for (int i = 0; i < in_; ++i) z += (double)row[i] * x[i];
        act.z1[(size_t)j] = z;
        act.a1[(size_t)j] = swish(z);
    }
    const W* w2 = w + w2_;
    for (int k = 0; k < kHidden2; ++k) {
        double z = 0;
        const W* row = w2 + (size_t)k * kHidden1;
        for (int j = 0; j < kHidden1; ++j) z += (double)row[j] * act.a1[(size_t)j];
        act.z2[(size_t)k] = z;
        act.a2[(size_t)k] = swish(z);
    }
    const W* w3 = w + w3_;
    for (size_t o = 0; o < n_out; ++o) {
        double z = 0;
        const W* row = w3 + o * kHidden2;
        for (int k = 0; k < kHidden2; ++k) z += (double)row[k] * act.a2[(size_t)k];
        act.logits[o] = z;
    }
    mac_count_.fetch_add(total_, std::memory_order_relaxed);

    for (int a = 0; a < actions_; ++a) {
        size_t base = (size_t)a * atoms_;
        double mx = act.logits[base];
        for (int i = 1; i < atoms_; ++i) mx = std::max(mx, act.logits[base + (size_t)i]);
        double sum = 0;
        for (int i = 0; i < atoms_; ++i) {
            double p = std::exp(act.logits[base + (size_t)i] - mx);
            act.probs[base + (size_t)i] = p;
            sum += p;
        }
        double qv = 0;
        for (int i = 0; i < atoms_; ++i) {
            act.probs[base + (size_t)i] /= sum;
            qv += support_[(size_t)i] * act.probs[base + (size_t)i];
        }
        act.q[(size_t)a] = qv;
    }
}

void ValueNetwork::forward(const float* x, Activations& act) const {
    std::shared_lock lock(sync_mu_);
    run_forward(halff_.data(), x, act);
}

void ValueNetwork::forward_master(const float* x, Activations& act) const {
    run_forward(master_.data(), x, act);
}

double ValueNetwork::loss_and_gradient(const float* x, int action, const double* target,
                                       Activations& act, std::vector<double>& grad) const {
    require(action >= 0 && action < actions_, "loss: action ", action, " out of range");
    run_forward(master_.data(), x, act);
    grad.assign(total_, 0.0);

    size_t base = (size_t)action * atoms_;
    double loss = 0;
    // Softmax + cross-entropy collapse to dL/dlogit = p - t on the taken
    // action's block; other actions get no gradient.
    std::array<double, kHidden2> g_a2{};
    for (int i = 0; i < atoms_; ++i) {
        double g = act.probs[base + (size_t)i] - target[i];
        if (target[i] > 0)
            loss -= target[i] * std::log(std::max(act.probs[base + (size_t)i], 1e-300));
        size_t row = w3_ + (base + (size_t)i) * kHidden2;
        for (int k = 0; k < kHidden2; ++k) {
            grad[row + (size_t)k] = g * act.a2[(size_t)k];
            g_a2[(size_t)k] += master_[row + (size_t)k] * g;
        }
    }
    std::array<double, kHidden2> g_z2;
    for (int k = 0; k < kHidden2; ++k)
        g_z2[(size_t)k] = g_a2[(size_t)k] * swish_grad(act.z2[(size_t)k]);
    std::array<double, kHidden1> g_a1{};
    for (int k = 0; k < kHidden2; ++k) {
        size_t row = w2_ + (size_t)k * kHidden1;
        for (int j = 0; j < kHidden1; ++j) {
            grad[row + (size_t)j] = g_z2[(size_t)k] * act.a1[(size_t)j];
            g_a1[(size_t)j] += master_[row + (size_t)j] * g_z2[(size_t)k];
        }
    }
    for (int j = 0; j < kHidden1; ++j) {
        double g_z1 = g_a1[(size_t)j] * swish_grad(act.z1[(size_t)j]);
        size_t row = w1_ + (size_t)j * in_;
        for (int i = 0; i < in_; ++i) grad[row + (size_t)i] = g_z1 * x[i];
    }
    return loss;
}

void ValueNetwork::apply_sgd(const std::vector<double>& grad, double alpha) {
    require(grad.size() == total_, "apply_sgd: gradient length mismatch");
    for (size_t i = 0; i < total_; ++i) master_[i] -= alpha * grad[i];
}

void ValueNetwork::refresh_half() {
    std::unique_lock lock(sync_mu_);
    for (size_t i = 0; i < total_; ++i) {
        half_[i] = float_to_half((float)master_[i]);
        halff_[i] = half_to_float(half_[i]);
    }
}

void ValueNetwork::set_master_weights(const std::vector<double>& w) {
    require(w.size() == total_, "set_master_weights: length mismatch");
    master_ = w;
    refresh_half();
}

size_t ValueNetwork::state_bytes() const {
    return sizeof(ValueNetwork) + master_.size() * sizeof(double) +
           half_.size() * sizeof(uint16_t) + halff_.size() * sizeof(float) +
           support_.size() * sizeof(double);
}

void ValueNetwork::save_checkpoint(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "checkpoint: cannot open '", path, "' for writing");
    f.write(kCheckpointMagic, sizeof kCheckpointMagic);
    int32_t dims[5] = {in_, kHidden1, kHidden2, actions_, atoms_};
    for (int32_t d : dims) write_raw(f, d);
    write_raw(f, v_min_);
    write_raw(f, v_max_);
    std::shared_lock lock(sync_mu_);
    f.write(reinterpret_cast<const char*>(half_.data()),
            (std::streamsize)(half_.size() * sizeof(uint16_t)));
    require(f.good(), "checkpoint: write to '", path, "' failed");
}

ValueNetwork::ValueNetwork(const std::string& checkpoint_path) {
    std::ifstream f(checkpoint_path, std::ios::binary);
    require(f.good(), "checkpoint: cannot open '", checkpoint_path, "'");
    char magic[sizeof kCheckpointMagic];
    f.read(magic, sizeof magic);
    require(f.good() && std::equal(magic, magic + sizeof magic, kCheckpointMagic),
            "checkpoint: '", checkpoint_path, "' has the wrong header");
    int32_t dims[5];
    for (int32_t& d : dims) read_raw(f, d);
    double vmin = 0, vmax = 0;
    read_raw(f, vmin);
    read_raw(f, vmax);
    require(f.good(), "checkpoint: '", checkpoint_path, "' truncated header");
    require(dims[1] == kHidden1 && dims[2] == kHidden2, "checkpoint: hidden sizes ", dims[1],
            "x", dims[2], " unsupported");
    init_shape(dims[0], dims[3], dims[4], vmin, vmax);
    f.read(reinterpret_cast<char*>(half_.data()),
           (std::streamsize)(half_.size() * sizeof(uint16_t)));
    require((size_t)f.gcount() == half_.size() * sizeof(uint16_t), "checkpoint: '",
            checkpoint_path, "' truncated weights");
    for (size_t i = 0; i < total_; ++i) {
        halff_[i] = half_to_float(half_[i]);
        master_[i] = (double)halff_[i];
    }
}

void sync_weights(const ValueNetwork& training, ValueNetwork& inference) {
    require(training.in_ == inference.in_ && training.actions_ == inference.actions_ &&
                training.atoms_ == inference.atoms_ && training.v_min_ == inference.v_min_ &&
                training.v_max_ == inference.v_max_,
            "sync_weights: architecture mismatch");
    std::unique_lock lock(inference.sync_mu_);
    inference.master_ = training.master_;
    inference.half_ = training.half_;
    inference.halff_ = training.halff_;
}

namespace {

void target_into(const ValueNetwork& inference, const Experience& e, const Hyperparams& hp,
                 const ObservationLayout& layout, ValueNetwork::Activations& act,
                 std::vector<float>& nx, std::vector<double>& out) {
    normalize_observation(unpack_observation(e.next_state, layout), layout, nx.data());
    inference.forward(nx.data(), act);
    int best = 0;
    for (int a = 1; a < inference.n_actions(); ++a) {
        if (act.q[(size_t)a] > act.q[(size_t)best]) best = a;
    }
    c51_project_into((double)half_to_float(e.reward_half), hp.gamma,
                     act.probs.data() + (size_t)best * inference.n_atoms(),
                     (size_t)inference.n_atoms(), inference.support(), out);
}

}  // namespace

std::vector<double> compute_target(const ValueNetwork& inference, const Experience& e,
                                   const Hyperparams& hp, const ObservationLayout& layout) {
    ValueNetwork::Activations act;
    std::vector<float> nx((size_t)layout.feature_count());
    std::vector<double> out;
    target_into(inference, e, hp, layout, act, nx, out);
    return out;
}

double train_step(ValueNetwork& training, const ValueNetwork& inference,
                  const std::vector<std::vector<Experience>>& batches, const Hyperparams& hp,
                  const ObservationLayout& layout) {
    require(training.n_inputs() == layout.feature_count(),
            "train_step: network input width ", training.n_inputs(),
            " != observation width ", layout.feature_count());
    ValueNetwork::Activations act, target_act;
    std::vector<double> grad, target;
    std::vector<float> x((size_t)layout.feature_count()), nx((size_t)layout.feature_count());
    double loss_sum = 0;
    size_t count = 0;
    for (const auto& batch : batches) {
        for (const Experience& e : batch) {
            target_into(inference, e, hp, layout, target_act, nx, target);
            normalize_observation(unpack_observation(e.state, layout), layout, x.data());
            double loss = training.loss_and_gradient(x.data(), e.action, target.data(), act, grad);
            require(std::isfinite(loss),
                    "training loss is non-finite; reward scaling does not fit the support");
            training.apply_sgd(grad, hp.alpha);
            loss_sum += loss;
            ++count;
        }
    }
    training.refresh_half();
    return count ? loss_sum / (double)count : 0.0;
}

}  // namespace tierlearn
