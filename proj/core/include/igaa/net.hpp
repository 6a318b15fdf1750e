#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "igaa/rng.hpp"

namespace igaa {

struct Affine {
    std::size_t in = 0, out = 0;
    std::vector<double> W;  // row-major, out x in
    std::vector<double> b;  // out

    Affine() = default;
    Affine(std::size_t in_dim, std::size_t out_dim)
        : in(in_dim), out(out_dim), W(in_dim * out_dim, 0.0), b(out_dim, 0.0) {}

    void apply(const double* x, double* y) const;  // y = W x + b
    std::size_t param_count() const { return W.size() + b.size(); }
};

struct AdamState {
    std::vector<double> mW, vW, mb, vb;
    std::uint64_t t = 0;

    void match(const Affine& a) {
        mW.assign(a.W.size(), 0.0);
        vW.assign(a.W.size(), 0.0);
        mb.assign(a.b.size(), 0.0);
        vb.assign(a.b.size(), 0.0);
        t = 0;
    }
};

struct TrainConfig {
    double gamma = 0.9;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double soft_update_rho = 0.05;
};

struct Transition {
    std::vector<double> state;
    std::size_t service = 0;
    std::size_t action = 0;
    double reward = 0.0;
    std::vector<double> next_state;
    std::size_t next_service = 0;
    bool terminal = false;
};

// Bounded FIFO experience store with seeded uniform sampling.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity, std::uint64_t seed);

    void push(Transition t);
    std::vector<Transition> sample(std::size_t batch);
    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }

private:
    std::size_t capacity_;
    std::size_t head_ = 0;  // next slot to overwrite once full
    std::vector<Transition> data_;
    Rng rng_;
};

struct ForwardCache {
    std::vector<double> net_in;
    std::vector<double> req_in;
    std::vector<double> concat;
    std::vector<double> z1, h1;
    std::vector<double> z2, h2;
    std::vector<double> q;
    std::size_t service = 0;
};

enum class ExpandInit { Seeded, Zero };

// Q-network over scheduling states. The state splits into a network segment
// (per-node availability ratios plus distance) fed through one feature block
// and a requirement segment fed through one small scalar encoder per
// resource; a shared two-layer trunk feeds one Q-value head per service
// type. Parameters are organized into named groups ("enc:<resource>",
// "net_block", "trunk", "head:<service>") so training can freeze any subset:
// frozen groups keep their weights and optimizer moments bit-identical.
class SchedNet {
public:
    SchedNet() = default;
    SchedNet(std::size_t nodes, std::vector<std::string> resource_names,
             std::vector<std::string> service_names, std::size_t actions, Rng& init_rng,
             std::size_t encoder_dim = 4, std::size_t net_feature_dim = 32,
             std::size_t trunk_width = 64);

    std::size_t state_dim() const { return nodes_ * (resources() + 1) + resources(); }
    std::size_t resources() const { return resource_names_.size(); }
    std::size_t services() const { return service_names_.size(); }
    std::size_t actions() const { return actions_; }
    std::size_t nodes() const { return nodes_; }
    const std::vector<std::string>& resource_names() const { return resource_names_; }
    const std::vector<std::string>& service_names() const { return service_names_; }

    std::vector<double> forward(const std::vector<double>& state, std::size_t service) const;
    std::vector<double> forward_cached(const std::vector<double>& state, std::size_t service,
                                       ForwardCache& cache) const;
    std::size_t argmax_action(const std::vector<double>& state, std::size_t service) const;

    // Freeze control by group name. Unknown names throw.
    void freeze(const std::string& group);
    void unfreeze(const std::string& group);
    bool is_frozen(const std::string& group) const { return frozen_.count(group) > 0; }
    std::set<std::string> frozen_groups() const { return frozen_; }
    std::vector<std::string> group_names() const;

    // One optimization step on a batch: double-Q targets (argmax under this
    // network, evaluation under `target`), squared error on the taken
    // action, Adam on every unfrozen group. Returns the batch loss.
    double train_batch(const std::vector<Transition>& batch, const SchedNet& target,
                       const TrainConfig& cfg);

    // target <- rho * online + (1 - rho) * target, over all parameters.
    static void soft_update(SchedNet& target, const SchedNet& online, double rho);

    // Grow the input for one new resource: every node block gains one
    // availability column (inserted before its distance column), a new
    // requirement encoder is appended, and the trunk's first layer widens to
    // accept the encoder's output. Existing weights are untouched.
    void expand_input(const std::string& resource_name, ExpandInit mode, Rng& rng);

    // Add a Q-value head for a new service type.
    void add_head(const std::string& service_name, ExpandInit mode, Rng& rng);

    nlohmann::json to_json() const;
    static SchedNet from_json(const nlohmann::json& j);

    // Structural + bitwise equality (used by freeze tests and checkpointing).
    bool equal_bits(const SchedNet& other) const;

    const Affine& encoder(std::size_t r) const { return encoders_[r]; }
    const Affine& net_block() const { return net_block_; }
    const Affine& trunk1() const { return trunk1_; }
    const Affine& trunk2() const { return trunk2_; }
    const Affine& head(std::size_t s) const { return heads_[s]; }

    // Gradient accumulation API, exposed for finite-difference checking.
    struct Grads {
        std::vector<Affine> encoders;
        Affine net_block, trunk1, trunk2;
        std::vector<Affine> heads;
    };
    Grads zero_grads() const;
    // Backpropagate dL/dq through the cached forward pass.
    void backward(const ForwardCache& cache, const std::vector<double>& dq, Grads& g) const;
    // Apply one Adam step from accumulated grads to unfrozen groups.
    void adam_step(const Grads& g, const TrainConfig& cfg);

private:
    void init_affine(Affine& a, Rng& rng);
    static void adam_update(Affine& p, const Affine& g, AdamState& s, const TrainConfig& cfg);

    std::size_t nodes_ = 0;
    std::size_t actions_ = 0;
    std::size_t encoder_dim_ = 4;
    std::size_t net_feature_dim_ = 32;
    std::size_t trunk_width_ = 64;
    std::vector<std::string> resource_names_;
    std::vector<std::string> service_names_;

    std::vector<Affine> encoders_;  // one per resource, 1 -> encoder_dim
    Affine net_block_;              // nodes*(m+1) -> net_feature_dim
    Affine trunk1_;                 // net_feature_dim + m*encoder_dim -> trunk_width
    Affine trunk2_;                 // trunk_width -> trunk_width
    std::vector<Affine> heads_;     // trunk_width -> actions

    std::vector<AdamState> opt_encoders_;
    AdamState opt_net_block_, opt_trunk1_, opt_trunk2_;
    std::vector<AdamState> opt_heads_;

    std::set<std::string> frozen_;
};

}  // namespace igaa
