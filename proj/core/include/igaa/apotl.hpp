#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "igaa/bisim.hpp"
#include "igaa/env.hpp"
#include "igaa/net.hpp"
#include "igaa/rcetl.hpp"
#include "igaa/rng.hpp"

namespace igaa {

// One recorded interaction (state, action index, reward, successor state).
struct SampleTransition {
    std::vector<double> state;
    std::size_t action = 0;
    double reward = 0.0;
    std::vector<double> next_state;
};

nlohmann::json to_json(const SampleTransition& s);
SampleTransition sample_transition_from_json(const nlohmann::json& j);

// A finite decision-process snapshot distilled from recorded transitions.
// Source states are deduplicated into cells (exact match up to 1e-9);
// successor states map to their nearest cell; transitions sharing a
// (cell, action) key merge into one node with the mean reward and the
// empirical successor distribution over cells.
struct SampleNode {
    std::size_t cell = 0;
    std::size_t action = 0;
    double reward = 0.0;
    TransitionDist successors;  // over cells
};

struct SampledSystem {
    std::vector<std::vector<double>> cell_states;  // representative per cell
    std::vector<SampleNode> nodes;
    std::vector<std::vector<std::size_t>> cell_nodes;  // cell -> node indices

    std::size_t n_cells() const { return cell_states.size(); }
};

// Builds the snapshot from at most `node_cap` transitions; larger sample
// sets are first reduced by a seeded uniform subsample so the distance
// tables stay desk-sized.
SampledSystem build_sampled_system(const std::vector<SampleTransition>& samples,
                                   std::size_t node_cap, std::uint64_t seed);

// Index of the cell whose representative state is nearest in L2 (ties to
// the lowest index). State dimensions must match the system's.
std::size_t nearest_cell(const SampledSystem& sys, const std::vector<double>& state);

// Pairwise behavioural distances between two sampled systems: rows index
// the first (expert) system's nodes, columns the second (learner) system's.
struct BisimTable {
    std::vector<std::vector<double>> dis;        // [expert node][learner node]
    std::vector<std::vector<double>> state_dis;  // [expert cell][learner cell]
    std::vector<double> max_change_per_iter;
    std::size_t iterations_run = 0;
    bool diverged = false;
    double eta_r = 0.5;
    double eta_kd = 0.5;
};

nlohmann::json to_json(const BisimTable& t);

// Fixed-point iteration of the recursive behavioural metric over two
// sampled systems, mirroring the exact finite-system routine but tolerating
// ragged per-cell action sets.
BisimTable bisim_fixed_point(const SampledSystem& expert, const SampledSystem& learner,
                             const BisimConfig& cfg);

// Reusable expertise for one service type: recorded transitions, the frozen
// net they were produced by, the distilled system, and its converged
// self-distance table (the ground metric for live distance queries).
struct ExpertProfile {
    std::string service_name;
    std::size_t service_type = 0;  // head index in the snapshot
    std::vector<SampleTransition> samples;
    SchedNet snapshot;
    SampledSystem system;
    std::vector<std::vector<double>> self_state_dis;  // [cell][cell]
    std::size_t node_cap = 64;
    BisimConfig bisim;
    std::uint64_t seed = 0;
};

struct ExpertProfileConfig {
    std::size_t sample_cap = 2000;
    std::size_t node_cap = 64;
    BisimConfig bisim{0.5, 0.5, 60, 1e-7};
    std::uint64_t seed = 0;
};

ExpertProfile build_expert_profile(const std::string& service_name, std::size_t service_type,
                                   const std::vector<SampleTransition>& recorded,
                                   const SchedNet& net, const ExpertProfileConfig& cfg);

nlohmann::json to_json(const ExpertProfile& p);
ExpertProfile expert_profile_from_json(const nlohmann::json& j);

// Potential-suboptimality bound of taking `action` in the environment's
// current state, measured against one expert: the expert-side anchor is the
// expert cell nearest to `state` with its snapshot-greedy recorded action,
// and both the candidate and the learner's current greedy action are scored
// by a one-step lookahead distance (reward gap plus discounted transported
// successor distance under the expert's self-metric).
double up_bound_single(const ExpertProfile& expert, const EdgeEnv& env, const SchedNet& learner,
                       const std::vector<double>& state, std::size_t service,
                       std::size_t action, const BisimConfig& cfg);

// Convex combination of per-expert bounds under weights mu (simplex).
double up_bound_weighted(const std::vector<ExpertProfile>& experts,
                         const std::vector<double>& mu, const EdgeEnv& env,
                         const SchedNet& learner, const std::vector<double>& state,
                         std::size_t service, std::size_t action, const BisimConfig& cfg);

// Bounds for every action of the environment's current state in one sweep
// (each action and the greedy action are peeked exactly once).
std::vector<double> up_bounds_all_actions(const std::vector<ExpertProfile>& experts,
                                          const std::vector<double>& mu, const EdgeEnv& env,
                                          const SchedNet& learner,
                                          const std::vector<double>& state, std::size_t service,
                                          const BisimConfig& cfg);

// P(a) = sigmoid(-UP(a)) / sum_a' sigmoid(-UP(a')). Lower bound, higher
// probability; sums to 1 within 1e-9.
std::vector<double> action_probabilities(const std::vector<double>& up_values);

// mu_j proportional to 1 / (1e-3 + mean pairwise distance between the
// learner's recent transitions and expert j's system); normalized.
std::vector<double> estimate_expert_weights(const std::vector<ExpertProfile>& experts,
                                            const std::vector<SampleTransition>& learner_samples,
                                            const BisimConfig& cfg, std::size_t node_cap,
                                            std::uint64_t seed);

struct ApotlConfig {
    LoopConfig loop;
    BisimConfig bisim;
    double beta_start = 1.0;  // probability of following expert guidance
    double beta_end = 0.05;
    double beta_anneal_frac = 0.6;
    double epsilon_start = 0.3;
    double epsilon_end = 0.02;
    double epsilon_anneal_frac = 0.6;
    std::size_t weight_update_every = 50;  // episodes between mu refreshes
    std::size_t learner_sample_cap = 64;   // rolling window for mu estimation
    std::size_t node_cap = 64;
    std::uint64_t seed = 11;
};

struct WeightSnapshot {
    std::size_t episode = 0;
    std::vector<double> mu;
};

struct ApotlResult {
    TrainTrace trace;
    std::vector<double> final_weights;
    std::vector<WeightSnapshot> weight_history;
};

nlohmann::json to_json(const ApotlResult& r);

// Expert-guided transfer for a new service type: with probability beta
// (annealed) the action maximizing the guidance probabilities is taken,
// otherwise epsilon-greedy on the learner's own Q-values; training is the
// shared double-DQN loop. beta_start = beta_end = 0 reduces to the plain
// baseline. The net must already have a head for the new service.
ApotlResult train_apotl(SchedNet& net, const std::vector<ExpertProfile>& experts, EdgeEnv& env,
                        const EpisodeProvider& episodes, const ApotlConfig& cfg);

}  // namespace igaa
