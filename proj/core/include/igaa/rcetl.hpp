#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "igaa/env.hpp"
#include "igaa/net.hpp"
#include "igaa/nsi.hpp"
#include "igaa/rng.hpp"

namespace igaa {

// Scalar reward surrogate over a full requirement vector (length = catalog
// size). Analytic evaluators plug in for tests; the environment-backed one
// runs a single hypothetical step under the current greedy policy.
using RewardEvaluator = std::function<double(const std::vector<double>&)>;

struct RceConfig {
    std::size_t mc_samples = 2000;   // M: contexts per interventional expectation
    std::size_t grid_points = 11;    // K: grid for the range-averaged expectation
    std::size_t sample_count = 100;  // Xi: observed vectors averaged over
    double freeze_threshold = 0.05;  // xi
    std::uint64_t seed = 0;
};

struct RceVector {
    std::vector<double> values;  // per-resource average causal effect, >= 0
    std::size_t sample_count = 0;
    std::size_t grid_points = 0;
    std::size_t mc_samples = 0;
    std::uint64_t seed = 0;
};

nlohmann::json to_json(const RceVector& v);

// Monte-Carlo estimate of the expected reward with requirement component
// `resource` pinned to `value` and every other component drawn uniformly
// from its catalog range. Context draws come from per-component substreams
// of `seed`, so estimates for different pinned values (or an extended
// catalog) share the same context randomness on shared components.
double intervention_expected_reward(const RewardEvaluator& eval, const ResourceCatalog& catalog,
                                    std::size_t resource, double value, std::size_t mc_samples,
                                    std::uint64_t seed);

// Mean of the interventional expectation over a uniform grid spanning the
// resource's catalog range; independent of any specific pinned value.
double average_expected_reward(const RewardEvaluator& eval, const ResourceCatalog& catalog,
                               std::size_t resource, std::size_t grid_points,
                               std::size_t mc_samples, std::uint64_t seed);

// |interventional expectation at `value` - range-averaged expectation|.
// Both terms reuse the same contexts, so a constant evaluator gives exactly 0.
double rce_value(const RewardEvaluator& eval, const ResourceCatalog& catalog,
                 std::size_t resource, double value, std::size_t grid_points,
                 std::size_t mc_samples, std::uint64_t seed);

// Per-resource causal-effect values at each observed sample's own component
// value, averaged over the sample set.
RceVector rce_vector(const RewardEvaluator& eval, const ResourceCatalog& catalog,
                     const std::vector<std::vector<double>>& samples, const RceConfig& cfg);

// Compares causal effects index-wise over the shared (old) resources and
// freezes the requirement encoder of every resource whose effect moved by at
// most `xi` when the new resource appeared. The new resource's encoder and
// the shared trunk are never frozen. Returns the frozen group names.
std::vector<std::string> causal_diff_and_freeze(const RceVector& rce_old,
                                                const RceVector& rce_new, double xi,
                                                SchedNet& net);

// Environment-backed surrogate: builds a probe request for `probe_service`
// from the given requirement vector (targets at the service's template
// midpoints), asks the net for its greedy action, and returns the reward of
// that single hypothetical step at current availability.
RewardEvaluator make_env_reward_evaluator(const EdgeEnv& env, const SchedNet& net,
                                          std::size_t probe_service);

// ---------------------------------------------------------------------------
// Shared double-DQN episode loop (used by both transfer trainers).

using EpisodeProvider = std::function<std::vector<Request>(std::size_t episode)>;
using ActionSelector = std::function<std::size_t(EdgeEnv& env, SchedNet& net,
                                                 const std::vector<double>& state,
                                                 std::size_t service, std::size_t episode)>;

struct LoopConfig {
    TrainConfig train;
    std::size_t episode_cap = 300;
    std::size_t min_episodes = 0;     // plateau exit suppressed before this
    std::size_t plateau_window = 50;  // W
    double plateau_delta = 0.01;      // delta, on mean per-step reward
    std::size_t batch_size = 64;
    std::size_t replay_capacity = 20000;
    std::size_t warmup = 64;  // transitions before optimization starts
    double sat_threshold = 0.90;
    std::vector<Request> eval_requests;  // greedy satisfaction probe set
    std::size_t eval_every = 5;          // episodes between greedy evals
    std::uint64_t seed = 1;
};

struct EpisodeStats {
    std::size_t episode = 0;
    std::size_t steps = 0;
    double mean_reward = 0.0;
    double success_rate = 0.0;
    double full_sat_rate = 0.0;
    std::vector<double> sat_per_type;  // fixed fine-grained metric order
    double mean_latency = -1.0;        // over feasible steps; -1 if none
    double cpu_offloaded = 0.0;
    double mean_loss = -1.0;  // -1 before optimization starts
};

struct EvalPoint {
    std::size_t episode = 0;
    std::vector<double> sat_per_type;
    double full_sat_rate = 0.0;
    double mean_reward = 0.0;
    double cpu_offloaded = 0.0;
};

struct TrainTrace {
    std::vector<EpisodeStats> episodes;
    std::vector<EvalPoint> evals;
    bool converged = false;
    bool episode_cap_hit = false;
    std::size_t episodes_run = 0;
    // First eval episode where every fine-grained satisfaction rate exceeded
    // the loop's threshold.
    std::optional<std::size_t> threshold_episode;
};

nlohmann::json to_json(const EpisodeStats& s);
nlohmann::json to_json(const TrainTrace& t);

// Runs episodes until the moving average of mean per-step reward plateaus
// (|MA of last W - MA of previous W| <= delta) or the episode cap is hit.
// Every `eval_every` episodes the greedy policy is scored on the eval set
// without training. Fully deterministic given the seed and selector.
TrainTrace run_ddqn_loop(SchedNet& net, EdgeEnv& env, const EpisodeProvider& episodes,
                         const ActionSelector& select, const LoopConfig& cfg);

// Greedy rollout over one request list; returns the eval summary and leaves
// the environment reset afterwards.
EvalPoint greedy_eval(SchedNet& net, EdgeEnv& env, const std::vector<Request>& requests,
                      std::size_t episode_label);

// Epsilon-greedy selector with a linear anneal over the first
// `anneal_frac` of the episode cap. Owns its own substream of `seed`.
ActionSelector make_epsilon_greedy_selector(double eps_start, double eps_end, double anneal_frac,
                                            std::size_t episode_cap, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Causal-effect-guided transfer for newly introduced resource types.

struct RcetlConfig {
    RceConfig rce;
    LoopConfig loop;
    double epsilon_start = 0.3;
    double epsilon_end = 0.02;
    double epsilon_anneal_frac = 0.6;
    bool enable_freezing = true;  // false = plain fine-tuning baseline
    std::size_t probe_service = 0;
    std::uint64_t seed = 7;
};

struct RcetlResult {
    TrainTrace trace;
    RceVector rce_old;
    RceVector rce_new;
    std::vector<std::string> frozen_groups;
    std::vector<std::string> added_resources;
};

nlohmann::json to_json(const RcetlResult& r);

// Full resource-introduction transfer: causal effects on the old catalog,
// input expansion for each new resource, causal effects on the new catalog,
// freezing of unmoved encoders, then the shared training loop on the new
// environment. With freezing disabled the causal analysis is skipped and the
// loop degenerates to plain fine-tuning; the training randomness is
// unchanged either way because causal analysis draws from its own streams.
RcetlResult train_rcetl(SchedNet& net, EdgeEnv& env_old, EdgeEnv& env_new,
                        const EpisodeProvider& new_episodes, const RcetlConfig& cfg);

}  // namespace igaa
