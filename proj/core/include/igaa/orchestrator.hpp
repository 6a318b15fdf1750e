#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "igaa/apotl.hpp"
#include "igaa/gir.hpp"
#include "igaa/metrics.hpp"
#include "igaa/rcetl.hpp"
#include "igaa/scenario.hpp"

namespace igaa {

// Everything a curriculum run depends on. A run is a pure function of this
// struct when the builtin generator is used; the struct round-trips through
// JSON losslessly.
struct RunConfig {
    std::uint64_t seed = 1;
    std::size_t steps = 6;  // scenario emissions to train on
    bool gir_enabled = true;
    bool use_external_generator = false;
    ExternalEndpointConfig endpoint;
    bool continue_on_error = false;
    std::string out_dir;  // empty disables persistence

    // evaluation thresholds
    double causal_threshold = 0.05;       // encoder freeze margin
    double sat_flag_threshold = 0.75;     // strict lower bound per metric
    double convergence_threshold = 0.90;  // all-metric target on greedy evals
    double kl_novelty_threshold = 0.5;
    double dispersion_threshold = 0.5;
    double regenerate_sat_floor = 0.25;
    std::size_t convergence_fast_floor = 20;

    // training loop
    std::size_t episode_cap = 400;
    std::size_t service_min_episodes = 240;  // consolidation floor on service-introducing steps
    std::size_t plateau_window = 60;
    double plateau_delta = 0.005;
    std::size_t batch_size = 128;
    std::size_t replay_capacity = 20000;
    std::size_t warmup = 64;
    std::size_t eval_every = 5;
    std::size_t eval_requests = 64;
    double lr = 3e-4;
    double gamma = 0.9;
    double soft_update_rho = 0.01;
    double epsilon_start = 0.3;
    double epsilon_end = 0.02;
    double epsilon_anneal_frac = 0.6;

    // net shape
    std::size_t encoder_dim = 4;
    std::size_t net_feature_dim = 32;
    std::size_t trunk_width = 64;

    // resource-transfer causal analysis
    std::size_t rce_mc_samples = 400;
    std::size_t rce_grid_points = 11;
    std::size_t rce_sample_count = 50;

    // service-transfer guidance
    double beta_start = 1.0;
    double beta_end = 0.05;
    double beta_anneal_frac = 0.6;
    std::size_t weight_update_every = 40;
    std::size_t expert_samples = 96;  // recorded transitions per expert service
    std::size_t expert_node_cap = 48;

    // generative intent replay
    std::size_t gir_epochs = 200;
    std::size_t gir_batch = 64;
    std::size_t gir_hidden = 64;
    std::size_t gir_latent = 8;
    std::size_t gir_capture = 192;  // records remembered per scenario
    std::size_t gir_pool = 192;     // synthetic records drawn per step
    double replay_fraction = 0.35;

    // fault injection: reward bonus for nodes without offload units,
    // biasing the policy toward plain compute allocation
    double fault_cpu_bias = 0.0;
};

nlohmann::json to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);

struct StepReport {
    std::string scenario_name;
    std::size_t step = 0;
    std::string delta;
    std::string tag;
    std::string method;  // "fresh-ddqn" | "rcetl" | "apotl" | "rcetl+apotl"
    TrainTrace trace;
    MetricsReport metrics;
    std::vector<CorrectionDirective> directives;
    std::vector<std::string> frozen_groups;  // resource transfer only
    std::vector<double> expert_weights;      // service transfer only
    std::vector<double> final_sat;           // greedy eval after training
    double final_reward = 0.0;
    double final_offloaded = 0.0;
    double founding_isr = -1.0;  // full-satisfaction rate on first-step services
    bool replay_mixed = false;
    bool aborted = false;
    std::string error;
};

nlohmann::json to_json(const StepReport& r);

struct CurriculumReport {
    RunConfig config;
    std::vector<StepReport> steps;
    std::vector<std::string> events;
    bool completed = true;
};

nlohmann::json to_json(const CurriculumReport& r);

// Trains the curriculum end to end: generate + validate each scenario,
// dispatch by its delta (fresh net, causal-transfer for new resources,
// expert-guided transfer for new services; composite specs run the resource
// path before the service path), mix generative replay when enabled,
// evaluate, and feed correction directives back into generation. Persists
// per-step artifacts plus exports under config.out_dir when set.
CurriculumReport run_curriculum(const RunConfig& cfg);

// One scheduling decision for an intent presented at inference time.
struct InferenceDecision {
    std::size_t request_index = 0;
    std::string service;
    std::size_t node = 0;
    std::string node_name;
    double multiplier = 1.0;
    std::vector<double> allocation;
    double predicted_latency = 0.0;
    bool feasible = false;
};

nlohmann::json to_json(const InferenceDecision& d);

// checkpoint: {"scenario": <ScenarioSpec>, "net": <SchedNet>}. intents: array
// of {"service": <catalog name>, "intent": {<dimension label>: value, ...}}.
// Maps each intent to demand, encodes the empty-network state, and takes the
// greedy action. Unknown services or missing dimensions are errors.
std::vector<InferenceDecision> infer(const nlohmann::json& checkpoint,
                                     const nlohmann::json& intents);

// Rebuilds metrics.csv (per-episode rows) and summary.json (per-step
// summaries) from <run_dir>/report.json. format: "csv", "json", or "both".
// Re-exporting is byte-idempotent.
void export_metrics(const std::string& run_dir, const std::string& format);

}  // namespace igaa
