#include "igaa/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "igaa/rng.hpp"

namespace igaa {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RegistryDims {
    std::size_t lat = 0, sec = 0, tput = 0, acc = 0;
};

RegistryDims find_dims(const std::vector<IntentDim>& registry) {
    RegistryDims d;
    bool has_lat = false, has_sec = false, has_tput = false, has_acc = false;
    for (std::size_t i = 0; i < registry.size(); ++i) {
        if (registry[i].label == "latency_target") d.lat = i, has_lat = true;
        if (registry[i].label == "security_flag") d.sec = i, has_sec = true;
        if (registry[i].label == "throughput_target") d.tput = i, has_tput = true;
        if (registry[i].label == "accuracy_target") d.acc = i, has_acc = true;
    }
    if (!(has_lat && has_sec && has_tput && has_acc))
        throw std::runtime_error("intent registry lacks a required target dimension");
    return d;
}

Request request_from_intent(std::size_t service, IntentVector intent, int duration,
                            const ScenarioSpec& spec, const RegistryDims& dims) {
    Request r;
    r.service_type = service;
    r.intent = std::move(intent);
    const std::size_t flag_count = spec.intent_registry.size();
    for (std::size_t k = 0; k < flag_count && k < r.intent.values.size(); ++k)
        if (spec.intent_registry[k].is_flag)
            r.intent.values[k] = r.intent.values[k] >= 0.5 ? 1.0 : 0.0;
    r.requirement = spec.matrix.map_intent(service, r.intent, spec.resources);
    r.deadline = r.intent.values[dims.lat];
    r.security_flag = r.intent.values[dims.sec];
    r.throughput_target = r.intent.values[dims.tput];
    r.accuracy_target = r.intent.values[dims.acc];
    r.duration_steps = duration;
    return r;
}

struct Rollout {
    std::vector<std::vector<bool>> met;
    std::vector<std::size_t> services;
    std::vector<std::vector<double>> states;
    std::vector<std::size_t> actions;
    std::vector<double> rewards;
    std::vector<std::vector<double>> next_states;
    double mean_reward = 0.0;
    double offloaded = 0.0;
    double full_sat_rate = 0.0;
    std::vector<double> sat_per_type;
};

Rollout greedy_rollout(SchedNet& net, EdgeEnv& env, const std::vector<Request>& requests) {
    Rollout out;
    env.reset(requests);
    std::size_t fully = 0;
    double reward_sum = 0.0;
    while (!env.done()) {
        const Request& req = env.current_request();
        std::vector<double> state = env.encode_state();
        const std::size_t action = net.argmax_action(state, req.service_type);
        const StepOutcome outcome = env.step(env.action_space()[action]);
        out.met.push_back(outcome.met);
        out.services.push_back(req.service_type);
        out.states.push_back(state);
        out.actions.push_back(action);
        out.rewards.push_back(outcome.reward);
        out.next_states.push_back(env.done() ? state : env.encode_state());
        reward_sum += outcome.reward;
        if (outcome.fully_satisfied) ++fully;
    }
    const std::size_t n = out.met.empty() ? 1 : out.met.size();
    out.mean_reward = reward_sum / static_cast<double>(n);
    out.offloaded = env.episode_cpu_offloaded();
    out.full_sat_rate = static_cast<double>(fully) / static_cast<double>(n);
    const std::size_t metric_count = fine_grained_metric_names().size();
    out.sat_per_type.assign(metric_count, 0.0);
    for (const auto& row : out.met)
        for (std::size_t k = 0; k < metric_count && k < row.size(); ++k)
            if (row[k]) out.sat_per_type[k] += 1.0;
    for (double& v : out.sat_per_type) v /= static_cast<double>(n);
    return out;
}

std::vector<GirRecord> capture_records(const ScenarioSpec& spec, std::size_t count,
                                       std::uint64_t seed) {
    std::vector<GirRecord> records;
    for (const Request& req : synthesize_dataset(spec, count, seed)) {
        GirRecord rec;
        rec.service_type = req.service_type;
        rec.intent = req.intent.values;
        rec.resource = req.requirement.values;
        rec.tag = spec.tag;
        rec.synthetic = false;
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<std::string> registry_labels(const ScenarioSpec& spec) {
    std::vector<std::string> labels;
    for (const IntentDim& d : spec.intent_registry) labels.push_back(d.label);
    return labels;
}

// Re-expresses a remembered record's demand under the current tensor and
// catalog so mixed-era records share one feature space.
GirRecord remap_record(const GirRecord& rec, const ScenarioSpec& spec,
                       const std::vector<std::string>& labels) {
    GirRecord out = rec;
    IntentVector intent{rec.intent, labels};
    out.resource = spec.matrix.map_intent(rec.service_type, intent, spec.resources).values;
    return out;
}

void write_text(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << content;
}

std::string dump_doc(const json& j) { return j.dump(2) + "\n"; }

std::string render_csv(const json& report) {
    std::ostringstream csv;
    csv << "step,scenario,episode,steps,mean_reward,success_rate,full_sat_rate,mean_latency,"
           "cpu_offloaded,mean_loss\n";
    for (const auto& step : report.at("steps")) {
        const std::string name = step.at("scenario_name").get<std::string>();
        const auto number = step.at("step").get<std::size_t>();
        for (const auto& ep : step.at("trace").at("episodes")) {
            csv << number << ',' << name << ',' << ep.at("episode").dump() << ','
                << ep.at("steps").dump() << ',' << ep.at("mean_reward").dump() << ','
                << ep.at("success_rate").dump() << ',' << ep.at("full_sat_rate").dump() << ','
                << ep.at("mean_latency").dump() << ',' << ep.at("cpu_offloaded").dump() << ','
                << ep.at("mean_loss").dump() << '\n';
        }
    }
    return csv.str();
}

json render_summary(const json& report) {
    json steps = json::array();
    for (const auto& step : report.at("steps")) {
        json row = {{"scenario", step.at("scenario_name")},
                    {"step", step.at("step")},
                    {"delta", step.at("delta")},
                    {"method", step.at("method")},
                    {"aborted", step.at("aborted")},
                    {"converged", step.at("trace").at("converged")},
                    {"episodes_run", step.at("trace").at("episodes_run")},
                    {"threshold_episode", step.at("trace").at("threshold_episode")},
                    {"final_sat", step.at("final_sat")},
                    {"final_reward", step.at("final_reward")},
                    {"final_offloaded", step.at("final_offloaded")},
                    {"founding_isr", step.at("founding_isr")},
                    {"replay_mixed", step.at("replay_mixed")},
                    {"flags", step.at("metrics").at("flags")},
                    {"directives", step.at("directives")},
                    {"frozen_groups", step.at("frozen_groups")},
                    {"expert_weights", step.at("expert_weights")}};
        steps.push_back(std::move(row));
    }
    return json{{"steps", steps}, {"events", report.at("events")},
                {"completed", report.at("completed")}};
}

void write_exports(const fs::path& dir, const json& report, const std::string& format) {
    if (format == "csv" || format == "both")
        write_text(dir / "metrics.csv", render_csv(report));
    if (format == "json" || format == "both")
        write_text(dir / "summary.json", dump_doc(render_summary(report)));
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig JSON
// ---------------------------------------------------------------------------

nlohmann::json to_json(const RunConfig& c) {
    return {{"seed", c.seed},
            {"steps", c.steps},
            {"gir_enabled", c.gir_enabled},
            {"use_external_generator", c.use_external_generator},
            {"endpoint",
             {{"url", c.endpoint.url},
              {"credential_env", c.endpoint.credential_env},
              {"timeout_seconds", c.endpoint.timeout_seconds},
              {"retries", c.endpoint.retries}}},
            {"continue_on_error", c.continue_on_error},
            {"out_dir", c.out_dir},
            {"causal_threshold", c.causal_threshold},
            {"sat_flag_threshold", c.sat_flag_threshold},
            {"convergence_threshold", c.convergence_threshold},
            {"kl_novelty_threshold", c.kl_novelty_threshold},
            {"dispersion_threshold", c.dispersion_threshold},
            {"regenerate_sat_floor", c.regenerate_sat_floor},
            {"convergence_fast_floor", c.convergence_fast_floor},
            {"episode_cap", c.episode_cap},
            {"service_min_episodes", c.service_min_episodes},
            {"plateau_window", c.plateau_window},
            {"plateau_delta", c.plateau_delta},
            {"batch_size", c.batch_size},
            {"replay_capacity", c.replay_capacity},
            {"warmup", c.warmup},
            {"eval_every", c.eval_every},
            {"eval_requests", c.eval_requests},
            {"lr", c.lr},
            {"gamma", c.gamma},
            {"soft_update_rho", c.soft_update_rho},
            {"epsilon_start", c.epsilon_start},
            {"epsilon_end", c.epsilon_end},
            {"epsilon_anneal_frac", c.epsilon_anneal_frac},
            {"encoder_dim", c.encoder_dim},
            {"net_feature_dim", c.net_feature_dim},
            {"trunk_width", c.trunk_width},
            {"rce_mc_samples", c.rce_mc_samples},
            {"rce_grid_points", c.rce_grid_points},
            {"rce_sample_count", c.rce_sample_count},
            {"beta_start", c.beta_start},
            {"beta_end", c.beta_end},
            {"beta_anneal_frac", c.beta_anneal_frac},
            {"weight_update_every", c.weight_update_every},
            {"expert_samples", c.expert_samples},
            {"expert_node_cap", c.expert_node_cap},
            {"gir_epochs", c.gir_epochs},
            {"gir_batch", c.gir_batch},
            {"gir_hidden", c.gir_hidden},
            {"gir_latent", c.gir_latent},
            {"gir_capture", c.gir_capture},
            {"gir_pool", c.gir_pool},
            {"replay_fraction", c.replay_fraction},
            {"fault_cpu_bias", c.fault_cpu_bias}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig d;  // defaults
    RunConfig c;
    c.seed = j.value("seed", d.seed);
    c.steps = j.value("steps", d.steps);
    c.gir_enabled = j.value("gir_enabled", d.gir_enabled);
    c.use_external_generator = j.value("use_external_generator", d.use_external_generator);
    if (j.contains("endpoint")) {
        const json& e = j.at("endpoint");
        c.endpoint.url = e.value("url", d.endpoint.url);
        c.endpoint.credential_env = e.value("credential_env", d.endpoint.credential_env);
        c.endpoint.timeout_seconds = e.value("timeout_seconds", d.endpoint.timeout_seconds);
        c.endpoint.retries = e.value("retries", d.endpoint.retries);
    }
    c.continue_on_error = j.value("continue_on_error", d.continue_on_error);
    c.out_dir = j.value("out_dir", d.out_dir);
    c.causal_threshold = j.value("causal_threshold", d.causal_threshold);
    c.sat_flag_threshold = j.value("sat_flag_threshold", d.sat_flag_threshold);
    c.convergence_threshold = j.value("convergence_threshold", d.convergence_threshold);
    c.kl_novelty_threshold = j.value("kl_novelty_threshold", d.kl_novelty_threshold);
    c.dispersion_threshold = j.value("dispersion_threshold", d.dispersion_threshold);
    c.regenerate_sat_floor = j.value("regenerate_sat_floor", d.regenerate_sat_floor);
    c.convergence_fast_floor = j.value("convergence_fast_floor", d.convergence_fast_floor);
    c.episode_cap = j.value("episode_cap", d.episode_cap);
    c.service_min_episodes = j.value("service_min_episodes", d.service_min_episodes);
    c.plateau_window = j.value("plateau_window", d.plateau_window);
    c.plateau_delta = j.value("plateau_delta", d.plateau_delta);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.replay_capacity = j.value("replay_capacity", d.replay_capacity);
    c.warmup = j.value("warmup", d.warmup);
    c.eval_every = j.value("eval_every", d.eval_every);
    c.eval_requests = j.value("eval_requests", d.eval_requests);
    c.lr = j.value("lr", d.lr);
    c.gamma = j.value("gamma", d.gamma);
    c.soft_update_rho = j.value("soft_update_rho", d.soft_update_rho);
    c.epsilon_start = j.value("epsilon_start", d.epsilon_start);
    c.epsilon_end = j.value("epsilon_end", d.epsilon_end);
    c.epsilon_anneal_frac = j.value("epsilon_anneal_frac", d.epsilon_anneal_frac);
    c.encoder_dim = j.value("encoder_dim", d.encoder_dim);
    c.net_feature_dim = j.value("net_feature_dim", d.net_feature_dim);
    c.trunk_width = j.value("trunk_width", d.trunk_width);
    c.rce_mc_samples = j.value("rce_mc_samples", d.rce_mc_samples);
    c.rce_grid_points = j.value("rce_grid_points", d.rce_grid_points);
    c.rce_sample_count = j.value("rce_sample_count", d.rce_sample_count);
    c.beta_start = j.value("beta_start", d.beta_start);
    c.beta_end = j.value("beta_end", d.beta_end);
    c.beta_anneal_frac = j.value("beta_anneal_frac", d.beta_anneal_frac);
    c.weight_update_every = j.value("weight_update_every", d.weight_update_every);
    c.expert_samples = j.value("expert_samples", d.expert_samples);
    c.expert_node_cap = j.value("expert_node_cap", d.expert_node_cap);
    c.gir_epochs = j.value("gir_epochs", d.gir_epochs);
    c.gir_batch = j.value("gir_batch", d.gir_batch);
    c.gir_hidden = j.value("gir_hidden", d.gir_hidden);
    c.gir_latent = j.value("gir_latent", d.gir_latent);
    c.gir_capture = j.value("gir_capture", d.gir_capture);
    c.gir_pool = j.value("gir_pool", d.gir_pool);
    c.replay_fraction = j.value("replay_fraction", d.replay_fraction);
    c.fault_cpu_bias = j.value("fault_cpu_bias", d.fault_cpu_bias);
    return c;
}

nlohmann::json to_json(const StepReport& r) {
    json directives = json::array();
    for (const CorrectionDirective& d : r.directives) directives.push_back(to_json(d));
    return {{"scenario_name", r.scenario_name},
            {"step", r.step},
            {"delta", r.delta},
            {"tag", r.tag},
            {"method", r.method},
            {"trace", to_json(r.trace)},
            {"metrics", to_json(r.metrics)},
            {"directives", directives},
            {"frozen_groups", r.frozen_groups},
            {"expert_weights", r.expert_weights},
            {"final_sat", r.final_sat},
            {"final_reward", r.final_reward},
            {"final_offloaded", r.final_offloaded},
            {"founding_isr", r.founding_isr},
            {"replay_mixed", r.replay_mixed},
            {"aborted", r.aborted},
            {"error", r.error}};
}

nlohmann::json to_json(const CurriculumReport& r) {
    json steps = json::array();
    for (const StepReport& s : r.steps) steps.push_back(to_json(s));
    return {{"config", to_json(r.config)},
            {"steps", steps},
            {"events", r.events},
            {"completed", r.completed}};
}

// ---------------------------------------------------------------------------
// Curriculum run
// ---------------------------------------------------------------------------

namespace {

struct CurriculumState {
    SchedNet net;
    bool net_ready = false;
    std::vector<std::string> service_tags;             // tag per service index
    std::vector<GirRecord> memory;                     // remembered real records
    std::vector<std::string> memory_tags;              // introduction order
    std::vector<std::vector<std::vector<double>>> intent_history;
    std::vector<ExpertProfile> experts;
    ScenarioSpec prev_spec;
    bool has_prev = false;
    std::optional<ScenarioSpec> founding;
    std::vector<std::size_t> founding_services;
    std::vector<IntentVector> founding_intents;
    std::vector<int> founding_durations;
    CvaeModel cvae;
    bool cvae_ready = false;
};

LoopConfig make_loop_config(const RunConfig& cfg, const ScenarioSpec& spec,
                            std::vector<Request> eval_requests) {
    LoopConfig loop;
    loop.train.gamma = cfg.gamma;
    loop.train.lr = cfg.lr;
    loop.train.soft_update_rho = cfg.soft_update_rho;
    loop.episode_cap = cfg.episode_cap;
    loop.plateau_window = cfg.plateau_window;
    loop.plateau_delta = cfg.plateau_delta;
    loop.batch_size = cfg.batch_size;
    loop.replay_capacity = cfg.replay_capacity;
    loop.warmup = cfg.warmup;
    loop.sat_threshold = cfg.convergence_threshold;
    loop.eval_requests = std::move(eval_requests);
    loop.eval_every = cfg.eval_every;
    loop.seed = derive_seed(cfg.seed, "loop-" + spec.name);
    return loop;
}

// Builds the per-episode request provider, mixing synthetic replay of past
// scenarios into the fresh stream when a pool is available.
EpisodeProvider make_provider(const RunConfig& cfg, const ScenarioSpec& spec,
                              std::vector<GirRecord> pool, const RegistryDims& dims) {
    const std::size_t total = spec.requests_per_episode;
    std::size_t n_replay = 0;
    if (!pool.empty())
        n_replay = std::min<std::size_t>(
            total - 1,
            static_cast<std::size_t>(std::llround(static_cast<double>(total) *
                                                  cfg.replay_fraction)));
    const std::vector<std::string> labels = registry_labels(spec);
    return [cfg, spec, pool = std::move(pool), n_replay, dims, labels,
            total](std::size_t episode) {
        std::vector<Request> reqs = synthesize_dataset(
            spec, total - n_replay,
            derive_seed(spec.dataset_seed, "episode-" + std::to_string(episode)));
        if (n_replay > 0) {
            Rng rng(derive_seed(spec.dataset_seed, "replay-" + std::to_string(episode)));
            for (std::size_t i = 0; i < n_replay; ++i) {
                const GirRecord& rec = pool[rng.index(pool.size())];
                const int span = spec.duration_max - spec.duration_min;
                const int duration =
                    spec.duration_min +
                    (span > 0 ? static_cast<int>(rng.index(static_cast<std::size_t>(span) + 1))
                              : 0);
                reqs.push_back(request_from_intent(rec.service_type,
                                                   IntentVector{rec.intent, labels}, duration,
                                                   spec, dims));
            }
            rng.shuffle(reqs);
        }
        return reqs;
    };
}

// Trains the scenario's generative memory (when enabled and history exists)
// and returns the synthetic replay pool for this step.
std::vector<GirRecord> prepare_replay(const RunConfig& cfg, const ScenarioSpec& spec,
                                      CurriculumState& st,
                                      const std::vector<GirRecord>& fresh_records,
                                      std::vector<std::string>& events) {
    std::vector<GirRecord> pool;
    if (!cfg.gir_enabled || st.memory.empty() || fresh_records.empty()) return pool;

    const std::vector<std::string> labels = registry_labels(spec);
    std::vector<GirRecord> old_records;
    old_records.reserve(st.memory.size());
    for (const GirRecord& rec : st.memory) old_records.push_back(remap_record(rec, spec, labels));

    // Oversample minority services to equal counts so the generator does not
    // collapse onto the dominant service's one-hot and starve synthesis of
    // the rarer tags.
    {
        std::map<std::size_t, std::vector<GirRecord>> by_service;
        for (GirRecord& rec : old_records) by_service[rec.service_type].push_back(std::move(rec));
        std::size_t largest = 0;
        for (const auto& [svc, bucket] : by_service)
            largest = std::max(largest, bucket.size());
        old_records.clear();
        for (const auto& [svc, bucket] : by_service)
            for (std::size_t i = 0; i < largest; ++i)
                old_records.push_back(bucket[i % bucket.size()]);
    }

    const GirNormalizer norm =
        make_gir_normalizer(spec.services.size(), spec.intent_registry, spec.resources);
    st.cvae = make_cvae(norm, cfg.gir_latent, cfg.gir_hidden,
                        derive_seed(cfg.seed, "cvae-" + spec.name));
    CvaeTrainConfig tcfg;
    tcfg.epochs = cfg.gir_epochs;
    tcfg.batch_size = cfg.gir_batch;
    tcfg.seed = derive_seed(cfg.seed, "cvae-train-" + spec.name);
    train_old_encoder(st.cvae, old_records, tcfg);
    train_new_encoder(st.cvae, fresh_records, tcfg);
    train_generator(st.cvae, old_records, fresh_records, tcfg);
    st.cvae_ready = true;

    // Only tags that some service actually carries are drawable: synthesis
    // labels each record by its service's introducing scenario, so a
    // resource-only scenario's tag never appears on any synthetic record.
    std::vector<std::string> drawable;
    for (const std::string& tag : st.memory_tags)
        if (std::find(st.service_tags.begin(), st.service_tags.end(), tag) !=
            st.service_tags.end())
            drawable.push_back(tag);
    if (drawable.empty()) return pool;
    const std::size_t per_tag = std::max<std::size_t>(1, cfg.gir_pool / drawable.size());
    for (const std::string& tag : drawable) {
        try {
            std::vector<GirRecord> drawn = synthesize_replay(
                st.cvae, per_tag, st.service_tags, tag,
                derive_seed(cfg.seed, "gir-pool-" + spec.name + "-" + tag));
            pool.insert(pool.end(), drawn.begin(), drawn.end());
        } catch (const std::exception& e) {
            events.push_back("replay synthesis for " + tag + " skipped: " + e.what());
        }
    }
    return pool;
}

// Records greedy transitions per service and rebuilds the expert profiles so
// later service introductions can be guided. Profiles are rebuilt every step
// because the state layout grows with the resource catalog.
void rebuild_experts(const RunConfig& cfg, const ScenarioSpec& spec, CurriculumState& st,
                     EdgeEnv& env, std::vector<std::string>& events) {
    const std::size_t n_services = spec.services.size();
    std::vector<std::vector<SampleTransition>> recorded(n_services);
    const std::size_t batch = 48;
    for (std::size_t round = 0; round < 12; ++round) {
        bool enough = true;
        for (const auto& r : recorded) enough = enough && r.size() >= cfg.expert_samples;
        if (enough) break;
        // Profiles need coverage of every service, so the recording stream
        // ignores the scenario's dataset tilt and samples services evenly.
        ScenarioSpec profiling = spec;
        for (ServiceEntry& svc : profiling.services.entries) svc.dataset_weight = 1.0;
        const std::vector<Request> reqs = synthesize_dataset(
            profiling, batch,
            derive_seed(cfg.seed, "expert-rec-" + spec.name + "-" + std::to_string(round)));
        const Rollout roll = greedy_rollout(st.net, env, reqs);
        for (std::size_t i = 0; i < roll.services.size(); ++i) {
            auto& bucket = recorded[roll.services[i]];
            if (bucket.size() >= cfg.expert_samples) continue;
            bucket.push_back(SampleTransition{roll.states[i], roll.actions[i], roll.rewards[i],
                                              roll.next_states[i]});
        }
    }
    st.experts.clear();
    ExpertProfileConfig pcfg;
    pcfg.sample_cap = cfg.expert_samples;
    pcfg.node_cap = cfg.expert_node_cap;
    pcfg.bisim = BisimConfig{0.5, 0.5, 40, 1e-7};
    for (std::size_t s = 0; s < n_services; ++s) {
        if (recorded[s].size() < 8) {
            events.push_back("expert profile skipped for " + spec.services.entries[s].name +
                             ": only " + std::to_string(recorded[s].size()) +
                             " transitions recorded");
            continue;
        }
        pcfg.seed = derive_seed(cfg.seed, "profile-" + spec.name + "-" +
                                              spec.services.entries[s].name);
        st.experts.push_back(build_expert_profile(spec.services.entries[s].name, s, recorded[s],
                                                  st.net, pcfg));
    }
}

void persist_step(const RunConfig& cfg, const ScenarioSpec& spec, const StepReport& sr,
                  const CurriculumState& st) {
    if (cfg.out_dir.empty()) return;
    const fs::path dir = fs::path(cfg.out_dir) / "steps" / spec.name;
    write_text(dir / "scenario.json", dump_doc(to_json(spec)));
    write_text(dir / "report.json", dump_doc(to_json(sr)));
    if (st.net_ready) {
        json checkpoint = {{"scenario", to_json(spec)}, {"net", st.net.to_json()}};
        write_text(dir / "checkpoint.json", dump_doc(checkpoint));
    }
    if (st.cvae_ready && cfg.gir_enabled) {
        json replay_model = {{"cvae", to_json(st.cvae)}, {"service_tags", st.service_tags}};
        write_text(dir / "replay-model.json", dump_doc(replay_model));
    }
}

}  // namespace

CurriculumReport run_curriculum(const RunConfig& cfg) {
    CurriculumReport report;
    report.config = cfg;

    GenerationContext ctx;
    ctx.seed = cfg.seed;
    CurriculumState st;

    for (std::size_t emitted = 0; emitted < cfg.steps; ++emitted) {
        std::optional<ScenarioSpec> spec_opt;
        try {
            if (cfg.use_external_generator) {
                GenerationOutcome out = external_generate(ctx, cfg.endpoint);
                spec_opt = std::move(out.spec);
            } else {
                spec_opt = next_scenario_builtin(ctx);
            }
        } catch (const std::exception& e) {
            report.events.push_back(std::string("generation failed: ") + e.what());
            report.completed = false;
            break;
        }
        if (!spec_opt) break;  // curriculum exhausted
        const ScenarioSpec spec = std::move(*spec_opt);

        StepReport sr;
        sr.scenario_name = spec.name;
        sr.step = spec.step;
        sr.delta = spec.delta;
        sr.tag = spec.tag;

        try {
            const RegistryDims dims = find_dims(spec.intent_registry);
            EnvConfig env_cfg = spec.env;
            env_cfg.no_offload_node_bonus = cfg.fault_cpu_bias;
            EdgeEnv env(spec.network, spec.services, spec.resources, env_cfg);

            // Tags track which scenario introduced each service; the
            // current spec's catalog may already include services whose
            // heads are added below.
            while (st.service_tags.size() < spec.services.size())
                st.service_tags.push_back(spec.tag);

            // --- generative replay preparation -----------------------------
            std::vector<GirRecord> fresh_records;
            if (cfg.gir_enabled)
                fresh_records = capture_records(spec, cfg.gir_capture,
                                                derive_seed(spec.dataset_seed, "gir-capture"));
            std::vector<GirRecord> pool =
                prepare_replay(cfg, spec, st, fresh_records, report.events);
            sr.replay_mixed = !pool.empty();
            const EpisodeProvider provider = make_provider(cfg, spec, std::move(pool), dims);

            std::vector<Request> eval_set = synthesize_dataset(
                spec, cfg.eval_requests, derive_seed(spec.dataset_seed, "step-eval"));
            const LoopConfig loop = make_loop_config(cfg, spec, eval_set);

            // --- dispatch by delta ------------------------------------------
            const bool introduces_resources = !spec.new_resources.empty();
            const bool introduces_services = !spec.new_services.empty() && st.net_ready;
            if (!st.net_ready) {
                Rng init_rng(derive_seed(cfg.seed, "net-init"));
                std::vector<std::string> res_names, svc_names;
                for (const auto& r : spec.resources.entries) res_names.push_back(r.name);
                for (const auto& s : spec.services.entries) svc_names.push_back(s.name);
                st.net = SchedNet(spec.network.size(), res_names, svc_names, env.action_count(),
                                  init_rng, cfg.encoder_dim, cfg.net_feature_dim,
                                  cfg.trunk_width);
                st.net_ready = true;
                const ActionSelector select = make_epsilon_greedy_selector(
                    cfg.epsilon_start, cfg.epsilon_end, cfg.epsilon_anneal_frac,
                    loop.episode_cap, derive_seed(cfg.seed, "selector-" + spec.name));
                sr.trace = run_ddqn_loop(st.net, env, provider, select, loop);
                sr.method = "fresh-ddqn";
            } else {
                if (introduces_resources) {
                    if (!st.has_prev)
                        throw std::runtime_error("resource transfer without a previous scenario");
                    EnvConfig old_cfg = st.prev_spec.env;
                    old_cfg.no_offload_node_bonus = cfg.fault_cpu_bias;
                    EdgeEnv env_old(st.prev_spec.network, st.prev_spec.services,
                                    st.prev_spec.resources, old_cfg);
                    RcetlConfig rc;
                    rc.rce.mc_samples = cfg.rce_mc_samples;
                    rc.rce.grid_points = cfg.rce_grid_points;
                    rc.rce.sample_count = cfg.rce_sample_count;
                    rc.rce.freeze_threshold = cfg.causal_threshold;
                    rc.rce.seed = derive_seed(cfg.seed, "rce-" + spec.name);
                    rc.loop = loop;
                    rc.epsilon_start = cfg.epsilon_start;
                    rc.epsilon_end = cfg.epsilon_end;
                    rc.epsilon_anneal_frac = cfg.epsilon_anneal_frac;
                    rc.seed = derive_seed(cfg.seed, "rcetl-" + spec.name);
                    const RcetlResult res = train_rcetl(st.net, env_old, env, provider, rc);
                    sr.trace = res.trace;
                    sr.frozen_groups = res.frozen_groups;
                    sr.method = "rcetl";
                }
                if (introduces_services) {
                    for (const std::string& svc : spec.new_services) {
                        Rng head_rng(derive_seed(cfg.seed, "head-" + svc));
                        st.net.add_head(svc, ExpandInit::Seeded, head_rng);
                    }
                    ApotlConfig ac;
                    ac.loop = loop;
                    // Service introductions get a consolidation floor: the
                    // mixed replay stream needs gradient volume after the new
                    // head stabilizes for old-service retention to register.
                    ac.loop.min_episodes = std::min(cfg.service_min_episodes, cfg.episode_cap);
                    ac.bisim = BisimConfig{0.5, 0.5, 40, 1e-7};
                    ac.beta_start = cfg.beta_start;
                    ac.beta_end = cfg.beta_end;
                    ac.beta_anneal_frac = cfg.beta_anneal_frac;
                    ac.epsilon_start = cfg.epsilon_start;
                    ac.epsilon_end = cfg.epsilon_end;
                    ac.epsilon_anneal_frac = cfg.epsilon_anneal_frac;
                    ac.weight_update_every = cfg.weight_update_every;
                    ac.node_cap = cfg.expert_node_cap;
                    ac.seed = derive_seed(cfg.seed, "apotl-" + spec.name);
                    const ApotlResult res = train_apotl(st.net, st.experts, env, provider, ac);
                    sr.trace = res.trace;
                    sr.expert_weights = res.final_weights;
                    sr.method = sr.method.empty() ? "apotl" : sr.method + "+apotl";
                }
                if (!introduces_resources && !introduces_services) {
                    // Regenerated or re-emitted spec: plain continued training.
                    const ActionSelector select = make_epsilon_greedy_selector(
                        cfg.epsilon_start, cfg.epsilon_end, cfg.epsilon_anneal_frac,
                        loop.episode_cap, derive_seed(cfg.seed, "selector-" + spec.name));
                    sr.trace = run_ddqn_loop(st.net, env, provider, select, loop);
                    sr.method = "fine-tune";
                }
            }

            // Freezing is transfer-scoped: release it once the step's loop ends.
            for (const std::string& g : st.net.frozen_groups()) st.net.unfreeze(g);

            // --- evaluation --------------------------------------------------
            const Rollout eval = greedy_rollout(st.net, env, loop.eval_requests);
            sr.final_sat = eval.sat_per_type;
            sr.final_reward = eval.mean_reward;
            sr.final_offloaded = eval.offloaded;
            const auto utilization = env.mean_utilization();

            MetricsReport mr;
            mr.sat = intent_satisfaction(eval.met, cfg.sat_flag_threshold);
            std::map<int, std::vector<std::size_t>> groups;
            for (std::size_t r = 0; r < spec.resources.size(); ++r) {
                const int g = spec.resources.entries[r].similar_group;
                if (g >= 0) groups[g].push_back(r);
            }
            std::vector<std::string> resource_names;
            for (const auto& r : spec.resources.entries) resource_names.push_back(r.name);
            for (const auto& [g, members] : groups)
                if (members.size() >= 2)
                    mr.groups.push_back(dispersion(utilization, members, resource_names));
            std::vector<std::vector<double>> current_intents;
            for (const Request& r : loop.eval_requests) current_intents.push_back(r.intent.values);
            for (const auto& past : st.intent_history) {
                const KdeDensity old_density(past);
                mr.kl_history.push_back(kl_divergence(current_intents, old_density));
            }
            mr.convergence = convergence_steps(sr.trace, cfg.convergence_threshold,
                                               cfg.convergence_fast_floor);
            mr.scenario_is_composite = spec.delta == "composite";
            mr.regenerate_sat_floor = cfg.regenerate_sat_floor;
            mr.disc_threshold = cfg.dispersion_threshold;
            mr.kl_threshold = cfg.kl_novelty_threshold;
            sr.metrics = mr;

            for (const CorrectionDirective& d : correction_verdict(mr)) {
                sr.directives.push_back(d);
                ctx.queue_directive(d);
            }

            // --- retention probe against the founding services ---------------
            if (!st.founding) {
                st.founding = spec;
                const std::vector<Request> probe = synthesize_dataset(
                    spec, cfg.eval_requests, derive_seed(cfg.seed, "founding-eval"));
                for (const Request& r : probe) {
                    st.founding_services.push_back(r.service_type);
                    st.founding_intents.push_back(r.intent);
                    st.founding_durations.push_back(r.duration_steps);
                }
            }
            {
                std::vector<Request> probe;
                for (std::size_t i = 0; i < st.founding_intents.size(); ++i)
                    probe.push_back(request_from_intent(st.founding_services[i],
                                                        st.founding_intents[i],
                                                        st.founding_durations[i], spec, dims));
                const Rollout retention = greedy_rollout(st.net, env, probe);
                // Satisfaction rate over individual fine-grained intents, the
                // same aggregation the evaluation metrics use.
                std::size_t sat = 0, total = 0;
                for (const auto& row : retention.met) {
                    for (const bool ok : row) {
                        ++total;
                        if (ok) ++sat;
                    }
                }
                sr.founding_isr =
                    total == 0 ? 0.0 : static_cast<double>(sat) / static_cast<double>(total);
            }

            st.intent_history.push_back(std::move(current_intents));
            if (cfg.gir_enabled && !fresh_records.empty()) {
                if (std::find(st.memory_tags.begin(), st.memory_tags.end(), spec.tag) ==
                    st.memory_tags.end())
                    st.memory_tags.push_back(spec.tag);
                st.memory.insert(st.memory.end(), fresh_records.begin(), fresh_records.end());
            }

            rebuild_experts(cfg, spec, st, env, report.events);
            st.prev_spec = spec;
            st.has_prev = true;
            persist_step(cfg, spec, sr, st);
        } catch (const std::exception& e) {
            sr.aborted = true;
            sr.error = e.what();
            report.steps.push_back(std::move(sr));
            if (!cfg.continue_on_error) {
                report.completed = false;
                break;
            }
            continue;
        }
        report.steps.push_back(std::move(sr));
    }

    report.events.insert(report.events.end(), ctx.events.begin(), ctx.events.end());

    if (!cfg.out_dir.empty()) {
        const fs::path dir(cfg.out_dir);
        const json rep_json = to_json(report);
        write_text(dir / "config.json", dump_doc(to_json(cfg)));
        write_text(dir / "report.json", dump_doc(rep_json));
        write_exports(dir, rep_json, "both");
    }
    return report;
}

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

nlohmann::json to_json(const InferenceDecision& d) {
    return {{"request_index", d.request_index},
            {"service", d.service},
            {"node", d.node},
            {"node_name", d.node_name},
            {"multiplier", d.multiplier},
            {"allocation", d.allocation},
            {"predicted_latency", d.predicted_latency},
            {"feasible", d.feasible}};
}

std::vector<InferenceDecision> infer(const nlohmann::json& checkpoint,
                                     const nlohmann::json& intents) {
    const ScenarioSpec spec = scenario_from_json(checkpoint.at("scenario"));
    const SchedNet net = SchedNet::from_json(checkpoint.at("net"));
    const RegistryDims dims = find_dims(spec.intent_registry);
    EdgeEnv env(spec.network, spec.services, spec.resources, spec.env);

    if (!intents.is_array()) throw std::invalid_argument("intents document must be a JSON array");
    std::vector<InferenceDecision> decisions;
    std::size_t index = 0;
    for (const auto& item : intents) {
        const std::string service_name = item.at("service").get<std::string>();
        const auto service = spec.services.index_of(service_name);
        if (!service) throw std::invalid_argument("unknown service type: " + service_name);

        IntentVector intent;
        const json& values = item.at("intent");
        for (const IntentDim& dim : spec.intent_registry) {
            if (!values.contains(dim.label))
                throw std::invalid_argument("intent is missing dimension: " + dim.label);
            intent.values.push_back(values.at(dim.label).get<double>());
            intent.dim_labels.push_back(dim.label);
        }
        validate_intent(intent, spec.intent_registry);
        const Request req = request_from_intent(*service, intent, 1, spec, dims);

        const std::vector<double> state = env.encode_state_for(req);
        const std::size_t action_idx = net.argmax_action(state, *service);
        const Action action = env.action_space()[action_idx];
        const StepOutcome out = env.evaluate(req, action);

        InferenceDecision d;
        d.request_index = index++;
        d.service = service_name;
        d.node = action.node;
        d.node_name = spec.network.nodes[action.node].name;
        d.multiplier = action.multiplier;
        d.allocation = out.allocation;
        d.predicted_latency = out.latency;
        d.feasible = out.feasible;
        decisions.push_back(std::move(d));
    }
    return decisions;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

void export_metrics(const std::string& run_dir, const std::string& format) {
    if (format != "csv" && format != "json" && format != "both")
        throw std::invalid_argument("unknown export format: " + format);
    const fs::path dir(run_dir);
    const fs::path report_path = dir / "report.json";
    std::ifstream f(report_path, std::ios::binary);
    if (!f) throw std::runtime_error("no curriculum report at " + report_path.string());
    json report;
    f >> report;
    write_exports(dir, report, format);
}

}  // namespace igaa
