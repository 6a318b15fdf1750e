#include "igaa/rcetl.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace igaa {

namespace {

// Context draws for every catalog component: draws[j][i] is the i-th value
// for component j, taken from a substream named by the component. Keying the
// stream by resource name (not index) means an extended catalog reproduces
// the exact same contexts on the resources it shares with the old one.
std::vector<std::vector<double>> component_contexts(const ResourceCatalog& catalog,
                                                    std::size_t count, std::uint64_t seed,
                                                    const std::string& prefix) {
    std::vector<std::vector<double>> draws(catalog.size());
    for (std::size_t j = 0; j < catalog.size(); ++j) {
        const ResourceEntry& e = catalog.entries[j];
        Rng rng(derive_seed(seed, prefix + e.name));
        draws[j].resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            draws[j][i] = rng.uniform(e.lower, e.upper);
        }
    }
    return draws;
}

double mean_reward_with_pin(const RewardEvaluator& eval,
                            const std::vector<std::vector<double>>& contexts,
                            std::size_t resource, double value, std::size_t mc_samples) {
    const std::size_t m = contexts.size();
    std::vector<double> req(m, 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < mc_samples; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            req[j] = (j == resource) ? value : contexts[j][i];
        }
        sum += eval(req);
    }
    return sum / static_cast<double>(mc_samples);
}

std::vector<double> grid_values(const ResourceEntry& e, std::size_t grid_points) {
    std::vector<double> g(grid_points);
    if (grid_points == 1) {
        g[0] = 0.5 * (e.lower + e.upper);
        return g;
    }
    for (std::size_t k = 0; k < grid_points; ++k) {
        g[k] = e.lower + (e.upper - e.lower) * static_cast<double>(k) /
                             static_cast<double>(grid_points - 1);
    }
    return g;
}

void check_resource(const ResourceCatalog& catalog, std::size_t resource) {
    if (resource >= catalog.size()) {
        throw std::invalid_argument("rce: resource index " + std::to_string(resource) +
                                    " out of range for catalog of size " +
                                    std::to_string(catalog.size()));
    }
}

}  // namespace

double intervention_expected_reward(const RewardEvaluator& eval, const ResourceCatalog& catalog,
                                    std::size_t resource, double value, std::size_t mc_samples,
                                    std::uint64_t seed) {
    check_resource(catalog, resource);
    if (mc_samples == 0) throw std::invalid_argument("rce: mc_samples must be positive");
    const ResourceEntry& e = catalog.entries[resource];
    if (value < e.lower || value > e.upper) {
        throw std::invalid_argument("rce: intervention value " + std::to_string(value) +
                                    " outside [" + std::to_string(e.lower) + ", " +
                                    std::to_string(e.upper) + "] for resource " + e.name);
    }
    const auto contexts = component_contexts(catalog, mc_samples, seed, "rce-ctx-");
    return mean_reward_with_pin(eval, contexts, resource, value, mc_samples);
}

double average_expected_reward(const RewardEvaluator& eval, const ResourceCatalog& catalog,
                               std::size_t resource, std::size_t grid_points,
                               std::size_t mc_samples, std::uint64_t seed) {
    check_resource(catalog, resource);
    if (grid_points == 0) throw std::invalid_argument("rce: grid_points must be positive");
    const auto contexts = component_contexts(catalog, mc_samples, seed, "rce-ctx-");
    const auto grid = grid_values(catalog.entries[resource], grid_points);
    double sum = 0.0;
    for (const double a : grid) {
        sum += mean_reward_with_pin(eval, contexts, resource, a, mc_samples);
    }
    return sum / static_cast<double>(grid.size());
}

double rce_value(const RewardEvaluator& eval, const ResourceCatalog& catalog,
                 std::size_t resource, double value, std::size_t grid_points,
                 std::size_t mc_samples, std::uint64_t seed) {
    // Both terms are computed from the same contexts so that everything not
    // caused by the pinned component cancels exactly.
    const double pinned =
        intervention_expected_reward(eval, catalog, resource, value, mc_samples, seed);
    const double averaged =
        average_expected_reward(eval, catalog, resource, grid_points, mc_samples, seed);
    return std::abs(pinned - averaged);
}

RceVector rce_vector(const RewardEvaluator& eval, const ResourceCatalog& catalog,
                     const std::vector<std::vector<double>>& samples, const RceConfig& cfg) {
    if (samples.empty()) throw std::invalid_argument("rce_vector: no samples");
    for (const auto& s : samples) {
        if (s.size() != catalog.size()) {
            throw std::invalid_argument("rce_vector: sample dimension " +
                                        std::to_string(s.size()) + " != catalog size " +
                                        std::to_string(catalog.size()));
        }
    }
    RceVector out;
    out.sample_count = samples.size();
    out.grid_points = cfg.grid_points;
    out.mc_samples = cfg.mc_samples;
    out.seed = cfg.seed;
    out.values.assign(catalog.size(), 0.0);

    const auto contexts = component_contexts(catalog, cfg.mc_samples, cfg.seed, "rce-ctx-");
    for (std::size_t n = 0; n < catalog.size(); ++n) {
        const ResourceEntry& e = catalog.entries[n];
        // The range-averaged term does not depend on the sample, so it is
        // computed once per resource.
        const auto grid = grid_values(e, cfg.grid_points);
        double averaged = 0.0;
        for (const double a : grid) {
            averaged += mean_reward_with_pin(eval, contexts, n, a, cfg.mc_samples);
        }
        averaged /= static_cast<double>(grid.size());

        double acc = 0.0;
        for (const auto& s : samples) {
            // Observed components can sit slightly outside the declared range
            // (demand mappings clamp to [0, upper]); pin at the nearest
            // in-range value.
            const double a = std::clamp(s[n], e.lower, e.upper);
            const double pinned = mean_reward_with_pin(eval, contexts, n, a, cfg.mc_samples);
            acc += std::abs(pinned - averaged);
        }
        out.values[n] = acc / static_cast<double>(samples.size());
    }
    return out;
}

std::vector<std::string> causal_diff_and_freeze(const RceVector& rce_old,
                                                const RceVector& rce_new, double xi,
                                                SchedNet& net) {
    if (rce_new.values.size() < rce_old.values.size()) {
        throw std::invalid_argument(
            "causal_diff_and_freeze: new vector shorter than old vector");
    }
    if (rce_old.values.size() > net.resources()) {
        throw std::invalid_argument(
            "causal_diff_and_freeze: old vector longer than the net's resource list");
    }
    std::vector<std::string> frozen;
    for (std::size_t n = 0; n < rce_old.values.size(); ++n) {
        const std::string group = "enc:" + net.resource_names()[n];
        const double shift = std::abs(rce_old.values[n] - rce_new.values[n]);
        if (shift <= xi) {
            // Effect essentially unmoved by the new resource: the learned
            // encoding still applies, keep it.
            net.freeze(group);
            frozen.push_back(group);
        } else {
            net.unfreeze(group);
        }
    }
    return frozen;
}

RewardEvaluator make_env_reward_evaluator(const EdgeEnv& env, const SchedNet& net,
                                          std::size_t probe_service) {
    if (probe_service >= env.services().size()) {
        throw std::invalid_argument("make_env_reward_evaluator: probe service out of range");
    }
    const ServiceEntry& svc = env.services().entries[probe_service];
    // Probe targets sit at the service's own operating point: a deadline the
    // base work just meets, its nominal throughput, its nominal accuracy, no
    // security constraint. The requirement vector under analysis is what
    // varies; the targets only anchor the satisfaction terms.
    Request probe;
    probe.service_type = probe_service;
    probe.deadline = svc.base_time;
    probe.security_flag = 0.0;
    probe.throughput_target = svc.base_throughput;
    probe.accuracy_target = svc.base_accuracy;
    probe.duration_steps = 1;

    return [&env, &net, probe](const std::vector<double>& requirement) -> double {
        Request req = probe;
        req.requirement.values = requirement;
        req.requirement.catalog_version = env.resources().version;
        const std::vector<double> state = env.encode_state_for(req);
        const std::size_t a_idx = net.argmax_action(state, req.service_type);
        const StepOutcome out = env.evaluate(req, env.action_space()[a_idx]);
        return out.reward;
    };
}

// ---------------------------------------------------------------------------

EvalPoint greedy_eval(SchedNet& net, EdgeEnv& env, const std::vector<Request>& requests,
                      std::size_t episode_label) {
    EvalPoint pt;
    pt.episode = episode_label;
    pt.sat_per_type.assign(fine_grained_metric_names().size(), 0.0);
    if (requests.empty()) return pt;

    env.reset(requests);
    std::size_t steps = 0;
    std::size_t fully = 0;
    double reward_sum = 0.0;
    while (!env.done()) {
        const std::vector<double> state = env.encode_state();
        const std::size_t service = env.current_request().service_type;
        const std::size_t a_idx = net.argmax_action(state, service);
        const StepOutcome out = env.step(env.action_space()[a_idx]);
        reward_sum += out.reward;
        if (out.fully_satisfied) ++fully;
        for (std::size_t k = 0; k < pt.sat_per_type.size() && k < out.met.size(); ++k) {
            if (out.met[k]) pt.sat_per_type[k] += 1.0;
        }
        ++steps;
    }
    for (double& v : pt.sat_per_type) v /= static_cast<double>(steps);
    pt.full_sat_rate = static_cast<double>(fully) / static_cast<double>(steps);
    pt.mean_reward = reward_sum / static_cast<double>(steps);
    pt.cpu_offloaded = env.episode_cpu_offloaded();
    return pt;
}

ActionSelector make_epsilon_greedy_selector(double eps_start, double eps_end, double anneal_frac,
                                            std::size_t episode_cap, std::uint64_t seed) {
    auto rng = std::make_shared<Rng>(derive_seed(seed, "eps-greedy"));
    const double anneal_span =
        std::max(1.0, anneal_frac * static_cast<double>(episode_cap));
    return [rng, eps_start, eps_end, anneal_span](EdgeEnv& env, SchedNet& net,
                                                  const std::vector<double>& state,
                                                  std::size_t service,
                                                  std::size_t episode) -> std::size_t {
        const double t = std::min(1.0, static_cast<double>(episode) / anneal_span);
        const double eps = eps_start + (eps_end - eps_start) * t;
        if (rng->uniform01() < eps) {
            return rng->index(env.action_count());
        }
        return net.argmax_action(state, service);
    };
}

TrainTrace run_ddqn_loop(SchedNet& net, EdgeEnv& env, const EpisodeProvider& episodes,
                         const ActionSelector& select, const LoopConfig& cfg) {
    TrainTrace trace;
    ReplayBuffer buffer(cfg.replay_capacity, derive_seed(cfg.seed, "replay"));
    SchedNet target = net;

    const std::size_t metric_count = fine_grained_metric_names().size();
    std::vector<double> episode_rewards;
    episode_rewards.reserve(cfg.episode_cap);

    for (std::size_t e = 0; e < cfg.episode_cap; ++e) {
        std::vector<Request> requests = episodes(e);
        if (requests.empty()) {
            throw std::runtime_error("run_ddqn_loop: episode provider returned no requests");
        }
        env.reset(std::move(requests));

        EpisodeStats stats;
        stats.episode = e;
        stats.sat_per_type.assign(metric_count, 0.0);
        double reward_sum = 0.0;
        double latency_sum = 0.0;
        std::size_t latency_count = 0;
        std::size_t success_count = 0;
        std::size_t fully_count = 0;
        double loss_sum = 0.0;
        std::size_t loss_count = 0;

        while (!env.done()) {
            const std::vector<double> state = env.encode_state();
            const std::size_t service = env.current_request().service_type;
            const std::size_t a_idx = select(env, net, state, service, e);
            const StepOutcome out = env.step(env.action_space()[a_idx]);

            Transition tr;
            tr.state = state;
            tr.service = service;
            tr.action = a_idx;
            tr.reward = out.reward;
            tr.terminal = env.done();
            tr.next_state = env.encode_state();
            tr.next_service = tr.terminal ? service : env.current_request().service_type;
            buffer.push(std::move(tr));

            if (buffer.size() >= cfg.warmup) {
                const double loss =
                    net.train_batch(buffer.sample(cfg.batch_size), target, cfg.train);
                SchedNet::soft_update(target, net, cfg.train.soft_update_rho);
                loss_sum += loss;
                ++loss_count;
            }

            reward_sum += out.reward;
            if (out.success) ++success_count;
            if (out.fully_satisfied) ++fully_count;
            if (out.feasible && std::isfinite(out.latency)) {
                latency_sum += out.latency;
                ++latency_count;
            }
            for (std::size_t k = 0; k < metric_count && k < out.met.size(); ++k) {
                if (out.met[k]) stats.sat_per_type[k] += 1.0;
            }
            ++stats.steps;
        }

        const double steps = static_cast<double>(stats.steps);
        stats.mean_reward = reward_sum / steps;
        stats.success_rate = static_cast<double>(success_count) / steps;
        stats.full_sat_rate = static_cast<double>(fully_count) / steps;
        for (double& v : stats.sat_per_type) v /= steps;
        stats.mean_latency =
            latency_count > 0 ? latency_sum / static_cast<double>(latency_count) : -1.0;
        stats.cpu_offloaded = env.episode_cpu_offloaded();
        stats.mean_loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : -1.0;
        if (loss_count > 0 && !std::isfinite(stats.mean_loss)) {
            throw std::runtime_error("run_ddqn_loop: non-finite training loss at episode " +
                                     std::to_string(e));
        }
        episode_rewards.push_back(stats.mean_reward);
        trace.episodes.push_back(std::move(stats));
        trace.episodes_run = e + 1;

        if (!cfg.eval_requests.empty() && (e + 1) % cfg.eval_every == 0) {
            EvalPoint pt = greedy_eval(net, env, cfg.eval_requests, e + 1);
            const bool all_above =
                !pt.sat_per_type.empty() &&
                std::all_of(pt.sat_per_type.begin(), pt.sat_per_type.end(),
                            [&](double v) { return v > cfg.sat_threshold; });
            if (all_above && !trace.threshold_episode.has_value()) {
                trace.threshold_episode = e + 1;
            }
            trace.evals.push_back(std::move(pt));
        }

        // Plateau detection on the per-episode mean rewards: once two
        // adjacent windows of W episodes agree within delta, stop.
        const std::size_t w = cfg.plateau_window;
        if (episode_rewards.size() >= 2 * w && w > 0 && trace.episodes_run >= cfg.min_episodes) {
            const auto tail_mean = [&](std::size_t from) {
                double s = 0.0;
                for (std::size_t i = from; i < from + w; ++i) s += episode_rewards[i];
                return s / static_cast<double>(w);
            };
            const std::size_t last = episode_rewards.size();
            const double recent = tail_mean(last - w);
            const double previous = tail_mean(last - 2 * w);
            if (std::abs(recent - previous) <= cfg.plateau_delta) {
                trace.converged = true;
                break;
            }
        }
    }
    trace.episode_cap_hit = !trace.converged && trace.episodes_run >= cfg.episode_cap;
    return trace;
}

// ---------------------------------------------------------------------------

namespace {

// Observed requirement samples for the causal analysis: uniform draws from
// the catalog ranges, one named substream per resource so shared resources
// see identical values before and after a catalog extension.
std::vector<std::vector<double>> observation_samples(const ResourceCatalog& catalog,
                                                     std::size_t count, std::uint64_t seed) {
    const auto draws = component_contexts(catalog, count, seed, "rce-obs-");
    std::vector<std::vector<double>> samples(count, std::vector<double>(catalog.size(), 0.0));
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t j = 0; j < catalog.size(); ++j) samples[i][j] = draws[j][i];
    }
    return samples;
}

}  // namespace

RcetlResult train_rcetl(SchedNet& net, EdgeEnv& env_old, EdgeEnv& env_new,
                        const EpisodeProvider& new_episodes, const RcetlConfig& cfg) {
    const ResourceCatalog& old_catalog = env_old.resources();
    const ResourceCatalog& new_catalog = env_new.resources();
    if (new_catalog.size() < old_catalog.size()) {
        throw std::invalid_argument("train_rcetl: new catalog smaller than old catalog");
    }
    for (std::size_t j = 0; j < old_catalog.size(); ++j) {
        if (old_catalog.entries[j].name != new_catalog.entries[j].name) {
            throw std::invalid_argument(
                "train_rcetl: old catalog is not a prefix of the new catalog");
        }
    }
    if (net.resources() != old_catalog.size()) {
        throw std::invalid_argument("train_rcetl: net input does not match the old catalog");
    }

    RcetlResult result;

    if (cfg.enable_freezing) {
        const RewardEvaluator eval_old =
            make_env_reward_evaluator(env_old, net, cfg.probe_service);
        const auto samples_old =
            observation_samples(old_catalog, cfg.rce.sample_count, cfg.rce.seed);
        result.rce_old = rce_vector(eval_old, old_catalog, samples_old, cfg.rce);
    }

    Rng expand_rng(derive_seed(cfg.seed, "expand-input"));
    for (std::size_t j = old_catalog.size(); j < new_catalog.size(); ++j) {
        net.expand_input(new_catalog.entries[j].name, ExpandInit::Seeded, expand_rng);
        result.added_resources.push_back(new_catalog.entries[j].name);
    }

    if (cfg.enable_freezing) {
        const RewardEvaluator eval_new =
            make_env_reward_evaluator(env_new, net, cfg.probe_service);
        const auto samples_new =
            observation_samples(new_catalog, cfg.rce.sample_count, cfg.rce.seed);
        result.rce_new = rce_vector(eval_new, new_catalog, samples_new, cfg.rce);
        result.frozen_groups = causal_diff_and_freeze(result.rce_old, result.rce_new,
                                                      cfg.rce.freeze_threshold, net);
    }

    const ActionSelector select =
        make_epsilon_greedy_selector(cfg.epsilon_start, cfg.epsilon_end, cfg.epsilon_anneal_frac,
                                     cfg.loop.episode_cap, derive_seed(cfg.seed, "selector"));
    result.trace = run_ddqn_loop(net, env_new, new_episodes, select, cfg.loop);
    return result;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const RceVector& v) {
    return nlohmann::json{{"values", v.values},
                          {"sample_count", v.sample_count},
                          {"grid_points", v.grid_points},
                          {"mc_samples", v.mc_samples},
                          {"seed", v.seed}};
}

nlohmann::json to_json(const EpisodeStats& s) {
    return nlohmann::json{{"episode", s.episode},
                          {"steps", s.steps},
                          {"mean_reward", s.mean_reward},
                          {"success_rate", s.success_rate},
                          {"full_sat_rate", s.full_sat_rate},
                          {"sat_per_type", s.sat_per_type},
                          {"mean_latency", s.mean_latency},
                          {"cpu_offloaded", s.cpu_offloaded},
                          {"mean_loss", s.mean_loss}};
}

nlohmann::json to_json(const TrainTrace& t) {
    nlohmann::json episodes = nlohmann::json::array();
    for (const auto& s : t.episodes) episodes.push_back(to_json(s));
    nlohmann::json evals = nlohmann::json::array();
    for (const auto& p : t.evals) {
        evals.push_back(nlohmann::json{{"episode", p.episode},
                                       {"sat_per_type", p.sat_per_type},
                                       {"full_sat_rate", p.full_sat_rate},
                                       {"mean_reward", p.mean_reward},
                                       {"cpu_offloaded", p.cpu_offloaded}});
    }
    nlohmann::json j{{"episodes", episodes},
                     {"evals", evals},
                     {"converged", t.converged},
                     {"episode_cap_hit", t.episode_cap_hit},
                     {"episodes_run", t.episodes_run}};
    j["threshold_episode"] =
        t.threshold_episode.has_value() ? nlohmann::json(*t.threshold_episode)
                                        : nlohmann::json(nullptr);
    return j;
}

nlohmann::json to_json(const RcetlResult& r) {
    return nlohmann::json{{"trace", to_json(r.trace)},
                          {"rce_old", to_json(r.rce_old)},
                          {"rce_new", to_json(r.rce_new)},
                          {"frozen_groups", r.frozen_groups},
                          {"added_resources", r.added_resources}};
}

}  // namespace igaa
