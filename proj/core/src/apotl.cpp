#include "igaa/apotl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

namespace igaa {

namespace {

double l2_distance2(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

// Seeded uniform subsample that preserves the original order.
std::vector<std::size_t> subsample_indices(std::size_t total, std::size_t cap,
                                           std::uint64_t seed) {
    std::vector<std::size_t> idx(total);
    for (std::size_t i = 0; i < total; ++i) idx[i] = i;
    if (total <= cap) return idx;
    Rng rng(seed);
    rng.shuffle(idx);
    idx.resize(cap);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace

SampledSystem build_sampled_system(const std::vector<SampleTransition>& samples,
                                   std::size_t node_cap, std::uint64_t seed) {
    if (samples.empty()) {
        throw std::invalid_argument("build_sampled_system: no samples");
    }
    if (node_cap == 0) {
        throw std::invalid_argument("build_sampled_system: node_cap must be positive");
    }
    const auto chosen =
        subsample_indices(samples.size(), node_cap, derive_seed(seed, "system-subsample"));

    SampledSystem sys;
    constexpr double kCellTol2 = 1e-18;  // squared: states within 1e-9 share a cell

    // Source states become cells (exact-match dedupe).
    std::vector<std::size_t> sample_cell(chosen.size());
    for (std::size_t k = 0; k < chosen.size(); ++k) {
        const auto& s = samples[chosen[k]].state;
        std::size_t cell = sys.cell_states.size();
        for (std::size_t c = 0; c < sys.cell_states.size(); ++c) {
            if (sys.cell_states[c].size() == s.size() &&
                l2_distance2(sys.cell_states[c], s) < kCellTol2) {
                cell = c;
                break;
            }
        }
        if (cell == sys.cell_states.size()) sys.cell_states.push_back(s);
        sample_cell[k] = cell;
    }

    // Merge transitions by (cell, action): mean reward, empirical successor
    // counts over nearest cells.
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> node_of;
    std::vector<double> reward_sum;
    std::vector<std::size_t> reward_count;
    std::vector<std::map<std::size_t, std::size_t>> succ_counts;
    std::vector<std::pair<std::size_t, std::size_t>> node_keys;  // in first-seen order
    for (std::size_t k = 0; k < chosen.size(); ++k) {
        const SampleTransition& t = samples[chosen[k]];
        const std::pair<std::size_t, std::size_t> key{sample_cell[k], t.action};
        auto it = node_of.find(key);
        std::size_t node;
        if (it == node_of.end()) {
            node = node_keys.size();
            node_of.emplace(key, node);
            node_keys.push_back(key);
            reward_sum.push_back(0.0);
            reward_count.push_back(0);
            succ_counts.emplace_back();
        } else {
            node = it->second;
        }
        reward_sum[node] += t.reward;
        reward_count[node] += 1;
        succ_counts[node][nearest_cell(sys, t.next_state)] += 1;
    }

    sys.cell_nodes.assign(sys.cell_states.size(), {});
    for (std::size_t n = 0; n < node_keys.size(); ++n) {
        SampleNode node;
        node.cell = node_keys[n].first;
        node.action = node_keys[n].second;
        node.reward = reward_sum[n] / static_cast<double>(reward_count[n]);
        double total = 0.0;
        for (const auto& [cell, count] : succ_counts[n]) total += static_cast<double>(count);
        for (const auto& [cell, count] : succ_counts[n]) {
            node.successors.states.push_back(cell);
            node.successors.probs.push_back(static_cast<double>(count) / total);
        }
        sys.cell_nodes[node.cell].push_back(sys.nodes.size());
        sys.nodes.push_back(std::move(node));
    }
    return sys;
}

std::size_t nearest_cell(const SampledSystem& sys, const std::vector<double>& state) {
    if (sys.cell_states.empty()) {
        throw std::invalid_argument("nearest_cell: empty system");
    }
    if (sys.cell_states[0].size() != state.size()) {
        throw std::invalid_argument("nearest_cell: state dimension " +
                                    std::to_string(state.size()) + " != cell dimension " +
                                    std::to_string(sys.cell_states[0].size()));
    }
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sys.cell_states.size(); ++c) {
        const double d = l2_distance2(sys.cell_states[c], state);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

namespace {

std::vector<std::vector<double>> state_metric_from(const SampledSystem& expert,
                                                   const SampledSystem& learner,
                                                   const std::vector<std::vector<double>>& dis) {
    std::vector<std::vector<double>> state_dis(expert.n_cells(),
                                               std::vector<double>(learner.n_cells(), 0.0));
    std::vector<std::vector<double>> block;
    for (std::size_t ce = 0; ce < expert.n_cells(); ++ce) {
        for (std::size_t cl = 0; cl < learner.n_cells(); ++cl) {
            const auto& rows = expert.cell_nodes[ce];
            const auto& cols = learner.cell_nodes[cl];
            block.assign(rows.size(), std::vector<double>(cols.size(), 0.0));
            for (std::size_t i = 0; i < rows.size(); ++i) {
                for (std::size_t j = 0; j < cols.size(); ++j) {
                    block[i][j] = dis[rows[i]][cols[j]];
                }
            }
            state_dis[ce][cl] = hausdorff_action_distance(block);
        }
    }
    return state_dis;
}

}  // namespace

BisimTable bisim_fixed_point(const SampledSystem& expert, const SampledSystem& learner,
                             const BisimConfig& cfg) {
    if (expert.nodes.empty() || learner.nodes.empty()) {
        throw std::invalid_argument("bisim_fixed_point: empty system");
    }
    if (cfg.eta_r < 0.0 || cfg.eta_kd < 0.0) {
        throw std::invalid_argument("bisim_fixed_point: negative metric weights");
    }
    const std::size_t ne = expert.nodes.size();
    const std::size_t nl = learner.nodes.size();

    BisimTable table;
    table.eta_r = cfg.eta_r;
    table.eta_kd = cfg.eta_kd;
    table.dis.assign(ne, std::vector<double>(nl, 0.0));
    for (std::size_t i = 0; i < ne; ++i) {
        for (std::size_t j = 0; j < nl; ++j) {
            table.dis[i][j] = cfg.eta_r * std::abs(expert.nodes[i].reward - learner.nodes[j].reward);
        }
    }

    std::vector<std::vector<double>> next_dis(ne, std::vector<double>(nl, 0.0));
    for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
        table.state_dis = state_metric_from(expert, learner, table.dis);
        double max_change = 0.0;
        for (std::size_t i = 0; i < ne; ++i) {
            const SampleNode& x = expert.nodes[i];
            for (std::size_t j = 0; j < nl; ++j) {
                const SampleNode& y = learner.nodes[j];
                std::vector<std::vector<double>> cost(
                    x.successors.states.size(),
                    std::vector<double>(y.successors.states.size(), 0.0));
                for (std::size_t s = 0; s < x.successors.states.size(); ++s) {
                    for (std::size_t t = 0; t < y.successors.states.size(); ++t) {
                        cost[s][t] = table.state_dis[x.successors.states[s]]
                                                    [y.successors.states[t]];
                    }
                }
                const double kd =
                    kantorovich_dual(x.successors.probs, y.successors.probs, cost);
                next_dis[i][j] =
                    cfg.eta_r * std::abs(x.reward - y.reward) + cfg.eta_kd * kd;
                max_change = std::max(max_change, std::abs(next_dis[i][j] - table.dis[i][j]));
            }
        }
        table.dis.swap(next_dis);
        if (!table.max_change_per_iter.empty() &&
            max_change > table.max_change_per_iter.back()) {
            table.diverged = true;
        }
        table.max_change_per_iter.push_back(max_change);
        table.iterations_run = iter + 1;
        if (cfg.tolerance > 0.0 && max_change <= cfg.tolerance) break;
    }
    table.state_dis = state_metric_from(expert, learner, table.dis);
    return table;
}

ExpertProfile build_expert_profile(const std::string& service_name, std::size_t service_type,
                                   const std::vector<SampleTransition>& recorded,
                                   const SchedNet& net, const ExpertProfileConfig& cfg) {
    if (recorded.empty()) {
        throw std::invalid_argument("build_expert_profile: no recorded transitions");
    }
    if (service_type >= net.services()) {
        throw std::invalid_argument("build_expert_profile: service index out of range");
    }
    ExpertProfile p;
    p.service_name = service_name;
    p.service_type = service_type;
    p.node_cap = cfg.node_cap;
    p.bisim = cfg.bisim;
    p.seed = cfg.seed;
    const auto chosen = subsample_indices(recorded.size(), cfg.sample_cap,
                                          derive_seed(cfg.seed, "profile-subsample"));
    p.samples.reserve(chosen.size());
    for (const std::size_t i : chosen) p.samples.push_back(recorded[i]);
    p.snapshot = net;
    p.system = build_sampled_system(p.samples, cfg.node_cap, cfg.seed);
    p.self_state_dis = bisim_fixed_point(p.system, p.system, cfg.bisim).state_dis;
    return p;
}

namespace {

// The expert's anchor at a given learner state: the recorded node of the
// nearest expert cell whose action the expert snapshot scores highest.
const SampleNode& expert_anchor(const ExpertProfile& e, const std::vector<double>& state) {
    const std::size_t cell = nearest_cell(e.system, state);
    const std::vector<double> q =
        e.snapshot.forward(e.system.cell_states[cell], e.service_type);
    const auto& nodes = e.system.cell_nodes[cell];
    std::size_t best = nodes[0];
    double best_q = -std::numeric_limits<double>::infinity();
    for (const std::size_t n : nodes) {
        const double qa = q[e.system.nodes[n].action];
        if (qa > best_q) {
            best_q = qa;
            best = n;
        }
    }
    return e.system.nodes[best];
}

// One-step behavioural distance between a live learner transition and an
// expert anchor node: reward gap plus the transported successor distance
// under the expert's converged self-metric (the learner successor enters the
// expert's cell space through its nearest cell).
double live_distance(const ExpertProfile& e, double learner_reward,
                     const std::vector<double>& learner_next, const SampleNode& anchor,
                     const BisimConfig& cfg) {
    const std::size_t next_cell = nearest_cell(e.system, learner_next);
    std::vector<std::vector<double>> cost(
        1, std::vector<double>(anchor.successors.states.size(), 0.0));
    for (std::size_t t = 0; t < anchor.successors.states.size(); ++t) {
        cost[0][t] = e.self_state_dis[next_cell][anchor.successors.states[t]];
    }
    const double kd = kantorovich_dual({1.0}, anchor.successors.probs, cost);
    return cfg.eta_r * std::abs(learner_reward - anchor.reward) + cfg.eta_kd * kd;
}

}  // namespace

double up_bound_single(const ExpertProfile& expert, const EdgeEnv& env, const SchedNet& learner,
                       const std::vector<double>& state, std::size_t service,
                       std::size_t action, const BisimConfig& cfg) {
    const auto actions = env.action_space();
    if (action >= actions.size()) {
        throw std::invalid_argument("up_bound_single: action index out of range");
    }
    const std::size_t greedy = learner.argmax_action(state, service);
    std::vector<double> next_greedy, next_action;
    const StepOutcome out_greedy = env.peek(actions[greedy], &next_greedy);
    const StepOutcome out_action = env.peek(actions[action], &next_action);
    const SampleNode& anchor = expert_anchor(expert, state);
    return live_distance(expert, out_greedy.reward, next_greedy, anchor, cfg) +
           live_distance(expert, out_action.reward, next_action, anchor, cfg);
}

double up_bound_weighted(const std::vector<ExpertProfile>& experts,
                         const std::vector<double>& mu, const EdgeEnv& env,
                         const SchedNet& learner, const std::vector<double>& state,
                         std::size_t service, std::size_t action, const BisimConfig& cfg) {
    if (experts.size() != mu.size()) {
        throw std::invalid_argument("up_bound_weighted: weight count != expert count");
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < experts.size(); ++j) {
        sum += mu[j] * up_bound_single(experts[j], env, learner, state, service, action, cfg);
    }
    return sum;
}

std::vector<double> up_bounds_all_actions(const std::vector<ExpertProfile>& experts,
                                          const std::vector<double>& mu, const EdgeEnv& env,
                                          const SchedNet& learner,
                                          const std::vector<double>& state, std::size_t service,
                                          const BisimConfig& cfg) {
    if (experts.size() != mu.size()) {
        throw std::invalid_argument("up_bounds_all_actions: weight count != expert count");
    }
    const auto actions = env.action_space();
    const std::size_t greedy = learner.argmax_action(state, service);

    std::vector<double> rewards(actions.size(), 0.0);
    std::vector<std::vector<double>> nexts(actions.size());
    for (std::size_t a = 0; a < actions.size(); ++a) {
        rewards[a] = env.peek(actions[a], &nexts[a]).reward;
    }

    std::vector<double> up(actions.size(), 0.0);
    for (std::size_t j = 0; j < experts.size(); ++j) {
        const ExpertProfile& e = experts[j];
        const SampleNode& anchor = expert_anchor(e, state);
        const double d_greedy = live_distance(e, rewards[greedy], nexts[greedy], anchor, cfg);
        for (std::size_t a = 0; a < actions.size(); ++a) {
            const double d_a = (a == greedy)
                                   ? d_greedy
                                   : live_distance(e, rewards[a], nexts[a], anchor, cfg);
            up[a] += mu[j] * (d_greedy + d_a);
        }
    }
    return up;
}

std::vector<double> action_probabilities(const std::vector<double>& up_values) {
    if (up_values.empty()) {
        throw std::invalid_argument("action_probabilities: empty input");
    }
    std::vector<double> p(up_values.size(), 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < up_values.size(); ++i) {
        p[i] = 1.0 / (1.0 + std::exp(up_values[i]));  // sigmoid(-up)
        sum += p[i];
    }
    if (!(sum > 0.0) || !std::isfinite(sum)) {
        const double u = 1.0 / static_cast<double>(p.size());
        for (double& v : p) v = u;
        return p;
    }
    for (double& v : p) v /= sum;
    return p;
}

std::vector<double> estimate_expert_weights(const std::vector<ExpertProfile>& experts,
                                            const std::vector<SampleTransition>& learner_samples,
                                            const BisimConfig& cfg, std::size_t node_cap,
                                            std::uint64_t seed) {
    if (experts.empty()) {
        throw std::invalid_argument("estimate_expert_weights: no experts");
    }
    std::vector<double> mu(experts.size(), 1.0 / static_cast<double>(experts.size()));
    if (learner_samples.empty()) return mu;

    const SampledSystem learner_sys =
        build_sampled_system(learner_samples, node_cap, derive_seed(seed, "mu-learner"));
    double total = 0.0;
    for (std::size_t j = 0; j < experts.size(); ++j) {
        const BisimTable table = bisim_fixed_point(experts[j].system, learner_sys, cfg);
        double mean = 0.0;
        std::size_t count = 0;
        for (const auto& row : table.dis) {
            for (const double v : row) {
                mean += v;
                ++count;
            }
        }
        mean /= static_cast<double>(count);
        mu[j] = 1.0 / (1e-3 + mean);
        total += mu[j];
    }
    for (double& v : mu) v /= total;
    return mu;
}

namespace {

struct GuidanceState {
    std::vector<double> mu;
    std::vector<SampleTransition> window;
    std::vector<WeightSnapshot> history;
    std::size_t last_refresh_episode = 0;
    Rng rng;

    explicit GuidanceState(std::size_t experts, std::uint64_t seed)
        : mu(experts, experts > 0 ? 1.0 / static_cast<double>(experts) : 0.0),
          rng(derive_seed(seed, "apotl-selector")) {}
};

}  // namespace

ApotlResult train_apotl(SchedNet& net, const std::vector<ExpertProfile>& experts, EdgeEnv& env,
                        const EpisodeProvider& episodes, const ApotlConfig& cfg) {
    const bool guided = cfg.beta_start > 0.0 || cfg.beta_end > 0.0;
    if (guided && experts.empty()) {
        throw std::invalid_argument("train_apotl: guidance enabled but no experts given");
    }

    auto st = std::make_shared<GuidanceState>(experts.size(), cfg.seed);
    const auto* experts_ptr = &experts;
    const double beta_span =
        std::max(1.0, cfg.beta_anneal_frac * static_cast<double>(cfg.loop.episode_cap));
    const double eps_span =
        std::max(1.0, cfg.epsilon_anneal_frac * static_cast<double>(cfg.loop.episode_cap));

    const ActionSelector select = [st, experts_ptr, cfg, beta_span, eps_span](
                                      EdgeEnv& e, SchedNet& n, const std::vector<double>& state,
                                      std::size_t service, std::size_t episode) -> std::size_t {
        if (!experts_ptr->empty() && cfg.weight_update_every > 0 && episode > 0 &&
            episode % cfg.weight_update_every == 0 &&
            st->last_refresh_episode != episode && !st->window.empty()) {
            st->mu = estimate_expert_weights(*experts_ptr, st->window, cfg.bisim, cfg.node_cap,
                                             derive_seed(cfg.seed, "mu-estimate"));
            st->history.push_back({episode, st->mu});
            st->last_refresh_episode = episode;
        }

        const double bt = std::min(1.0, static_cast<double>(episode) / beta_span);
        const double beta = cfg.beta_start + (cfg.beta_end - cfg.beta_start) * bt;

        std::size_t chosen;
        if (!experts_ptr->empty() && st->rng.uniform01() < beta) {
            const std::vector<double> up =
                up_bounds_all_actions(*experts_ptr, st->mu, e, n, state, service, cfg.bisim);
            const std::vector<double> p = action_probabilities(up);
            chosen = static_cast<std::size_t>(
                std::max_element(p.begin(), p.end()) - p.begin());
        } else {
            const double et = std::min(1.0, static_cast<double>(episode) / eps_span);
            const double eps = cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * et;
            if (st->rng.uniform01() < eps) {
                chosen = st->rng.index(e.action_count());
            } else {
                chosen = n.argmax_action(state, service);
            }
        }

        if (!experts_ptr->empty() && cfg.learner_sample_cap > 0) {
            std::vector<double> next_state;
            const StepOutcome out = e.peek(e.action_space()[chosen], &next_state);
            st->window.push_back({state, chosen, out.reward, std::move(next_state)});
            if (st->window.size() > cfg.learner_sample_cap) {
                st->window.erase(st->window.begin());
            }
        }
        return chosen;
    };

    ApotlResult result;
    result.trace = run_ddqn_loop(net, env, episodes, select, cfg.loop);
    result.final_weights = st->mu;
    result.weight_history = st->history;
    return result;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const SampleTransition& s) {
    return nlohmann::json{{"state", s.state},
                          {"action", s.action},
                          {"reward", s.reward},
                          {"next_state", s.next_state}};
}

SampleTransition sample_transition_from_json(const nlohmann::json& j) {
    SampleTransition s;
    s.state = j.at("state").get<std::vector<double>>();
    s.action = j.at("action").get<std::size_t>();
    s.reward = j.at("reward").get<double>();
    s.next_state = j.at("next_state").get<std::vector<double>>();
    return s;
}

nlohmann::json to_json(const BisimTable& t) {
    return nlohmann::json{{"dis", t.dis},
                          {"state_dis", t.state_dis},
                          {"max_change_per_iter", t.max_change_per_iter},
                          {"iterations_run", t.iterations_run},
                          {"diverged", t.diverged},
                          {"eta_r", t.eta_r},
                          {"eta_kd", t.eta_kd}};
}

nlohmann::json to_json(const ExpertProfile& p) {
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : p.samples) samples.push_back(to_json(s));
    return nlohmann::json{{"service_name", p.service_name},
                          {"service_type", p.service_type},
                          {"samples", samples},
                          {"snapshot", p.snapshot.to_json()},
                          {"node_cap", p.node_cap},
                          {"bisim",
                           {{"eta_r", p.bisim.eta_r},
                            {"eta_kd", p.bisim.eta_kd},
                            {"iterations", p.bisim.iterations},
                            {"tolerance", p.bisim.tolerance}}},
                          {"seed", p.seed}};
}

ExpertProfile expert_profile_from_json(const nlohmann::json& j) {
    ExpertProfileConfig cfg;
    cfg.node_cap = j.at("node_cap").get<std::size_t>();
    cfg.bisim.eta_r = j.at("bisim").at("eta_r").get<double>();
    cfg.bisim.eta_kd = j.at("bisim").at("eta_kd").get<double>();
    cfg.bisim.iterations = j.at("bisim").at("iterations").get<std::size_t>();
    cfg.bisim.tolerance = j.at("bisim").at("tolerance").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();

    std::vector<SampleTransition> samples;
    for (const auto& js : j.at("samples")) samples.push_back(sample_transition_from_json(js));
    cfg.sample_cap = samples.size();

    const SchedNet snapshot = SchedNet::from_json(j.at("snapshot"));
    return build_expert_profile(j.at("service_name").get<std::string>(),
                                j.at("service_type").get<std::size_t>(), samples, snapshot, cfg);
}

nlohmann::json to_json(const ApotlResult& r) {
    nlohmann::json history = nlohmann::json::array();
    for (const auto& w : r.weight_history) {
        history.push_back(nlohmann::json{{"episode", w.episode}, {"mu", w.mu}});
    }
    return nlohmann::json{{"trace", to_json(r.trace)},
                          {"final_weights", r.final_weights},
                          {"weight_history", history}};
}

}  // namespace igaa
