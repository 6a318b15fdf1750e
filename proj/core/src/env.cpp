#include "igaa/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace igaa {

void NetworkSpec::validate(const ResourceCatalog& catalog) const {
    if (nodes.empty()) throw std::invalid_argument("network has no nodes");
    if (resource_catalog_version != catalog.version)
        throw std::invalid_argument("network resource catalog version mismatch");
    for (const auto& n : nodes) {
        if (n.capacity.size() != catalog.size())
            throw std::invalid_argument("node " + n.name + " capacity vector size mismatch");
        for (double c : n.capacity)
            if (c < 0.0 || !std::isfinite(c))
                throw std::invalid_argument("node " + n.name + " has bad capacity");
        if (n.distance < 0.0 || n.distance > 1.0)
            throw std::invalid_argument("node " + n.name + " distance outside [0,1]");
    }
}

EdgeEnv::EdgeEnv(NetworkSpec net, ServiceCatalog services, ResourceCatalog resources,
                 EnvConfig config)
    : net_(std::move(net)),
      services_(std::move(services)),
      resources_(std::move(resources)),
      config_(std::move(config)) {
    resources_.validate();
    services_.validate();
    net_.validate(resources_);
    if (config_.multipliers.empty())
        throw std::invalid_argument("environment needs at least one allocation multiplier");
    for (double m : config_.multipliers)
        if (m < 1.0) throw std::invalid_argument("allocation multipliers must be >= 1");
    primary_compute_ = resources_.size();
    for (std::size_t r = 0; r < resources_.size(); ++r)
        if (resources_.entries[r].role == ResourceRole::Compute) {
            primary_compute_ = r;
            break;
        }
    reset({});
}

void EdgeEnv::reset(std::vector<Request> requests) {
    for (const auto& req : requests) {
        if (req.service_type >= services_.size())
            throw std::invalid_argument("request service type out of range");
        if (req.requirement.dim() != resources_.size())
            throw std::invalid_argument("request requirement dimension mismatch");
        if (req.duration_steps < 1)
            throw std::invalid_argument("request duration must be at least one step");
    }
    requests_ = std::move(requests);
    step_ = 0;
    reservations_.clear();
    avail_.assign(net_.size(), {});
    util_sum_.assign(net_.size(), std::vector<double>(resources_.size(), 0.0));
    util_samples_ = 0;
    cpu_offloaded_total_ = 0.0;
    for (std::size_t i = 0; i < net_.size(); ++i) avail_[i] = net_.nodes[i].capacity;
}

const Request& EdgeEnv::current_request() const {
    if (done()) throw std::logic_error("episode is complete; no current request");
    return requests_[step_];
}

std::vector<Action> EdgeEnv::action_space() const {
    std::vector<Action> out;
    out.reserve(net_.size() * config_.multipliers.size());
    for (std::size_t i = 0; i < net_.size(); ++i)
        for (double m : config_.multipliers) out.push_back({i, m});
    return out;
}

std::size_t EdgeEnv::action_count() const { return net_.size() * config_.multipliers.size(); }

std::size_t EdgeEnv::state_dim() const {
    return net_.size() * (resources_.size() + 1) + resources_.size();
}

std::vector<double> EdgeEnv::encode_state() const {
    if (done()) {
        Request empty;
        empty.requirement.values.assign(resources_.size(), 0.0);
        return encode_state_for(empty);
    }
    return encode_state_for(requests_[step_]);
}

std::vector<double> EdgeEnv::encode_state_for(const Request& req) const {
    if (req.requirement.dim() != resources_.size())
        throw std::invalid_argument("requirement dimension mismatch in state encoding");
    std::vector<double> s;
    s.reserve(state_dim());
    for (std::size_t i = 0; i < net_.size(); ++i) {
        for (std::size_t r = 0; r < resources_.size(); ++r) {
            const double cap = net_.nodes[i].capacity[r];
            s.push_back(cap > 0.0 ? avail_[i][r] / cap : 0.0);
        }
        s.push_back(net_.nodes[i].distance);
    }
    for (std::size_t r = 0; r < resources_.size(); ++r)
        s.push_back(req.requirement.values[r] / resources_.entries[r].upper);
    return s;
}

StepOutcome EdgeEnv::evaluate_at(const Request& req, const Action& a,
                                 const std::vector<std::vector<double>>& avail) const {
    if (a.node >= net_.size()) throw std::invalid_argument("action node out of range");
    bool known_mult = false;
    for (double m : config_.multipliers)
        if (m == a.multiplier) known_mult = true;
    if (!known_mult) throw std::invalid_argument("action multiplier not in configured set");

    const std::size_t m = resources_.size();
    const ServiceEntry& svc = services_.entries[req.service_type];
    StepOutcome out;
    out.total_count = 4;
    out.met.assign(4, false);
    out.measured.assign(4, 0.0);
    out.allocation.assign(m, 0.0);

    // Raw allocation: the demand scaled by the chosen multiplier.  Offload
    // units are opportunistic — a node contributes whatever it has free and a
    // node without the resource simply contributes nothing — so their
    // allocation is clamped to availability instead of gating feasibility.
    std::vector<double> alloc(m, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
        alloc[r] = a.multiplier * req.requirement.values[r];
        if (resources_.entries[r].role == ResourceRole::Offload)
            alloc[r] = std::min(alloc[r], std::max(0.0, avail[a.node][r]));
    }

    // Offload units absorb the data-parallel share of the compute demand, so
    // the compute reservation shrinks by what they take on.
    double offloadable = 0.0;
    if (primary_compute_ < m)
        offloadable = svc.data_fraction * req.requirement.values[primary_compute_];
    double offloaded = 0.0;
    for (std::size_t r = 0; r < m && offloadable > 0.0; ++r) {
        if (resources_.entries[r].role != ResourceRole::Offload) continue;
        const double take = std::min(alloc[r], offloadable);
        offloaded += take;
        offloadable -= take;
    }

    std::vector<double> reserve = alloc;
    if (primary_compute_ < m)
        reserve[primary_compute_] = std::max(0.0, reserve[primary_compute_] - offloaded);

    bool feasible = true;
    for (std::size_t r = 0; r < m; ++r)
        if (reserve[r] > avail[a.node][r] + 1e-12) {
            feasible = false;
            break;
        }

    if (!feasible) {
        out.feasible = false;
        out.reward = config_.infeasible_reward;
        return out;
    }

    out.feasible = true;
    out.allocation = reserve;
    out.cpu_offloaded = offloaded;
    out.latency = svc.base_time / a.multiplier + config_.kappa * net_.nodes[a.node].distance;
    out.success = out.latency <= req.deadline;

    out.measured[0] = out.latency;
    out.measured[1] = net_.nodes[a.node].secure ? 1.0 : 0.0;
    out.measured[2] = svc.base_throughput * a.multiplier;
    out.measured[3] = svc.base_accuracy;
    out.met[0] = out.latency <= req.deadline;
    out.met[1] = req.security_flag == 0.0 || net_.nodes[a.node].secure;
    out.met[2] = out.measured[2] >= req.throughput_target;
    out.met[3] = out.measured[3] >= req.accuracy_target;
    int satisfied = 0;
    for (bool b : out.met)
        if (b) ++satisfied;
    out.satisfied_count = satisfied;
    out.fully_satisfied = satisfied == out.total_count;

    double cost = 0.0;
    std::size_t cost_terms = 0;
    for (std::size_t r = 0; r < m; ++r) {
        const double cap = net_.nodes[a.node].capacity[r];
        if (cap > 0.0) {
            cost += reserve[r] / cap;
            ++cost_terms;
        }
    }
    if (cost_terms > 0) cost /= static_cast<double>(cost_terms);

    out.reward = config_.weights.sat * (static_cast<double>(satisfied) / out.total_count) -
                 config_.weights.lat * std::min(out.latency / req.deadline, 2.0) -
                 config_.weights.cost * cost;

    if (config_.no_offload_node_bonus != 0.0) {
        bool node_has_offload = false;
        for (std::size_t r = 0; r < m; ++r)
            if (resources_.entries[r].role == ResourceRole::Offload &&
                net_.nodes[a.node].capacity[r] > 0.0)
                node_has_offload = true;
        if (!node_has_offload) out.reward += config_.no_offload_node_bonus;
    }
    return out;
}

StepOutcome EdgeEnv::evaluate(const Request& req, const Action& a) const {
    return evaluate_at(req, a, avail_);
}

void EdgeEnv::release_expired() {
    auto it = reservations_.begin();
    while (it != reservations_.end()) {
        if (it->release_step <= step_) {
            for (std::size_t r = 0; r < it->amount.size(); ++r)
                avail_[it->node][r] += it->amount[r];
            it = reservations_.erase(it);
        } else {
            ++it;
        }
    }
}

StepOutcome EdgeEnv::step(const Action& a) {
    if (done()) throw std::logic_error("episode is complete");
    release_expired();
    const Request& req = requests_[step_];
    StepOutcome out = evaluate_at(req, a, avail_);
    if (out.feasible) {
        bool any = false;
        for (double v : out.allocation)
            if (v > 0.0) any = true;
        if (any) {
            for (std::size_t r = 0; r < out.allocation.size(); ++r)
                avail_[a.node][r] -= out.allocation[r];
            reservations_.push_back(
                {a.node, out.allocation,
                 step_ + static_cast<std::size_t>(req.duration_steps)});
        }
        cpu_offloaded_total_ += out.cpu_offloaded;
    }
    for (std::size_t i = 0; i < net_.size(); ++i)
        for (std::size_t r = 0; r < resources_.size(); ++r) {
            const double cap = net_.nodes[i].capacity[r];
            if (cap > 0.0) util_sum_[i][r] += (cap - avail_[i][r]) / cap;
        }
    ++util_samples_;
    ++step_;
    return out;
}

StepOutcome EdgeEnv::peek(const Action& a, std::vector<double>* successor_state) const {
    if (done()) throw std::logic_error("episode is complete");
    StepOutcome out = evaluate_at(requests_[step_], a, avail_);
    if (successor_state) {
        // Build the post-step availability without touching live state.
        std::vector<std::vector<double>> avail = avail_;
        for (const auto& res : reservations_)
            if (res.release_step <= step_)
                for (std::size_t r = 0; r < res.amount.size(); ++r)
                    avail[res.node][r] += res.amount[r];
        if (out.feasible)
            for (std::size_t r = 0; r < out.allocation.size(); ++r)
                avail[a.node][r] -= out.allocation[r];
        std::vector<double> s;
        s.reserve(state_dim());
        for (std::size_t i = 0; i < net_.size(); ++i) {
            for (std::size_t r = 0; r < resources_.size(); ++r) {
                const double cap = net_.nodes[i].capacity[r];
                s.push_back(cap > 0.0 ? avail[i][r] / cap : 0.0);
            }
            s.push_back(net_.nodes[i].distance);
        }
        if (step_ + 1 < requests_.size()) {
            const Request& next = requests_[step_ + 1];
            for (std::size_t r = 0; r < resources_.size(); ++r)
                s.push_back(next.requirement.values[r] / resources_.entries[r].upper);
        } else {
            for (std::size_t r = 0; r < resources_.size(); ++r) s.push_back(0.0);
        }
        *successor_state = std::move(s);
    }
    return out;
}

double EdgeEnv::conservation_error() const {
    std::vector<std::vector<double>> reserved(net_.size(),
                                              std::vector<double>(resources_.size(), 0.0));
    for (const auto& res : reservations_)
        for (std::size_t r = 0; r < res.amount.size(); ++r) reserved[res.node][r] += res.amount[r];
    double worst = 0.0;
    for (std::size_t i = 0; i < net_.size(); ++i)
        for (std::size_t r = 0; r < resources_.size(); ++r) {
            const double err =
                std::abs(net_.nodes[i].capacity[r] - (avail_[i][r] + reserved[i][r]));
            worst = std::max(worst, err);
        }
    return worst;
}

std::vector<std::vector<double>> EdgeEnv::mean_utilization() const {
    std::vector<std::vector<double>> util(resources_.size(),
                                          std::vector<double>(net_.size(), -1.0));
    if (util_samples_ == 0) return util;
    for (std::size_t r = 0; r < resources_.size(); ++r)
        for (std::size_t i = 0; i < net_.size(); ++i)
            if (net_.nodes[i].capacity[r] > 0.0)
                util[r][i] = util_sum_[i][r] / static_cast<double>(util_samples_);
    return util;
}

nlohmann::json to_json(const StepOutcome& o) {
    std::vector<int> met;
    for (bool b : o.met) met.push_back(b ? 1 : 0);
    return {{"feasible", o.feasible},
            {"success", o.success},
            {"latency", std::isfinite(o.latency) ? o.latency : -1.0},
            {"reward", o.reward},
            {"met", met},
            {"measured", o.measured},
            {"satisfied_count", o.satisfied_count},
            {"total_count", o.total_count},
            {"fully_satisfied", o.fully_satisfied},
            {"cpu_offloaded", o.cpu_offloaded},
            {"allocation", o.allocation}};
}

nlohmann::json to_json(const Action& a) {
    return {{"node", a.node}, {"multiplier", a.multiplier}};
}

nlohmann::json to_json(const NetworkSpec& n) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& node : n.nodes)
        nodes.push_back({{"name", node.name},
                         {"capacity", node.capacity},
                         {"distance", node.distance},
                         {"secure", node.secure}});
    return {{"resource_catalog_version", n.resource_catalog_version}, {"nodes", nodes}};
}

NetworkSpec network_from_json(const nlohmann::json& j) {
    NetworkSpec n;
    n.resource_catalog_version = j.at("resource_catalog_version").get<std::uint64_t>();
    for (const auto& e : j.at("nodes")) {
        NodeSpec node;
        node.name = e.at("name").get<std::string>();
        node.capacity = e.at("capacity").get<std::vector<double>>();
        node.distance = e.at("distance").get<double>();
        node.secure = e.value("secure", false);
        n.nodes.push_back(std::move(node));
    }
    return n;
}

}  // namespace igaa
