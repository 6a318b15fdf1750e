#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "igaa/nsi.hpp"

namespace igaa {

struct NodeSpec {
    std::string name;
    std::vector<double> capacity;  // per resource, catalog order
    double distance = 0.0;         // normalized [0,1] distance to the request origin
    bool secure = false;
};

struct NetworkSpec {
    std::vector<NodeSpec> nodes;
    std::uint64_t resource_catalog_version = 0;

    std::size_t size() const { return nodes.size(); }
    void validate(const ResourceCatalog& catalog) const;
};

// One service request: declarative intent plus the demand vector it was
// mapped to, and the fine-grained targets execution is checked against.
struct Request {
    std::size_t service_type = 0;
    IntentVector intent;
    ResourceVector requirement;
    double deadline = 1.0;           // seconds
    double security_flag = 0.0;      // 0 or 1
    double throughput_target = 0.0;  // requests/s
    double accuracy_target = 0.0;    // [0,1]
    int duration_steps = 1;          // how long the allocation is held
};

struct Action {
    std::size_t node = 0;
    double multiplier = 1.0;
};

struct RewardWeights {
    double sat = 1.0;
    double lat = 0.5;
    double cost = 0.2;
};

struct EnvConfig {
    double kappa = 0.5;  // distance contribution to latency (s per unit distance)
    RewardWeights weights;
    std::vector<double> multipliers = {1.0, 1.25, 1.5};
    double infeasible_reward = -1.0;
    // Reward-shaping fault injection: when nonzero, actions landing on nodes
    // with no offload capacity receive this bonus, steering load away from
    // offload hardware. Used to exercise the diagnostic loop.
    double no_offload_node_bonus = 0.0;
};

// Fine-grained outcome metrics, in the fixed order used throughout:
// 0 latency (measured EL vs deadline, <=), 1 security (node clearance vs
// request flag), 2 throughput (achieved vs target, >=), 3 accuracy
// (achieved vs target, >=).
inline const std::vector<std::string>& fine_grained_metric_names() {
    static const std::vector<std::string> names = {"latency", "security", "throughput",
                                                   "accuracy"};
    return names;
}

struct StepOutcome {
    bool feasible = false;
    bool success = false;  // feasible and latency within deadline
    double latency = std::numeric_limits<double>::infinity();
    double reward = 0.0;
    std::vector<bool> met;       // per fine-grained metric, fixed order above
    std::vector<double> measured;  // measured value per metric, same order
    int satisfied_count = 0;     // fine-grained targets met
    int total_count = 0;
    bool fully_satisfied = false;  // feasible and every fine-grained target met
    double cpu_offloaded = 0.0;    // compute demand absorbed by offload units
    std::vector<double> allocation;  // per-resource amounts actually reserved
};

nlohmann::json to_json(const StepOutcome& o);
nlohmann::json to_json(const Action& a);
nlohmann::json to_json(const NetworkSpec& n);
NetworkSpec network_from_json(const nlohmann::json& j);

// Deterministic edge scheduling environment. An episode is a fixed sequence
// of requests; each step places the current request on one node at one
// allocation multiplier. Reservations persist for the request's duration and
// are released at the start of later steps, so placement decisions interact
// through residual capacity.
class EdgeEnv {
public:
    EdgeEnv(NetworkSpec net, ServiceCatalog services, ResourceCatalog resources,
            EnvConfig config);

    void reset(std::vector<Request> requests);

    bool done() const { return step_ >= requests_.size(); }
    std::size_t step_index() const { return step_; }
    std::size_t episode_length() const { return requests_.size(); }
    const Request& current_request() const;

    // Node-major action enumeration: all multipliers of node 0, then node 1, ...
    std::vector<Action> action_space() const;
    std::size_t action_count() const;

    // State vector: for each node [avail_r / cap_r for each resource, distance],
    // then the current request's demand normalized by catalog upper bounds.
    std::vector<double> encode_state() const;
    // Same layout, but against an arbitrary requirement instead of the
    // current request (used for hypothetical probes).
    std::vector<double> encode_state_for(const Request& req) const;
    std::size_t state_dim() const;

    StepOutcome step(const Action& a);

    // Hypothetical outcome of an action against the current availability,
    // without mutating anything. `req` may be a synthesized requirement.
    StepOutcome evaluate(const Request& req, const Action& a) const;

    // Hypothetical step: outcome plus the state encoding the environment
    // would present next (used for one-step distance probing).
    StepOutcome peek(const Action& a, std::vector<double>* successor_state) const;

    const NetworkSpec& network() const { return net_; }
    const ServiceCatalog& services() const { return services_; }
    const ResourceCatalog& resources() const { return resources_; }
    const EnvConfig& config() const { return config_; }

    // avail[node][resource] right now.
    const std::vector<std::vector<double>>& available() const { return avail_; }

    // Largest |capacity - (available + reserved)| over all node/resource
    // pairs; exactly 0 when bookkeeping is conserving.
    double conservation_error() const;

    // Mean over steps of (cap - avail)/cap per node/resource, sampled after
    // each allocation. util[resource][node]; nodes without the resource hold -1.
    std::vector<std::vector<double>> mean_utilization() const;
    double episode_cpu_offloaded() const { return cpu_offloaded_total_; }

private:
    struct Reservation {
        std::size_t node;
        std::vector<double> amount;
        std::size_t release_step;
    };

    void release_expired();
    StepOutcome evaluate_at(const Request& req, const Action& a,
                            const std::vector<std::vector<double>>& avail) const;

    NetworkSpec net_;
    ServiceCatalog services_;
    ResourceCatalog resources_;
    EnvConfig config_;
    std::size_t primary_compute_ = 0;  // first Compute entry in the catalog

    std::vector<Request> requests_;
    std::size_t step_ = 0;
    std::vector<std::vector<double>> avail_;  // [node][resource]
    std::vector<Reservation> reservations_;

    std::vector<std::vector<double>> util_sum_;  // [node][resource]
    std::size_t util_samples_ = 0;
    double cpu_offloaded_total_ = 0.0;
};

}  // namespace igaa
