#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "igaa/env.hpp"
#include "igaa/metrics.hpp"
#include "igaa/nsi.hpp"

namespace igaa {

// A complete, self-contained description of one training scenario: catalogs,
// demand-mapping tensor, network, environment parameters, and the per-service
// intent templates requests are synthesized from (the templates live in the
// service catalog). Specs are immutable once emitted by the generator.
struct ScenarioSpec {
    std::string name;          // unique per emission, e.g. "step-3" / "step-3-regen-1"
    std::size_t step = 1;      // curriculum position; repeats on regeneration
    std::string tag;           // grouping tag shared by regenerated variants ("step-3")
    std::string source = "builtin";  // "builtin" or "external"
    std::string delta;         // "fresh" | "resource" | "service" | "composite"
    std::string parent;        // name of the spec this one extends ("" for fresh)
    std::vector<std::string> new_resources;  // resources introduced by this spec
    std::vector<std::string> new_services;   // services introduced by this spec

    std::vector<IntentDim> intent_registry;
    ResourceCatalog resources;
    ServiceCatalog services;
    NsiMatrix matrix;
    NetworkSpec network;
    EnvConfig env;

    std::size_t requests_per_episode = 12;
    int duration_min = 1;
    int duration_max = 3;
    double replay_fraction = 0.5;       // share of synthetic replay when mixing
    std::uint64_t dataset_seed = 0;     // base seed for request synthesis

    std::vector<std::string> generation_trace;  // explicit record of the build steps
};

struct ScenarioValidation {
    std::vector<std::string> violations;
    bool clean() const { return violations.empty(); }
};

// Mutable state threaded through successive generator calls: what has been
// emitted, which correction directives are waiting, and which directive keys
// have already been consumed (a directive may be applied to a given parent
// spec exactly once).
struct GenerationContext {
    std::uint64_t seed = 1;
    std::size_t next_step = 1;
    std::size_t max_step = 6;
    std::vector<ScenarioSpec> history;
    std::vector<CorrectionDirective> pending;
    std::set<std::string> consumed_keys;
    std::deque<ScenarioSpec> queued;  // decomposition remainders, emitted first
    std::size_t regen_count = 0;
    std::vector<std::string> events;

    // Registers a directive against the most recently emitted spec. Returns
    // false (and records an event) when the identical directive was already
    // queued against that spec.
    bool queue_directive(const CorrectionDirective& d);
    std::string directive_key(const CorrectionDirective& d) const;
};

// Number of steps in the builtin curriculum.
std::size_t curriculum_length();

// Emits the next scenario: queued decomposition parts first, then either a
// regenerated variant of the last step (when a regenerate directive is
// pending) or the next curriculum step, with all pending directives applied.
// Returns nullopt when the curriculum is exhausted and nothing is pending.
// Deterministic given (context, seed). Throws std::runtime_error if a spec it
// is about to emit fails validation.
std::optional<ScenarioSpec> next_scenario_builtin(GenerationContext& ctx);

// Seed-deterministic request synthesis from the spec's per-service templates:
// service drawn uniformly, each intent dimension uniform on the service's
// template range (flag dimensions are Bernoulli with p = range midpoint),
// demand mapped through the spec's tensor, targets read off the intent.
std::vector<Request> synthesize_dataset(const ScenarioSpec& spec, std::size_t size,
                                        std::uint64_t seed);

// Static checks (catalog/matrix/network/parameter consistency) plus a
// fixed-seed probe: every probe request and every service's worst-case
// template corner must be schedulable on at least one node of an empty
// network.
ScenarioValidation validate_scenario(const ScenarioSpec& spec);

// Splits a composite spec (one introducing both resources and services) into
// a resource-only part followed by a service-only part. Throws
// std::invalid_argument when the spec is not composite.
std::pair<ScenarioSpec, ScenarioSpec> decompose_scenario(const ScenarioSpec& spec);

struct ExternalEndpointConfig {
    std::string url;                                     // http://host[:port][/path]
    std::string credential_env = "IGAA_GENERATOR_TOKEN";  // bearer token variable
    double timeout_seconds = 60.0;
    int retries = 2;  // attempts after the first, before builtin fallback
};

struct GenerationOutcome {
    ScenarioSpec spec;
    bool fallback = false;              // true when the builtin produced the spec
    std::vector<std::string> events;    // transport/validation/fallback records
};

// Documented JSON body sent to the external generator: current catalogs and
// tensor, a history digest, pending directives, seed and next step.
nlohmann::json external_request_body(const GenerationContext& ctx);

// Asks the external completion endpoint for the next scenario. Response must
// be a full ScenarioSpec JSON and pass validate_scenario; after the
// configured retries the builtin generator supplies the spec and the fallback
// is recorded. Throws std::runtime_error only when the fallback itself has
// nothing left to emit.
GenerationOutcome external_generate(GenerationContext& ctx,
                                    const ExternalEndpointConfig& endpoint);

nlohmann::json to_json(const IntentDim& d);
IntentDim intent_dim_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EnvConfig& c);
EnvConfig env_config_from_json(const nlohmann::json& j);
nlohmann::json request_to_json(const Request& r);
Request request_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScenarioSpec& s);
ScenarioSpec scenario_from_json(const nlohmann::json& j);

}  // namespace igaa
