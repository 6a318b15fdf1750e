#include "igaa/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <sstream>
#include <stdexcept>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "igaa/rng.hpp"

namespace igaa {
namespace {

using nlohmann::json;

constexpr std::uint64_t kProbeSeed = 0xF1DE17;
constexpr std::size_t kProbeRequests = 32;

// ---------------------------------------------------------------------------
// Builtin curriculum tables. All coefficients are declared defaults; demand
// is monotone in every intent dimension (coefficients are non-negative).
// ---------------------------------------------------------------------------

std::vector<IntentDim> builtin_registry() {
    return {
        {"service_code", 0.0, 5.0, false}, {"latency_target", 0.2, 2.0, false},
        {"security_flag", 0.0, 1.0, true}, {"throughput_target", 5.0, 40.0, false},
        {"accuracy_target", 0.8, 0.99, false}, {"priority", 0.0, 1.0, false},
    };
}

struct NodePlan {
    std::string name;
    std::map<std::string, double> capacity;  // by resource name, absent = 0
    double distance = 0.0;
    bool secure = false;
};

const std::vector<NodePlan>& node_plans() {
    static const std::vector<NodePlan> plans = {
        {"node0", {{"cpu", 8.0}, {"storage", 8.0}, {"gpu", 0.0}, {"dpu", 0.0}}, 0.2, false},
        {"node1", {{"cpu", 6.0}, {"storage", 6.0}, {"gpu", 4.0}, {"dpu", 1.5}}, 0.3, true},
        {"node2", {{"cpu", 5.0}, {"storage", 10.0}, {"gpu", 2.0}, {"dpu", 2.0}}, 0.15, false},
    };
    return plans;
}

ResourceEntry resource_plan(const std::string& name) {
    // Upper bounds are demand ceilings (what a mapping may emit per request),
    // not node capacities; keeping them close to the real demand range keeps
    // the normalized state well conditioned.
    if (name == "cpu") return {"cpu", "cores", 0.1, 4.0, 0, ResourceRole::Compute};
    if (name == "storage") return {"storage", "GB", 0.1, 4.0, -1, ResourceRole::Storage};
    if (name == "gpu") return {"gpu", "units", 0.05, 1.0, -1, ResourceRole::Compute};
    if (name == "dpu") return {"dpu", "units", 0.05, 2.0, 0, ResourceRole::Offload};
    throw std::invalid_argument("unknown resource plan: " + name);
}

std::vector<FineGrainedIntentDef> standard_fine_grained() {
    return {{"latency", "<="}, {"security", ">="}, {"throughput", ">="}, {"accuracy", ">="}};
}

ServiceEntry service_plan(const std::string& name, double code) {
    ServiceEntry e;
    e.name = name;
    e.fine_grained = standard_fine_grained();
    if (name == "real-time computing") {
        e.template_lo = {code, 0.5, 0.0, 12.0, 0.85, 0.2};
        e.template_hi = {code, 1.0, 0.6, 25.0, 0.96, 0.9};
        e.base_time = 0.5;
        e.base_throughput = 20.0;
        e.base_accuracy = 0.97;
        e.data_fraction = 0.4;
    } else if (name == "VR") {
        e.template_lo = {code, 0.9, 0.0, 10.0, 0.82, 0.2};
        e.template_hi = {code, 1.6, 0.3, 22.0, 0.91, 0.9};
        e.base_time = 0.8;
        e.base_throughput = 15.0;
        e.base_accuracy = 0.92;
        e.data_fraction = 0.2;
    } else if (name == "IoV") {
        e.template_lo = {code, 0.45, 0.0, 15.0, 0.85, 0.2};
        e.template_hi = {code, 1.0, 0.5, 37.0, 0.94, 0.9};
        e.base_time = 0.45;
        e.base_throughput = 25.0;
        e.base_accuracy = 0.95;
        e.data_fraction = 0.5;
    } else if (name == "image detection") {
        e.template_lo = {code, 1.0, 0.0, 8.0, 0.8, 0.2};
        e.template_hi = {code, 1.8, 0.3, 18.0, 0.89, 0.9};
        e.base_time = 0.9;
        e.base_throughput = 12.0;
        e.base_accuracy = 0.90;
        e.data_fraction = 0.3;
    } else {
        throw std::invalid_argument("unknown service plan: " + name);
    }
    return e;
}

// Step-1 demand rows for the founding service, one p-vector per resource.
std::vector<double> founding_row(const std::string& resource) {
    if (resource == "cpu") return {0.0, 0.35, 0.25, 0.04, 0.7, 0.3};
    // The flag coefficient exceeds the whole continuous storage spread, so
    // flag-carrying requests are separable in demand space and a policy can
    // learn to route them to clearance-holding nodes.
    if (resource == "storage") return {0.0, 0.2, 1.0, 0.02, 0.5, 0.2};
    throw std::invalid_argument("no founding row for " + resource);
}

// Demand row for a newly introduced resource, per existing service. Services
// without a declared row place no demand on the resource.
std::vector<double> new_resource_row(const std::string& resource, const std::string& service,
                                     std::size_t p) {
    (void)service;
    (void)resource;
    return std::vector<double>(p, 0.0);  // gpu demand arrives with gpu-hungry services
}

struct ServiceIntro {
    std::string service;
    std::vector<std::string> similar;            // blend sources; empty = uniform blend
    std::map<std::string, double> row_mult;      // per-resource scaling of the blend
    std::map<std::string, std::vector<double>> row_override;  // explicit rows
};

ServiceIntro service_intro(const std::string& name) {
    if (name == "VR")
        return {name,
                {},
                {{"cpu", 0.8}, {"storage", 1.5}},
                {{"gpu", {0.0, 0.08, 0.0, 0.015, 0.3, 0.1}}}};
    if (name == "IoV")
        return {name, {"real-time computing"}, {{"cpu", 1.1}, {"storage", 1.2}}, {}};
    if (name == "image detection")
        return {name, {"VR"}, {{"cpu", 0.9}, {"storage", 1.1}, {"gpu", 0.875}}, {}};
    throw std::invalid_argument("unknown service introduction: " + name);
}

struct StepPlan {
    std::string delta;  // "fresh" | "resource" | "service"
    std::string subject;
};

const std::vector<StepPlan>& curriculum() {
    static const std::vector<StepPlan> steps = {
        {"fresh", "real-time computing"}, {"resource", "gpu"},  {"resource", "dpu"},
        {"service", "VR"},                {"service", "IoV"},   {"service", "image detection"},
    };
    return steps;
}

std::string format_factor(double f) {
    std::ostringstream os;
    os << f;
    return os.str();
}

std::size_t registry_dim(const std::vector<IntentDim>& registry, const std::string& label) {
    for (std::size_t i = 0; i < registry.size(); ++i)
        if (registry[i].label == label) return i;
    throw std::runtime_error("intent registry lacks dimension: " + label);
}

NetworkSpec network_for(const ResourceCatalog& resources) {
    NetworkSpec net;
    net.resource_catalog_version = resources.version;
    for (const NodePlan& plan : node_plans()) {
        NodeSpec node;
        node.name = plan.name;
        node.distance = plan.distance;
        node.secure = plan.secure;
        for (const ResourceEntry& r : resources.entries) {
            auto it = plan.capacity.find(r.name);
            node.capacity.push_back(it == plan.capacity.end() ? 0.0 : it->second);
        }
        net.nodes.push_back(std::move(node));
    }
    return net;
}

NsiMatrix with_scaled_row(const NsiMatrix& m, std::size_t row, double factor) {
    std::vector<double> coef = m.coefficients();
    const std::size_t n = m.services(), p = m.intent_dim();
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t k = 0; k < p; ++k) coef[(row * n + s) * p + k] *= factor;
    return NsiMatrix(m.resources(), n, p, std::move(coef), m.resource_catalog_version(),
                     m.service_catalog_version(), m.version() + 1);
}

// ---------------------------------------------------------------------------
// Curriculum construction
// ---------------------------------------------------------------------------

ScenarioSpec build_step_one(const GenerationContext& ctx, const std::string& name) {
    ScenarioSpec s;
    s.name = name;
    s.step = 1;
    s.tag = "step-1";
    s.delta = "fresh";
    s.intent_registry = builtin_registry();

    s.resources.version = 1;
    s.resources.entries = {resource_plan("cpu"), resource_plan("storage")};
    s.services.version = 1;
    s.services.entries = {service_plan("real-time computing", 0.0)};
    s.new_services = {"real-time computing"};

    const std::size_t p = s.intent_registry.size();
    std::vector<double> coef;
    for (const ResourceEntry& r : s.resources.entries) {
        const std::vector<double> row = founding_row(r.name);
        coef.insert(coef.end(), row.begin(), row.end());
    }
    s.matrix = NsiMatrix(s.resources.size(), 1, p, std::move(coef), 1, 1, 1);
    s.network = network_for(s.resources);
    s.dataset_seed = derive_seed(ctx.seed, name);
    s.generation_trace.push_back("founding scenario: resources {cpu, storage}, service "
                                 "{real-time computing}, declared demand rows");
    return s;
}

// Resource-introduction build: assess demand, append the new demand rows
// (existing rows kept verbatim, g = 1), grow the network capacity columns.
ScenarioSpec extend_with_resource(const GenerationContext& ctx, const ScenarioSpec& parent,
                                  std::size_t step, const std::string& resource,
                                  const std::string& name) {
    ScenarioSpec s = parent;
    s.name = name;
    s.step = step;
    s.tag = "step-" + std::to_string(step);
    s.source = "builtin";
    s.delta = "resource";
    s.parent = parent.name;
    s.new_resources = {resource};
    s.new_services.clear();
    s.generation_trace.clear();

    const std::size_t p = s.intent_registry.size();
    const std::size_t n = s.services.size();
    std::ostringstream assess;
    assess << "assess demand for " << resource << " across " << n << " service(s)";
    s.generation_trace.push_back(assess.str());

    ResourceEntry entry = resource_plan(resource);
    std::vector<double> rows(n * p, 0.0);
    if (entry.role == ResourceRole::Offload) {
        // Offload demand mirrors the data-parallel share of each service's
        // compute row so the absorbable work is priced exactly.
        const auto cpu = s.resources.index_of("cpu");
        if (!cpu) throw std::runtime_error("offload resource requires a cpu row");
        for (std::size_t svc = 0; svc < n; ++svc) {
            const double q = s.services.entries[svc].data_fraction;
            for (std::size_t k = 0; k < p; ++k)
                rows[svc * p + k] = q * s.matrix.at(*cpu, svc, k);
            s.generation_trace.push_back("row[" + resource + "," + s.services.entries[svc].name +
                                         "] = data_fraction x cpu row");
        }
    } else {
        for (std::size_t svc = 0; svc < n; ++svc) {
            const std::vector<double> row =
                new_resource_row(resource, s.services.entries[svc].name, p);
            std::copy(row.begin(), row.end(), rows.begin() + static_cast<std::ptrdiff_t>(svc * p));
            s.generation_trace.push_back("row[" + resource + "," + s.services.entries[svc].name +
                                         "] declared");
        }
    }

    s.resources.entries.push_back(entry);
    s.resources.version = parent.resources.version + 1;
    s.matrix = parent.matrix.expand_resources(rows, 1, s.resources.version, {});
    s.generation_trace.push_back("expand demand tensor by one row block; existing rows kept "
                                 "verbatim (g = 1)");

    for (std::size_t i = 0; i < s.network.nodes.size(); ++i) {
        const NodePlan& plan = node_plans()[i];
        auto it = plan.capacity.find(resource);
        s.network.nodes[i].capacity.push_back(it == plan.capacity.end() ? 0.0 : it->second);
    }
    s.network.resource_catalog_version = s.resources.version;
    s.generation_trace.push_back("extend node capacities with " + resource + " column");
    s.dataset_seed = derive_seed(ctx.seed, name);
    return s;
}

// Service-introduction build: intent template, blend of declared similar
// services' columns (uniform over all services when none declared), recorded
// per-row adjustments, offload row re-coupled to the new compute row.
ScenarioSpec extend_with_service(const GenerationContext& ctx, const ScenarioSpec& parent,
                                 std::size_t step, const std::string& service,
                                 const std::string& name) {
    ScenarioSpec s = parent;
    s.name = name;
    s.step = step;
    s.tag = "step-" + std::to_string(step);
    s.source = "builtin";
    s.delta = "service";
    s.parent = parent.name;
    s.new_resources.clear();
    s.new_services = {service};
    s.generation_trace.clear();

    const ServiceIntro intro = service_intro(service);
    const std::size_t m = s.resources.size();
    const std::size_t p = s.intent_registry.size();

    ServiceEntry entry = service_plan(service, static_cast<double>(s.services.size()));
    s.generation_trace.push_back("declare intent template for " + service);

    std::vector<std::size_t> sources;
    std::vector<double> weights;
    if (intro.similar.empty()) {
        for (std::size_t i = 0; i < s.services.size(); ++i) sources.push_back(i);
        weights.assign(sources.size(), 1.0 / static_cast<double>(sources.size()));
        s.generation_trace.push_back("no declared similar service; uniform blend over all " +
                                     std::to_string(sources.size()) + " existing column(s)");
    } else {
        for (const std::string& sim : intro.similar) {
            const auto idx = s.services.index_of(sim);
            if (!idx) throw std::runtime_error("similar service missing from catalog: " + sim);
            sources.push_back(*idx);
        }
        weights.assign(sources.size(), 1.0 / static_cast<double>(sources.size()));
        std::string joined;
        for (const std::string& sim : intro.similar) joined += (joined.empty() ? "" : ", ") + sim;
        s.generation_trace.push_back("seed column from declared similar service(s): " + joined);
    }

    std::vector<double> column = s.matrix.init_service_submatrix(sources, weights);
    for (const auto& [res, mult] : intro.row_mult) {
        const auto r = s.resources.index_of(res);
        if (!r) continue;
        for (std::size_t k = 0; k < p; ++k) column[*r * p + k] *= mult;
        s.generation_trace.push_back("adjust " + res + " row x" + format_factor(mult));
    }
    for (const auto& [res, row] : intro.row_override) {
        const auto r = s.resources.index_of(res);
        if (!r) continue;
        if (row.size() != p) throw std::runtime_error("override row has wrong arity");
        std::copy(row.begin(), row.end(), column.begin() + static_cast<std::ptrdiff_t>(*r * p));
        s.generation_trace.push_back("override " + res + " row with declared coefficients");
    }
    const auto cpu = s.resources.index_of("cpu");
    for (std::size_t r = 0; r < m; ++r) {
        if (s.resources.entries[r].role != ResourceRole::Offload || !cpu) continue;
        for (std::size_t k = 0; k < p; ++k)
            column[r * p + k] = entry.data_fraction * column[*cpu * p + k];
        s.generation_trace.push_back("couple " + s.resources.entries[r].name +
                                     " row to data_fraction x cpu row");
    }

    // Each introduction round trains on data dominated by the new service;
    // earlier services reappear in the round's data only through replay, so
    // retention of them is a property of the replay path rather than of the
    // fresh stream.
    const double kNewServiceShare = 0.9;
    const std::size_t n_old = s.services.size();
    for (ServiceEntry& old_entry : s.services.entries) old_entry.dataset_weight = 1.0;
    entry.dataset_weight =
        kNewServiceShare / (1.0 - kNewServiceShare) * static_cast<double>(n_old);
    s.generation_trace.push_back("tilt dataset draws toward " + service + " (share " +
                                 format_factor(kNewServiceShare) + ")");

    s.services.entries.push_back(entry);
    s.services.version = parent.services.version + 1;
    s.matrix = s.matrix.expand_services(column, 1, s.services.version);
    s.generation_trace.push_back("expand demand tensor by one service column");
    s.dataset_seed = derive_seed(ctx.seed, name);
    return s;
}

ScenarioSpec build_step(const GenerationContext& ctx, std::size_t step, const std::string& name) {
    const StepPlan& plan = curriculum().at(step - 1);
    if (plan.delta == "fresh") return build_step_one(ctx, name);
    const ScenarioSpec* parent = nullptr;
    for (auto it = ctx.history.rbegin(); it != ctx.history.rend(); ++it)
        if (it->step == step - 1) {
            parent = &*it;
            break;
        }
    if (!parent) throw std::runtime_error("no parent spec emitted for step " +
                                          std::to_string(step));
    if (plan.delta == "resource")
        return extend_with_resource(ctx, *parent, step, plan.subject, name);
    return extend_with_service(ctx, *parent, step, plan.subject, name);
}

// ---------------------------------------------------------------------------
// Directive application
// ---------------------------------------------------------------------------

void apply_bottleneck(ScenarioSpec& s, const CorrectionDirective& d) {
    const auto r = s.resources.index_of(d.resource);
    if (!r) {
        s.generation_trace.push_back("directive skipped: bottleneck on unknown resource " +
                                     d.resource);
        return;
    }
    for (NodeSpec& node : s.network.nodes) node.capacity[*r] *= d.factor;
    s.generation_trace.push_back("directive: scale every node's " + d.resource + " capacity x" +
                                 format_factor(d.factor));
}

void apply_adjust_weights(ScenarioSpec& s, const CorrectionDirective& d) {
    const auto r = s.resources.index_of(d.resource);
    if (!r) {
        s.generation_trace.push_back("directive skipped: weight adjustment on unknown resource " +
                                     d.resource);
        return;
    }
    s.matrix = with_scaled_row(s.matrix, *r, d.factor);
    s.generation_trace.push_back("directive: scale demand row " + d.resource + " x" +
                                 format_factor(d.factor) + ", tensor version advanced");
}

void scale_template_dim(ScenarioSpec& s, std::size_t dim, double mult) {
    const IntentDim& reg = s.intent_registry[dim];
    for (ServiceEntry& svc : s.services.entries) {
        svc.template_lo[dim] = std::clamp(svc.template_lo[dim] * mult, reg.lo, reg.hi);
        svc.template_hi[dim] =
            std::clamp(svc.template_hi[dim] * mult, svc.template_lo[dim], reg.hi);
    }
}

void apply_relaxation(ScenarioSpec& s, const CorrectionDirective& d) {
    const auto& metrics = fine_grained_metric_names();
    if (d.metric_dim >= metrics.size()) {
        s.generation_trace.push_back("directive skipped: relaxation on unknown metric index");
        return;
    }
    static const std::vector<std::string> labels = {"latency_target", "security_flag",
                                                    "throughput_target", "accuracy_target"};
    const std::size_t dim = registry_dim(s.intent_registry, labels[d.metric_dim]);
    const double f = d.factor <= 0.0 ? 1.0 : d.factor;
    // Relaxing a deadline means longer targets; relaxing a floor metric means
    // lower targets; relaxing security means fewer secured requests.
    const double mult = (metrics[d.metric_dim] == "latency") ? f : 1.0 / f;
    scale_template_dim(s, dim, mult);
    s.generation_trace.push_back("directive: relax " + metrics[d.metric_dim] +
                                 " intent templates x" + format_factor(mult));
}

void apply_reduction(ScenarioSpec& s, const CorrectionDirective& d) {
    const double f = (d.factor <= 0.0 || d.factor >= 1.0) ? 0.75 : d.factor;
    const auto reduced = static_cast<std::size_t>(
        std::llround(static_cast<double>(s.requests_per_episode) * f));
    s.requests_per_episode = std::max<std::size_t>(4, reduced);
    const std::size_t lat = registry_dim(s.intent_registry, "latency_target");
    scale_template_dim(s, lat, 1.25);
    s.generation_trace.push_back("directive: reduce difficulty — " +
                                 std::to_string(s.requests_per_episode) +
                                 " requests/episode, deadlines widened x1.25");
}

}  // namespace

// ---------------------------------------------------------------------------
// GenerationContext
// ---------------------------------------------------------------------------

std::string GenerationContext::directive_key(const CorrectionDirective& d) const {
    std::ostringstream os;
    os << to_string(d.kind) << '|' << d.resource << '|' << d.metric_dim << '|' << d.factor
       << "|parent:" << (history.empty() ? std::string("root") : history.back().name);
    return os.str();
}

bool GenerationContext::queue_directive(const CorrectionDirective& d) {
    const std::string key = directive_key(d);
    if (!consumed_keys.insert(key).second) {
        events.push_back("directive rejected (already applied to this parent): " + key);
        return false;
    }
    pending.push_back(d);
    return true;
}

std::size_t curriculum_length() { return curriculum().size(); }

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

std::optional<ScenarioSpec> next_scenario_builtin(GenerationContext& ctx) {
    if (!ctx.queued.empty()) {
        ScenarioSpec spec = std::move(ctx.queued.front());
        ctx.queued.pop_front();
        const ScenarioValidation check = validate_scenario(spec);
        if (!check.clean()) {
            std::string msg = "queued scenario failed validation:";
            for (const std::string& v : check.violations) msg += " [" + v + "]";
            throw std::runtime_error(msg);
        }
        ctx.history.push_back(spec);
        return spec;
    }

    // A regenerate directive means two different things depending on why it
    // was issued. Suspected infeasibility (low satisfaction) rebuilds the
    // same curriculum step with a fresh dataset stream; a pure novelty
    // request is satisfied by advancing, because the next curriculum step is
    // by construction the more novel scenario.
    bool regen = false, novelty_request = false, decompose = false;
    for (const CorrectionDirective& d : ctx.pending) {
        if (d.kind == DirectiveKind::RegenerateScenario) {
            const bool low_sat =
                std::find(d.rationale.begin(), d.rationale.end(), "low_sat") !=
                d.rationale.end();
            if (low_sat)
                regen = true;
            else
                novelty_request = true;
        }
        decompose = decompose || d.kind == DirectiveKind::DecomposeScenario;
    }

    ScenarioSpec spec;
    if (regen && !ctx.history.empty()) {
        const std::size_t step = ctx.history.back().step;
        ++ctx.regen_count;
        const std::string name =
            "step-" + std::to_string(step) + "-regen-" + std::to_string(ctx.regen_count);
        spec = build_step(ctx, step, name);
        spec.generation_trace.push_back("regenerated variant of step " + std::to_string(step) +
                                        " with a fresh dataset stream");
    } else if (ctx.next_step <= ctx.max_step) {
        spec = build_step(ctx, ctx.next_step, "step-" + std::to_string(ctx.next_step));
        ctx.next_step += 1;
        if (novelty_request)
            spec.generation_trace.push_back(
                "novelty request satisfied by advancing the curriculum");
    } else if (!ctx.pending.empty() && !ctx.history.empty()) {
        ++ctx.regen_count;
        spec = ctx.history.back();
        spec.name += "-rev-" + std::to_string(ctx.regen_count);
        spec.parent = ctx.history.back().name;
        spec.dataset_seed = derive_seed(ctx.seed, spec.name);
        spec.generation_trace.push_back("curriculum exhausted; re-emitting final step to apply "
                                        "pending directives");
    } else {
        return std::nullopt;  // curriculum exhausted with nothing pending
    }

    for (const CorrectionDirective& d : ctx.pending) {
        switch (d.kind) {
            case DirectiveKind::CreateResourceBottleneck: apply_bottleneck(spec, d); break;
            case DirectiveKind::AdjustNsiWeights: apply_adjust_weights(spec, d); break;
            case DirectiveKind::RelaxIntentConstraint: apply_relaxation(spec, d); break;
            case DirectiveKind::ReduceDifficulty: apply_reduction(spec, d); break;
            case DirectiveKind::RegenerateScenario: break;  // handled above
            case DirectiveKind::DecomposeScenario: break;   // handled below
        }
    }

    if (decompose) {
        if (!spec.new_resources.empty() && !spec.new_services.empty()) {
            auto [part1, part2] = decompose_scenario(spec);
            ctx.pending.clear();
            const ScenarioValidation check = validate_scenario(part1);
            if (!check.clean()) {
                std::string msg = "decomposed scenario failed validation:";
                for (const std::string& v : check.violations) msg += " [" + v + "]";
                throw std::runtime_error(msg);
            }
            ctx.queued.push_back(std::move(part2));
            ctx.history.push_back(part1);
            return part1;
        }
        ctx.events.push_back("decompose directive ignored: spec " + spec.name +
                             " introduces only one kind of element; reducing difficulty instead");
        CorrectionDirective fallback;
        fallback.kind = DirectiveKind::ReduceDifficulty;
        fallback.factor = 0.75;
        fallback.rationale = {"not_converged"};
        apply_reduction(spec, fallback);
    }

    ctx.pending.clear();
    const ScenarioValidation check = validate_scenario(spec);
    if (!check.clean()) {
        std::string msg = "generated scenario " + spec.name + " failed validation:";
        for (const std::string& v : check.violations) msg += " [" + v + "]";
        throw std::runtime_error(msg);
    }
    ctx.history.push_back(spec);
    return spec;
}

// ---------------------------------------------------------------------------
// Dataset synthesis
// ---------------------------------------------------------------------------

std::vector<Request> synthesize_dataset(const ScenarioSpec& spec, std::size_t size,
                                        std::uint64_t seed) {
    Rng rng(derive_seed(seed, "dataset"));
    const std::size_t p = spec.intent_registry.size();
    const std::size_t lat = registry_dim(spec.intent_registry, "latency_target");
    const std::size_t sec = registry_dim(spec.intent_registry, "security_flag");
    const std::size_t tput = registry_dim(spec.intent_registry, "throughput_target");
    const std::size_t acc = registry_dim(spec.intent_registry, "accuracy_target");

    std::vector<std::string> labels;
    for (const IntentDim& d : spec.intent_registry) labels.push_back(d.label);

    // Service draws follow the per-service dataset weights so a scenario can
    // concentrate its training data on newly introduced services.
    std::vector<double> cum;
    cum.reserve(spec.services.size());
    double total_w = 0.0;
    for (const ServiceEntry& svc : spec.services.entries) {
        total_w += svc.dataset_weight;
        cum.push_back(total_w);
    }

    std::vector<Request> out;
    out.reserve(size);
    for (std::size_t i = 0; i < size; ++i) {
        const double u = rng.uniform01() * total_w;
        std::size_t svc_idx =
            static_cast<std::size_t>(std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
        if (svc_idx >= spec.services.size()) svc_idx = spec.services.size() - 1;
        const ServiceEntry& svc = spec.services.entries[svc_idx];

        Request req;
        req.service_type = svc_idx;
        req.intent.dim_labels = labels;
        req.intent.values.resize(p, 0.0);
        for (std::size_t k = 0; k < p; ++k) {
            const double lo = svc.template_lo[k], hi = svc.template_hi[k];
            if (spec.intent_registry[k].is_flag) {
                const double prob = 0.5 * (lo + hi);
                req.intent.values[k] = rng.uniform01() < prob ? 1.0 : 0.0;
            } else {
                req.intent.values[k] = lo == hi ? lo : rng.uniform(lo, hi);
            }
        }
        req.requirement = spec.matrix.map_intent(svc_idx, req.intent, spec.resources);
        req.deadline = req.intent.values[lat];
        req.security_flag = req.intent.values[sec];
        req.throughput_target = req.intent.values[tput];
        req.accuracy_target = req.intent.values[acc];
        const int span = spec.duration_max - spec.duration_min;
        req.duration_steps =
            spec.duration_min +
            (span > 0 ? static_cast<int>(rng.index(static_cast<std::size_t>(span) + 1)) : 0);
        out.push_back(std::move(req));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

ScenarioValidation validate_scenario(const ScenarioSpec& spec) {
    ScenarioValidation report;
    auto fail = [&report](const std::string& v) { report.violations.push_back(v); };

    try {
        spec.resources.validate();
    } catch (const std::exception& e) {
        fail(std::string("resource catalog: ") + e.what());
    }
    try {
        spec.services.validate();
    } catch (const std::exception& e) {
        fail(std::string("service catalog: ") + e.what());
    }

    const std::size_t p = spec.intent_registry.size();
    if (p == 0) fail("intent registry is empty");
    for (const IntentDim& d : spec.intent_registry) {
        if (!(d.lo <= d.hi)) fail("intent dimension " + d.label + " has inverted bounds");
        if (d.is_flag && (d.lo < 0.0 || d.hi > 1.0))
            fail("flag dimension " + d.label + " must stay within [0,1]");
    }

    const MatrixValidationReport mx = spec.matrix.validate(spec.resources, spec.services);
    for (const MatrixIssue& issue : mx.issues) fail("matrix " + issue.kind + ": " + issue.detail);
    if (spec.matrix.intent_dim() != p) fail("matrix arity does not match the intent registry");

    for (const ServiceEntry& svc : spec.services.entries) {
        if (svc.template_lo.size() != p || svc.template_hi.size() != p) {
            fail("service " + svc.name + " template arity mismatch");
            continue;
        }
        for (std::size_t k = 0; k < p; ++k) {
            if (svc.template_lo[k] > svc.template_hi[k])
                fail("service " + svc.name + " template range inverted at " +
                     spec.intent_registry[k].label);
            if (svc.template_lo[k] < spec.intent_registry[k].lo - 1e-12 ||
                svc.template_hi[k] > spec.intent_registry[k].hi + 1e-12)
                fail("service " + svc.name + " template exceeds registry bounds at " +
                     spec.intent_registry[k].label);
        }
    }

    try {
        spec.network.validate(spec.resources);
    } catch (const std::exception& e) {
        fail(std::string("network: ") + e.what());
    }
    if (spec.network.nodes.empty()) fail("network has no nodes");
    for (const NodeSpec& node : spec.network.nodes) {
        if (node.distance < 0.0 || node.distance > 1.0)
            fail("node " + node.name + " distance outside [0,1]");
        for (double c : node.capacity)
            if (c < 0.0) fail("node " + node.name + " has a negative capacity");
    }

    if (spec.env.multipliers.empty()) fail("environment declares no allocation multipliers");
    for (double m : spec.env.multipliers)
        if (m <= 0.0) fail("allocation multipliers must be positive");
    if (spec.env.kappa < 0.0) fail("distance latency coefficient must be non-negative");
    if (spec.requests_per_episode == 0) fail("requests_per_episode must be at least 1");
    if (spec.duration_min < 1 || spec.duration_max < spec.duration_min)
        fail("request duration bounds are inconsistent");
    if (!(spec.replay_fraction >= 0.0 && spec.replay_fraction < 1.0))
        fail("replay fraction must lie in [0,1)");

    if (!report.clean()) return report;

    // Feasibility probe on an empty network: a fixed-seed sample plus each
    // service's worst-case template corner must be schedulable somewhere.
    EdgeEnv env(spec.network, spec.services, spec.resources, spec.env);
    auto schedulable = [&env](const Request& req) {
        for (const Action& a : env.action_space())
            if (env.evaluate(req, a).feasible) return true;
        return false;
    };

    for (std::size_t svc_idx = 0; svc_idx < spec.services.size(); ++svc_idx) {
        const ServiceEntry& svc = spec.services.entries[svc_idx];
        Request corner;
        corner.service_type = svc_idx;
        for (std::size_t k = 0; k < p; ++k) {
            double v = svc.template_hi[k];
            if (spec.intent_registry[k].is_flag) v = svc.template_hi[k] > 0.0 ? 1.0 : 0.0;
            corner.intent.values.push_back(v);
            corner.intent.dim_labels.push_back(spec.intent_registry[k].label);
        }
        corner.requirement = spec.matrix.map_intent(svc_idx, corner.intent, spec.resources);
        corner.deadline = corner.intent.values[registry_dim(spec.intent_registry,
                                                            "latency_target")];
        if (!schedulable(corner))
            fail("service " + svc.name + " worst-case demand is unschedulable on every node");
    }

    const std::vector<Request> probe = synthesize_dataset(spec, kProbeRequests, kProbeSeed);
    for (std::size_t i = 0; i < probe.size(); ++i)
        if (!schedulable(probe[i]))
            fail("probe request " + std::to_string(i) + " (service " +
                 spec.services.entries[probe[i].service_type].name +
                 ") is unschedulable on every node");
    return report;
}

// ---------------------------------------------------------------------------
// Decomposition
// ---------------------------------------------------------------------------

std::pair<ScenarioSpec, ScenarioSpec> decompose_scenario(const ScenarioSpec& spec) {
    if (spec.new_resources.empty() || spec.new_services.empty())
        throw std::invalid_argument("only composite scenarios can be decomposed");
    const std::size_t drop = spec.new_services.size();
    if (drop >= spec.services.size())
        throw std::invalid_argument("composite spec would lose every service when split");
    for (std::size_t i = 0; i < drop; ++i) {
        const std::string& expect = spec.new_services[i];
        const std::string& got =
            spec.services.entries[spec.services.size() - drop + i].name;
        if (expect != got)
            throw std::invalid_argument("new services must occupy the trailing catalog slots");
    }

    ScenarioSpec part1 = spec;
    part1.name = spec.name + "-part1";
    part1.delta = "resource";
    part1.new_services.clear();
    part1.services.entries.resize(spec.services.size() - drop);
    const std::size_t m = spec.matrix.resources();
    const std::size_t n = spec.matrix.services();
    const std::size_t p = spec.matrix.intent_dim();
    const std::size_t n1 = n - drop;
    std::vector<double> coef(m * n1 * p, 0.0);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t s = 0; s < n1; ++s)
            for (std::size_t k = 0; k < p; ++k)
                coef[(r * n1 + s) * p + k] = spec.matrix.at(r, s, k);
    part1.matrix = NsiMatrix(m, n1, p, std::move(coef), spec.matrix.resource_catalog_version(),
                             spec.services.version, spec.matrix.version() + 1);
    part1.services.version = spec.services.version;
    part1.generation_trace.push_back("decomposition: resource-only half of " + spec.name);

    ScenarioSpec part2 = spec;
    part2.name = spec.name + "-part2";
    part2.delta = "service";
    part2.new_resources.clear();
    part2.parent = part1.name;
    part2.generation_trace.push_back("decomposition: service-only half of " + spec.name);
    return {std::move(part1), std::move(part2)};
}

// ---------------------------------------------------------------------------
// External adapter
// ---------------------------------------------------------------------------

nlohmann::json external_request_body(const GenerationContext& ctx) {
    json digest = json::array();
    for (const ScenarioSpec& s : ctx.history)
        digest.push_back({{"name", s.name}, {"step", s.step}, {"tag", s.tag},
                          {"delta", s.delta}});
    json directives = json::array();
    for (const CorrectionDirective& d : ctx.pending) directives.push_back(to_json(d));
    json body = {{"seed", ctx.seed},
                 {"next_step", ctx.next_step},
                 {"history", digest},
                 {"directives", directives}};
    if (!ctx.history.empty()) {
        const ScenarioSpec& last = ctx.history.back();
        body["resources"] = to_json(last.resources);
        body["services"] = to_json(last.services);
        body["matrix"] = to_json(last.matrix);
        body["intent_registry"] = json::array();
        for (const IntentDim& d : last.intent_registry)
            body["intent_registry"].push_back(to_json(d));
    }
    return body;
}

namespace {

struct ParsedUrl {
    std::string host;
    int port = 80;
    std::string path = "/";
};

ParsedUrl parse_http_url(const std::string& url) {
    const std::string scheme = "http://";
    if (url.rfind(scheme, 0) != 0)
        throw std::invalid_argument("external generator URL must use http://");
    std::string rest = url.substr(scheme.size());
    ParsedUrl out;
    const std::size_t slash = rest.find('/');
    std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
    if (slash != std::string::npos) out.path = rest.substr(slash);
    const std::size_t colon = hostport.find(':');
    if (colon == std::string::npos) {
        out.host = hostport;
    } else {
        out.host = hostport.substr(0, colon);
        out.port = std::stoi(hostport.substr(colon + 1));
    }
    if (out.host.empty()) throw std::invalid_argument("external generator URL lacks a host");
    return out;
}

}  // namespace

GenerationOutcome external_generate(GenerationContext& ctx,
                                    const ExternalEndpointConfig& endpoint) {
    GenerationOutcome outcome;
    auto note = [&](const std::string& msg) {
        outcome.events.push_back(msg);
        ctx.events.push_back(msg);
    };

    const char* token = std::getenv(endpoint.credential_env.c_str());
    bool usable = token != nullptr && *token != '\0';
    if (!usable) note("external generator skipped: credential variable " +
                      endpoint.credential_env + " is unset");

    ParsedUrl url;
    if (usable) {
        try {
            url = parse_http_url(endpoint.url);
        } catch (const std::exception& e) {
            usable = false;
            note(std::string("external generator skipped: ") + e.what());
        }
    }

    if (usable) {
        const std::string body = external_request_body(ctx).dump();
        httplib::Client client(url.host, url.port);
        const auto secs = static_cast<time_t>(endpoint.timeout_seconds);
        const auto usecs = static_cast<time_t>(
            (endpoint.timeout_seconds - static_cast<double>(secs)) * 1e6);
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        httplib::Headers headers = {{"Authorization", std::string("Bearer ") + token}};

        const int attempts = 1 + std::max(0, endpoint.retries);
        for (int attempt = 1; attempt <= attempts; ++attempt) {
            httplib::Result res = client.Post(url.path, headers, body, "application/json");
            if (!res) {
                note("attempt " + std::to_string(attempt) + ": transport error contacting " +
                     endpoint.url);
                continue;
            }
            if (res->status != 200) {
                note("attempt " + std::to_string(attempt) + ": endpoint returned status " +
                     std::to_string(res->status));
                continue;
            }
            ScenarioSpec spec;
            try {
                spec = scenario_from_json(json::parse(res->body));
            } catch (const std::exception& e) {
                note("attempt " + std::to_string(attempt) + ": response rejected: " + e.what());
                continue;
            }
            spec.source = "external";
            if (spec.parent.empty() && !ctx.history.empty())
                spec.parent = ctx.history.back().name;
            const ScenarioValidation check = validate_scenario(spec);
            if (!check.clean()) {
                std::string msg = "attempt " + std::to_string(attempt) +
                                  ": response failed validation:";
                for (const std::string& v : check.violations) msg += " [" + v + "]";
                note(msg);
                continue;
            }
            ctx.pending.clear();
            ctx.history.push_back(spec);
            outcome.spec = std::move(spec);
            return outcome;
        }
        note("external generator exhausted its retries; falling back to the builtin curriculum");
    }

    std::optional<ScenarioSpec> fb = next_scenario_builtin(ctx);
    if (!fb)
        throw std::runtime_error(
            "external generation failed and the builtin curriculum is exhausted");
    outcome.spec = std::move(*fb);
    outcome.fallback = true;
    return outcome;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

nlohmann::json to_json(const IntentDim& d) {
    return {{"label", d.label}, {"lo", d.lo}, {"hi", d.hi}, {"is_flag", d.is_flag}};
}

IntentDim intent_dim_from_json(const nlohmann::json& j) {
    IntentDim d;
    d.label = j.at("label").get<std::string>();
    d.lo = j.at("lo").get<double>();
    d.hi = j.at("hi").get<double>();
    d.is_flag = j.at("is_flag").get<bool>();
    return d;
}

nlohmann::json to_json(const EnvConfig& c) {
    return {{"kappa", c.kappa},
            {"weights",
             {{"sat", c.weights.sat}, {"lat", c.weights.lat}, {"cost", c.weights.cost}}},
            {"multipliers", c.multipliers},
            {"infeasible_reward", c.infeasible_reward},
            {"no_offload_node_bonus", c.no_offload_node_bonus}};
}

EnvConfig env_config_from_json(const nlohmann::json& j) {
    EnvConfig c;
    c.kappa = j.at("kappa").get<double>();
    c.weights.sat = j.at("weights").at("sat").get<double>();
    c.weights.lat = j.at("weights").at("lat").get<double>();
    c.weights.cost = j.at("weights").at("cost").get<double>();
    c.multipliers = j.at("multipliers").get<std::vector<double>>();
    c.infeasible_reward = j.at("infeasible_reward").get<double>();
    c.no_offload_node_bonus = j.at("no_offload_node_bonus").get<double>();
    return c;
}

nlohmann::json request_to_json(const Request& r) {
    return {{"service_type", r.service_type},
            {"intent", {{"values", r.intent.values}, {"dim_labels", r.intent.dim_labels}}},
            {"requirement",
             {{"values", r.requirement.values},
              {"catalog_version", r.requirement.catalog_version}}},
            {"deadline", r.deadline},
            {"security_flag", r.security_flag},
            {"throughput_target", r.throughput_target},
            {"accuracy_target", r.accuracy_target},
            {"duration_steps", r.duration_steps}};
}

Request request_from_json(const nlohmann::json& j) {
    Request r;
    r.service_type = j.at("service_type").get<std::size_t>();
    r.intent.values = j.at("intent").at("values").get<std::vector<double>>();
    r.intent.dim_labels = j.at("intent").at("dim_labels").get<std::vector<std::string>>();
    r.requirement.values = j.at("requirement").at("values").get<std::vector<double>>();
    r.requirement.catalog_version = j.at("requirement").at("catalog_version").get<std::uint64_t>();
    r.deadline = j.at("deadline").get<double>();
    r.security_flag = j.at("security_flag").get<double>();
    r.throughput_target = j.at("throughput_target").get<double>();
    r.accuracy_target = j.at("accuracy_target").get<double>();
    r.duration_steps = j.at("duration_steps").get<int>();
    return r;
}

nlohmann::json to_json(const ScenarioSpec& s) {
    json registry = json::array();
    for (const IntentDim& d : s.intent_registry) registry.push_back(to_json(d));
    return {{"name", s.name},
            {"step", s.step},
            {"tag", s.tag},
            {"source", s.source},
            {"delta", s.delta},
            {"parent", s.parent},
            {"new_resources", s.new_resources},
            {"new_services", s.new_services},
            {"intent_registry", registry},
            {"resources", to_json(s.resources)},
            {"services", to_json(s.services)},
            {"matrix", to_json(s.matrix)},
            {"network", to_json(s.network)},
            {"env", to_json(s.env)},
            {"requests_per_episode", s.requests_per_episode},
            {"duration_min", s.duration_min},
            {"duration_max", s.duration_max},
            {"replay_fraction", s.replay_fraction},
            {"dataset_seed", s.dataset_seed},
            {"generation_trace", s.generation_trace}};
}

ScenarioSpec scenario_from_json(const nlohmann::json& j) {
    ScenarioSpec s;
    s.name = j.at("name").get<std::string>();
    s.step = j.at("step").get<std::size_t>();
    s.tag = j.at("tag").get<std::string>();
    s.source = j.at("source").get<std::string>();
    s.delta = j.at("delta").get<std::string>();
    s.parent = j.at("parent").get<std::string>();
    s.new_resources = j.at("new_resources").get<std::vector<std::string>>();
    s.new_services = j.at("new_services").get<std::vector<std::string>>();
    for (const auto& d : j.at("intent_registry")) s.intent_registry.push_back(intent_dim_from_json(d));
    s.resources = resource_catalog_from_json(j.at("resources"));
    s.services = service_catalog_from_json(j.at("services"));
    s.matrix = nsi_matrix_from_json(j.at("matrix"));
    s.network = network_from_json(j.at("network"));
    s.env = env_config_from_json(j.at("env"));
    s.requests_per_episode = j.at("requests_per_episode").get<std::size_t>();
    s.duration_min = j.at("duration_min").get<int>();
    s.duration_max = j.at("duration_max").get<int>();
    s.replay_fraction = j.at("replay_fraction").get<double>();
    s.dataset_seed = j.at("dataset_seed").get<std::uint64_t>();
    s.generation_trace = j.at("generation_trace").get<std::vector<std::string>>();
    return s;
}

}  // namespace igaa
