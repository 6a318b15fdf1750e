#include "igaa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "igaa/env.hpp"

namespace igaa {

SatReport intent_satisfaction(const std::vector<std::vector<bool>>& met,
                              double flag_threshold) {
    if (met.empty()) {
        throw std::invalid_argument("intent_satisfaction: no evaluated requests");
    }
    const std::size_t dims = fine_grained_metric_names().size();
    SatReport r;
    r.names = fine_grained_metric_names();
    r.flag_threshold = flag_threshold;
    r.sat.assign(dims, 0.0);
    for (const auto& row : met) {
        if (row.size() != dims) {
            throw std::invalid_argument("intent_satisfaction: outcome row has wrong width");
        }
        for (std::size_t n = 0; n < dims; ++n) {
            if (row[n]) r.sat[n] += 1.0;
        }
    }
    for (std::size_t n = 0; n < dims; ++n) {
        r.sat[n] /= static_cast<double>(met.size());
        if (r.sat[n] < flag_threshold) {
            r.low_sat = true;
            r.low_dims.push_back(n);
        }
    }
    return r;
}

DispersionReport dispersion(const std::vector<std::vector<double>>& utilization,
                            const std::vector<std::size_t>& group,
                            const std::vector<std::string>& resource_names) {
    if (group.size() < 2) {
        throw std::invalid_argument("dispersion: similar group needs at least two members");
    }
    DispersionReport r;
    for (const std::size_t m : group) {
        if (m >= utilization.size() || m >= resource_names.size()) {
            throw std::invalid_argument("dispersion: group member out of range");
        }
        // Node-mean utilization, skipping nodes that lack the resource.
        double sum = 0.0;
        std::size_t count = 0;
        for (const double u : utilization[m]) {
            if (u >= 0.0) {
                sum += u;
                ++count;
            }
        }
        r.members.push_back(resource_names[m]);
        r.member_means.push_back(count > 0 ? sum / static_cast<double>(count) : 0.0);
    }

    double mean = 0.0;
    for (const double v : r.member_means) mean += v;
    mean /= static_cast<double>(r.member_means.size());

    std::size_t max_i = 0, min_i = 0;
    for (std::size_t i = 1; i < r.member_means.size(); ++i) {
        if (r.member_means[i] > r.member_means[max_i]) max_i = i;
        if (r.member_means[i] < r.member_means[min_i]) min_i = i;
    }
    r.max_member = r.members[max_i];
    r.min_member = r.members[min_i];

    if (mean <= 0.0) {
        r.idle_group = true;
        return r;
    }
    double var = 0.0;
    for (const double v : r.member_means) var += (v - mean) * (v - mean);
    var /= static_cast<double>(r.member_means.size());  // population variance
    r.value = std::sqrt(var) / mean;
    return r;
}

KdeDensity::KdeDensity(std::vector<std::vector<double>> samples, std::vector<double> bandwidth)
    : samples_(std::move(samples)) {
    if (samples_.empty()) {
        throw std::invalid_argument("KdeDensity: empty sample set");
    }
    dim_ = samples_[0].size();
    if (dim_ == 0) throw std::invalid_argument("KdeDensity: zero-dimensional samples");
    for (const auto& s : samples_) {
        if (s.size() != dim_) {
            throw std::invalid_argument("KdeDensity: inconsistent sample dimensions");
        }
    }
    if (!bandwidth.empty()) {
        if (bandwidth.size() != dim_) {
            throw std::invalid_argument("KdeDensity: bandwidth dimension mismatch");
        }
        for (const double h : bandwidth) {
            if (!(h > 0.0)) throw std::invalid_argument("KdeDensity: bandwidth must be > 0");
        }
        h_ = std::move(bandwidth);
    } else {
        // Scott's rule per dimension on the sample standard deviation.
        const double n = static_cast<double>(samples_.size());
        const double factor = std::pow(n, -1.0 / (static_cast<double>(dim_) + 4.0));
        h_.assign(dim_, 0.0);
        for (std::size_t d = 0; d < dim_; ++d) {
            double mean = 0.0;
            for (const auto& s : samples_) mean += s[d];
            mean /= n;
            double var = 0.0;
            for (const auto& s : samples_) var += (s[d] - mean) * (s[d] - mean);
            var = samples_.size() > 1 ? var / (n - 1.0) : 0.0;
            const double sigma = std::sqrt(var);
            h_[d] = sigma > 0.0 ? sigma * factor : 1e-3;
        }
    }
    log_norm_ = 0.0;
    for (const double h : h_) {
        log_norm_ -= std::log(h * std::sqrt(2.0 * std::numbers::pi));
    }
}

double KdeDensity::log_density(const std::vector<double>& x) const {
    if (x.size() != dim_) {
        throw std::invalid_argument("KdeDensity: query dimension mismatch");
    }
    // log-mean-exp over per-sample log kernel values for numerical range.
    double max_log = -std::numeric_limits<double>::infinity();
    std::vector<double> logs(samples_.size(), 0.0);
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        double e = 0.0;
        for (std::size_t d = 0; d < dim_; ++d) {
            const double t = (x[d] - samples_[i][d]) / h_[d];
            e += t * t;
        }
        logs[i] = log_norm_ - 0.5 * e;
        max_log = std::max(max_log, logs[i]);
    }
    if (!std::isfinite(max_log)) return -std::numeric_limits<double>::infinity();
    double acc = 0.0;
    for (const double l : logs) acc += std::exp(l - max_log);
    return max_log + std::log(acc / static_cast<double>(samples_.size()));
}

double KdeDensity::density(const std::vector<double>& x) const {
    return std::exp(log_density(x));
}

double kl_divergence(const std::vector<std::vector<double>>& new_samples,
                     const KdeDensity& p_old, double eps) {
    if (new_samples.empty()) {
        throw std::invalid_argument("kl_divergence: empty sample set");
    }
    const KdeDensity p_new(new_samples);
    double acc = 0.0;
    for (const auto& s : new_samples) {
        acc += p_new.log_density(s) - std::log(p_old.density(s) + eps);
    }
    return acc / static_cast<double>(new_samples.size());
}

ConvergenceReport convergence_steps(const TrainTrace& trace, double threshold,
                                    std::size_t fast_floor) {
    ConvergenceReport r;
    r.threshold = threshold;
    r.fast_floor = fast_floor;
    for (const EvalPoint& pt : trace.evals) {
        if (pt.sat_per_type.empty()) continue;
        const bool all_above = std::all_of(pt.sat_per_type.begin(), pt.sat_per_type.end(),
                                           [&](double v) { return v > threshold; });
        if (all_above) {
            r.episode = pt.episode;
            r.too_fast = pt.episode < fast_floor;
            return r;
        }
    }
    r.not_reached = true;
    return r;
}

std::vector<std::string> MetricsReport::flags() const {
    std::vector<std::string> f;
    if (sat.low_sat) f.push_back("low_sat");
    bool high_disc = false, idle = false;
    for (const auto& g : groups) {
        if (g.idle_group) idle = true;
        if (g.value.has_value() && *g.value > disc_threshold) high_disc = true;
    }
    if (high_disc) f.push_back("high_dispersion");
    if (idle) f.push_back("idle_group");
    if (!kl_history.empty() &&
        *std::min_element(kl_history.begin(), kl_history.end()) < kl_threshold) {
        f.push_back("low_novelty");
    }
    if (convergence.not_reached) f.push_back("not_converged");
    if (convergence.too_fast) f.push_back("too_fast");
    return f;
}

std::vector<CorrectionDirective> correction_verdict(const MetricsReport& report) {
    std::vector<CorrectionDirective> out;
    std::vector<std::string> regenerate_reasons;

    if (report.sat.low_sat) {
        const std::size_t worst = static_cast<std::size_t>(
            std::min_element(report.sat.sat.begin(), report.sat.sat.end()) -
            report.sat.sat.begin());
        if (report.sat.sat[worst] < report.regenerate_sat_floor) {
            // Satisfaction this low points at an infeasible scenario, not a
            // slow learner.
            regenerate_reasons.push_back("low_sat");
        } else {
            CorrectionDirective d;
            d.kind = DirectiveKind::RelaxIntentConstraint;
            d.metric_dim = worst;
            d.factor = 1.25;
            d.rationale = {"low_sat"};
            out.push_back(std::move(d));
        }
    }

    for (const auto& g : report.groups) {
        if (g.value.has_value() && *g.value > report.disc_threshold) {
            CorrectionDirective bottleneck;
            bottleneck.kind = DirectiveKind::CreateResourceBottleneck;
            bottleneck.resource = g.max_member;
            bottleneck.factor = 0.5;
            bottleneck.rationale = {"high_dispersion"};
            out.push_back(std::move(bottleneck));

            CorrectionDirective weights;
            weights.kind = DirectiveKind::AdjustNsiWeights;
            weights.resource = g.max_member;
            weights.factor = 0.8;
            weights.rationale = {"high_dispersion"};
            out.push_back(std::move(weights));
        } else if (g.idle_group) {
            CorrectionDirective d;
            d.kind = DirectiveKind::AdjustNsiWeights;
            d.resource = g.members.front();
            d.factor = 1.25;
            d.rationale = {"idle_group"};
            out.push_back(std::move(d));
        }
    }

    if (!report.kl_history.empty() &&
        *std::min_element(report.kl_history.begin(), report.kl_history.end()) <
            report.kl_threshold) {
        regenerate_reasons.push_back("low_novelty");
    }
    if (report.convergence.too_fast) {
        regenerate_reasons.push_back("too_fast");
    }
    if (report.convergence.not_reached) {
        CorrectionDirective d;
        d.kind = report.scenario_is_composite ? DirectiveKind::DecomposeScenario
                                              : DirectiveKind::ReduceDifficulty;
        d.factor = 0.75;
        d.rationale = {"not_converged"};
        out.push_back(std::move(d));
    }

    if (!regenerate_reasons.empty()) {
        CorrectionDirective d;
        d.kind = DirectiveKind::RegenerateScenario;
        d.rationale = std::move(regenerate_reasons);
        out.push_back(std::move(d));
    }
    return out;
}

// ---------------------------------------------------------------------------

std::string to_string(DirectiveKind k) {
    switch (k) {
        case DirectiveKind::RegenerateScenario: return "regenerate_scenario";
        case DirectiveKind::AdjustNsiWeights: return "adjust_nsi_weights";
        case DirectiveKind::RelaxIntentConstraint: return "relax_intent_constraint";
        case DirectiveKind::CreateResourceBottleneck: return "create_resource_bottleneck";
        case DirectiveKind::DecomposeScenario: return "decompose_scenario";
        case DirectiveKind::ReduceDifficulty: return "reduce_difficulty";
    }
    throw std::logic_error("unknown directive kind");
}

DirectiveKind directive_kind_from_string(const std::string& s) {
    if (s == "regenerate_scenario") return DirectiveKind::RegenerateScenario;
    if (s == "adjust_nsi_weights") return DirectiveKind::AdjustNsiWeights;
    if (s == "relax_intent_constraint") return DirectiveKind::RelaxIntentConstraint;
    if (s == "create_resource_bottleneck") return DirectiveKind::CreateResourceBottleneck;
    if (s == "decompose_scenario") return DirectiveKind::DecomposeScenario;
    if (s == "reduce_difficulty") return DirectiveKind::ReduceDifficulty;
    throw std::invalid_argument("unknown directive kind: " + s);
}

nlohmann::json to_json(const SatReport& r) {
    return nlohmann::json{{"sat", r.sat},
                          {"names", r.names},
                          {"flag_threshold", r.flag_threshold},
                          {"low_sat", r.low_sat},
                          {"low_dims", r.low_dims}};
}

nlohmann::json to_json(const DispersionReport& r) {
    nlohmann::json j{{"members", r.members},
                     {"member_means", r.member_means},
                     {"idle_group", r.idle_group},
                     {"max_member", r.max_member},
                     {"min_member", r.min_member}};
    j["value"] = r.value.has_value() ? nlohmann::json(*r.value) : nlohmann::json(nullptr);
    return j;
}

nlohmann::json to_json(const ConvergenceReport& r) {
    nlohmann::json j{{"not_reached", r.not_reached},
                     {"too_fast", r.too_fast},
                     {"fast_floor", r.fast_floor},
                     {"threshold", r.threshold}};
    j["episode"] = r.episode.has_value() ? nlohmann::json(*r.episode) : nlohmann::json(nullptr);
    return j;
}

nlohmann::json to_json(const MetricsReport& r) {
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : r.groups) groups.push_back(to_json(g));
    return nlohmann::json{{"sat", to_json(r.sat)},
                          {"groups", groups},
                          {"kl_history", r.kl_history},
                          {"convergence", to_json(r.convergence)},
                          {"scenario_is_composite", r.scenario_is_composite},
                          {"regenerate_sat_floor", r.regenerate_sat_floor},
                          {"disc_threshold", r.disc_threshold},
                          {"kl_threshold", r.kl_threshold},
                          {"flags", r.flags()}};
}

nlohmann::json to_json(const CorrectionDirective& d) {
    return nlohmann::json{{"kind", to_string(d.kind)},
                          {"resource", d.resource},
                          {"metric_dim", d.metric_dim},
                          {"factor", d.factor},
                          {"rationale", d.rationale}};
}

CorrectionDirective directive_from_json(const nlohmann::json& j) {
    CorrectionDirective d;
    d.kind = directive_kind_from_string(j.at("kind").get<std::string>());
    d.resource = j.at("resource").get<std::string>();
    d.metric_dim = j.at("metric_dim").get<std::size_t>();
    d.factor = j.at("factor").get<double>();
    d.rationale = j.at("rationale").get<std::vector<std::string>>();
    return d;
}

}  // namespace igaa
