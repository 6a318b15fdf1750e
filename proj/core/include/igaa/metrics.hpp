#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "igaa/rcetl.hpp"

namespace igaa {

// Per-fine-grained-intent satisfaction rates over an evaluation set.
struct SatReport {
    std::vector<double> sat;            // fixed fine-grained metric order
    std::vector<std::string> names;
    double flag_threshold = 0.75;
    bool low_sat = false;               // any rate strictly below the threshold
    std::vector<std::size_t> low_dims;  // which metrics flagged
};

// Sat_n = (satisfied outcomes for metric n) / (evaluated requests). Rows of
// `met` are per-request met/unmet flags in the fixed metric order. Rates at
// exactly the threshold do not flag.
SatReport intent_satisfaction(const std::vector<std::vector<bool>>& met,
                              double flag_threshold = 0.75);

// Utilization dispersion across one similar-resource group.
struct DispersionReport {
    std::vector<std::string> members;
    std::vector<double> member_means;  // node-mean utilization per member
    std::optional<double> value;       // population std / mean; empty if idle
    bool idle_group = false;           // group mean is zero
    std::string max_member;            // highest node-mean utilization
    std::string min_member;
};

// utilization[resource][node] are mean utilizations with -1 marking nodes
// without that resource; `group` indexes the resources forming one declared
// similar group (size >= 2). Scale-invariant in the utilizations.
DispersionReport dispersion(const std::vector<std::vector<double>>& utilization,
                            const std::vector<std::size_t>& group,
                            const std::vector<std::string>& resource_names);

// Product-Gaussian kernel density estimate over fixed-dimension samples.
// Bandwidths default to Scott's rule per dimension (sample standard
// deviation times n^(-1/(d+4)), floored at 1e-3 for degenerate dimensions).
class KdeDensity {
public:
    explicit KdeDensity(std::vector<std::vector<double>> samples,
                        std::vector<double> bandwidth = {});

    double density(const std::vector<double>& x) const;
    double log_density(const std::vector<double>& x) const;
    const std::vector<double>& bandwidth() const { return h_; }
    std::size_t sample_count() const { return samples_.size(); }
    std::size_t dim() const { return dim_; }

private:
    std::vector<std::vector<double>> samples_;
    std::vector<double> h_;
    std::size_t dim_ = 0;
    double log_norm_ = 0.0;  // log of the product kernel normalizer
};

// Monte-Carlo divergence of the new sample set against an older density:
// mean over the new samples of log p_new - log(p_old + eps), where p_new is
// the KDE of the new samples themselves.
double kl_divergence(const std::vector<std::vector<double>>& new_samples,
                     const KdeDensity& p_old, double eps = 1e-9);

// Episodes needed to push every fine-grained satisfaction rate above the
// threshold on the periodic greedy evals of a training trace.
struct ConvergenceReport {
    std::optional<std::size_t> episode;
    bool not_reached = false;
    bool too_fast = false;  // reached before fast_floor episodes
    std::size_t fast_floor = 20;
    double threshold = 0.90;
};

ConvergenceReport convergence_steps(const TrainTrace& trace, double threshold = 0.90,
                                    std::size_t fast_floor = 20);

// One step's full evaluation: satisfaction, per-group dispersion, novelty
// against history, convergence, and the thresholds the verdict rules use.
struct MetricsReport {
    SatReport sat;
    std::vector<DispersionReport> groups;
    std::vector<double> kl_history;  // divergence vs each historical intent set
    ConvergenceReport convergence;
    bool scenario_is_composite = false;
    double regenerate_sat_floor = 0.25;  // below: scenario considered infeasible
    double disc_threshold = 0.4;
    double kl_threshold = 0.5;

    std::vector<std::string> flags() const;
};

nlohmann::json to_json(const SatReport& r);
nlohmann::json to_json(const DispersionReport& r);
nlohmann::json to_json(const ConvergenceReport& r);
nlohmann::json to_json(const MetricsReport& r);

enum class DirectiveKind {
    RegenerateScenario,
    AdjustNsiWeights,
    RelaxIntentConstraint,
    CreateResourceBottleneck,
    DecomposeScenario,
    ReduceDifficulty,
};

std::string to_string(DirectiveKind k);
DirectiveKind directive_kind_from_string(const std::string& s);

struct CorrectionDirective {
    DirectiveKind kind = DirectiveKind::RegenerateScenario;
    std::string resource;       // AdjustNsiWeights / CreateResourceBottleneck
    std::size_t metric_dim = 0; // RelaxIntentConstraint: fine-grained metric index
    double factor = 1.0;
    std::vector<std::string> rationale;  // triggering flags, never empty
};

nlohmann::json to_json(const CorrectionDirective& d);
CorrectionDirective directive_from_json(const nlohmann::json& j);

// Deterministic rule table mapping report flags to directives. Every flag is
// cited by at least one directive and every directive cites at least one
// flag; a clean report yields an empty list.
std::vector<CorrectionDirective> correction_verdict(const MetricsReport& report);

}  // namespace igaa
