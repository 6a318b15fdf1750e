#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace igaa {

// Fixed, registry-declared meaning of one intent vector dimension.
struct IntentDim {
    std::string label;
    double lo = 0.0;
    double hi = 1.0;
    bool is_flag = false;  // flags must be exactly 0 or 1
};

// Declarative QoS requirement as a fixed-semantics numeric vector. Dimension
// meanings come from the registry carried in dim_labels, not from position
// conventions in calling code.
struct IntentVector {
    std::vector<double> values;
    std::vector<std::string> dim_labels;

    std::size_t dim() const { return values.size(); }
};

// Per-resource-type demand quantities, in the units of the resource catalog
// the vector was produced against.
struct ResourceVector {
    std::vector<double> values;
    std::uint64_t catalog_version = 0;

    std::size_t dim() const { return values.size(); }
};

enum class ResourceRole { Compute, Storage, Offload };

struct ResourceEntry {
    std::string name;
    std::string unit;
    double lower = 0.0;   // smallest meaningful demand
    double upper = 1.0;   // largest demand a mapping may emit
    int similar_group = -1;
    ResourceRole role = ResourceRole::Compute;
};

struct ResourceCatalog {
    std::vector<ResourceEntry> entries;
    std::uint64_t version = 0;

    std::size_t size() const { return entries.size(); }
    std::optional<std::size_t> index_of(const std::string& name) const;
    void validate() const;  // throws std::invalid_argument on bad bounds/dupes
};

// One measurable QoS dimension of a service, checked against execution
// outcomes ("latency" <= target, "throughput" >= target, ...).
struct FineGrainedIntentDef {
    std::string metric;
    std::string comparator;  // "<=", ">=", "=="
};

struct ServiceEntry {
    std::string name;
    // Per intent-dimension sampling range for request synthesis.
    std::vector<double> template_lo;
    std::vector<double> template_hi;
    std::vector<FineGrainedIntentDef> fine_grained;
    double base_time = 1.0;        // seconds of work at unit allocation
    double base_throughput = 10.0;
    double base_accuracy = 0.95;
    double data_fraction = 0.0;    // share of compute work an offload unit can absorb
    double dataset_weight = 1.0;   // relative draw count in synthesized datasets
};

struct ServiceCatalog {
    std::vector<ServiceEntry> entries;
    std::uint64_t version = 0;

    std::size_t size() const { return entries.size(); }
    std::optional<std::size_t> index_of(const std::string& name) const;
    void validate() const;
};

struct MatrixIssue {
    std::string kind;  // "shape", "version", "finiteness", "negativity"
    std::string detail;
};

struct MatrixValidationReport {
    std::vector<MatrixIssue> issues;
    bool clean() const { return issues.empty(); }
};

// Versioned m x n x p mapping tensor from intent space to resource demand,
// one m x p submatrix per service type. Immutable after construction: every
// expansion returns a new value with the version advanced.
class NsiMatrix {
public:
    NsiMatrix() = default;
    NsiMatrix(std::size_t resources, std::size_t services, std::size_t intent_dim,
              std::vector<double> coefficients,
              std::uint64_t resource_catalog_version,
              std::uint64_t service_catalog_version,
              std::uint64_t version = 1);

    std::size_t resources() const { return m_; }
    std::size_t services() const { return n_; }
    std::size_t intent_dim() const { return p_; }
    std::uint64_t version() const { return version_; }
    std::uint64_t resource_catalog_version() const { return res_version_; }
    std::uint64_t service_catalog_version() const { return svc_version_; }

    double at(std::size_t r, std::size_t s, std::size_t k) const;
    const std::vector<double>& coefficients() const { return coef_; }

    // Demand mapping for one service type. Results are clamped elementwise to
    // [0, upper bound]; *clamped reports whether any component was clipped.
    ResourceVector map_intent(std::size_t service_type, const IntentVector& intent,
                              const ResourceCatalog& catalog,
                              bool* clamped = nullptr) const;

    // Unclamped mapping, used by linearity checks and by callers that handle
    // range enforcement themselves.
    std::vector<double> map_intent_raw(std::size_t service_type,
                                       const IntentVector& intent) const;

    // Row-dimension growth: new_rows is an m' x n x p tensor appended below
    // the (optionally per-row rescaled) existing tensor.
    NsiMatrix expand_resources(const std::vector<double>& new_rows,
                               std::size_t new_resource_count,
                               std::uint64_t new_resource_catalog_version,
                               const std::vector<double>& row_scale = {}) const;

    // Column-dimension growth: new_cols is an m x n' x p tensor appended to
    // the right of the existing tensor. Existing columns are never touched.
    NsiMatrix expand_services(const std::vector<double>& new_cols,
                              std::size_t new_service_count,
                              std::uint64_t new_service_catalog_version) const;

    // Convex blend of existing services' submatrices, used to seed the
    // submatrix of a newly introduced service from declared similar ones.
    std::vector<double> init_service_submatrix(
        const std::vector<std::size_t>& similar_services,
        const std::vector<double>& blend_weights) const;

    MatrixValidationReport validate(const ResourceCatalog& resources,
                                    const ServiceCatalog& services) const;

private:
    std::size_t offset(std::size_t r, std::size_t s, std::size_t k) const {
        return (r * n_ + s) * p_ + k;
    }

    std::size_t m_ = 0, n_ = 0, p_ = 0;
    std::vector<double> coef_;  // row-major [resource][service][intent_dim]
    std::uint64_t res_version_ = 0;
    std::uint64_t svc_version_ = 0;
    std::uint64_t version_ = 0;
};

void validate_intent(const IntentVector& intent, const std::vector<IntentDim>& registry);

nlohmann::json to_json(const ResourceCatalog& c);
nlohmann::json to_json(const ServiceCatalog& c);
nlohmann::json to_json(const NsiMatrix& m);
ResourceCatalog resource_catalog_from_json(const nlohmann::json& j);
ServiceCatalog service_catalog_from_json(const nlohmann::json& j);
NsiMatrix nsi_matrix_from_json(const nlohmann::json& j);

}  // namespace igaa
