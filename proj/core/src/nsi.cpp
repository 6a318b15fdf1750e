#include "igaa/nsi.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace igaa {

std::optional<std::size_t> ResourceCatalog::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (entries[i].name == name) return i;
    return std::nullopt;
}

void ResourceCatalog::validate() const {
    std::set<std::string> seen;
    for (const auto& e : entries) {
        if (e.name.empty()) throw std::invalid_argument("resource with empty name");
        if (!seen.insert(e.name).second)
            throw std::invalid_argument("duplicate resource name: " + e.name);
        if (!(e.lower >= 0.0) || !(e.upper > e.lower))
            throw std::invalid_argument("resource " + e.name + " has bad bounds");
    }
}

std::optional<std::size_t> ServiceCatalog::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (entries[i].name == name) return i;
    return std::nullopt;
}

void ServiceCatalog::validate() const {
    std::set<std::string> seen;
    for (const auto& e : entries) {
        if (e.name.empty()) throw std::invalid_argument("service with empty name");
        if (!seen.insert(e.name).second)
            throw std::invalid_argument("duplicate service name: " + e.name);
        if (e.template_lo.size() != e.template_hi.size())
            throw std::invalid_argument("service " + e.name + " template bound size mismatch");
        for (std::size_t k = 0; k < e.template_lo.size(); ++k)
            if (e.template_lo[k] > e.template_hi[k])
                throw std::invalid_argument("service " + e.name + " template lo > hi");
        if (!(e.base_time > 0.0))
            throw std::invalid_argument("service " + e.name + " base_time must be positive");
        if (e.data_fraction < 0.0 || e.data_fraction > 1.0)
            throw std::invalid_argument("service " + e.name + " data_fraction outside [0,1]");
        if (!(e.dataset_weight > 0.0) || !std::isfinite(e.dataset_weight))
            throw std::invalid_argument("service " + e.name +
                                        " dataset_weight must be positive and finite");
    }
}

void validate_intent(const IntentVector& intent, const std::vector<IntentDim>& registry) {
    if (intent.dim() != registry.size())
        throw std::invalid_argument("intent dimension " + std::to_string(intent.dim()) +
                                    " does not match registry size " +
                                    std::to_string(registry.size()));
    for (std::size_t k = 0; k < registry.size(); ++k) {
        const double v = intent.values[k];
        const auto& d = registry[k];
        if (!std::isfinite(v))
            throw std::invalid_argument("intent dim " + d.label + " is not finite");
        if (d.is_flag) {
            if (v != 0.0 && v != 1.0)
                throw std::invalid_argument("intent flag " + d.label + " must be 0 or 1");
        } else if (v < d.lo || v > d.hi) {
            throw std::invalid_argument("intent dim " + d.label + " outside [" +
                                        std::to_string(d.lo) + "," + std::to_string(d.hi) + "]");
        }
    }
}

NsiMatrix::NsiMatrix(std::size_t resources, std::size_t services, std::size_t intent_dim,
                     std::vector<double> coefficients,
                     std::uint64_t resource_catalog_version,
                     std::uint64_t service_catalog_version, std::uint64_t version)
    : m_(resources),
      n_(services),
      p_(intent_dim),
      coef_(std::move(coefficients)),
      res_version_(resource_catalog_version),
      svc_version_(service_catalog_version),
      version_(version) {
    if (coef_.size() != m_ * n_ * p_)
        throw std::invalid_argument("coefficient count " + std::to_string(coef_.size()) +
                                    " does not match shape " + std::to_string(m_) + "x" +
                                    std::to_string(n_) + "x" + std::to_string(p_));
}

double NsiMatrix::at(std::size_t r, std::size_t s, std::size_t k) const {
    if (r >= m_ || s >= n_ || k >= p_) throw std::out_of_range("tensor index out of range");
    return coef_[offset(r, s, k)];
}

std::vector<double> NsiMatrix::map_intent_raw(std::size_t service_type,
                                              const IntentVector& intent) const {
    if (service_type >= n_)
        throw std::invalid_argument("service index " + std::to_string(service_type) +
                                    " out of range for " + std::to_string(n_) + " services");
    if (intent.dim() != p_)
        throw std::invalid_argument("intent dim " + std::to_string(intent.dim()) +
                                    " does not match tensor intent dim " + std::to_string(p_));
    std::vector<double> out(m_, 0.0);
    for (std::size_t r = 0; r < m_; ++r) {
        double acc = 0.0;
        const double* row = coef_.data() + offset(r, service_type, 0);
        for (std::size_t k = 0; k < p_; ++k) acc += row[k] * intent.values[k];
        out[r] = acc;
    }
    return out;
}

ResourceVector NsiMatrix::map_intent(std::size_t service_type, const IntentVector& intent,
                                     const ResourceCatalog& catalog, bool* clamped) const {
    if (catalog.size() != m_)
        throw std::invalid_argument("resource catalog size does not match tensor rows");
    if (catalog.version != res_version_)
        throw std::invalid_argument("resource catalog version " +
                                    std::to_string(catalog.version) +
                                    " does not match tensor's expected version " +
                                    std::to_string(res_version_));
    std::vector<double> raw = map_intent_raw(service_type, intent);
    bool any_clamp = false;
    for (std::size_t r = 0; r < m_; ++r) {
        const double hi = catalog.entries[r].upper;
        if (raw[r] < 0.0) {
            raw[r] = 0.0;
            any_clamp = true;
        } else if (raw[r] > hi) {
            raw[r] = hi;
            any_clamp = true;
        }
    }
    if (clamped) *clamped = any_clamp;
    ResourceVector rv;
    rv.values = std::move(raw);
    rv.catalog_version = catalog.version;
    return rv;
}

NsiMatrix NsiMatrix::expand_resources(const std::vector<double>& new_rows,
                                      std::size_t new_resource_count,
                                      std::uint64_t new_resource_catalog_version,
                                      const std::vector<double>& row_scale) const {
    if (new_rows.size() != new_resource_count * n_ * p_)
        throw std::invalid_argument("new row block has wrong element count");
    if (!row_scale.empty() && row_scale.size() != m_)
        throw std::invalid_argument("row scale must have one factor per existing resource");
    if (new_resource_catalog_version <= res_version_)
        throw std::invalid_argument("resource catalog version must advance on expansion");
    const std::size_t m2 = m_ + new_resource_count;
    std::vector<double> coef(m2 * n_ * p_, 0.0);
    for (std::size_t r = 0; r < m_; ++r) {
        const double g = row_scale.empty() ? 1.0 : row_scale[r];
        for (std::size_t s = 0; s < n_; ++s)
            for (std::size_t k = 0; k < p_; ++k)
                coef[(r * n_ + s) * p_ + k] = g * coef_[offset(r, s, k)];
    }
    for (std::size_t r = 0; r < new_resource_count; ++r)
        for (std::size_t s = 0; s < n_; ++s)
            for (std::size_t k = 0; k < p_; ++k)
                coef[((m_ + r) * n_ + s) * p_ + k] = new_rows[(r * n_ + s) * p_ + k];
    return NsiMatrix(m2, n_, p_, std::move(coef), new_resource_catalog_version, svc_version_,
                     version_ + 1);
}

NsiMatrix NsiMatrix::expand_services(const std::vector<double>& new_cols,
                                     std::size_t new_service_count,
                                     std::uint64_t new_service_catalog_version) const {
    if (new_cols.size() != m_ * new_service_count * p_)
        throw std::invalid_argument("new column block has wrong element count");
    if (new_service_catalog_version <= svc_version_)
        throw std::invalid_argument("service catalog version must advance on expansion");
    const std::size_t n2 = n_ + new_service_count;
    std::vector<double> coef(m_ * n2 * p_, 0.0);
    for (std::size_t r = 0; r < m_; ++r) {
        for (std::size_t s = 0; s < n_; ++s)
            for (std::size_t k = 0; k < p_; ++k)
                coef[(r * n2 + s) * p_ + k] = coef_[offset(r, s, k)];
        for (std::size_t s = 0; s < new_service_count; ++s)
            for (std::size_t k = 0; k < p_; ++k)
                coef[(r * n2 + n_ + s) * p_ + k] = new_cols[(r * new_service_count + s) * p_ + k];
    }
    return NsiMatrix(m_, n2, p_, std::move(coef), res_version_, new_service_catalog_version,
                     version_ + 1);
}

std::vector<double> NsiMatrix::init_service_submatrix(
    const std::vector<std::size_t>& similar_services,
    const std::vector<double>& blend_weights) const {
    if (similar_services.empty())
        throw std::invalid_argument("need at least one similar service to blend from");
    if (similar_services.size() != blend_weights.size())
        throw std::invalid_argument("blend weight count does not match similar service count");
    double total = 0.0;
    for (double w : blend_weights) {
        if (w < 0.0) throw std::invalid_argument("blend weights must be non-negative");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("blend weights must sum to 1");
    for (std::size_t s : similar_services)
        if (s >= n_) throw std::invalid_argument("similar service index out of range");
    std::vector<double> block(m_ * p_, 0.0);
    for (std::size_t j = 0; j < similar_services.size(); ++j) {
        const std::size_t s = similar_services[j];
        const double w = blend_weights[j];
        for (std::size_t r = 0; r < m_; ++r)
            for (std::size_t k = 0; k < p_; ++k) block[r * p_ + k] += w * coef_[offset(r, s, k)];
    }
    return block;
}

MatrixValidationReport NsiMatrix::validate(const ResourceCatalog& resources,
                                           const ServiceCatalog& services) const {
    MatrixValidationReport report;
    if (resources.size() != m_)
        report.issues.push_back({"shape", "resource catalog has " +
                                              std::to_string(resources.size()) +
                                              " entries, tensor has " + std::to_string(m_) +
                                              " rows"});
    if (services.size() != n_)
        report.issues.push_back({"shape", "service catalog has " +
                                              std::to_string(services.size()) +
                                              " entries, tensor has " + std::to_string(n_) +
                                              " columns"});
    if (resources.version != res_version_)
        report.issues.push_back({"version", "resource catalog version " +
                                                std::to_string(resources.version) +
                                                " != tensor's " + std::to_string(res_version_)});
    if (services.version != svc_version_)
        report.issues.push_back({"version", "service catalog version " +
                                                std::to_string(services.version) +
                                                " != tensor's " + std::to_string(svc_version_)});
    for (std::size_t i = 0; i < coef_.size(); ++i) {
        if (!std::isfinite(coef_[i])) {
            report.issues.push_back({"finiteness", "coefficient " + std::to_string(i) +
                                                       " is not finite"});
            break;
        }
    }
    // A column of all-negative coefficients can never produce demand; report it.
    for (std::size_t s = 0; s < n_; ++s) {
        bool any_positive = false;
        for (std::size_t r = 0; r < m_ && !any_positive; ++r)
            for (std::size_t k = 0; k < p_; ++k)
                if (coef_[offset(r, s, k)] > 0.0) {
                    any_positive = true;
                    break;
                }
        if (!any_positive)
            report.issues.push_back(
                {"negativity", "service column " + std::to_string(s) +
                                   " has no positive coefficient; it cannot express demand"});
    }
    return report;
}

nlohmann::json to_json(const ResourceCatalog& c) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : c.entries) {
        entries.push_back({{"name", e.name},
                           {"unit", e.unit},
                           {"lower", e.lower},
                           {"upper", e.upper},
                           {"similar_group", e.similar_group},
                           {"role", static_cast<int>(e.role)}});
    }
    return {{"version", c.version}, {"entries", entries}};
}

nlohmann::json to_json(const ServiceCatalog& c) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : c.entries) {
        nlohmann::json fg = nlohmann::json::array();
        for (const auto& f : e.fine_grained)
            fg.push_back({{"metric", f.metric}, {"comparator", f.comparator}});
        entries.push_back({{"name", e.name},
                           {"template_lo", e.template_lo},
                           {"template_hi", e.template_hi},
                           {"fine_grained", fg},
                           {"base_time", e.base_time},
                           {"base_throughput", e.base_throughput},
                           {"base_accuracy", e.base_accuracy},
                           {"data_fraction", e.data_fraction},
                           {"dataset_weight", e.dataset_weight}});
    }
    return {{"version", c.version}, {"entries", entries}};
}

nlohmann::json to_json(const NsiMatrix& m) {
    return {{"resources", m.resources()},
            {"services", m.services()},
            {"intent_dim", m.intent_dim()},
            {"version", m.version()},
            {"resource_catalog_version", m.resource_catalog_version()},
            {"service_catalog_version", m.service_catalog_version()},
            {"coefficients", m.coefficients()}};
}

ResourceCatalog resource_catalog_from_json(const nlohmann::json& j) {
    ResourceCatalog c;
    c.version = j.at("version").get<std::uint64_t>();
    for (const auto& e : j.at("entries")) {
        ResourceEntry r;
        r.name = e.at("name").get<std::string>();
        r.unit = e.at("unit").get<std::string>();
        r.lower = e.at("lower").get<double>();
        r.upper = e.at("upper").get<double>();
        r.similar_group = e.value("similar_group", -1);
        r.role = static_cast<ResourceRole>(e.value("role", 0));
        c.entries.push_back(std::move(r));
    }
    c.validate();
    return c;
}

ServiceCatalog service_catalog_from_json(const nlohmann::json& j) {
    ServiceCatalog c;
    c.version = j.at("version").get<std::uint64_t>();
    for (const auto& e : j.at("entries")) {
        ServiceEntry s;
        s.name = e.at("name").get<std::string>();
        s.template_lo = e.at("template_lo").get<std::vector<double>>();
        s.template_hi = e.at("template_hi").get<std::vector<double>>();
        if (e.contains("fine_grained"))
            for (const auto& f : e.at("fine_grained"))
                s.fine_grained.push_back({f.at("metric").get<std::string>(),
                                          f.at("comparator").get<std::string>()});
        s.base_time = e.value("base_time", 1.0);
        s.base_throughput = e.value("base_throughput", 10.0);
        s.base_accuracy = e.value("base_accuracy", 0.95);
        s.data_fraction = e.value("data_fraction", 0.0);
        s.dataset_weight = e.value("dataset_weight", 1.0);
        c.entries.push_back(std::move(s));
    }
    c.validate();
    return c;
}

NsiMatrix nsi_matrix_from_json(const nlohmann::json& j) {
    return NsiMatrix(j.at("resources").get<std::size_t>(), j.at("services").get<std::size_t>(),
                     j.at("intent_dim").get<std::size_t>(),
                     j.at("coefficients").get<std::vector<double>>(),
                     j.at("resource_catalog_version").get<std::uint64_t>(),
                     j.at("service_catalog_version").get<std::uint64_t>(),
                     j.at("version").get<std::uint64_t>());
}

}  // namespace igaa
