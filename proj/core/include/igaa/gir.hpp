#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "igaa/net.hpp"
#include "igaa/nsi.hpp"
#include "igaa/rng.hpp"

namespace igaa {

// One request-data record for generative replay: which service it addressed,
// the declared intent, the mapped demand, and the scenario it came from.
struct GirRecord {
    std::size_t service_type = 0;
    std::vector<double> intent;
    std::vector<double> resource;
    std::string tag;
    bool synthetic = false;
};

nlohmann::json to_json(const GirRecord& r);
GirRecord gir_record_from_json(const nlohmann::json& j);

// Invertible [0,1] feature mapping: service index as one-hot, intent and
// resource components scaled by their declared ranges.
struct GirNormalizer {
    std::size_t services = 0;
    std::vector<std::pair<double, double>> intent_ranges;
    std::vector<std::pair<double, double>> resource_ranges;

    std::size_t dim() const {
        return services + intent_ranges.size() + resource_ranges.size();
    }
    std::vector<double> encode(const GirRecord& r) const;
    // Inverse mapping; outputs are clamped into the declared ranges and the
    // service is the largest one-hot component.
    GirRecord decode(const std::vector<double>& features) const;
};

GirNormalizer make_gir_normalizer(std::size_t services, const std::vector<IntentDim>& registry,
                                  const ResourceCatalog& catalog);

// Plain multilayer perceptron with rectified hidden layers and a linear
// output, sharing the Affine primitive with the scheduling net.
struct Mlp {
    std::vector<Affine> layers;

    std::size_t in_dim() const { return layers.front().in; }
    std::size_t out_dim() const { return layers.back().out; }
    std::vector<double> forward(const std::vector<double>& x) const;
};

Mlp make_mlp(const std::vector<std::size_t>& widths, Rng& rng);

// Contrastive replay model: two encoders map records to Gaussian posteriors
// in latent space, one generator reconstructs records from the stacked
// latent (old half first). Trained flags gate replay synthesis.
struct CvaeModel {
    GirNormalizer norm;
    std::size_t d_z = 8;
    Mlp e_old;  // dim -> hidden -> hidden -> 2*d_z  (mean | log-variance)
    Mlp e_new;
    Mlp gen;  // 2*d_z -> hidden -> hidden -> dim
    bool old_trained = false;
    bool new_trained = false;
    bool gen_trained = false;
};

CvaeModel make_cvae(const GirNormalizer& norm, std::size_t d_z, std::size_t hidden,
                    std::uint64_t seed);

nlohmann::json to_json(const CvaeModel& m);
CvaeModel cvae_from_json(const nlohmann::json& j);

enum class CvaePhase {
    OldEncoder,  // trains e_old and gen; e_new untouched
    NewEncoder,  // trains e_new and gen; e_old untouched
    Generator,   // trains gen only; balanced old/new batches required
};

struct CvaeGrads {
    std::vector<Affine> e_old;
    std::vector<Affine> e_new;
    std::vector<Affine> gen;
};

CvaeGrads zero_cvae_grads(const CvaeModel& m);

// Loss (MSE over feature dims + closed-form Gaussian KL per latent half) and
// parameter gradients for one batch under the given phase. The
// reparameterization draws are a pure function of eps_seed and batch order,
// so the loss is deterministic in the parameters — finite-difference
// checkable. In the Generator phase both record lists must be non-empty
// (balanced-mix contract); the other phases use old_batch or new_batch alone.
double cvae_loss_and_grads(const CvaeModel& m, const std::vector<GirRecord>& old_batch,
                           const std::vector<GirRecord>& new_batch, CvaePhase phase,
                           std::uint64_t eps_seed, CvaeGrads* grads);

struct CvaeTrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
};

// Three-phase training schedule. Each phase returns the per-epoch mean loss and
// sets the corresponding trained flag.
std::vector<double> train_old_encoder(CvaeModel& m, const std::vector<GirRecord>& old_records,
                                      const CvaeTrainConfig& cfg);
std::vector<double> train_new_encoder(CvaeModel& m, const std::vector<GirRecord>& new_records,
                                      const CvaeTrainConfig& cfg);
std::vector<double> train_generator(CvaeModel& m, const std::vector<GirRecord>& old_records,
                                    const std::vector<GirRecord>& new_records,
                                    const CvaeTrainConfig& cfg);

// Stacked latent of one record: concat(sample from e_old, sample from
// e_new). `origin` is carried as metadata for balanced batching; both
// encoders process the record either way.
std::vector<double> stack_features(const CvaeModel& m, const GirRecord& r, bool from_old,
                                   std::uint64_t seed);

// Draws standard-normal stacked latents, decodes through the generator, and
// denormalizes. service_tags maps each service index to the scenario tag its
// synthetic records carry; when tag_filter is non-empty, records are
// rejection-sampled until `count` carry that tag (attempt cap 200 x count).
std::vector<GirRecord> synthesize_replay(const CvaeModel& m, std::size_t count,
                                         const std::vector<std::string>& service_tags,
                                         const std::string& tag_filter, std::uint64_t seed);

// All fresh records plus a seeded subsample of replay records sized so that
// replay makes up `replay_fraction` of the result (capped by availability),
// then a seeded shuffle. Provenance flags are preserved.
std::vector<GirRecord> mix_dataset(const std::vector<GirRecord>& fresh,
                                   const std::vector<GirRecord>& replay, double replay_fraction,
                                   std::uint64_t seed);

}  // namespace igaa
