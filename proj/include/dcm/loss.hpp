#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "dcm/dataset.hpp"
#include "dcm/model.hpp"

namespace dcm {

struct LossConfig {
    double margin = 1.0;         ///< inter-category hinge margin
    double window_months = 4.0;  ///< same-category pairs this close in time are not pushed apart
    double decay = 0.1;          ///< λ in ρ(Δt) = 1 − exp(−|Δt|·λ)
    double intra_margin = 1.0;
    bool intra_enabled = true;   ///< false gives the static / per-bin objective
    std::size_t k_neg = 1;       ///< inter negatives per anchor
    std::size_t k_pos = 1;       ///< temporally distant same-category partners per anchor

    void validate() const;
};

/// [m − s_ap + s_an]₊
double hinge(double margin, double s_ap, double s_an);

/// 1 − exp(−|t_a − t_b|·λ), times in months.
double rho(double t_a, double t_b, double lambda);

/// Cross-category term: the anchor's own cross-modal counterpart must beat the negative by the margin.
double inter_loss(double s_counterpart, double s_negative, const LossConfig& cfg);

/// Same-category term between an anchor and a partner `dt_months` apart. Zero inside the
/// window; outside it the partner takes the negative slot against the anchor's counterpart and
/// the hinge is weighted by ρ.
double intra_loss(double dt_months, double s_counterpart, double s_partner, const LossConfig& cfg);

struct EmbeddingRef {
    std::size_t member = 0;  ///< position inside the batch
    Modality modality = Modality::Visual;
    friend bool operator==(const EmbeddingRef&, const EmbeddingRef&) = default;
};

enum class TripletKind { Inter, Intra };

/// Inter: positive is the anchor's counterpart and negative a different-category element.
/// Intra: positive is a different same-category instance (in the opposite modality); it is
/// scored against the anchor's counterpart, so `negative` is empty.
struct Triplet {
    EmbeddingRef anchor;
    EmbeddingRef positive;
    std::optional<EmbeddingRef> negative;
    TripletKind kind = TripletKind::Inter;
    friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// Batch members with the time inputs the loss needs.
struct Batch {
    std::vector<const Instance*> members;
    std::vector<double> time_input;  ///< value fed to the time layer (0 for static models)
    std::vector<double> months;      ///< months since the timespan start, for window and ρ

    std::size_t size() const { return members.size(); }
};

Batch make_batch(const Dataset& ds, std::span<const std::size_t> indices, const Timespan& span,
                 bool static_time = false);

/// For every member and both anchor modalities: up to k_neg different-category negatives and
/// (when intra is enabled) up to k_pos same-category partners outside the window, drawn
/// uniformly without replacement from the batch.
std::vector<Triplet> sample_batch_triplets(const Batch& batch, Rng& rng, const LossConfig& cfg);

struct LossValue {
    double total = 0.0;
    double inter_part = 0.0;
    double intra_part = 0.0;
    std::size_t active_triplet_count = 0;  ///< triplets with a positive hinge
};

/// Sum of the inter and intra terms over `triplets`. When `grads` is non-null it is reset and
/// filled with the exact gradient of the total with respect to every parameter.
LossValue batch_loss_and_grads(const ModelParams& p, const Batch& batch, std::span<const Triplet> triplets,
                               const LossConfig& cfg, ModelParams* grads);

} // namespace dcm
