#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "dcm/dataset.hpp"
#include "dcm/loss.hpp"
#include "dcm/model.hpp"

namespace dcm {

struct TrainConfig {
    double learning_rate = 0.005;
    double momentum = 0.9;
    std::size_t epochs = 25;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    LossConfig loss;
    ModelConfig model;

    void validate() const;
};

/// The same configuration with the time branch frozen at 0 and the intra term disabled.
TrainConfig static_variant(TrainConfig cfg);

struct EpochRecord {
    std::size_t epoch = 0;  ///< 1-based
    double train_loss = 0.0;  ///< mean batch loss
    double val_loss = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    std::size_t selected_epoch = 0;
    double wall_seconds = 0.0;
};

struct TrainResult {
    Model model;
    TrainReport report;
};

/// Momentum SGD: v ← μ·v − η·g, θ ← θ + v. Bias tensors stay fixed when the model has no biases.
void sgd_step(ModelParams& params, ModelParams& velocity, const ModelParams& grads, double learning_rate,
              double momentum, bool update_biases);

/// Mean batch loss of `ds` under fixed (seeded) triplets; used for model selection.
double evaluation_loss(const Model& model, const Dataset& ds, const TrainConfig& cfg);

/// Trains from init_params(cfg.model) and returns the parameters of the epoch with the lowest
/// validation loss. The time input is normalized to `span`. Throws NumericalError naming the
/// epoch and batch if the loss becomes NaN.
TrainResult train_continuous(const Dataset& train, const Dataset& val, const TrainConfig& cfg, const Timespan& span);

/// Ω = U·Vᵀ from svd(M_tᵀ·M_next): the orthogonal map minimizing ‖M_t·Ω − M_next‖_F.
Matrix procrustes(const Matrix& m_t, const Matrix& m_next);

/// Independent static models per monthly bin, rotated into the last bin's space.
struct BinnedModel {
    std::vector<Bin> bins;
    std::vector<Model> models;
    std::vector<Matrix> rotations;  ///< bin b's space → last bin's space (row vectors on the left)

    /// Embeds with the model of the bin containing ts (nearest bin otherwise) and rotates
    /// the result into the common frame.
    Vector embed(std::span<const double> x, Modality m, EpochSeconds ts) const;
};

inline constexpr std::size_t kAlignmentSampleCap = 2000;

/// Fills bm.rotations by Procrustes between adjacent bins. The alignment sample for bins b and
/// b+1 is the bin-b members of `sample` (indices from the bins), capped at `cap` instances drawn
/// uniformly with `rng`; each instance contributes its image and its text embedding.
void align_chain(BinnedModel& bm, const Dataset& sample, Rng& rng, std::size_t cap = kAlignmentSampleCap);

/// Trains one static model per bin of `train` (bins index into `train`), selecting each on the
/// validation instances falling in that bin's month, then aligns the chain.
BinnedModel train_binned(const Dataset& train, const Dataset& val, const TrainConfig& cfg,
                         const std::vector<Bin>& bins, const Timespan& span, std::size_t threads = 1);

void save_binned(const BinnedModel& bm, const std::filesystem::path& dir, const nlohmann::json& provenance = {});
BinnedModel load_binned(const std::filesystem::path& dir);

} // namespace dcm
