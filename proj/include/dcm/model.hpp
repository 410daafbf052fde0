#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>

#include <json.hpp>

#include "dcm/dataset.hpp"
#include "dcm/numerics.hpp"
#include "dcm/timeutil.hpp"

namespace dcm {

struct ModelConfig {
    std::size_t d_v = 0;
    std::size_t d_t = 0;
    std::size_t hidden_dim = 1024;
    std::size_t time_dim = 200;
    std::size_t embed_dim = 200;
    std::uint64_t seed = 0;
    /// Affine layers. Without biases the layers are the pure matrix products tanh(W·x).
    bool use_bias = true;
    /// Static model: the time branch always sees 0 instead of the instance timestamp.
    bool static_time = false;

    void validate() const;
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Weights of both modality branches and the shared time layer.
///
/// Hidden layers map inputs to `hidden_dim`, the time layer maps the scalar time to
/// `time_dim`, and each output layer maps the concatenation [hidden; time] to `embed_dim`.
struct ModelParams {
    Matrix w_vh;  ///< hidden × d_v
    Vector b_vh;
    Matrix w_th;  ///< hidden × d_t
    Vector b_th;
    Matrix w_time;  ///< time_dim × 1
    Vector b_time;
    Matrix w_vo;  ///< D × (hidden + time_dim)
    Vector b_vo;
    Matrix w_to;  ///< D × (hidden + time_dim)
    Vector b_to;

    static ModelParams zeros(const ModelConfig& cfg);

    /// Visits every tensor as (name, flat values, is_bias) in a fixed order.
    void for_each(const std::function<void(const std::string&, std::span<double>, bool)>& fn);
    void for_each(const std::function<void(const std::string&, std::span<const double>, bool)>& fn) const;

    std::size_t parameter_count() const;
    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Glorot-uniform weights, zero biases; deterministic in cfg.seed.
ModelParams init_params(const ModelConfig& cfg);

/// tanh(W_time·[u] + b_time).
Vector time_embed(const ModelParams& p, double u);

struct Embedding {
    Vector vector;
    Modality modality = Modality::Visual;
    double t = 0.0;
};

/// Intermediate activations of one projection, kept for backpropagation.
struct ProjectionTrace {
    Vector hidden;   ///< tanh(W_h·x + b_h)
    Vector time;     ///< time_embed(u)
    Vector concat;   ///< [hidden; time]
    Vector z;        ///< tanh(W_o·concat + b_o)
    double z_norm = 0.0;
    Vector e;        ///< z / ‖z‖
};

ProjectionTrace project_trace(const ModelParams& p, std::span<const double> x, Modality m, double u);

/// Unit-norm embedding of x at normalized time u ∈ [0, 1].
Embedding project(const ModelParams& p, std::span<const double> x, Modality m, double u);

/// Accumulates into `grads` the gradient of a scalar objective with respect to every parameter,
/// given its gradient `grad_e` with respect to the embedding recorded in `trace`.
void backprop_projection(const ModelParams& p, const ProjectionTrace& trace, std::span<const double> x,
                         Modality m, double u, std::span<const double> grad_e, ModelParams& grads);

/// A trained projection model together with the timespan its time input is normalized to.
struct Model {
    ModelConfig config;
    ModelParams params;
    Timespan span;

    /// Normalized time input fed to the time layer (0 for static models).
    double time_input(EpochSeconds ts, bool clamp = false) const;
    Embedding embed(std::span<const double> x, Modality m, EpochSeconds ts, bool clamp = false) const;
};

inline constexpr int kCheckpointFormatVersion = 1;

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Writes a JSON checkpoint; weights are printed with 17 significant digits so that
/// loading reproduces them bit for bit.
void save_checkpoint(const Model& model, const std::filesystem::path& path, const nlohmann::json& provenance = {});
/// Throws DataError on unreadable or truncated files, version mismatch or inconsistent shapes.
Model load_checkpoint(const std::filesystem::path& path);

} // namespace dcm
