#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "dcm/dataset.hpp"

namespace dcm {

/// Temporal profile of one category's timestamps, in months from the dataset start.
struct TimePattern {
    enum class Kind { Spike, Recurrent, Uniform };
    Kind kind = Kind::Uniform;
    double center_month = 0.0;  ///< spike: month index of the peak
    double width = 1.0;         ///< spike: standard deviation in months
    double period_months = 12;  ///< recurrent: distance between peaks

    static TimePattern spike(double center, double width) { return {Kind::Spike, center, width, 12}; }
    static TimePattern recurrent(double period) { return {Kind::Recurrent, 0, 1, period}; }
    static TimePattern uniform() { return {}; }
};

/// From `changepoint_month` on, the category's texts come from a second centroid.
struct SemanticShift {
    std::size_t category = 0;
    std::size_t changepoint_month = 0;
};

struct SynthConfig {
    std::size_t n_categories = 4;
    std::size_t instances_per_category = 500;
    std::size_t d_v = 64;
    std::size_t d_t = 48;
    std::size_t months = 24;
    EpochSeconds start = 1483228800;  // 2017-01-01T00:00:00Z
    std::vector<TimePattern> patterns;  ///< one per category
    std::vector<SemanticShift> shifts;
    double cluster_separation = 4.0;  ///< norm of every centroid
    double noise_sigma = 1.0;         ///< per-coordinate Gaussian noise
    std::uint64_t seed = 7;

    /// Throws UsageError describing the first violated constraint.
    void validate() const;
};

/// 4 categories × 500 instances over 24 months: a spike, a yearly recurrent event and two
/// uniform categories, the last of which changes its text centroid at month 12.
SynthConfig default_synth_config();
/// Same as the default but with no semantic shift.
SynthConfig stationary_synth_config();

/// Generative parameters, kept for oracle checks.
struct SynthTruth {
    std::vector<Vector> visual_centroids;
    std::vector<Vector> text_centroids;
    std::vector<Vector> shifted_text_centroids;  ///< parallel to config.shifts
    SynthConfig config;

    /// Text centroid generating category `c` at month offset `month`.
    const Vector& text_centroid_at(std::size_t c, std::size_t month) const;
};

struct SynthResult {
    Dataset dataset;
    SynthTruth truth;
};

/// Deterministic in cfg (including the seed).
SynthResult generate(const SynthConfig& cfg);

/// Month offset of ts from the configuration's start month.
std::size_t synth_month_offset(const SynthConfig& cfg, EpochSeconds ts);

nlohmann::json to_json(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SynthTruth& truth);

} // namespace dcm
