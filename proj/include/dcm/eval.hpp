#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dcm/dataset.hpp"
#include "dcm/model.hpp"
#include "dcm/trainer.hpp"

namespace dcm {

/// Embeds one modality of an instance as if it were observed at `at`.
using EmbedFn = std::function<Vector(const Instance&, Modality, EpochSeconds at)>;

/// Continuous or static model. With `clamp`, instants outside the training span are clamped.
EmbedFn embedder_for(const Model& model, bool clamp = false);
EmbedFn embedder_for(const BinnedModel& model);

/// 1/k Σ over relevant positions of (relevant within top k); 0 when nothing is relevant.
double average_precision(const std::vector<bool>& relevance);

struct RankedItem {
    std::size_t index = 0;  ///< position in the candidate list
    std::string id;
    double similarity = 0.0;
};

/// Candidates ordered by descending similarity, ties by ascending id.
std::vector<RankedItem> rank_candidates(const Vector& query, const std::vector<Vector>& candidates,
                                        const std::vector<std::string>& ids);

enum class Direction { ImageToText, TextToImage };
inline const char* to_string(Direction d) { return d == Direction::ImageToText ? "I2T" : "T2I"; }
inline Modality query_modality(Direction d) { return d == Direction::ImageToText ? Modality::Visual : Modality::Text; }

struct QueryResult {
    std::string query_id;
    Direction direction = Direction::ImageToText;
    std::string bin;  ///< month label for per-bin protocols, empty otherwise
    double value = 0.0;
};

struct EvalReport {
    std::string metric;
    std::vector<QueryResult> queries;
    double image_to_text = 0.0;  ///< mean over I→T queries
    double text_to_image = 0.0;  ///< mean over T→I queries
    double average = 0.0;        ///< mean of the two directions
    std::vector<std::string> notes;

    /// Recomputes the aggregates from `queries`.
    void aggregate();
};

struct EvalOptions {
    std::size_t threads = 1;
};

/// Every test image/text at its own timestamp, ranked against all opposite-modality test items;
/// relevant = same category. With `top_k`, AP is computed over the top k only.
EvalReport coarse_alignment(const EmbedFn& embed, const Dataset& test,
                            std::optional<std::size_t> top_k = std::nullopt, const EvalOptions& opts = {});

struct LocalAlignmentOptions {
    std::size_t queries_per_category = 50;
    std::size_t k = 10;
    std::size_t min_bin_size = 1;
    std::uint64_t seed = 0;
};

/// Each sampled query is re-projected at every bin midpoint and ranked against that bin's
/// opposite-modality items (at their own timestamps); mAP@k averaged over bins and queries.
EvalReport local_alignment(const EmbedFn& embed, const Dataset& test, const LocalAlignmentOptions& local = {},
                           const EvalOptions& opts = {});

struct BinScore {
    std::string bin;  ///< "YYYY-MM"
    std::size_t size = 0;
    double image_to_text = 0.0;
    double text_to_image = 0.0;
    double average = 0.0;
};

struct BoundedResult {
    EvalReport report;
    std::vector<BinScore> per_bin;
};

/// Full cross-modal mAP computed independently inside each monthly bin of the test set.
BoundedResult bounded_semantics(const EmbedFn& embed, const Dataset& test, std::size_t min_bin_size = 1,
                                const EvalOptions& opts = {});

/// mAP@k where relevant = same category and calendar months at most `window_months` apart.
EvalReport time_period_inference(const EmbedFn& embed, const Dataset& test, std::size_t k = 50,
                                 double window_months = 4.0, const EvalOptions& opts = {});

struct DispersionPoint {
    std::string bin;
    std::int64_t month = 0;
    std::optional<double> value;  ///< empty when the bin has no candidates
    std::size_t neighbours = 0;
    bool short_of_k = false;  ///< fewer than K candidates were available
};

/// Mean cosine between the query (embedded once at its own timestamp) and its K nearest
/// embeddings in each bin; both modalities of every other instance are candidates.
std::vector<DispersionPoint> dispersion(const EmbedFn& embed, const Dataset& ds, std::size_t query,
                                        Modality query_modality, std::size_t k = 5,
                                        std::size_t min_bin_size = 1);

struct TimelineEntry {
    std::string bin;
    std::int64_t month = 0;
    double best_similarity = 0.0;
    std::vector<RankedItem> matches;
};

/// Bins ranked by their single best opposite-modality similarity to the query, each with its
/// `per_bin` closest items.
std::vector<TimelineEntry> evolution_timeline(const EmbedFn& embed, const Dataset& ds, std::size_t query,
                                              Modality query_modality, std::size_t top_bins = 20,
                                              std::size_t per_bin = 4, std::size_t min_bin_size = 1);

} // namespace dcm
