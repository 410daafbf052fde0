#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dcm/numerics.hpp"
#include "dcm/timeutil.hpp"

namespace dcm {

enum class Modality { Visual, Text };

inline Modality opposite(Modality m) { return m == Modality::Visual ? Modality::Text : Modality::Visual; }
inline const char* to_string(Modality m) { return m == Modality::Visual ? "visual" : "text"; }
Modality parse_modality(const std::string& name);

/// One image/text document with its timestamp and semantic category.
struct Instance {
    std::string id;
    Vector visual;
    Vector text;
    EpochSeconds ts = 0;
    std::size_t category = 0;

    const Vector& features(Modality m) const { return m == Modality::Visual ? visual : text; }
};

struct Dataset {
    std::vector<Instance> instances;
    Timespan timespan;
    std::vector<std::string> categories;
    std::size_t d_v = 0;
    std::size_t d_t = 0;

    std::size_t size() const { return instances.size(); }
    bool empty() const { return instances.empty(); }

    /// Members at `indices`, in the given order, keeping this dataset's timespan and labels.
    Dataset subset(std::span<const std::size_t> indices) const;
    /// Index of the instance with this id, or size() when absent.
    std::size_t find(const std::string& id) const;
};

/// Builds a dataset, checking dimensions and finiteness; the timespan is [min ts, max ts]
/// (widened by one second when every instance shares one timestamp).
Dataset make_dataset(std::vector<Instance> instances, std::vector<std::string> categories);

/// Smallest span covering both inputs.
Timespan span_union(const Timespan& a, const Timespan& b);

struct TfidfResult {
    std::vector<Vector> vectors;
    std::vector<std::string> vocabulary;
};

/// Bag-of-words TF-IDF: weight = raw count × ln(N_docs / df). The vocabulary keeps the
/// `vocab_size` terms with the highest document frequency (ties lexicographic); 0 keeps all.
TfidfResult tfidf_featurize(const std::vector<std::vector<std::string>>& docs, std::size_t vocab_size);

struct LoadOptions {
    std::size_t vocab_size = 5000;
};

/// Reads one instance per line (see README for the schema). Errors name the offending line.
Dataset load_jsonl(const std::filesystem::path& path, const LoadOptions& options = {});
/// Writes the dataset with precomputed text vectors.
/// A non-empty `header` is written as a leading '#' comment line, which load_jsonl skips.
void save_jsonl(const Dataset& ds, const std::filesystem::path& path, const std::string& header = {});

struct Bin {
    std::size_t index = 0;
    std::int64_t month = 0;  ///< month_index() of the bin
    EpochSeconds month_start = 0;
    EpochSeconds month_end = 0;  ///< start of the following month
    std::vector<std::string> members;
    std::vector<std::size_t> member_indices;  ///< positions in the source dataset

    EpochSeconds midpoint() const { return month_start + (month_end - month_start) / 2; }
};

struct Binning {
    std::vector<Bin> bins;
    std::vector<std::string> excluded;  ///< ids in months with fewer than min_bin_size members
};

inline constexpr std::size_t kDefaultMinBinSize = 100;

/// One bin per calendar month holding at least `min_bin_size` instances, in chronological order.
Binning bin_monthly(const Dataset& ds, std::size_t min_bin_size = kDefaultMinBinSize);

/// Index of the bin whose month contains ts; otherwise the bin with the nearest month.
std::size_t nearest_bin(const std::vector<Bin>& bins, EpochSeconds ts);

struct SplitSizes {
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;
};

/// test = ⌊0.1·N⌋, val = ⌊0.1·(N − test)⌋, train = the rest.
SplitSizes split_sizes(std::size_t n);

enum class SplitMode { Stratified, Uniform };

struct Split {
    Dataset train;
    Dataset val;
    Dataset test;
};

/// Seeded train/validation/test split. Subsets keep input order and the parent's timespan.
/// Stratified mode apportions each subset across categories by largest remainder.
Split split(const Dataset& ds, Rng& rng, SplitMode mode = SplitMode::Stratified);

} // namespace dcm
