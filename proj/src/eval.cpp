#include "dcm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dcm/error.hpp"
#include "dcm/parallel.hpp"

namespace dcm {

EmbedFn embedder_for(const Model& model, bool clamp) {
    return [&model, clamp](const Instance& inst, Modality m, EpochSeconds at) {
        return model.embed(inst.features(m).span(), m, at, clamp).vector;
    };
}

EmbedFn embedder_for(const BinnedModel& model) {
    return [&model](const Instance& inst, Modality m, EpochSeconds at) {
        return model.embed(inst.features(m).span(), m, at);
    };
}

double average_precision(const std::vector<bool>& relevance) {
    std::size_t hits = 0;
    double sum = 0.0;
    for (std::size_t k = 0; k < relevance.size(); ++k) {
        if (!relevance[k]) continue;
        ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
    return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

std::vector<RankedItem> rank_candidates(const Vector& query, const std::vector<Vector>& candidates,
                                        const std::vector<std::string>& ids) {
    std::vector<RankedItem> items(candidates.size());
    for (std::size_t j = 0; j < candidates.size(); ++j) {
        items[j] = RankedItem{j, ids[j], std::clamp(dot(query.span(), candidates[j].span()), -1.0, 1.0)};
    }
    std::sort(items.begin(), items.end(), [](const RankedItem& a, const RankedItem& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.id < b.id;
    });
    return items;
}

void EvalReport::aggregate() {
    double sum[2] = {0, 0};
    std::size_t count[2] = {0, 0};
    for (const auto& q : queries) {
        const int d = q.direction == Direction::ImageToText ? 0 : 1;
        sum[d] += q.value;
        ++count[d];
    }
    image_to_text = count[0] ? sum[0] / static_cast<double>(count[0]) : 0.0;
    text_to_image = count[1] ? sum[1] / static_cast<double>(count[1]) : 0.0;
    if (count[0] && count[1]) {
        average = 0.5 * (image_to_text + text_to_image);
    } else {
        average = count[0] ? image_to_text : text_to_image;
    }
}

namespace {

struct EmbeddedSet {
    std::vector<Vector> visual;
    std::vector<Vector> text;
    std::vector<std::string> ids;

    const std::vector<Vector>& of(Modality m) const { return m == Modality::Visual ? visual : text; }
};

// Every instance of ds at its own timestamp, in both modalities.
EmbeddedSet embed_all(const EmbedFn& embed, const Dataset& ds, std::size_t threads) {
    EmbeddedSet out;
    out.visual.resize(ds.size());
    out.text.resize(ds.size());
    out.ids.resize(ds.size());
    parallel_for(ds.size(), threads, [&](std::size_t i) {
        const Instance& inst = ds.instances[i];
        out.visual[i] = embed(inst, Modality::Visual, inst.ts);
        out.text[i] = embed(inst, Modality::Text, inst.ts);
        out.ids[i] = inst.id;
    });
    return out;
}

template <typename Subset>
EmbeddedSet select(const EmbeddedSet& all, const Subset& indices) {
    EmbeddedSet out;
    for (std::size_t i : indices) {
        out.visual.push_back(all.visual[i]);
        out.text.push_back(all.text[i]);
        out.ids.push_back(all.ids[i]);
    }
    return out;
}

// One query per (instance, direction); `relevant(query_idx, cand_idx)` over dataset positions.
template <typename Relevant>
EvalReport retrieval(const std::string& metric, const Dataset& ds, const EmbeddedSet& emb,
                     std::optional<std::size_t> top_k, std::size_t threads, Relevant&& relevant,
                     const std::string& bin_label = {}) {
    EvalReport report;
    report.metric = metric;
    const std::size_t n = ds.size();
    report.queries.resize(2 * n);
    parallel_for(2 * n, threads, [&](std::size_t q) {
        const Direction dir = q < n ? Direction::ImageToText : Direction::TextToImage;
        const std::size_t i = q % n;
        const Modality qm = query_modality(dir);
        const auto ranked = rank_candidates(emb.of(qm)[i], emb.of(opposite(qm)), emb.ids);
        const std::size_t depth = top_k ? std::min(*top_k, ranked.size()) : ranked.size();
        std::vector<bool> rel(depth);
        for (std::size_t r = 0; r < depth; ++r) rel[r] = relevant(i, ranked[r].index);
        report.queries[q] = QueryResult{ds.instances[i].id, dir, bin_label, average_precision(rel)};
    });
    report.aggregate();
    return report;
}

} // namespace

EvalReport coarse_alignment(const EmbedFn& embed, const Dataset& test, std::optional<std::size_t> top_k,
                            const EvalOptions& opts) {
    if (test.empty()) throw DataError("coarse alignment: empty test set");
    const EmbeddedSet emb = embed_all(embed, test, opts.threads);
    return retrieval(top_k ? "coarse_map@" + std::to_string(*top_k) : "coarse_map", test, emb, top_k, opts.threads,
                     [&](std::size_t i, std::size_t j) {
                         return test.instances[i].category == test.instances[j].category;
                     });
}

EvalReport local_alignment(const EmbedFn& embed, const Dataset& test, const LocalAlignmentOptions& local,
                           const EvalOptions& opts) {
    if (test.empty()) throw DataError("local alignment: empty test set");
    if (local.k == 0) throw UsageError("local alignment: k must be positive");
    const Binning binning = bin_monthly(test, local.min_bin_size);
    if (binning.bins.empty()) throw DataError("local alignment: no bins");
    const EmbeddedSet emb = embed_all(embed, test, opts.threads);

    // Seeded uniform sample of queries per category, kept in dataset order.
    Rng rng(local.seed);
    std::vector<std::size_t> queries;
    for (std::size_t c = 0; c < test.categories.size(); ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < test.size(); ++i)
            if (test.instances[i].category == c) members.push_back(i);
        rng.shuffle(std::span<std::size_t>(members));
        if (members.size() > local.queries_per_category) members.resize(local.queries_per_category);
        queries.insert(queries.end(), members.begin(), members.end());
    }
    std::sort(queries.begin(), queries.end());

    std::vector<EmbeddedSet> bin_sets;
    for (const auto& bin : binning.bins) bin_sets.push_back(select(emb, bin.member_indices));

    EvalReport report;
    report.metric = "local_map@" + std::to_string(local.k);
    report.queries.resize(2 * queries.size());
    parallel_for(2 * queries.size(), opts.threads, [&](std::size_t q) {
        const Direction dir = q < queries.size() ? Direction::ImageToText : Direction::TextToImage;
        const std::size_t i = queries[q % queries.size()];
        const Instance& inst = test.instances[i];
        const Modality qm = query_modality(dir);
        double sum = 0.0;
        for (std::size_t b = 0; b < binning.bins.size(); ++b) {
            const Vector qv = embed(inst, qm, binning.bins[b].midpoint());
            const auto ranked = rank_candidates(qv, bin_sets[b].of(opposite(qm)), bin_sets[b].ids);
            const std::size_t depth = std::min(local.k, ranked.size());
            std::vector<bool> rel(depth);
            for (std::size_t r = 0; r < depth; ++r) {
                const std::size_t j = binning.bins[b].member_indices[ranked[r].index];
                rel[r] = test.instances[j].category == inst.category;
            }
            sum += average_precision(rel);
        }
        report.queries[q] = QueryResult{inst.id, dir, {}, sum / static_cast<double>(binning.bins.size())};
    });
    for (const auto& bin : binning.bins) {
        if (bin.members.size() < local.k) {
            report.notes.push_back("bin " + month_label(bin.month) + " has " + std::to_string(bin.members.size()) +
                                   " candidates (< k); all were used");
        }
    }
    report.aggregate();
    return report;
}

BoundedResult bounded_semantics(const EmbedFn& embed, const Dataset& test, std::size_t min_bin_size,
                                const EvalOptions& opts) {
    if (test.empty()) throw DataError("bounded semantics: empty test set");
    const Binning binning = bin_monthly(test, min_bin_size);
    const EmbeddedSet emb = embed_all(embed, test, opts.threads);
    BoundedResult out;
    out.report.metric = "bounded_map";
    for (const auto& bin : binning.bins) {
        const Dataset part = test.subset(bin.member_indices);
        const EmbeddedSet part_emb = select(emb, bin.member_indices);
        const std::string label = month_label(bin.month);
        EvalReport r = retrieval("bounded_map", part, part_emb, std::nullopt, opts.threads,
                                 [&](std::size_t i, std::size_t j) {
                                     return part.instances[i].category == part.instances[j].category;
                                 },
                                 label);
        out.per_bin.push_back(BinScore{label, bin.members.size(), r.image_to_text, r.text_to_image, r.average});
        out.report.queries.insert(out.report.queries.end(), r.queries.begin(), r.queries.end());
    }
    if (!binning.excluded.empty()) {
        out.report.notes.push_back(std::to_string(binning.excluded.size()) + " instances in undersized bins excluded");
    }
    out.report.aggregate();
    return out;
}

EvalReport time_period_inference(const EmbedFn& embed, const Dataset& test, std::size_t k, double window_months,
                                 const EvalOptions& opts) {
    if (test.empty()) throw DataError("time-period inference: empty test set");
    const EmbeddedSet emb = embed_all(embed, test, opts.threads);
    std::vector<std::int64_t> month(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) month[i] = month_index(test.instances[i].ts);
    return retrieval("period_map@" + std::to_string(k), test, emb, k, opts.threads,
                     [&](std::size_t i, std::size_t j) {
                         return test.instances[i].category == test.instances[j].category &&
                                static_cast<double>(std::abs(month[i] - month[j])) <= window_months;
                     });
}

std::vector<DispersionPoint> dispersion(const EmbedFn& embed, const Dataset& ds, std::size_t query,
                                        Modality query_modality, std::size_t k, std::size_t min_bin_size) {
    if (query >= ds.size()) throw DataError("dispersion: query index out of range");
    if (k == 0) throw UsageError("dispersion: K must be positive");
    const Instance& q = ds.instances[query];
    const Vector qv = embed(q, query_modality, q.ts);
    const Binning binning = bin_monthly(ds, min_bin_size);
    std::vector<DispersionPoint> out;
    for (const auto& bin : binning.bins) {
        DispersionPoint pt;
        pt.bin = month_label(bin.month);
        pt.month = bin.month;
        std::vector<double> sims;
        for (std::size_t j : bin.member_indices) {
            if (j == query) continue;
            const Instance& inst = ds.instances[j];
            for (Modality m : {Modality::Visual, Modality::Text}) {
                sims.push_back(std::clamp(dot(qv.span(), embed(inst, m, inst.ts).span()), -1.0, 1.0));
            }
        }
        if (!sims.empty()) {
            const std::size_t take = std::min(k, sims.size());
            std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(take), sims.end(),
                              std::greater<>());
            pt.value = std::accumulate(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(take), 0.0) /
                       static_cast<double>(take);
            pt.neighbours = take;
            pt.short_of_k = take < k;
        } else {
            pt.short_of_k = true;
        }
        out.push_back(std::move(pt));
    }
    return out;
}

std::vector<TimelineEntry> evolution_timeline(const EmbedFn& embed, const Dataset& ds, std::size_t query,
                                              Modality query_modality, std::size_t top_bins, std::size_t per_bin,
                                              std::size_t min_bin_size) {
    if (query >= ds.size()) throw DataError("timeline: query index out of range");
    const Instance& q = ds.instances[query];
    const Vector qv = embed(q, query_modality, q.ts);
    const Modality target = opposite(query_modality);
    const Binning binning = bin_monthly(ds, min_bin_size);
    std::vector<TimelineEntry> entries;
    for (const auto& bin : binning.bins) {
        std::vector<Vector> cands;
        std::vector<std::string> ids;
        std::vector<std::size_t> source;
        for (std::size_t j : bin.member_indices) {
            if (j == query) continue;
            const Instance& inst = ds.instances[j];
            cands.push_back(embed(inst, target, inst.ts));
            ids.push_back(inst.id);
            source.push_back(j);
        }
        if (cands.empty()) continue;
        auto ranked = rank_candidates(qv, cands, ids);
        TimelineEntry e;
        e.bin = month_label(bin.month);
        e.month = bin.month;
        e.best_similarity = ranked.front().similarity;
        ranked.resize(std::min(per_bin, ranked.size()));
        for (auto& r : ranked) r.index = source[r.index];
        e.matches = std::move(ranked);
        entries.push_back(std::move(e));
    }
    std::stable_sort(entries.begin(), entries.end(), [](const TimelineEntry& a, const TimelineEntry& b) {
        return a.best_similarity > b.best_similarity;
    });
    if (entries.size() > top_bins) entries.resize(top_bins);
    return entries;
}

} // namespace dcm
