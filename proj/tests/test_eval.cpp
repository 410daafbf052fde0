#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "dcm/eval.hpp"
#include "test_util.hpp"

using namespace dcm;

namespace {

// AP written as a double sum over pairs of relevant positions.
double oracle_ap(const std::vector<bool>& rel) {
    double total = 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < rel.size(); ++i) {
        if (!rel[i]) continue;
        ++hits;
        double inner = 0.0;
        for (std::size_t j = 0; j <= i; ++j) inner += rel[j] ? 1.0 : 0.0;
        total += inner / static_cast<double>(i + 1);
    }
    return hits == 0 ? 0.0 : total / static_cast<double>(hits);
}

Vector unit(Vector v) { return l2_normalize(v.span()); }

// Time-independent: the normalized raw features.
Vector feature_embed(const Instance& inst, Modality m, EpochSeconds) { return unit(inst.features(m)); }

// Appends a time-dependent direction so that the query instant matters.
Vector timed_embed(const Instance& inst, Modality m, EpochSeconds at) {
    Vector v = inst.features(m);
    const double phase = static_cast<double>(at) / 4e6;
    std::vector<double> raw(v.begin(), v.end());
    raw.push_back(1.5 * std::cos(phase));
    raw.push_back(1.5 * std::sin(phase));
    return unit(Vector(std::move(raw)));
}

// Independent pseudo-random unit vector per (instance, modality).
Vector random_embed(const Instance& inst, Modality m, EpochSeconds) {
    Rng rng(std::hash<std::string>{}(inst.id) * 2 + (m == Modality::Visual ? 0 : 1));
    return unit(testutil::random_vector(rng, 16));
}

struct Scored {
    double sim;
    std::string id;
    std::size_t index;
};

// Brute-force AP for one query against explicit candidates.
double oracle_query(const Vector& q, const std::vector<std::size_t>& cands, const Dataset& ds, Modality cand_modality,
                    const EmbedFn& embed, std::size_t k, const std::function<bool(std::size_t)>& relevant) {
    std::vector<Scored> s;
    for (std::size_t j : cands) {
        const Instance& c = ds.instances[j];
        s.push_back({std::clamp(dot(q.span(), embed(c, cand_modality, c.ts).span()), -1.0, 1.0), c.id, j});
    }
    std::sort(s.begin(), s.end(), [](const Scored& a, const Scored& b) {
        if (a.sim != b.sim) return a.sim > b.sim;
        return a.id < b.id;
    });
    std::vector<bool> rel;
    for (std::size_t r = 0; r < std::min(k, s.size()); ++r) rel.push_back(relevant(s[r].index));
    return oracle_ap(rel);
}

Dataset dataset_with_months(Rng& rng, std::size_t n, std::size_t cats, std::size_t dim, double months) {
    return testutil::random_dataset(rng, n, cats, dim, dim, months);
}

} // namespace

TEST_CASE("average_precision") {
    CHECK(average_precision({true, false, true, false}) == doctest::Approx(0.8333333333333334).epsilon(1e-15));
    CHECK(average_precision({true, true, true}) == 1.0);
    CHECK(average_precision({false, false}) == 0.0);
    CHECK(average_precision({}) == 0.0);

    Rng rng(1);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<bool> rel(1 + rng.index(30));
        for (std::size_t i = 0; i < rel.size(); ++i) rel[i] = rng.uniform01() < 0.4;
        CHECK(average_precision(rel) == doctest::Approx(oracle_ap(rel)).epsilon(1e-12));

        // Promoting a relevant item over an irrelevant neighbour never lowers AP.
        for (std::size_t i = 0; i + 1 < rel.size(); ++i) {
            if (!rel[i] && rel[i + 1]) {
                std::vector<bool> better = rel;
                better[i] = true;
                better[i + 1] = false;
                CHECK(average_precision(better) >= average_precision(rel));
                break;
            }
        }
    }
}

TEST_CASE("rank_candidates breaks ties by id") {
    const Vector q{1.0, 0.0};
    const auto ranked = rank_candidates(q, {Vector{0.0, 1.0}, Vector{1.0, 0.0}, Vector{1.0, 0.0}}, {"c", "b", "a"});
    CHECK(ranked[0].id == "a");
    CHECK(ranked[1].id == "b");
    CHECK(ranked[2].id == "c");
    CHECK(ranked[0].index == 2);
}

TEST_CASE("coarse alignment") {
    Rng rng(2);
    SUBCASE("one category is trivially perfect") {
        const Dataset ds = dataset_with_months(rng, 30, 1, 4, 12);
        const EvalReport r = coarse_alignment(feature_embed, ds);
        CHECK(r.average == 1.0);
        CHECK(r.queries.size() == 60);
    }
    SUBCASE("random embeddings score near the category prior") {
        const Dataset ds = dataset_with_months(rng, 400, 4, 4, 12);
        const EvalReport r = coarse_alignment(random_embed, ds);
        CHECK(std::abs(r.average - 0.25) < 0.05);
    }
    SUBCASE("matches the brute-force oracle") {
        const Dataset ds = dataset_with_months(rng, 60, 3, 5, 12);
        const EvalReport r = coarse_alignment(timed_embed, ds, 10, EvalOptions{3});
        std::vector<std::size_t> all(ds.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        double i2t = 0.0, t2i = 0.0;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const Instance& q = ds.instances[i];
            auto rel = [&](std::size_t j) { return ds.instances[j].category == q.category; };
            i2t += oracle_query(timed_embed(q, Modality::Visual, q.ts), all, ds, Modality::Text, timed_embed, 10, rel);
            t2i += oracle_query(timed_embed(q, Modality::Text, q.ts), all, ds, Modality::Visual, timed_embed, 10, rel);
        }
        CHECK(r.image_to_text == doctest::Approx(i2t / ds.size()).epsilon(1e-12));
        CHECK(r.text_to_image == doctest::Approx(t2i / ds.size()).epsilon(1e-12));
        CHECK(r.average == doctest::Approx((r.image_to_text + r.text_to_image) / 2).epsilon(1e-15));
    }
}

TEST_CASE("local alignment") {
    Rng rng(3);
    SUBCASE("matches the brute-force oracle") {
        const Dataset ds = dataset_with_months(rng, 80, 3, 5, 6);
        LocalAlignmentOptions lo;
        lo.queries_per_category = 1000;  // every instance is a query
        lo.k = 5;
        const EvalReport r = local_alignment(timed_embed, ds, lo);

        const Binning binning = bin_monthly(ds, 1);
        double i2t = 0.0, t2i = 0.0;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const Instance& q = ds.instances[i];
            auto rel = [&](std::size_t j) { return ds.instances[j].category == q.category; };
            double a = 0.0, b = 0.0;
            for (const auto& bin : binning.bins) {
                const EpochSeconds mid = month_start(bin.month) + (month_start(bin.month + 1) - month_start(bin.month)) / 2;
                a += oracle_query(timed_embed(q, Modality::Visual, mid), bin.member_indices, ds, Modality::Text,
                                  timed_embed, lo.k, rel);
                b += oracle_query(timed_embed(q, Modality::Text, mid), bin.member_indices, ds, Modality::Visual,
                                  timed_embed, lo.k, rel);
            }
            i2t += a / binning.bins.size();
            t2i += b / binning.bins.size();
        }
        CHECK(r.image_to_text == doctest::Approx(i2t / ds.size()).epsilon(1e-12));
        CHECK(r.text_to_image == doctest::Approx(t2i / ds.size()).epsilon(1e-12));
    }
    SUBCASE("one bin and a static embedder reduce to coarse@k") {
        const Dataset ds = dataset_with_months(rng, 50, 3, 5, 0.9);
        REQUIRE(bin_monthly(ds, 1).bins.size() == 1);
        LocalAlignmentOptions lo;
        lo.queries_per_category = 1000;
        lo.k = 7;
        CHECK(local_alignment(feature_embed, ds, lo).average ==
              doctest::Approx(coarse_alignment(feature_embed, ds, 7).average).epsilon(1e-12));
    }
    SUBCASE("query sampling is seeded") {
        const Dataset ds = dataset_with_months(rng, 120, 3, 5, 6);
        LocalAlignmentOptions lo;
        lo.queries_per_category = 5;
        lo.seed = 11;
        const EvalReport a = local_alignment(feature_embed, ds, lo);
        const EvalReport b = local_alignment(feature_embed, ds, lo, EvalOptions{4});
        CHECK(a.queries.size() == 30);
        for (std::size_t q = 0; q < a.queries.size(); ++q) {
            CHECK(a.queries[q].query_id == b.queries[q].query_id);
            CHECK(a.queries[q].value == b.queries[q].value);
        }
    }
}

TEST_CASE("bounded semantics") {
    Rng rng(4);
    const Dataset one = dataset_with_months(rng, 40, 2, 4, 0.9);
    const BoundedResult r = bounded_semantics(feature_embed, one);
    REQUIRE(r.per_bin.size() == 1);
    CHECK(r.report.average == doctest::Approx(coarse_alignment(feature_embed, one).average).epsilon(1e-12));
    CHECK(r.per_bin[0].size == 40);

    const Dataset many = dataset_with_months(rng, 120, 3, 4, 6);
    const BoundedResult m = bounded_semantics(timed_embed, many, 1);
    const Binning binning = bin_monthly(many, 1);
    REQUIRE(m.per_bin.size() == binning.bins.size());
    for (std::size_t b = 0; b < binning.bins.size(); ++b) {
        const Dataset part = many.subset(binning.bins[b].member_indices);
        CHECK(m.per_bin[b].average == doctest::Approx(coarse_alignment(timed_embed, part).average).epsilon(1e-12));
    }
}

TEST_CASE("time-period inference") {
    Rng rng(5);
    const Dataset ds = dataset_with_months(rng, 90, 3, 5, 12);

    // An unbounded window is plain category relevance.
    CHECK(time_period_inference(feature_embed, ds, 20, 1e9).average ==
          doctest::Approx(coarse_alignment(feature_embed, ds, 20).average).epsilon(1e-12));

    for (double w : {0.0, 2.0}) {
        const EvalReport r = time_period_inference(timed_embed, ds, 20, w);
        std::vector<std::size_t> all(ds.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        double sum = 0.0;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const Instance& q = ds.instances[i];
            auto rel = [&](std::size_t j) {
                const Instance& c = ds.instances[j];
                return c.category == q.category &&
                       std::abs(static_cast<double>(month_index(c.ts) - month_index(q.ts))) <= w;
            };
            sum += oracle_query(timed_embed(q, Modality::Visual, q.ts), all, ds, Modality::Text, timed_embed, 20, rel);
            sum += oracle_query(timed_embed(q, Modality::Text, q.ts), all, ds, Modality::Visual, timed_embed, 20, rel);
        }
        CHECK(r.average == doctest::Approx(sum / (2.0 * ds.size())).epsilon(1e-12));
    }

    // w = 0 means the same calendar month, however close the instants are.
    std::vector<Instance> two{{"a", Vector{1.0, 0.0}, Vector{1.0, 0.0}, parse_iso8601("2017-01-31T23:59:59Z"), 0},
                              {"b", Vector{1.0, 0.1}, Vector{1.0, 0.1}, parse_iso8601("2017-02-01T00:00:00Z"), 0}};
    const Dataset pair = make_dataset(std::move(two), {"x"});
    const EvalReport r0 = time_period_inference(feature_embed, pair, 2, 0.0);
    for (const auto& q : r0.queries) CHECK(q.value == doctest::Approx(1.0));  // only the counterpart is relevant
    const EvalReport lone = time_period_inference(feature_embed, pair, 1, 0.0);
    const EvalReport wide = time_period_inference(feature_embed, pair, 2, 1.0);
    CHECK(wide.average == 1.0);
    CHECK(lone.average == 1.0);
}

TEST_CASE("dispersion") {
    SUBCASE("identical copies are at distance zero") {
        std::vector<Instance> insts;
        for (int i = 0; i < 12; ++i) {
            insts.push_back(Instance{"q" + std::to_string(i), Vector{0.3, 0.4}, Vector{0.3, 0.4},
                                     parse_iso8601("2017-01-05") + i * 86400 * 20, 0});
        }
        const Dataset ds = make_dataset(std::move(insts), {"a"});
        const auto series = dispersion(feature_embed, ds, 0, Modality::Visual, 3);
        REQUIRE(!series.empty());
        for (const auto& p : series) {
            if (p.value) CHECK(*p.value == doctest::Approx(1.0).epsilon(1e-15));
        }
    }
    SUBCASE("matches a brute-force mean of top-K cosines") {
        Rng rng(6);
        const Dataset ds = dataset_with_months(rng, 60, 3, 4, 5);
        const auto series = dispersion(timed_embed, ds, 7, Modality::Text, 4);
        const Binning binning = bin_monthly(ds, 1);
        REQUIRE(series.size() == binning.bins.size());
        const Instance& q = ds.instances[7];
        const Vector qv = timed_embed(q, Modality::Text, q.ts);
        for (std::size_t b = 0; b < series.size(); ++b) {
            std::vector<double> sims;
            for (std::size_t j : binning.bins[b].member_indices) {
                if (j == 7) continue;
                const Instance& c = ds.instances[j];
                sims.push_back(dot(qv.span(), timed_embed(c, Modality::Visual, c.ts).span()));
                sims.push_back(dot(qv.span(), timed_embed(c, Modality::Text, c.ts).span()));
            }
            std::sort(sims.rbegin(), sims.rend());
            const std::size_t take = std::min<std::size_t>(4, sims.size());
            double mean = 0.0;
            for (std::size_t t = 0; t < take; ++t) mean += sims[t] / static_cast<double>(take);
            REQUIRE(series[b].value.has_value());
            CHECK(*series[b].value == doctest::Approx(mean).epsilon(1e-12));
            CHECK(series[b].short_of_k == (sims.size() < 4));
        }
    }
    SUBCASE("K beyond the population is flagged") {
        Rng rng(7);
        const Dataset ds = dataset_with_months(rng, 10, 2, 3, 2);
        for (const auto& p : dispersion(feature_embed, ds, 0, Modality::Visual, 1000)) {
            CHECK(p.short_of_k);
            CHECK(p.neighbours < 1000);
        }
        CHECK_THROWS_AS(dispersion(feature_embed, ds, 0, Modality::Visual, 0), UsageError);
        CHECK_THROWS_AS(dispersion(feature_embed, ds, 99, Modality::Visual, 1), DataError);
    }
}

TEST_CASE("evolution timeline") {
    Rng rng(8);
    const Dataset ds = dataset_with_months(rng, 40, 2, 4, 4);
    const std::size_t nbins = bin_monthly(ds, 1).bins.size();

    const auto t = evolution_timeline(timed_embed, ds, 3, Modality::Visual, 100, 1000);
    CHECK(t.size() == nbins);
    std::size_t matched = 0;
    for (std::size_t b = 0; b < t.size(); ++b) {
        matched += t[b].matches.size();
        REQUIRE_FALSE(t[b].matches.empty());
        CHECK(t[b].best_similarity == t[b].matches.front().similarity);
        if (b > 0) CHECK(t[b].best_similarity <= t[b - 1].best_similarity);
        for (std::size_t m = 1; m < t[b].matches.size(); ++m) CHECK(t[b].matches[m].similarity <= t[b].matches[m - 1].similarity);
        for (const auto& m : t[b].matches) CHECK(m.id != ds.instances[3].id);
    }
    CHECK(matched == ds.size() - 1);

    const auto short_list = evolution_timeline(timed_embed, ds, 3, Modality::Visual, 2, 1);
    REQUIRE(short_list.size() == 2);
    CHECK(short_list[0].bin == t[0].bin);
    CHECK(short_list[0].matches.size() == 1);

    const auto again = evolution_timeline(timed_embed, ds, 3, Modality::Visual, 100, 1000);
    for (std::size_t b = 0; b < t.size(); ++b) {
        CHECK(again[b].bin == t[b].bin);
        CHECK(again[b].matches.size() == t[b].matches.size());
    }
}
