#include "dcm/synth.hpp"

#include <cmath>
#include <string>

#include "dcm/error.hpp"

namespace dcm {

using json = nlohmann::json;

void SynthConfig::validate() const {
    if (n_categories == 0) throw UsageError("synth: n_categories must be positive");
    if (instances_per_category == 0) throw UsageError("synth: instances_per_category must be positive");
    if (d_v == 0 || d_t == 0) throw UsageError("synth: feature dims must be positive");
    if (months == 0) throw UsageError("synth: months must be positive");
    if (!(cluster_separation > 0)) throw UsageError("synth: cluster_separation must be > 0");
    if (!(noise_sigma >= 0)) throw UsageError("synth: noise_sigma must be >= 0");
    if (patterns.size() != n_categories) {
        throw UsageError("synth: expected " + std::to_string(n_categories) + " patterns, got " +
                         std::to_string(patterns.size()));
    }
    for (const auto& p : patterns) {
        if (p.kind == TimePattern::Kind::Spike && !(p.width > 0)) throw UsageError("synth: spike width must be > 0");
        if (p.kind == TimePattern::Kind::Recurrent && !(p.period_months > 0)) {
            throw UsageError("synth: recurrent period must be > 0");
        }
    }
    for (const auto& s : shifts) {
        if (s.category >= n_categories) throw UsageError("synth: shift names an unknown category");
        if (s.changepoint_month >= months) throw UsageError("synth: changepoint_month must be < months");
    }
}

SynthConfig default_synth_config() {
    SynthConfig cfg;
    cfg.patterns = {TimePattern::spike(6, 1.5), TimePattern::recurrent(12), TimePattern::uniform(),
                    TimePattern::uniform()};
    cfg.shifts = {SemanticShift{3, 12}};
    return cfg;
}

SynthConfig stationary_synth_config() {
    SynthConfig cfg = default_synth_config();
    cfg.shifts.clear();
    return cfg;
}

const Vector& SynthTruth::text_centroid_at(std::size_t c, std::size_t month) const {
    // Later shifts of the same category take precedence.
    const Vector* out = &text_centroids.at(c);
    for (std::size_t k = 0; k < config.shifts.size(); ++k) {
        const auto& s = config.shifts[k];
        if (s.category == c && month >= s.changepoint_month) out = &shifted_text_centroids[k];
    }
    return *out;
}

namespace {

Vector random_centroid(Rng& rng, std::size_t dim, double norm) {
    Vector v(dim);
    for (auto& x : v) x = rng.normal();
    const double n = l2_norm(v.span());
    for (auto& x : v) x *= norm / n;
    return v;
}

double draw_month(const TimePattern& p, std::size_t months, Rng& rng) {
    const double limit = static_cast<double>(months);
    switch (p.kind) {
    case TimePattern::Kind::Uniform:
        return rng.uniform(0.0, limit);
    case TimePattern::Kind::Spike:
        for (;;) {
            const double m = p.center_month + 0.5 + p.width * rng.normal();
            if (m >= 0.0 && m < limit) return m;
        }
    case TimePattern::Kind::Recurrent: {
        const auto cycles = static_cast<std::size_t>(std::ceil(limit / p.period_months));
        for (;;) {
            const double peak = static_cast<double>(rng.index(cycles)) * p.period_months + 0.5 * p.period_months;
            const double m = peak + (p.period_months / 8.0) * rng.normal();
            if (m >= 0.0 && m < limit) return m;
        }
    }
    }
    return 0.0;
}

EpochSeconds month_offset_to_ts(EpochSeconds start, double offset) {
    const std::int64_t base = month_index(start);
    const auto whole = static_cast<std::int64_t>(std::floor(offset));
    const double frac = offset - static_cast<double>(whole);
    const EpochSeconds lo = month_start(base + whole);
    const EpochSeconds hi = month_start(base + whole + 1);
    const auto within = static_cast<EpochSeconds>(std::floor(frac * static_cast<double>(hi - lo)));
    return lo + std::min(within, hi - lo - 1);
}

} // namespace

std::size_t synth_month_offset(const SynthConfig& cfg, EpochSeconds ts) {
    return static_cast<std::size_t>(month_index(ts) - month_index(cfg.start));
}

SynthResult generate(const SynthConfig& cfg) {
    cfg.validate();
    const Rng root(cfg.seed);

    SynthTruth truth;
    truth.config = cfg;
    Rng centroid_rng = root.split(1);
    for (std::size_t c = 0; c < cfg.n_categories; ++c) {
        truth.visual_centroids.push_back(random_centroid(centroid_rng, cfg.d_v, cfg.cluster_separation));
        truth.text_centroids.push_back(random_centroid(centroid_rng, cfg.d_t, cfg.cluster_separation));
    }
    for (std::size_t k = 0; k < cfg.shifts.size(); ++k) {
        truth.shifted_text_centroids.push_back(random_centroid(centroid_rng, cfg.d_t, cfg.cluster_separation));
    }

    std::vector<std::string> labels;
    for (std::size_t c = 0; c < cfg.n_categories; ++c) labels.push_back("cat" + std::to_string(c));

    std::vector<Instance> instances;
    instances.reserve(cfg.n_categories * cfg.instances_per_category);
    for (std::size_t c = 0; c < cfg.n_categories; ++c) {
        Rng rng = root.split(100 + c);
        for (std::size_t i = 0; i < cfg.instances_per_category; ++i) {
            Instance inst;
            inst.id = labels[c] + "_" + std::to_string(i);
            inst.category = c;
            const double offset = draw_month(cfg.patterns[c], cfg.months, rng);
            inst.ts = month_offset_to_ts(cfg.start, offset);
            const Vector& vc = truth.visual_centroids[c];
            const Vector& tc = truth.text_centroid_at(c, static_cast<std::size_t>(std::floor(offset)));
            inst.visual = Vector(cfg.d_v);
            for (std::size_t j = 0; j < cfg.d_v; ++j) inst.visual[j] = vc[j] + cfg.noise_sigma * rng.normal();
            inst.text = Vector(cfg.d_t);
            for (std::size_t j = 0; j < cfg.d_t; ++j) inst.text[j] = tc[j] + cfg.noise_sigma * rng.normal();
            instances.push_back(std::move(inst));
        }
    }
    return SynthResult{make_dataset(std::move(instances), std::move(labels)), std::move(truth)};
}

json to_json(const SynthConfig& cfg) {
    json patterns = json::array();
    for (const auto& p : cfg.patterns) {
        switch (p.kind) {
        case TimePattern::Kind::Spike:
            patterns.push_back({{"kind", "spike"}, {"center", p.center_month}, {"width", p.width}});
            break;
        case TimePattern::Kind::Recurrent:
            patterns.push_back({{"kind", "recurrent"}, {"period", p.period_months}});
            break;
        case TimePattern::Kind::Uniform:
            patterns.push_back({{"kind", "uniform"}});
            break;
        }
    }
    json shifts = json::array();
    for (const auto& s : cfg.shifts) {
        shifts.push_back({{"category", s.category}, {"changepoint_month", s.changepoint_month}});
    }
    return json{{"n_categories", cfg.n_categories},
                {"instances_per_category", cfg.instances_per_category},
                {"d_v", cfg.d_v},
                {"d_t", cfg.d_t},
                {"months", cfg.months},
                {"start", format_iso8601(cfg.start)},
                {"patterns", patterns},
                {"shifts", shifts},
                {"cluster_separation", cfg.cluster_separation},
                {"noise_sigma", cfg.noise_sigma},
                {"seed", cfg.seed}};
}

SynthConfig synth_config_from_json(const json& j) {
    SynthConfig cfg = default_synth_config();
    try {
        cfg.n_categories = j.value("n_categories", cfg.n_categories);
        cfg.instances_per_category = j.value("instances_per_category", cfg.instances_per_category);
        cfg.d_v = j.value("d_v", cfg.d_v);
        cfg.d_t = j.value("d_t", cfg.d_t);
        cfg.months = j.value("months", cfg.months);
        if (j.contains("start")) cfg.start = parse_iso8601(j["start"].get<std::string>());
        cfg.cluster_separation = j.value("cluster_separation", cfg.cluster_separation);
        cfg.noise_sigma = j.value("noise_sigma", cfg.noise_sigma);
        cfg.seed = j.value("seed", cfg.seed);
        if (j.contains("patterns")) {
            cfg.patterns.clear();
            for (const auto& p : j["patterns"]) {
                const auto kind = p.at("kind").get<std::string>();
                if (kind == "spike") {
                    cfg.patterns.push_back(TimePattern::spike(p.at("center").get<double>(), p.value("width", 1.0)));
                } else if (kind == "recurrent") {
                    cfg.patterns.push_back(TimePattern::recurrent(p.at("period").get<double>()));
                } else if (kind == "uniform") {
                    cfg.patterns.push_back(TimePattern::uniform());
                } else {
                    throw UsageError("synth: unknown pattern kind '" + kind + "'");
                }
            }
        } else if (cfg.patterns.size() != cfg.n_categories) {
            cfg.patterns.assign(cfg.n_categories, TimePattern::uniform());
        }
        if (j.contains("shifts")) {
            cfg.shifts.clear();
            for (const auto& s : j["shifts"]) {
                cfg.shifts.push_back(SemanticShift{s.at("category").get<std::size_t>(),
                                                   s.at("changepoint_month").get<std::size_t>()});
            }
        }
    } catch (const json::exception& e) {
        throw UsageError(std::string("synth config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

json to_json(const SynthTruth& truth) {
    auto vec = [](const Vector& v) { return json(v.values()); };
    json out;
    out["config"] = to_json(truth.config);
    out["visual_centroids"] = json::array();
    out["text_centroids"] = json::array();
    for (const auto& v : truth.visual_centroids) out["visual_centroids"].push_back(vec(v));
    for (const auto& v : truth.text_centroids) out["text_centroids"].push_back(vec(v));
    out["shifted_text_centroids"] = json::array();
    for (std::size_t k = 0; k < truth.shifted_text_centroids.size(); ++k) {
        out["shifted_text_centroids"].push_back({{"category", truth.config.shifts[k].category},
                                                 {"changepoint_month", truth.config.shifts[k].changepoint_month},
                                                 {"centroid", vec(truth.shifted_text_centroids[k])}});
    }
    return out;
}

} // namespace dcm
