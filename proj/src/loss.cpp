#include "dcm/loss.hpp"

#include <algorithm>
#include <cmath>

#include "dcm/error.hpp"

namespace dcm {

void LossConfig::validate() const {
    if (!(margin > 0)) throw UsageError("loss margin must be > 0");
    if (!(intra_margin > 0)) throw UsageError("intra margin must be > 0");
    if (!(window_months >= 0)) throw UsageError("window must be >= 0");
    if (!(decay > 0)) throw UsageError("decay rate must be > 0");
}

double hinge(double margin, double s_ap, double s_an) { return std::max(0.0, margin - s_ap + s_an); }

double rho(double t_a, double t_b, double lambda) { return 1.0 - std::exp(-std::abs(t_a - t_b) * lambda); }

double inter_loss(double s_counterpart, double s_negative, const LossConfig& cfg) {
    return hinge(cfg.margin, s_counterpart, s_negative);
}

double intra_loss(double dt_months, double s_counterpart, double s_partner, const LossConfig& cfg) {
    if (std::abs(dt_months) <= cfg.window_months) return 0.0;
    return rho(dt_months, 0.0, cfg.decay) * hinge(cfg.intra_margin, s_counterpart, s_partner);
}

Batch make_batch(const Dataset& ds, std::span<const std::size_t> indices, const Timespan& span, bool static_time) {
    Batch b;
    b.members.reserve(indices.size());
    for (std::size_t i : indices) {
        const Instance& inst = ds.instances.at(i);
        b.members.push_back(&inst);
        b.time_input.push_back(static_time ? 0.0 : normalize_ts(inst.ts, span));
        b.months.push_back(static_cast<double>(inst.ts - span.start) / kSecondsPerMonth);
    }
    return b;
}

namespace {

void pick_without_replacement(std::vector<std::size_t>& pool, std::size_t k, Rng& rng,
                              std::vector<std::size_t>& out) {
    out.clear();
    const std::size_t take = std::min(k, pool.size());
    for (std::size_t j = 0; j < take; ++j) {
        const std::size_t r = j + rng.index(pool.size() - j);
        std::swap(pool[j], pool[r]);
        out.push_back(pool[j]);
    }
}

} // namespace

std::vector<Triplet> sample_batch_triplets(const Batch& batch, Rng& rng, const LossConfig& cfg) {
    std::vector<Triplet> out;
    std::vector<std::size_t> pool, picked;
    const std::size_t n = batch.size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t cat = batch.members[i]->category;
        for (Modality m : {Modality::Visual, Modality::Text}) {
            const Modality other = opposite(m);
            pool.clear();
            for (std::size_t j = 0; j < n; ++j)
                if (batch.members[j]->category != cat) pool.push_back(j);
            pick_without_replacement(pool, cfg.k_neg, rng, picked);
            for (std::size_t j : picked) {
                out.push_back(Triplet{{i, m}, {i, other}, EmbeddingRef{j, other}, TripletKind::Inter});
            }
            if (!cfg.intra_enabled) continue;
            pool.clear();
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i && batch.members[j]->category == cat &&
                    std::abs(batch.months[j] - batch.months[i]) > cfg.window_months) {
                    pool.push_back(j);
                }
            }
            pick_without_replacement(pool, cfg.k_pos, rng, picked);
            for (std::size_t j : picked) {
                out.push_back(Triplet{{i, m}, {j, other}, std::nullopt, TripletKind::Intra});
            }
        }
    }
    return out;
}

LossValue batch_loss_and_grads(const ModelParams& p, const Batch& batch, std::span<const Triplet> triplets,
                               const LossConfig& cfg, ModelParams* grads) {
    const std::size_t n = batch.size();
    auto slot = [](const EmbeddingRef& r) { return 2 * r.member + (r.modality == Modality::Visual ? 0 : 1); };

    // Only embeddings referenced by some triplet are computed.
    std::vector<bool> needed(2 * n, false);
    for (const auto& t : triplets) {
        if (t.anchor.member >= n || t.positive.member >= n || (t.negative && t.negative->member >= n)) {
            throw DataError("triplet references an instance outside the batch");
        }
        needed[slot(t.anchor)] = true;
        needed[slot(EmbeddingRef{t.anchor.member, opposite(t.anchor.modality)})] = true;
        needed[slot(t.positive)] = true;
        if (t.negative) needed[slot(*t.negative)] = true;
    }
    std::vector<ProjectionTrace> traces(2 * n);
    for (std::size_t s = 0; s < 2 * n; ++s) {
        if (!needed[s]) continue;
        const Instance& inst = *batch.members[s / 2];
        const Modality m = s % 2 == 0 ? Modality::Visual : Modality::Text;
        traces[s] = project_trace(p, inst.features(m).span(), m, batch.time_input[s / 2]);
    }

    std::vector<Vector> grad_e;
    if (grads) {
        grad_e.assign(2 * n, Vector());
        for (std::size_t s = 0; s < 2 * n; ++s)
            if (needed[s]) grad_e[s] = Vector(traces[s].e.size());
    }
    // d(weight · (m − e_a·e_c + e_a·e_x)) accumulated into the three embeddings.
    auto accumulate = [&](std::size_t a, std::size_t c, std::size_t x, double weight) {
        const Vector& ea = traces[a].e;
        const Vector& ec = traces[c].e;
        const Vector& ex = traces[x].e;
        for (std::size_t k = 0; k < ea.size(); ++k) {
            grad_e[a][k] += weight * (ex[k] - ec[k]);
            grad_e[c][k] -= weight * ea[k];
            grad_e[x][k] += weight * ea[k];
        }
    };

    LossValue value;
    for (const auto& t : triplets) {
        const std::size_t a = slot(t.anchor);
        const std::size_t c = slot(EmbeddingRef{t.anchor.member, opposite(t.anchor.modality)});
        const Instance& anchor = *batch.members[t.anchor.member];
        const double s_ac = dot(traces[a].e.span(), traces[c].e.span());
        if (t.kind == TripletKind::Inter) {
            if (!t.negative) throw DataError("inter triplet without a negative");
            const Instance& neg = *batch.members[t.negative->member];
            if (neg.category == anchor.category) throw DataError("inter triplet with a same-category negative");
            const std::size_t x = slot(*t.negative);
            const double l = inter_loss(s_ac, dot(traces[a].e.span(), traces[x].e.span()), cfg);
            if (l > 0.0) {
                value.inter_part += l;
                ++value.active_triplet_count;
                if (grads) accumulate(a, c, x, 1.0);
            }
        } else {
            const Instance& partner = *batch.members[t.positive.member];
            if (partner.category != anchor.category || t.positive.member == t.anchor.member) {
                throw DataError("intra triplet partner must be a different same-category instance");
            }
            const double dt = batch.months[t.positive.member] - batch.months[t.anchor.member];
            if (std::abs(dt) <= cfg.window_months) continue;
            const std::size_t x = slot(t.positive);
            const double s_ax = dot(traces[a].e.span(), traces[x].e.span());
            const double l = intra_loss(dt, s_ac, s_ax, cfg);
            if (l > 0.0) {
                value.intra_part += l;
                ++value.active_triplet_count;
                if (grads) accumulate(a, c, x, rho(dt, 0.0, cfg.decay));
            }
        }
    }
    value.total = value.inter_part + value.intra_part;

    if (grads) {
        // Parameter shapes follow p; dims are recovered from it directly.
        *grads = p;
        grads->for_each([](const std::string&, std::span<double> v, bool) { std::fill(v.begin(), v.end(), 0.0); });
        for (std::size_t s = 0; s < 2 * n; ++s) {
            if (!needed[s]) continue;
            const bool any = std::any_of(grad_e[s].begin(), grad_e[s].end(), [](double g) { return g != 0.0; });
            if (!any) continue;
            const Instance& inst = *batch.members[s / 2];
            const Modality m = s % 2 == 0 ? Modality::Visual : Modality::Text;
            backprop_projection(p, traces[s], inst.features(m).span(), m, batch.time_input[s / 2],
                                grad_e[s].span(), *grads);
        }
    }
    return value;
}

} // namespace dcm
