#include "dcm/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "dcm/error.hpp"
#include "dcm/parallel.hpp"

namespace dcm {

using json = nlohmann::json;

void TrainConfig::validate() const {
    if (!(learning_rate > 0)) throw UsageError("learning rate must be > 0");
    if (!(momentum >= 0 && momentum < 1)) throw UsageError("momentum must lie in [0, 1)");
    if (batch_size < 2) throw UsageError("batch size must be >= 2");
    loss.validate();
    model.validate();
}

TrainConfig static_variant(TrainConfig cfg) {
    cfg.model.static_time = true;
    cfg.loss.intra_enabled = false;
    return cfg;
}

void sgd_step(ModelParams& params, ModelParams& velocity, const ModelParams& grads, double learning_rate,
              double momentum, bool update_biases) {
    std::vector<std::span<double>> v_spans;
    std::vector<std::span<const double>> g_spans;
    velocity.for_each([&](const std::string&, std::span<double> v, bool) { v_spans.push_back(v); });
    grads.for_each([&](const std::string&, std::span<const double> g, bool) { g_spans.push_back(g); });
    std::size_t k = 0;
    params.for_each([&](const std::string&, std::span<double> theta, bool bias) {
        auto v = v_spans[k];
        auto g = g_spans[k];
        ++k;
        if (bias && !update_biases) return;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            v[i] = momentum * v[i] - learning_rate * g[i];
            theta[i] += v[i];
        }
    });
}

namespace {

std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order, std::size_t batch_size) {
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(order.size(), start + batch_size);
        if (end - start < 2) {
            // A trailing singleton cannot form triplets; fold it into the previous batch.
            if (!batches.empty()) batches.back().insert(batches.back().end(), order.begin() + start, order.end());
            break;
        }
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

constexpr std::uint64_t kValidationStream = 0x76616c6964ULL;

} // namespace

double evaluation_loss(const Model& model, const Dataset& ds, const TrainConfig& cfg) {
    if (ds.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng(cfg.seed).split(kValidationStream);
    double sum = 0.0;
    const auto batches = make_batches(order, cfg.batch_size);
    for (const auto& idx : batches) {
        const Batch batch = make_batch(ds, idx, model.span, model.config.static_time);
        const auto triplets = sample_batch_triplets(batch, rng, cfg.loss);
        sum += batch_loss_and_grads(model.params, batch, triplets, cfg.loss, nullptr).total;
    }
    return sum / static_cast<double>(batches.size());
}

TrainResult train_continuous(const Dataset& train, const Dataset& val, const TrainConfig& cfg, const Timespan& span) {
    cfg.validate();
    if (train.size() < 2) throw DataError("training set needs at least 2 instances");
    if (train.d_v != cfg.model.d_v || train.d_t != cfg.model.d_t) {
        throw DataError("training data dims do not match the model configuration");
    }
    if (!val.empty() && (val.d_v != train.d_v || val.d_t != train.d_t)) {
        throw DataError("validation data dims differ from training data");
    }
    const auto t0 = std::chrono::steady_clock::now();

    Model model{cfg.model, init_params(cfg.model), span};
    ModelParams velocity = ModelParams::zeros(cfg.model);
    ModelParams grads;
    const bool use_val = val.size() >= 2;

    TrainResult result;
    Model best = model;
    double best_loss = std::numeric_limits<double>::infinity();
    const Rng root(cfg.seed);

    std::vector<std::size_t> order(train.size());
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng rng = root.split(epoch);
        rng.shuffle(std::span<std::size_t>(order));
        const auto batches = make_batches(order, cfg.batch_size);
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const Batch batch = make_batch(train, batches[b], span, cfg.model.static_time);
            const auto triplets = sample_batch_triplets(batch, rng, cfg.loss);
            LossValue lv;
            try {
                lv = batch_loss_and_grads(model.params, batch, triplets, cfg.loss, &grads);
            } catch (const NumericalError& e) {
                throw NumericalError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", batch " +
                                     std::to_string(b));
            }
            if (!std::isfinite(lv.total)) {
                throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                     std::to_string(b));
            }
            epoch_loss += lv.total;
            sgd_step(model.params, velocity, grads, cfg.learning_rate, cfg.momentum, cfg.model.use_bias);
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = epoch_loss / static_cast<double>(batches.size());
        rec.val_loss = use_val ? evaluation_loss(model, val, cfg) : rec.train_loss;
        if (!std::isfinite(rec.val_loss)) {
            throw NumericalError("non-finite validation loss after epoch " + std::to_string(epoch));
        }
        if (rec.val_loss < best_loss) {
            best_loss = rec.val_loss;
            best = model;
            result.report.selected_epoch = epoch;
        }
        result.report.epochs.push_back(rec);
    }
    if (cfg.epochs == 0) result.report.selected_epoch = 0;
    result.model = std::move(best);
    result.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

Matrix procrustes(const Matrix& m_t, const Matrix& m_next) {
    if (m_t.rows() != m_next.rows() || m_t.cols() != m_next.cols()) {
        throw DataError("procrustes: embedding matrices must have the same shape");
    }
    const Svd d = svd(matmul(transpose(m_t), m_next));
    return matmul(d.u, transpose(d.v));
}

Vector BinnedModel::embed(std::span<const double> x, Modality m, EpochSeconds ts) const {
    const std::size_t b = nearest_bin(bins, ts);
    const Embedding e = models[b].embed(x, m, ts, true);
    return vecmat(e.vector.span(), rotations[b]);
}

void align_chain(BinnedModel& bm, const Dataset& sample, Rng& rng, std::size_t cap) {
    const std::size_t nb = bm.bins.size();
    if (nb == 0) throw DataError("align_chain: no bins");
    const std::size_t dim = bm.models.front().config.embed_dim;
    std::vector<Matrix> step(nb);  // step[b]: bin b → bin b+1
    for (std::size_t b = 0; b + 1 < nb; ++b) {
        std::vector<std::size_t> members = bm.bins[b].member_indices;
        if (members.empty()) throw DataError("align_chain: empty sample for bin " + std::to_string(b));
        if (members.size() > cap) {
            rng.shuffle(std::span<std::size_t>(members));
            members.resize(cap);
            std::sort(members.begin(), members.end());
        }
        Matrix cur(2 * members.size(), dim);
        Matrix next(2 * members.size(), dim);
        std::size_t r = 0;
        for (std::size_t i : members) {
            const Instance& inst = sample.instances.at(i);
            for (Modality m : {Modality::Visual, Modality::Text}) {
                const auto a = bm.models[b].embed(inst.features(m).span(), m, inst.ts, true).vector;
                const auto c = bm.models[b + 1].embed(inst.features(m).span(), m, inst.ts, true).vector;
                std::copy(a.begin(), a.end(), cur.row(r).begin());
                std::copy(c.begin(), c.end(), next.row(r).begin());
                ++r;
            }
        }
        step[b] = procrustes(cur, next);
    }
    bm.rotations.assign(nb, Matrix::identity(dim));
    for (std::size_t b = nb - 1; b-- > 0;) bm.rotations[b] = matmul(step[b], bm.rotations[b + 1]);
}

BinnedModel train_binned(const Dataset& train, const Dataset& val, const TrainConfig& cfg,
                         const std::vector<Bin>& bins, const Timespan& span, std::size_t threads) {
    if (bins.empty()) throw DataError("train_binned: no bins");
    const TrainConfig bin_cfg = static_variant(cfg);
    bin_cfg.validate();
    for (const auto& bin : bins) {
        if (bin.member_indices.size() < 2) {
            throw DataError("bin " + month_label(bin.month) + " has " + std::to_string(bin.member_indices.size()) +
                            " instances, too few to form a batch");
        }
    }
    BinnedModel bm;
    bm.bins = bins;
    bm.models.resize(bins.size());
    const Rng seeds(cfg.model.seed);
    parallel_for(bins.size(), threads, [&](std::size_t b) {
        const Bin& bin = bins[b];
        const Dataset bin_train = train.subset(bin.member_indices);
        std::vector<std::size_t> val_idx;
        for (std::size_t i = 0; i < val.size(); ++i)
            if (month_index(val.instances[i].ts) == bin.month) val_idx.push_back(i);
        const Dataset bin_val = val.subset(val_idx);
        TrainConfig c = bin_cfg;
        c.model.seed = seeds.split(static_cast<std::uint64_t>(bin.month)).next_u64();
        c.seed = Rng(cfg.seed).split(static_cast<std::uint64_t>(bin.month)).next_u64();
        bm.models[b] = train_continuous(bin_train, bin_val, c, span).model;
    });
    Rng align_rng = Rng(cfg.seed).split(0x616c69676eULL);
    align_chain(bm, train, align_rng);
    return bm;
}

void save_binned(const BinnedModel& bm, const std::filesystem::path& dir, const json& provenance) {
    std::filesystem::create_directories(dir);
    json index;
    index["format_version"] = kCheckpointFormatVersion;
    if (!provenance.is_null()) index["provenance"] = provenance;
    index["bins"] = json::array();
    for (std::size_t b = 0; b < bm.bins.size(); ++b) {
        char name[32];
        std::snprintf(name, sizeof name, "bin_%03zu.json", b);
        save_checkpoint(bm.models[b], dir / name, provenance);
        const Matrix& r = bm.rotations[b];
        index["bins"].push_back({{"index", b},
                                 {"month", month_label(bm.bins[b].month)},
                                 {"month_index", bm.bins[b].month},
                                 {"size", bm.bins[b].members.size()},
                                 {"checkpoint", name},
                                 {"rotation", {{"rows", r.rows()}, {"cols", r.cols()}, {"data", r.values()}}}});
    }
    std::ofstream f(dir / "rotations.json", std::ios::binary);
    if (!f) throw DataError("cannot write " + (dir / "rotations.json").string());
    f << index.dump(1) << '\n';
}

BinnedModel load_binned(const std::filesystem::path& dir) {
    std::ifstream f(dir / "rotations.json", std::ios::binary);
    if (!f) throw DataError("cannot open " + (dir / "rotations.json").string());
    json index;
    try {
        index = json::parse(f);
    } catch (const json::parse_error& e) {
        throw DataError("corrupt binned index: " + std::string(e.what()));
    }
    if (index.value("format_version", -1) != kCheckpointFormatVersion) {
        throw DataError("binned checkpoint format version mismatch");
    }
    BinnedModel bm;
    try {
        for (const auto& entry : index.at("bins")) {
            Bin bin;
            bin.index = entry.at("index").get<std::size_t>();
            bin.month = entry.at("month_index").get<std::int64_t>();
            bin.month_start = month_start(bin.month);
            bin.month_end = month_start(bin.month + 1);
            bm.bins.push_back(bin);
            bm.models.push_back(load_checkpoint(dir / entry.at("checkpoint").get<std::string>()));
            const auto& r = entry.at("rotation");
            bm.rotations.emplace_back(r.at("rows").get<std::size_t>(), r.at("cols").get<std::size_t>(),
                                      r.at("data").get<std::vector<double>>());
        }
    } catch (const json::exception& e) {
        throw DataError("corrupt binned index: " + std::string(e.what()));
    }
    if (bm.bins.empty()) throw DataError("binned checkpoint has no bins");
    return bm;
}

} // namespace dcm
