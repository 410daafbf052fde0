// dcm: synthetic data, training, evaluation and inspection of diachronic cross-modal embeddings.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dcm/dataset.hpp"
#include "dcm/error.hpp"
#include "dcm/eval.hpp"
#include "dcm/model.hpp"
#include "dcm/report.hpp"
#include "dcm/synth.hpp"
#include "dcm/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace dcm;

namespace {

json read_json_file(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open " + path.string());
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_json_file(const json& j, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f << j.dump(2) << '\n';
}

json provenance(const RunMeta& meta) {
    return {{"tool", "dcm"}, {"version", meta.tool_version}, {"seed", meta.seed}, {"config_hash", meta.config_hash}};
}

std::string provenance_line(const RunMeta& meta) {
    return "tool=dcm version=" + meta.tool_version + " seed=" + std::to_string(meta.seed) +
           " config_hash=" + meta.config_hash;
}

fs::path sibling(const fs::path& path, const std::string& suffix) {
    fs::path out = path;
    out.replace_extension();
    out += suffix;
    return out;
}

// Training options: a JSON file provides the base, explicit flags override it.
struct TrainOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<double> lr, momentum, margin, window, decay, intra_margin;
    std::optional<std::size_t> epochs, batch_size, hidden, time_dim, dim, k_neg, k_pos;
    bool no_bias = false;
    bool static_model = false;
    bool uniform_split = false;

    void add_to(CLI::App* app) {
        app->add_option("--config", config_path, "JSON run configuration");
        app->add_option("--seed", seed, "seed for initialization, batching and splitting");
        app->add_option("--lr", lr, "learning rate");
        app->add_option("--momentum", momentum, "SGD momentum");
        app->add_option("--epochs", epochs, "training epochs");
        app->add_option("--batch-size", batch_size, "batch size");
        app->add_option("--hidden", hidden, "hidden layer width");
        app->add_option("--time-dim", time_dim, "time layer width");
        app->add_option("--dim", dim, "embedding dimension D");
        app->add_option("--margin", margin, "inter-category margin");
        app->add_option("--window", window, "temporal window w in months");
        app->add_option("--decay", decay, "temporal decay rate");
        app->add_option("--intra-margin", intra_margin, "intra-category margin");
        app->add_option("--k-neg", k_neg, "inter negatives per anchor");
        app->add_option("--k-pos", k_pos, "intra partners per anchor");
        app->add_flag("--no-bias", no_bias, "layers without bias terms");
        app->add_flag("--static", static_model, "static baseline: time input frozen, no intra term");
        app->add_flag("--uniform-split", uniform_split, "split without stratifying by category");
    }
};

template <typename T>
void take(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

json to_json(const TrainConfig& cfg) {
    return {{"model",
             {{"hidden_dim", cfg.model.hidden_dim},
              {"time_dim", cfg.model.time_dim},
              {"embed_dim", cfg.model.embed_dim},
              {"use_bias", cfg.model.use_bias},
              {"static_time", cfg.model.static_time},
              {"seed", cfg.model.seed}}},
            {"train",
             {{"learning_rate", cfg.learning_rate},
              {"momentum", cfg.momentum},
              {"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"seed", cfg.seed}}},
            {"loss",
             {{"margin", cfg.loss.margin},
              {"window_months", cfg.loss.window_months},
              {"decay", cfg.loss.decay},
              {"intra_margin", cfg.loss.intra_margin},
              {"intra_enabled", cfg.loss.intra_enabled},
              {"k_neg", cfg.loss.k_neg},
              {"k_pos", cfg.loss.k_pos}}}};
}

TrainConfig resolve_train_config(const TrainOptions& o, std::size_t d_v, std::size_t d_t) {
    TrainConfig cfg;
    std::uint64_t seed = 0;
    if (!o.config_path.empty()) {
        const json j = read_json_file(o.config_path);
        try {
            take(j, "seed", seed);
            if (j.contains("model")) {
                const json& m = j["model"];
                take(m, "hidden_dim", cfg.model.hidden_dim);
                take(m, "time_dim", cfg.model.time_dim);
                take(m, "embed_dim", cfg.model.embed_dim);
                take(m, "use_bias", cfg.model.use_bias);
                take(m, "static_time", cfg.model.static_time);
            }
            if (j.contains("train")) {
                const json& t = j["train"];
                take(t, "learning_rate", cfg.learning_rate);
                take(t, "momentum", cfg.momentum);
                take(t, "epochs", cfg.epochs);
                take(t, "batch_size", cfg.batch_size);
            }
            if (j.contains("loss")) {
                const json& l = j["loss"];
                take(l, "margin", cfg.loss.margin);
                take(l, "window_months", cfg.loss.window_months);
                take(l, "decay", cfg.loss.decay);
                take(l, "intra_margin", cfg.loss.intra_margin);
                take(l, "intra_enabled", cfg.loss.intra_enabled);
                take(l, "k_neg", cfg.loss.k_neg);
                take(l, "k_pos", cfg.loss.k_pos);
            }
        } catch (const json::exception& e) {
            throw UsageError(o.config_path + ": " + e.what());
        }
    }
    if (o.seed) seed = *o.seed;
    if (o.lr) cfg.learning_rate = *o.lr;
    if (o.momentum) cfg.momentum = *o.momentum;
    if (o.epochs) cfg.epochs = *o.epochs;
    if (o.batch_size) cfg.batch_size = *o.batch_size;
    if (o.hidden) cfg.model.hidden_dim = *o.hidden;
    if (o.time_dim) cfg.model.time_dim = *o.time_dim;
    if (o.dim) cfg.model.embed_dim = *o.dim;
    if (o.margin) cfg.loss.margin = *o.margin;
    if (o.window) cfg.loss.window_months = *o.window;
    if (o.decay) cfg.loss.decay = *o.decay;
    if (o.intra_margin) cfg.loss.intra_margin = *o.intra_margin;
    if (o.k_neg) cfg.loss.k_neg = *o.k_neg;
    if (o.k_pos) cfg.loss.k_pos = *o.k_pos;
    if (o.no_bias) cfg.model.use_bias = false;
    cfg.seed = seed;
    cfg.model.seed = seed;
    cfg.model.d_v = d_v;
    cfg.model.d_t = d_t;
    if (o.static_model) cfg = static_variant(cfg);
    cfg.validate();
    return cfg;
}

struct Inputs {
    Dataset train;
    Dataset val;
    std::optional<Dataset> test;
    Timespan span;
};

// Loads training data; without a validation file the data is split into train/val/test.
Inputs load_inputs(Dataset data, const std::string& val_path, std::uint64_t seed, bool uniform) {
    Inputs in;
    if (!val_path.empty()) {
        in.val = load_jsonl(val_path);
        if (in.val.d_v != data.d_v || in.val.d_t != data.d_t)
            throw DataError("validation data dims differ from training data");
        in.span = span_union(data.timespan, in.val.timespan);
        in.train = std::move(data);
    } else {
        Rng rng(seed);
        Split s = split(data, rng, uniform ? SplitMode::Uniform : SplitMode::Stratified);
        in.span = data.timespan;
        in.train = std::move(s.train);
        in.val = std::move(s.val);
        in.test = std::move(s.test);
    }
    return in;
}

void log_report(const TrainReport& r) {
    for (const auto& e : r.epochs) {
        std::fprintf(stderr, "epoch %zu  train %.6f  val %.6f%s\n", e.epoch, e.train_loss, e.val_loss,
                     e.epoch == r.selected_epoch ? "  *" : "");
    }
}

struct LoadedModel {
    std::optional<Model> continuous;
    std::optional<BinnedModel> binned;
    json config;
    std::uint64_t seed = 0;

    EmbedFn embedder() const { return continuous ? embedder_for(*continuous, true) : embedder_for(*binned); }
    bool is_static() const { return continuous ? continuous->config.static_time : true; }
};

LoadedModel load_any(const fs::path& path) {
    LoadedModel lm;
    if (fs::is_directory(path)) {
        lm.binned = load_binned(path);
        if (lm.binned->models.empty()) throw DataError("binned checkpoint has no bins");
        lm.config = {{"kind", "binned"}, {"bins", lm.binned->bins.size()},
                     {"model", to_json(lm.binned->models.front().config)}};
        lm.seed = lm.binned->models.front().config.seed;
        const json index = read_json_file(path / "rotations.json");
        if (index.contains("provenance")) lm.seed = index["provenance"].value("seed", lm.seed);
    } else {
        lm.continuous = load_checkpoint(path);
        lm.config = {{"kind", lm.continuous->config.static_time ? "static" : "continuous"},
                     {"model", to_json(lm.continuous->config)}};
        lm.seed = lm.continuous->config.seed;
    }
    return lm;
}

Vector parse_vector(const std::string& input) {
    json j;
    std::error_code ec;
    const bool is_file = input.find('[') == std::string::npos && fs::is_regular_file(input, ec);
    const std::string text = is_file ? read_json_file(input).dump() : input;
    try {
        j = json::parse(text);
    } catch (const json::parse_error&) {
        throw DataError("--input must be a JSON array of numbers or a file containing one");
    }
    if (!j.is_array() || j.empty()) throw DataError("--input must be a non-empty JSON array");
    std::vector<double> v;
    for (const auto& x : j) {
        if (!x.is_number()) throw DataError("--input contains a non-numeric entry");
        v.push_back(x.get<double>());
    }
    return Vector(std::move(v));
}

std::size_t require_query(const Dataset& ds, const std::string& id) {
    const std::size_t q = ds.find(id);
    if (q == ds.size()) throw DataError("query id '" + id + "' not found");
    return q;
}

void print_dispersion(const std::vector<DispersionPoint>& series) {
    for (const auto& p : series) {
        std::printf("%s  %s  (%zu)%s\n", p.bin.c_str(), p.value ? format_double(*p.value).c_str() : "-", p.neighbours,
                    p.short_of_k ? "  short of K" : "");
    }
}

int run(int argc, char** argv) {
    CLI::App app{"Diachronic cross-modal embeddings"};
    app.require_subcommand(1);
    app.fallthrough();
    std::size_t threads = 1;
    app.add_option("--threads", threads, "worker threads for training and evaluation")->check(CLI::PositiveNumber);

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset with planted temporal structure");
    std::string synth_config, synth_out;
    std::optional<std::uint64_t> synth_seed;
    bool synth_stationary = false;
    synth_cmd->add_option("--config", synth_config, "JSON generator configuration");
    synth_cmd->add_option("--out", synth_out, "output JSONL")->required();
    synth_cmd->add_option("--seed", synth_seed, "generator seed");
    synth_cmd->add_flag("--stationary", synth_stationary, "default configuration without the semantic shift");

    // train
    auto* train_cmd = app.add_subcommand("train", "train a continuous (or --static) model");
    TrainOptions train_opts;
    std::string train_data, train_val, train_out, train_test_out, train_report;
    train_cmd->add_option("--data", train_data, "training JSONL")->required();
    train_cmd->add_option("--val", train_val, "validation JSONL (default: split from --data)");
    train_cmd->add_option("--out", train_out, "checkpoint path")->required();
    train_cmd->add_option("--test-out", train_test_out, "where to write the held-out test split");
    train_cmd->add_option("--report", train_report, "per-epoch loss CSV");
    train_opts.add_to(train_cmd);

    // train-binned
    auto* binned_cmd = app.add_subcommand("train-binned", "train one static model per month and align them");
    TrainOptions binned_opts;
    std::string binned_data, binned_val, binned_out, binned_test_out;
    std::size_t binned_min_bin = kDefaultMinBinSize;
    binned_cmd->add_option("--data", binned_data, "training JSONL")->required();
    binned_cmd->add_option("--val", binned_val, "validation JSONL (default: split from --data)");
    binned_cmd->add_option("--out", binned_out, "output directory")->required();
    binned_cmd->add_option("--test-out", binned_test_out, "where to write the held-out test split");
    binned_cmd->add_option("--min-bin", binned_min_bin, "minimum instances per monthly bin");
    binned_opts.add_to(binned_cmd);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a test set");
    std::string eval_ckpt, eval_test, eval_protocol, eval_out, eval_query, eval_modality = "visual", eval_bins;
    std::optional<std::size_t> eval_k;
    double eval_window = 4.0;
    std::size_t eval_queries = 50, eval_min_bin = 1;
    std::uint64_t eval_seed = 0;
    eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint file, or directory of a binned model")->required();
    eval_cmd->add_option("--test", eval_test, "test JSONL")->required();
    eval_cmd->add_option("--protocol", eval_protocol, "evaluation protocol")
        ->required()
        ->check(CLI::IsMember({"coarse", "local", "bounded", "period", "dispersion"}));
    eval_cmd->add_option("--out", eval_out, "per-query CSV (a .json summary is written alongside)")->required();
    eval_cmd->add_option("--k", eval_k, "cutoff (local: 10, period: 50, dispersion: 5; coarse: full ranking)");
    eval_cmd->add_option("--window", eval_window, "period protocol window in months");
    eval_cmd->add_option("--queries-per-category", eval_queries, "local protocol query sample size");
    eval_cmd->add_option("--min-bin", eval_min_bin, "minimum instances per test bin");
    eval_cmd->add_option("--seed", eval_seed, "local protocol query sampling seed");
    eval_cmd->add_option("--query-id", eval_query, "dispersion query instance");
    eval_cmd->add_option("--modality", eval_modality, "dispersion query modality")->check(CLI::IsMember({"visual", "text"}));
    eval_cmd->add_option("--bin-series", eval_bins, "bounded protocol per-bin CSV");

    // embed
    auto* embed_cmd = app.add_subcommand("embed", "print the embedding of one feature vector");
    std::string embed_ckpt, embed_input, embed_ts, embed_modality;
    embed_cmd->add_option("--ckpt", embed_ckpt, "checkpoint")->required();
    embed_cmd->add_option("--input", embed_input, "JSON array of features, or a file holding one")->required();
    embed_cmd->add_option("--ts", embed_ts, "ISO-8601 instant")->required();
    embed_cmd->add_option("--modality", embed_modality, "visual or text")->required()->check(CLI::IsMember({"visual", "text"}));

    // neighbors
    auto* nb_cmd = app.add_subcommand("neighbors", "evolution timeline of a query's nearest cross-modal matches");
    std::string nb_ckpt, nb_data, nb_query, nb_modality = "visual", nb_out;
    std::size_t nb_top_bins = 20, nb_per_bin = 4, nb_min_bin = 1;
    nb_cmd->add_option("--ckpt", nb_ckpt, "checkpoint")->required();
    nb_cmd->add_option("--data", nb_data, "JSONL holding the query and the candidates")->required();
    nb_cmd->add_option("--query-id", nb_query, "query instance id")->required();
    nb_cmd->add_option("--modality", nb_modality, "query modality")->check(CLI::IsMember({"visual", "text"}));
    nb_cmd->add_option("--top-bins", nb_top_bins, "bins to report");
    nb_cmd->add_option("--per-bin", nb_per_bin, "matches per bin");
    nb_cmd->add_option("--min-bin", nb_min_bin, "minimum instances per bin");
    nb_cmd->add_option("--out", nb_out, "CSV output (default: stdout)");

    // dispersion
    auto* disp_cmd = app.add_subcommand("dispersion", "semantic dispersion of a query across monthly bins");
    std::string disp_ckpt, disp_data, disp_query, disp_modality = "visual", disp_out;
    std::size_t disp_k = 5, disp_min_bin = 1;
    disp_cmd->add_option("--ckpt", disp_ckpt, "checkpoint")->required();
    disp_cmd->add_option("--data", disp_data, "JSONL holding the query and the candidates")->required();
    disp_cmd->add_option("--query-id", disp_query, "query instance id")->required();
    disp_cmd->add_option("--modality", disp_modality, "query modality")->check(CLI::IsMember({"visual", "text"}));
    disp_cmd->add_option("--k", disp_k, "neighbours per bin")->check(CLI::PositiveNumber);
    disp_cmd->add_option("--min-bin", disp_min_bin, "minimum instances per bin");
    disp_cmd->add_option("--out", disp_out, "CSV output (default: stdout)");

    if (argc <= 1) {
        std::cerr << app.help();
        return 1;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (*synth_cmd) {
        SynthConfig cfg = synth_stationary ? stationary_synth_config() : default_synth_config();
        if (!synth_config.empty()) cfg = synth_config_from_json(read_json_file(synth_config));
        if (synth_seed) cfg.seed = *synth_seed;
        cfg.validate();
        const SynthResult r = generate(cfg);
        const RunMeta meta = make_run_meta(cfg.seed, to_json(cfg));
        save_jsonl(r.dataset, synth_out, provenance_line(meta));
        json truth = to_json(r.truth);
        truth["provenance"] = provenance(meta);
        write_json_file(truth, sibling(synth_out, ".truth.json"));
        std::fprintf(stderr, "wrote %zu instances to %s\n", r.dataset.size(), synth_out.c_str());
        return 0;
    }

    if (*train_cmd) {
        Dataset data = load_jsonl(train_data);
        const TrainConfig cfg = resolve_train_config(train_opts, data.d_v, data.d_t);
        const Inputs in = load_inputs(std::move(data), train_val, cfg.seed, train_opts.uniform_split);
        const RunMeta meta = make_run_meta(cfg.seed, to_json(cfg));
        const TrainResult r = train_continuous(in.train, in.val, cfg, in.span);
        log_report(r.report);
        save_checkpoint(r.model, train_out, provenance(meta));
        if (!train_report.empty()) write_train_report_csv(r.report, meta, train_report);
        if (!train_test_out.empty()) {
            if (!in.test) throw UsageError("--test-out needs the internal split (omit --val)");
            save_jsonl(*in.test, train_test_out, provenance_line(meta));
        }
        std::fprintf(stderr, "selected epoch %zu, %.1f s\n", r.report.selected_epoch, r.report.wall_seconds);
        return 0;
    }

    if (*binned_cmd) {
        Dataset data = load_jsonl(binned_data);
        TrainOptions opts = binned_opts;
        opts.static_model = true;
        const TrainConfig cfg = resolve_train_config(opts, data.d_v, data.d_t);
        const Inputs in = load_inputs(std::move(data), binned_val, cfg.seed, binned_opts.uniform_split);
        const Binning binning = bin_monthly(in.train, binned_min_bin);
        if (!binning.excluded.empty()) {
            std::fprintf(stderr, "warning: %zu instances fall in bins smaller than %zu and are not used\n",
                         binning.excluded.size(), binned_min_bin);
        }
        json config = to_json(cfg);
        config["min_bin"] = binned_min_bin;
        const RunMeta meta = make_run_meta(cfg.seed, config);
        const BinnedModel bm = train_binned(in.train, in.val, cfg, binning.bins, in.span, threads);
        save_binned(bm, binned_out, provenance(meta));
        if (!binned_test_out.empty()) {
            if (!in.test) throw UsageError("--test-out needs the internal split (omit --val)");
            save_jsonl(*in.test, binned_test_out, provenance_line(meta));
        }
        std::fprintf(stderr, "trained %zu bins into %s\n", bm.models.size(), binned_out.c_str());
        return 0;
    }

    if (*eval_cmd) {
        const LoadedModel lm = load_any(eval_ckpt);
        const Dataset test = load_jsonl(eval_test);
        const EvalOptions opts{threads};
        const EmbedFn embed = lm.embedder();
        json config = lm.config;
        config["protocol"] = eval_protocol;
        config["min_bin"] = eval_min_bin;
        if (lm.continuous && !lm.continuous->span.contains(test.timespan.start))
            std::fprintf(stderr, "warning: test data starts before the training span; times are clamped\n");
        if (lm.continuous && !lm.continuous->span.contains(test.timespan.end))
            std::fprintf(stderr, "warning: test data ends after the training span; times are clamped\n");

        if (eval_protocol == "dispersion") {
            if (eval_query.empty()) throw UsageError("--protocol dispersion needs --query-id");
            if (lm.is_static()) std::fprintf(stderr, "warning: a static model has no temporal dispersion\n");
            const std::size_t k = eval_k.value_or(5);
            config["k"] = k;
            config["query_id"] = eval_query;
            config["modality"] = eval_modality;
            const RunMeta meta = make_run_meta(lm.seed, config);
            const auto series = dispersion(embed, test, require_query(test, eval_query),
                                           parse_modality(eval_modality), k, eval_min_bin);
            write_dispersion_csv(series, meta, eval_out);
            return 0;
        }

        EvalReport report;
        std::vector<BinScore> per_bin;
        if (eval_protocol == "coarse") {
            if (eval_k) config["k"] = *eval_k;
            report = coarse_alignment(embed, test, eval_k, opts);
        } else if (eval_protocol == "local") {
            LocalAlignmentOptions lo;
            lo.k = eval_k.value_or(10);
            lo.queries_per_category = eval_queries;
            lo.min_bin_size = eval_min_bin;
            lo.seed = eval_seed;
            config["k"] = lo.k;
            config["queries_per_category"] = lo.queries_per_category;
            config["seed"] = lo.seed;
            report = local_alignment(embed, test, lo, opts);
        } else if (eval_protocol == "bounded") {
            BoundedResult br = bounded_semantics(embed, test, eval_min_bin, opts);
            report = std::move(br.report);
            per_bin = std::move(br.per_bin);
        } else {
            const std::size_t k = eval_k.value_or(50);
            config["k"] = k;
            config["window_months"] = eval_window;
            report = time_period_inference(embed, test, k, eval_window, opts);
        }
        const RunMeta meta = make_run_meta(lm.seed, config);
        write_report_csv(report, meta, eval_out);
        write_report_summary(report, meta, sibling(eval_out, ".json"));
        if (!eval_bins.empty()) {
            if (eval_protocol != "bounded") throw UsageError("--bin-series applies to --protocol bounded");
            write_bin_series_csv(per_bin, meta, eval_bins);
        }
        for (const auto& note : report.notes) std::fprintf(stderr, "note: %s\n", note.c_str());
        std::printf("%s  I2T %.4f  T2I %.4f  avg %.4f\n", report.metric.c_str(), report.image_to_text,
                    report.text_to_image, report.average);
        return 0;
    }

    if (*embed_cmd) {
        const LoadedModel lm = load_any(embed_ckpt);
        const Vector x = parse_vector(embed_input);
        const EpochSeconds ts = parse_iso8601(embed_ts);
        const Modality m = parse_modality(embed_modality);
        const Vector e = lm.continuous ? lm.continuous->embed(x.span(), m, ts, true).vector : lm.binned->embed(x.span(), m, ts);
        std::string out = "[";
        for (std::size_t i = 0; i < e.size(); ++i) out += (i ? "," : "") + format_double(e[i]);
        std::printf("%s]\n", out.c_str());
        return 0;
    }

    if (*nb_cmd) {
        const LoadedModel lm = load_any(nb_ckpt);
        const Dataset ds = load_jsonl(nb_data);
        const auto timeline = evolution_timeline(lm.embedder(), ds, require_query(ds, nb_query),
                                                 parse_modality(nb_modality), nb_top_bins, nb_per_bin, nb_min_bin);
        json config = lm.config;
        config["query_id"] = nb_query;
        config["modality"] = nb_modality;
        config["top_bins"] = nb_top_bins;
        config["per_bin"] = nb_per_bin;
        const RunMeta meta = make_run_meta(lm.seed, config);
        std::ostringstream csv;
        csv << "# " << provenance_line(meta) << '\n' << "month,rank,id,similarity\n";
        for (const auto& entry : timeline) {
            for (std::size_t r = 0; r < entry.matches.size(); ++r) {
                csv << entry.bin << ',' << r + 1 << ',' << entry.matches[r].id << ','
                    << format_double(entry.matches[r].similarity) << '\n';
            }
        }
        if (nb_out.empty()) {
            std::cout << csv.str();
        } else {
            std::ofstream f(nb_out, std::ios::binary);
            if (!f) throw DataError("cannot write " + nb_out);
            f << csv.str();
        }
        return 0;
    }

    if (*disp_cmd) {
        const LoadedModel lm = load_any(disp_ckpt);
        const Dataset ds = load_jsonl(disp_data);
        if (lm.is_static()) std::fprintf(stderr, "warning: a static model has no temporal dispersion\n");
        const auto series = dispersion(lm.embedder(), ds, require_query(ds, disp_query), parse_modality(disp_modality),
                                       disp_k, disp_min_bin);
        if (disp_out.empty()) {
            print_dispersion(series);
        } else {
            json config = lm.config;
            config["query_id"] = disp_query;
            config["modality"] = disp_modality;
            config["k"] = disp_k;
            write_dispersion_csv(series, make_run_meta(lm.seed, config), disp_out);
        }
        return 0;
    }
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 1;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
