#include "dcm/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dcm/error.hpp"

namespace dcm {

using json = nlohmann::json;

void ModelConfig::validate() const {
    if (d_v == 0 || d_t == 0 || hidden_dim == 0 || time_dim == 0 || embed_dim == 0) {
        throw UsageError("model dims must all be >= 1");
    }
}

ModelParams ModelParams::zeros(const ModelConfig& cfg) {
    cfg.validate();
    const std::size_t cat = cfg.hidden_dim + cfg.time_dim;
    ModelParams p;
    p.w_vh = Matrix(cfg.hidden_dim, cfg.d_v);
    p.b_vh = Vector(cfg.hidden_dim);
    p.w_th = Matrix(cfg.hidden_dim, cfg.d_t);
    p.b_th = Vector(cfg.hidden_dim);
    p.w_time = Matrix(cfg.time_dim, 1);
    p.b_time = Vector(cfg.time_dim);
    p.w_vo = Matrix(cfg.embed_dim, cat);
    p.b_vo = Vector(cfg.embed_dim);
    p.w_to = Matrix(cfg.embed_dim, cat);
    p.b_to = Vector(cfg.embed_dim);
    return p;
}

void ModelParams::for_each(const std::function<void(const std::string&, std::span<double>, bool)>& fn) {
    fn("W_vh", w_vh.span(), false);
    fn("b_vh", b_vh.span(), true);
    fn("W_th", w_th.span(), false);
    fn("b_th", b_th.span(), true);
    fn("W_time", w_time.span(), false);
    fn("b_time", b_time.span(), true);
    fn("W_vo", w_vo.span(), false);
    fn("b_vo", b_vo.span(), true);
    fn("W_to", w_to.span(), false);
    fn("b_to", b_to.span(), true);
}

void ModelParams::for_each(
    const std::function<void(const std::string&, std::span<const double>, bool)>& fn) const {
    const_cast<ModelParams*>(this)->for_each(
        [&](const std::string& name, std::span<double> values, bool bias) { fn(name, values, bias); });
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, std::span<const double> v, bool) { n += v.size(); });
    return n;
}

namespace {

void glorot_fill(Matrix& w, Rng rng) {
    const double fan_in = static_cast<double>(w.cols());
    const double fan_out = static_cast<double>(w.rows());
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& x : w.span()) x = rng.uniform(-bound, bound);
}

Vector affine_tanh(const Matrix& w, const Vector& b, std::span<const double> x) {
    Vector out = matvec(w, x);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i] + b[i]);
    return out;
}

} // namespace

ModelParams init_params(const ModelConfig& cfg) {
    ModelParams p = ModelParams::zeros(cfg);
    const Rng root(cfg.seed);
    glorot_fill(p.w_vh, root.split(11));
    glorot_fill(p.w_th, root.split(12));
    glorot_fill(p.w_time, root.split(13));
    glorot_fill(p.w_vo, root.split(14));
    glorot_fill(p.w_to, root.split(15));
    return p;
}

Vector time_embed(const ModelParams& p, double u) {
    const double in[1] = {u};
    return affine_tanh(p.w_time, p.b_time, in);
}

ProjectionTrace project_trace(const ModelParams& p, std::span<const double> x, Modality m, double u) {
    const bool visual = m == Modality::Visual;
    const Matrix& w_h = visual ? p.w_vh : p.w_th;
    if (x.size() != w_h.cols()) {
        throw DataError(std::string("input dimension ") + std::to_string(x.size()) + " does not match the model's " +
                        to_string(m) + " dimension " + std::to_string(w_h.cols()));
    }
    ProjectionTrace t;
    t.hidden = affine_tanh(w_h, visual ? p.b_vh : p.b_th, x);
    t.time = time_embed(p, u);
    t.concat = Vector(t.hidden.size() + t.time.size());
    std::copy(t.hidden.begin(), t.hidden.end(), t.concat.begin());
    std::copy(t.time.begin(), t.time.end(), t.concat.begin() + static_cast<std::ptrdiff_t>(t.hidden.size()));
    t.z = affine_tanh(visual ? p.w_vo : p.w_to, visual ? p.b_vo : p.b_to, t.concat.span());
    t.z_norm = l2_norm(t.z.span());
    t.e = l2_normalize(t.z.span());
    return t;
}

Embedding project(const ModelParams& p, std::span<const double> x, Modality m, double u) {
    return Embedding{project_trace(p, x, m, u).e, m, u};
}

void backprop_projection(const ModelParams& p, const ProjectionTrace& trace, std::span<const double> x,
                         Modality m, double u, std::span<const double> grad_e, ModelParams& grads) {
    const bool visual = m == Modality::Visual;
    const Matrix& w_o = visual ? p.w_vo : p.w_to;
    Matrix& gw_o = visual ? grads.w_vo : grads.w_to;
    Vector& gb_o = visual ? grads.b_vo : grads.b_to;
    Matrix& gw_h = visual ? grads.w_vh : grads.w_th;
    Vector& gb_h = visual ? grads.b_vh : grads.b_th;

    // Through e = z / ‖z‖ and z = tanh(a).
    const double e_dot_g = dot(trace.e.span(), grad_e);
    Vector delta_o(trace.z.size());
    for (std::size_t i = 0; i < delta_o.size(); ++i) {
        const double dz = (grad_e[i] - trace.e[i] * e_dot_g) / trace.z_norm;
        delta_o[i] = dz * (1.0 - trace.z[i] * trace.z[i]);
    }
    for (std::size_t i = 0; i < delta_o.size(); ++i) {
        const double d = delta_o[i];
        if (d == 0.0) continue;
        auto row = gw_o.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] += d * trace.concat[j];
        gb_o[i] += d;
    }

    const Vector d_concat = matvec_transposed(w_o, delta_o.span());
    const std::size_t hidden = trace.hidden.size();
    for (std::size_t i = 0; i < hidden; ++i) {
        const double d = d_concat[i] * (1.0 - trace.hidden[i] * trace.hidden[i]);
        if (d == 0.0) continue;
        auto row = gw_h.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] += d * x[j];
        gb_h[i] += d;
    }
    for (std::size_t i = 0; i < trace.time.size(); ++i) {
        const double d = d_concat[hidden + i] * (1.0 - trace.time[i] * trace.time[i]);
        grads.w_time(i, 0) += d * u;
        grads.b_time[i] += d;
    }
}

double Model::time_input(EpochSeconds ts, bool clamp) const {
    if (config.static_time) return 0.0;
    return normalize_ts(ts, span, clamp);
}

Embedding Model::embed(std::span<const double> x, Modality m, EpochSeconds ts, bool clamp) const {
    return project(params, x, m, time_input(ts, clamp));
}

json to_json(const ModelConfig& cfg) {
    return json{{"d_v", cfg.d_v},
                {"d_t", cfg.d_t},
                {"hidden_dim", cfg.hidden_dim},
                {"time_dim", cfg.time_dim},
                {"embed_dim", cfg.embed_dim},
                {"seed", cfg.seed},
                {"use_bias", cfg.use_bias},
                {"static_time", cfg.static_time}};
}

ModelConfig model_config_from_json(const json& j) {
    ModelConfig cfg;
    try {
        cfg.d_v = j.at("d_v").get<std::size_t>();
        cfg.d_t = j.at("d_t").get<std::size_t>();
        cfg.hidden_dim = j.at("hidden_dim").get<std::size_t>();
        cfg.time_dim = j.at("time_dim").get<std::size_t>();
        cfg.embed_dim = j.at("embed_dim").get<std::size_t>();
        cfg.seed = j.value("seed", std::uint64_t{0});
        cfg.use_bias = j.value("use_bias", true);
        cfg.static_time = j.value("static_time", false);
    } catch (const json::exception& e) {
        throw DataError(std::string("model config: ") + e.what());
    }
    return cfg;
}

namespace {

void append_values(std::string& out, std::span<const double> values) {
    char buf[32];
    out += '[';
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        std::snprintf(buf, sizeof buf, "%.17g", values[i]);
        out += buf;
    }
    out += ']';
}

} // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path, const json& provenance) {
    for (const auto* v : {&model.params.w_vh, &model.params.w_th, &model.params.w_vo, &model.params.w_to}) {
        if (!all_finite(v->span())) throw NumericalError("refusing to save non-finite weights");
    }
    std::string out;
    out += "{\"format_version\":" + std::to_string(kCheckpointFormatVersion);
    if (!provenance.is_null()) out += ",\"provenance\":" + provenance.dump();
    out += ",\"config\":" + to_json(model.config).dump();
    out += ",\"timespan\":" +
           json{{"start", format_iso8601(model.span.start)},
                {"end", format_iso8601(model.span.end)},
                {"start_epoch", model.span.start},
                {"end_epoch", model.span.end}}
               .dump();
    out += ",\"weights\":{";
    bool first = true;
    model.params.for_each([&](const std::string& name, std::span<const double> values, bool) {
        if (!first) out += ',';
        first = false;
        out += "\n\"" + name + "\":";
        append_values(out, values);
    });
    out += "\n}}\n";

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write checkpoint " + path.string());
    f << out;
    if (!f) throw DataError("failed writing checkpoint " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint " + path.string());
    std::stringstream buf;
    buf << f.rdbuf();
    json doc;
    try {
        doc = json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw DataError("corrupt checkpoint " + path.string() + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("format_version")) {
        throw DataError("corrupt checkpoint " + path.string() + ": missing format_version");
    }
    const int version = doc["format_version"].get<int>();
    if (version != kCheckpointFormatVersion) {
        throw DataError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                        std::to_string(kCheckpointFormatVersion) + ")");
    }
    Model model;
    model.config = model_config_from_json(doc.at("config"));
    try {
        model.config.validate();
    } catch (const UsageError& e) {
        throw DataError(std::string("checkpoint config: ") + e.what());
    }
    try {
        const auto& ts = doc.at("timespan");
        model.span = Timespan{ts.at("start_epoch").get<EpochSeconds>(), ts.at("end_epoch").get<EpochSeconds>()};
    } catch (const json::exception& e) {
        throw DataError(std::string("checkpoint timespan: ") + e.what());
    }
    model.params = ModelParams::zeros(model.config);
    const auto& weights = doc.contains("weights") ? doc["weights"] : json();
    model.params.for_each([&](const std::string& name, std::span<double> values, bool) {
        if (!weights.is_object() || !weights.contains(name)) {
            throw DataError("checkpoint is missing tensor '" + name + "'");
        }
        const auto& arr = weights[name];
        if (!arr.is_array() || arr.size() != values.size()) {
            throw DataError("checkpoint tensor '" + name + "' has " + std::to_string(arr.size()) +
                            " entries, expected " + std::to_string(values.size()));
        }
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!arr[i].is_number()) throw DataError("checkpoint tensor '" + name + "' has a non-numeric entry");
            values[i] = arr[i].get<double>();
        }
    });
    return model;
}

} // namespace dcm
