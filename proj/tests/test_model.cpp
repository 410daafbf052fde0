#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dcm/model.hpp"
#include "test_util.hpp"

using namespace dcm;

namespace {

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.d_v = 6;
    cfg.d_t = 5;
    cfg.hidden_dim = 8;
    cfg.time_dim = 4;
    cfg.embed_dim = 3;
    cfg.seed = 17;
    return cfg;
}

ModelConfig unit_config() {
    ModelConfig cfg;
    cfg.d_v = 1;
    cfg.d_t = 1;
    cfg.hidden_dim = 1;
    cfg.time_dim = 1;
    cfg.embed_dim = 1;
    return cfg;
}

double max_abs_diff(const Vector& a, const Vector& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("init_params") {
    const ModelConfig cfg = small_config();
    const ModelParams a = init_params(cfg);
    CHECK(a == init_params(cfg));

    ModelConfig other = cfg;
    other.seed = 18;
    CHECK_FALSE(a == init_params(other));

    CHECK(a.w_vh.rows() == cfg.hidden_dim);
    CHECK(a.w_vh.cols() == cfg.d_v);
    CHECK(a.w_vo.cols() == cfg.hidden_dim + cfg.time_dim);
    CHECK(a.w_time.cols() == 1);

    std::size_t count = 0;
    a.for_each([&](const std::string&, std::span<const double> values, bool is_bias) {
        count += values.size();
        for (double x : values)
            if (is_bias) CHECK(x == 0.0);
    });
    CHECK(count == a.parameter_count());

    auto within_glorot = [](const Matrix& w) {
        const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        for (double x : w.span())
            if (std::abs(x) > bound) return false;
        return true;
    };
    CHECK(within_glorot(a.w_vh));
    CHECK(within_glorot(a.w_th));
    CHECK(within_glorot(a.w_time));
    CHECK(within_glorot(a.w_vo));
    CHECK(within_glorot(a.w_to));

    ModelConfig bad = cfg;
    bad.embed_dim = 0;
    CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("time_embed") {
    ModelParams p = ModelParams::zeros(unit_config());
    CHECK(time_embed(p, 0.7)[0] == 0.0);

    p.w_time(0, 0) = 1.0;
    CHECK(time_embed(p, 0.25)[0] == doctest::Approx(0.24491866240370913).epsilon(1e-15));

    const ModelParams q = init_params(small_config());
    // Each coordinate is tanh of an affine function of u, hence monotone in u.
    for (std::size_t k = 0; k < q.w_time.rows(); ++k) {
        double prev = time_embed(q, 0.0)[k];
        for (int s = 1; s <= 50; ++s) {
            const double cur = time_embed(q, s / 50.0)[k];
            if (q.w_time(k, 0) > 0) CHECK(cur >= prev);
            else CHECK(cur <= prev);
            prev = cur;
        }
    }
}

TEST_CASE("project hand-computed examples") {
    ModelParams p = ModelParams::zeros(unit_config());
    p.w_vh(0, 0) = 1.0;
    p.w_time(0, 0) = 1.0;
    p.w_vo(0, 0) = 1.0;
    p.w_vo(0, 1) = 1.0;
    const Embedding e = project(p, Vector{1.0}.span(), Modality::Visual, 0.25);
    CHECK(e.vector == Vector{1.0});

    const ProjectionTrace tr = project_trace(p, Vector{1.0}.span(), Modality::Visual, 0.25);
    CHECK(tr.hidden[0] == std::tanh(1.0));
    CHECK(tr.time[0] == std::tanh(0.25));
    CHECK(tr.z[0] == std::tanh(std::tanh(1.0) + std::tanh(0.25)));

    ModelConfig two = unit_config();
    two.embed_dim = 2;
    ModelParams q = ModelParams::zeros(two);
    q.w_th(0, 0) = 2.0;
    q.w_time(0, 0) = 1.0;
    q.w_to(0, 0) = 1.0;
    q.w_to(1, 1) = 1.0;
    const Vector out = project(q, Vector{0.5}.span(), Modality::Text, 0.5).vector;
    const double z0 = std::tanh(std::tanh(1.0));
    const double z1 = std::tanh(std::tanh(0.5));
    const double n = std::sqrt(z0 * z0 + z1 * z1);
    CHECK(out[0] == doctest::Approx(z0 / n).epsilon(1e-14));
    CHECK(out[1] == doctest::Approx(z1 / n).epsilon(1e-14));

    // Zero output pre-activation cannot be normalized.
    CHECK_THROWS_AS(project(ModelParams::zeros(unit_config()), Vector{1.0}.span(), Modality::Visual, 0.5),
                    NearZeroNormError);
}

TEST_CASE("project properties") {
    const ModelConfig cfg = small_config();
    const ModelParams p = init_params(cfg);
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const Vector xv = testutil::random_vector(rng, cfg.d_v);
        const Vector xt = testutil::random_vector(rng, cfg.d_t);
        const double u = rng.uniform01();
        const Vector ev = project(p, xv.span(), Modality::Visual, u).vector;
        const Vector et = project(p, xt.span(), Modality::Text, u).vector;
        CHECK(std::abs(l2_norm(ev.span()) - 1.0) < 1e-12);
        CHECK(std::abs(l2_norm(et.span()) - 1.0) < 1e-12);

        // Small time changes give small embedding changes.
        const Vector near = project(p, xv.span(), Modality::Visual, u + 1e-6).vector;
        CHECK(max_abs_diff(ev, near) < 1e-4);
    }

    const Vector x = testutil::random_vector(rng, cfg.d_v);
    CHECK(project(p, x.span(), Modality::Visual, 0.0).vector != project(p, x.span(), Modality::Visual, 1.0).vector);

    CHECK_THROWS_AS(project(p, testutil::random_vector(rng, cfg.d_v + 1).span(), Modality::Visual, 0.5), DataError);
    CHECK_THROWS_AS(project(p, testutil::random_vector(rng, cfg.d_v).span(), Modality::Text, 0.5), DataError);
}

TEST_CASE("modality branches are separate") {
    ModelConfig cfg = small_config();
    cfg.d_t = cfg.d_v;
    const ModelParams p = init_params(cfg);
    Rng rng(6);
    const Vector x = testutil::random_vector(rng, cfg.d_v);
    CHECK(project(p, x.span(), Modality::Visual, 0.3).vector != project(p, x.span(), Modality::Text, 0.3).vector);

    // Changing the text branch leaves visual embeddings untouched.
    ModelParams q = p;
    for (auto& w : q.w_th.span()) w += 0.1;
    for (auto& w : q.w_to.span()) w -= 0.1;
    CHECK(project(p, x.span(), Modality::Visual, 0.3).vector == project(q, x.span(), Modality::Visual, 0.3).vector);
}

TEST_CASE("static model ignores time") {
    Model m{small_config(), {}, Timespan{0, 1000}};
    m.config.static_time = true;
    m.params = init_params(m.config);
    Rng rng(7);
    const Vector x = testutil::random_vector(rng, m.config.d_v);
    CHECK(m.time_input(900) == 0.0);
    CHECK(m.embed(x.span(), Modality::Visual, 10).vector == m.embed(x.span(), Modality::Visual, 990).vector);
    m.config.static_time = false;
    CHECK(m.time_input(500) == 0.5);
    CHECK_THROWS_AS(m.embed(x.span(), Modality::Visual, 2000), OutOfSpanError);
    CHECK_NOTHROW(m.embed(x.span(), Modality::Visual, 2000, true));
}

TEST_CASE("checkpoint round trip") {
    const auto dir = testutil::scratch_dir("model_ckpt");
    Model m{small_config(), {}, Timespan{1483228800, 1546300800}};
    m.params = init_params(m.config);
    // Values that do not survive short decimal printing.
    m.params.b_vo[0] = 0.1 + 0.2;
    m.params.w_vh(0, 0) = 1.0 / 3.0;
    save_checkpoint(m, dir / "m.json");
    const Model back = load_checkpoint(dir / "m.json");
    CHECK(back.config == m.config);
    CHECK(back.span == m.span);
    CHECK(back.params == m.params);

    const std::string text = slurp(dir / "m.json");
    {
        std::ofstream f(dir / "truncated.json");
        f << text.substr(0, text.size() / 2);
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(dir / "truncated.json"), doctest::Contains("corrupt"), DataError);

    nlohmann::json j = nlohmann::json::parse(text);
    j["config"]["d_v"] = 7;
    {
        std::ofstream f(dir / "shape.json");
        f << j.dump();
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "shape.json"), DataError);

    j = nlohmann::json::parse(text);
    j["format_version"] = 99;
    {
        std::ofstream f(dir / "version.json");
        f << j.dump();
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "version.json"), DataError);
    CHECK_THROWS_AS(load_checkpoint(dir / "absent.json"), DataError);
}
