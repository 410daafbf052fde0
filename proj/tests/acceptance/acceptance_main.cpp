// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "dcm/eval.hpp"
#include "dcm/loss.hpp"
#include "dcm/synth.hpp"
#include "dcm/trainer.hpp"

namespace fs = std::filesystem;
using namespace dcm;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

class Stopwatch {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

Vector gaussian(Rng& rng, std::size_t n) {
    Vector v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

Matrix gaussian(Rng& rng, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (auto& x : m.span()) x = rng.normal();
    return m;
}

Dataset random_dataset(Rng& rng, std::size_t n, std::size_t cats, std::size_t d_v, std::size_t d_t) {
    std::vector<Instance> insts;
    std::vector<std::string> labels;
    for (std::size_t c = 0; c < cats; ++c) labels.push_back("c" + std::to_string(c));
    const EpochSeconds start = parse_iso8601("2017-01-01");
    for (std::size_t i = 0; i < n; ++i) {
        insts.push_back(Instance{"i" + std::to_string(i), gaussian(rng, d_v), gaussian(rng, d_t),
                                 start + static_cast<EpochSeconds>(rng.uniform(0.0, 24.0) * kSecondsPerMonth),
                                 rng.index(cats)});
    }
    return make_dataset(std::move(insts), labels);
}

// ---------------------------------------------------------------------------------------------
// 1. Analytic gradients against central differences of an independently written loss.

double reference_loss(const ModelParams& p, const Batch& b, const std::vector<Triplet>& triplets, const LossConfig& cfg) {
    auto embed = [&](std::size_t member, Modality m) {
        return project(p, b.members[member]->features(m), m, b.time_input[member]).vector;
    };
    auto sim = [](const Vector& x, const Vector& y) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
        return s;
    };
    double total = 0.0;
    for (const auto& t : triplets) {
        const Vector a = embed(t.anchor.member, t.anchor.modality);
        const Vector c = embed(t.anchor.member, opposite(t.anchor.modality));
        if (t.kind == TripletKind::Inter) {
            const Vector n = embed(t.negative->member, t.negative->modality);
            total += std::max(0.0, cfg.margin - sim(a, c) + sim(a, n));
        } else {
            const double dt = std::abs(b.months[t.anchor.member] - b.months[t.positive.member]);
            if (dt <= cfg.window_months) continue;
            const Vector q = embed(t.positive.member, t.positive.modality);
            const double weight = 1.0 - std::exp(-dt * cfg.decay);
            total += weight * std::max(0.0, cfg.intra_margin - sim(a, c) + sim(a, q));
        }
    }
    return total;
}

Outcome gradient_check() {
    Stopwatch sw;
    ModelConfig mc;
    mc.d_v = 16;
    mc.d_t = 12;
    mc.hidden_dim = 32;
    mc.time_dim = 8;
    mc.embed_dim = 8;
    const LossConfig cfg;
    const double h = 1e-5;
    std::size_t checked = 0, failed = 0, intra = 0;
    double worst_abs = 0.0;
    Rng rng(2024);
    for (int batch_no = 0; batch_no < 20; ++batch_no) {
        mc.seed = 100 + batch_no;
        ModelParams p = init_params(mc);
        p.for_each([&](const std::string&, std::span<double> v, bool is_bias) {
            if (is_bias)
                for (auto& x : v) x = 0.2 * rng.normal();
        });
        const Dataset ds = random_dataset(rng, 8, 2, mc.d_v, mc.d_t);
        std::vector<std::size_t> idx(8);
        for (std::size_t i = 0; i < 8; ++i) idx[i] = i;
        const Batch b = make_batch(ds, idx, ds.timespan);
        const auto triplets = sample_batch_triplets(b, rng, cfg);
        for (const auto& t : triplets) intra += t.kind == TripletKind::Intra;

        ModelParams grads;
        batch_loss_and_grads(p, b, triplets, cfg, &grads);
        std::vector<double> analytic;
        grads.for_each([&](const std::string&, std::span<const double> v, bool) { analytic.insert(analytic.end(), v.begin(), v.end()); });

        std::vector<double*> slots;
        p.for_each([&](const std::string&, std::span<double> v, bool) {
            for (auto& x : v) slots.push_back(&x);
        });
        for (std::size_t k = 0; k < slots.size(); ++k) {
            const double saved = *slots[k];
            *slots[k] = saved + h;
            const double up = reference_loss(p, b, triplets, cfg);
            *slots[k] = saved - h;
            const double down = reference_loss(p, b, triplets, cfg);
            *slots[k] = saved;
            const double numeric = (up - down) / (2 * h);
            const double err = std::abs(numeric - analytic[k]);
            const double scale = std::max(std::abs(numeric), std::abs(analytic[k]));
            ++checked;
            if (err > std::max(1e-4 * scale, 1e-8)) ++failed;
            worst_abs = std::max(worst_abs, err);
        }
    }
    const double secs = sw.seconds();
    return {failed == 0 && intra > 0 && secs < 60,
            std::to_string(checked) + " partials, " + std::to_string(failed) + " outside tolerance, max abs error " +
                fmt("%.2e", worst_abs) + ", " + std::to_string(intra) + " intra triplets, " + fmt("%.1f s", secs)};
}

// 2. Every projection is unit norm.
Outcome normalization() {
    ModelConfig mc;
    mc.d_v = 20;
    mc.d_t = 15;
    mc.hidden_dim = 24;
    mc.time_dim = 6;
    mc.embed_dim = 10;
    Rng rng(7);
    double worst = 0.0;
    ModelParams p;
    for (int i = 0; i < 10000; ++i) {
        if (i % 1000 == 0) {
            mc.seed = static_cast<std::uint64_t>(i);
            p = init_params(mc);
        }
        const Modality m = rng.index(2) == 0 ? Modality::Visual : Modality::Text;
        const Vector x = gaussian(rng, m == Modality::Visual ? mc.d_v : mc.d_t);
        const Vector e = project(p, x.span(), m, rng.uniform01()).vector;
        double sq = 0.0;
        for (double v : e) sq += v * v;
        worst = std::max(worst, std::abs(std::sqrt(sq) - 1.0));
    }
    return {worst <= 1e-12, "max |‖e‖ − 1| = " + fmt("%.2e", worst) + " over 10000 projections"};
}

// 3. Same-category pairs inside the window contribute nothing.
Outcome window_zero_set() {
    ModelConfig mc;
    mc.d_v = 6;
    mc.d_t = 5;
    mc.hidden_dim = 8;
    mc.time_dim = 4;
    mc.embed_dim = 4;
    mc.seed = 3;
    const ModelParams p = init_params(mc);
    const LossConfig cfg;
    Rng rng(11);
    std::size_t nonzero = 0, tested = 0;
    const EpochSeconds start = parse_iso8601("2017-01-01");
    while (tested < 1000) {
        const double t0 = rng.uniform(0.0, 20.0);
        const double dt = rng.uniform(-cfg.window_months, cfg.window_months);
        std::vector<Instance> insts{
            {"a", gaussian(rng, mc.d_v), gaussian(rng, mc.d_t), start + static_cast<EpochSeconds>(t0 * kSecondsPerMonth), 0},
            {"b", gaussian(rng, mc.d_v), gaussian(rng, mc.d_t), start + static_cast<EpochSeconds>((t0 + dt) * kSecondsPerMonth), 0}};
        const Dataset ds = make_dataset(std::move(insts), {"x"});
        const std::vector<std::size_t> idx{0, 1};
        const Batch b = make_batch(ds, idx, Timespan{start - 400 * 86400, start + 900 * 86400});
        if (std::abs(b.months[0] - b.months[1]) > cfg.window_months) continue;  // rounded past the boundary
        ++tested;
        const std::vector<Triplet> triplets{{{0, Modality::Visual}, {1, Modality::Text}, std::nullopt, TripletKind::Intra},
                                            {{1, Modality::Text}, {0, Modality::Visual}, std::nullopt, TripletKind::Intra}};
        ModelParams grads;
        const LossValue v = batch_loss_and_grads(p, b, triplets, cfg, &grads);
        bool zero_grad = true;
        grads.for_each([&](const std::string&, std::span<const double> g, bool) {
            for (double x : g) zero_grad = zero_grad && x == 0.0;
        });
        if (v.total != 0.0 || v.intra_part != 0.0 || !zero_grad) ++nonzero;
        if (intra_loss(std::abs(b.months[0] - b.months[1]), rng.uniform(-1, 1), rng.uniform(-1, 1), cfg) != 0.0) ++nonzero;
    }
    return {nonzero == 0, std::to_string(nonzero) + " nonzero contributions among 1000 in-window pairs"};
}

// 4. Temporal decay.
Outcome rho_law() {
    bool ok = true;
    for (double t : {0.0, 3.5, 17.0}) ok = ok && rho(t, t, 0.1) == 0.0;
    const double at10 = rho(0.0, 10.0, 0.1);
    const double err = std::abs(at10 - (1.0 - std::exp(-1.0)));
    ok = ok && err <= 1e-12;
    double prev = rho(0.0, 0.0, 0.1);
    bool increasing = true;
    for (int i = 1; i < 100; ++i) {
        const double cur = rho(0.0, 0.25 * i, 0.1);
        increasing = increasing && cur > prev;
        prev = cur;
    }
    return {ok && increasing, "ρ(Δ=10) error " + fmt("%.1e", err) + (increasing ? ", increasing on grid" : ", NOT increasing")};
}

// 5. Procrustes.
Outcome procrustes_check() {
    Stopwatch sw;
    Rng rng(5);
    const Matrix m = gaussian(rng, 200, 32);
    const Svd d = svd(gaussian(rng, 32, 32));
    const Matrix r = matmul(d.u, transpose(d.v));
    const Matrix omega = procrustes(m, matmul(m, r));
    const double recovery = frobenius_norm(subtract(omega, r));

    double ortho = 0.0;
    for (int c = 0; c < 100; ++c) {
        const Matrix o = procrustes(gaussian(rng, 200, 32), gaussian(rng, 200, 32));
        ortho = std::max(ortho, frobenius_norm(subtract(matmul(transpose(o), o), Matrix::identity(32))));
    }

    const Matrix rotated = matmul(m, omega);
    double cos_err = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i + 1; j < m.rows(); ++j)
            cos_err = std::max(cos_err, std::abs(cosine(m.row(i), m.row(j)) - cosine(rotated.row(i), rotated.row(j))));
    const double secs = sw.seconds();
    return {recovery < 1e-6 && ortho < 1e-8 && cos_err <= 1e-12 && secs < 30,
            "recovery " + fmt("%.1e", recovery) + ", max ‖ΩᵀΩ−I‖ " + fmt("%.1e", ortho) + ", cosine drift " +
                fmt("%.1e", cos_err) + ", " + fmt("%.2f s", secs)};
}

// 6. AP against brute force.
Outcome ap_oracle() {
    Rng rng(6);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<bool> rel(1 + rng.index(50));
        const double p = rng.uniform01();
        for (std::size_t i = 0; i < rel.size(); ++i) rel[i] = rng.uniform01() < p;
        double sum = 0.0;
        std::size_t relevant = 0;
        for (std::size_t k = 0; k < rel.size(); ++k) {
            if (!rel[k]) continue;
            ++relevant;
            std::size_t hits = 0;
            for (std::size_t j = 0; j <= k; ++j) hits += rel[j];
            sum += static_cast<double>(hits) / static_cast<double>(k + 1);
        }
        const double expected = relevant ? sum / static_cast<double>(relevant) : 0.0;
        if (std::abs(average_precision(rel) - expected) > 1e-12) ++mismatches;
    }
    return {mismatches == 0, std::to_string(mismatches) + " mismatches over 1000 rankings"};
}

// ---------------------------------------------------------------------------------------------
// 7–9, 11. Trained models on synthetic data.

TrainConfig experiment_config(const SynthConfig& sc, std::uint64_t seed) {
    TrainConfig tc;
    tc.seed = seed;
    tc.model.seed = seed;
    tc.model.d_v = sc.d_v;
    tc.model.d_t = sc.d_t;
    tc.model.hidden_dim = 128;
    tc.model.time_dim = 32;
    tc.model.embed_dim = 32;
    return tc;
}

struct SeedRun {
    SynthResult synth;
    Split parts;
    Model continuous;
    Model static_model;
    BinnedModel binned;
};

SeedRun train_all(const SynthConfig& base, std::uint64_t seed, bool with_binned) {
    SeedRun run;
    SynthConfig sc = base;
    sc.seed = seed;
    run.synth = generate(sc);
    Rng rng(seed);
    run.parts = split(run.synth.dataset, rng);
    const Timespan span = run.synth.dataset.timespan;
    const TrainConfig tc = experiment_config(sc, seed);
    run.continuous = train_continuous(run.parts.train, run.parts.val, tc, span).model;
    run.static_model = train_continuous(run.parts.train, run.parts.val, static_variant(tc), span).model;
    if (with_binned) run.binned = train_binned(run.parts.train, run.parts.val, tc, bin_monthly(run.parts.train, 1).bins, span);
    return run;
}

// 11: argmax month of the dispersion series of spike-category queries.
Outcome dispersion_shape(const SeedRun& run) {
    const SynthConfig& sc = run.synth.truth.config;
    std::size_t spike = sc.n_categories;
    for (std::size_t c = 0; c < sc.n_categories; ++c)
        if (sc.patterns[c].kind == TimePattern::Kind::Spike) spike = c;
    if (spike == sc.n_categories) return {false, "no spike category"};
    const TimePattern& p = sc.patterns[spike];

    const Dataset& ds = run.synth.dataset;
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.instances[i].category == spike) candidates.push_back(i);
    Rng rng(99);
    rng.shuffle(std::span<std::size_t>(candidates));
    const EmbedFn embed = embedder_for(run.continuous, true);
    const std::int64_t start_month = month_index(sc.start);
    std::size_t passing = 0;
    std::string months;
    for (std::size_t q = 0; q < 10; ++q) {
        const auto series = dispersion(embed, ds, candidates[q], q % 2 == 0 ? Modality::Visual : Modality::Text, 5);
        const DispersionPoint* best = nullptr;
        for (const auto& pt : series)
            if (pt.value && (!best || *pt.value > *best->value)) best = &pt;
        if (!best) continue;
        const double offset = static_cast<double>(best->month - start_month);
        if (std::abs(offset - p.center_month) <= p.width + 2.0) ++passing;
        months += (months.empty() ? "" : ",") + std::to_string(best->month - start_month);
    }
    return {passing >= 8, std::to_string(passing) + "/10 argmax months in [" + fmt("%.1f", p.center_month - p.width - 2) +
                              ", " + fmt("%.1f", p.center_month + p.width + 2) + "] (argmax offsets " + months + ")"};
}

// ---------------------------------------------------------------------------------------------
// 10. CLI pipeline determinism.

int run_cli(const std::string& args) {
    const std::string cmd = std::string(DCM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / "dcm_acceptance_determinism";
    fs::remove_all(root);
    const std::vector<std::string> protocols{"coarse", "local", "bounded", "period"};
    for (const char* name : {"a", "b"}) {
        const std::string d = (root / name).string();
        fs::create_directories(d);
        if (run_cli("synth --seed 1 --out " + d + "/data.jsonl") != 0) return {false, "synth failed"};
        if (run_cli("train --data " + d + "/data.jsonl --out " + d + "/model.json --test-out " + d +
                    "/test.jsonl --seed 1 --hidden 128 --time-dim 32 --dim 32 --threads 2") != 0)
            return {false, "train failed"};
        for (const auto& protocol : protocols) {
            if (run_cli("eval --ckpt " + d + "/model.json --test " + d + "/test.jsonl --protocol " + protocol + " --out " +
                        d + "/" + protocol + ".csv --threads 2") != 0)
                return {false, "eval " + protocol + " failed"};
        }
    }
    std::size_t identical = 0;
    for (const auto& protocol : protocols) {
        const std::string a = slurp(root / "a" / (protocol + ".csv"));
        const std::string b = slurp(root / "b" / (protocol + ".csv"));
        if (!a.empty() && a == b) ++identical;
    }
    return {identical == protocols.size(),
            std::to_string(identical) + "/" + std::to_string(protocols.size()) + " metric CSVs byte-identical across two runs"};
}

} // namespace

int main() {
    int failures = 0;
    auto report = [&](int id, const char* name, const Outcome& o) {
        std::printf("criterion %2d %s  %s: %s\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failures;
    };

    report(1, "gradient check", gradient_check());
    report(2, "unit-norm projections", normalization());
    report(3, "window zero-set", window_zero_set());
    report(4, "decay law", rho_law());
    report(5, "procrustes", procrustes_check());
    report(6, "average precision oracle", ap_oracle());

    // Planted-changepoint dataset, three seeds.
    Stopwatch shifted_clock;
    double period_c = 0, period_s = 0, coarse_c = 0, coarse_b = 0;
    std::string per_seed;
    std::optional<SeedRun> first;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        SeedRun run = train_all(default_synth_config(), seed, true);
        const double pc = time_period_inference(embedder_for(run.continuous, true), run.parts.test, 50, 4.0).average;
        const double ps = time_period_inference(embedder_for(run.static_model, true), run.parts.test, 50, 4.0).average;
        const double cc = coarse_alignment(embedder_for(run.continuous, true), run.parts.test).average;
        const double cb = coarse_alignment(embedder_for(run.binned), run.parts.test).average;
        period_c += pc / 3;
        period_s += ps / 3;
        coarse_c += cc / 3;
        coarse_b += cb / 3;
        per_seed += " | seed " + std::to_string(seed) + ": period " + fmt("%.3f", pc) + "/" + fmt("%.3f", ps) + ", coarse " +
                    fmt("%.3f", cc) + "/" + fmt("%.3f", cb);
        if (seed == 1) first = std::move(run);
    }
    const double shifted_secs = shifted_clock.seconds();
    report(7, "period inference, continuous vs static",
           {period_c - period_s >= 0.05 && shifted_secs < 600,
            "mAP@50 " + fmt("%.3f", period_c) + " vs " + fmt("%.3f", period_s) + " (gap " + fmt("%.3f", period_c - period_s) +
                ", " + fmt("%.0f s", shifted_secs) + ")"});
    report(8, "coarse alignment, continuous vs binned",
           {coarse_c - coarse_b >= 0.05 && shifted_secs < 900,
            "mAP " + fmt("%.3f", coarse_c) + " vs " + fmt("%.3f", coarse_b) + " (gap " + fmt("%.3f", coarse_c - coarse_b) + ")" +
                per_seed});

    double stat_c = 0, stat_s = 0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const SeedRun run = train_all(stationary_synth_config(), seed, false);
        stat_c += coarse_alignment(embedder_for(run.continuous, true), run.parts.test).average / 3;
        stat_s += coarse_alignment(embedder_for(run.static_model, true), run.parts.test).average / 3;
    }
    report(9, "stationary control",
           {std::abs(stat_c - stat_s) < 0.05, "coarse mAP " + fmt("%.3f", stat_c) + " vs " + fmt("%.3f", stat_s)});

    report(10, "pipeline determinism", determinism());
    report(11, "dispersion peak", dispersion_shape(*first));

    std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
