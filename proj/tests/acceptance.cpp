// Acceptance run: one PASS/FAIL line per criterion. With arguments, only the
// listed criteria run (e.g. `acceptance 3 9`); the stage-one model is trained
// on demand when a later criterion needs it.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "gradcheck_util.hpp"
#include "kmeans_oracle.hpp"
#include "novaclass/checkpoint.hpp"
#include "novaclass/novelty.hpp"
#include "novaclass/report.hpp"

using namespace novaclass;

namespace {

// Pinned thresholds.
constexpr std::size_t kGradNetworks = 25;
constexpr double kGradTolerance = 1e-3;
constexpr double kGradBudgetS = 60;
constexpr double kStage1Accuracy = 0.95;
constexpr double kStage1BudgetS = 600;
constexpr std::size_t kOracleInstances = 100;
constexpr double kOracleInertiaRel = 1e-12;
constexpr double kOracleBudgetS = 60;
constexpr std::size_t kProbeRuns = 10;
constexpr std::size_t kProbeNeeded = 9;
constexpr double kProbeRunBudgetS = 300;
constexpr double kRetrainAccuracy = 0.95;
constexpr double kRetrainBudgetS = 1800;
constexpr double kPerplexityTolerance = 1e-3;
constexpr std::size_t kTsneSeeds = 3;
constexpr std::size_t kAugmentWindows = 1000;
constexpr double kAugmentTolerance = 1e-9;
constexpr std::size_t kKneeCurves = 100;

constexpr std::uint64_t kSeed = 42;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
}

LabeledDataset windows_of(std::size_t label, std::size_t count, std::uint64_t seed, std::uint64_t stream) {
    std::vector<std::size_t> counts(6, 1);
    counts[label] = count;
    return generate_synthetic_dataset(default_class_specs(), counts, seed, stream)
        .filter_labels(std::vector<std::size_t>{label});
}

struct Stage1 {
    LabeledDataset train;
    LabeledDataset test;
    Model model;
    double accuracy = 0;
    double seconds = 0;
};

std::optional<Stage1> g_stage1;

const Stage1& stage1() {
    if (g_stage1) return *g_stage1;
    const auto t0 = Clock::now();
    const std::vector<std::size_t> known{0, 1, 2, 3, 4};
    const auto specs = default_class_specs();
    Stage1 s;
    s.train = generate_synthetic_dataset(specs, default_train_counts(), kSeed, 0).filter_labels(known);
    s.test = generate_synthetic_dataset(specs, default_test_counts(), kSeed, 1).filter_labels(known);
    s.train.class_names.resize(5);
    s.test.class_names.resize(5);
    s.model = build_model(ArchitectureConfig::wdcnn(5), kSeed);
    s.model.class_names = s.train.class_names;
    train(s.model, s.train, TrainConfig{});
    s.accuracy = evaluate(s.model, s.test).accuracy;
    s.seconds = seconds_since(t0);
    g_stage1 = std::move(s);
    return *g_stage1;
}

// 1. Analytic gradients against central differences.
Outcome gradients() {
    const auto t0 = Clock::now();
    double worst = 0;
    std::size_t coords = 0;
    std::size_t where = 0;
    for (std::uint64_t seed = 1; seed <= kGradNetworks; ++seed) {
        auto c = testing::random_grad_case(seed);
        const auto r = testing::compare_gradients(c);
        coords += r.coordinates;
        if (r.max_relative_error > worst) {
            worst = r.max_relative_error;
            where = r.worst_tensor;
        }
    }
    const double t = seconds_since(t0);
    return {worst <= kGradTolerance && t < kGradBudgetS,
            fmt("%zu networks, %zu coordinates, max rel err %.2e (tensor %zu) <= %.0e, %.1f s < %.0f s",
                kGradNetworks, coords, worst, where, kGradTolerance, t, kGradBudgetS)};
}

// 2. Default training on classes 0-4.
Outcome stage_one() {
    const auto& s = stage1();
    return {s.accuracy >= kStage1Accuracy && s.seconds < kStage1BudgetS,
            fmt("test accuracy %.4f >= %.2f on %zu windows, %.0f s < %.0f s", s.accuracy, kStage1Accuracy,
                s.test.size(), s.seconds, kStage1BudgetS)};
}

// 3. Best-of-restarts k-means against exhaustive enumeration.
Outcome kmeans_oracle() {
    const auto t0 = Clock::now();
    std::size_t cases = 0, exact = 0;
    double worst_rel = 0;
    for (std::uint64_t inst = 0; inst < kOracleInstances; ++inst) {
        const Tensor pts = testing::oracle_instance(inst);
        for (std::size_t k = 1; k <= std::min<std::size_t>(3, pts.dim(0)); ++k) {
            const auto r = kmeans(pts, k);
            const double optimum = testing::brute_force_optimum(pts, k);
            ++cases;
            exact += testing::partition_sse(pts, r.assignment, k) == optimum;
            worst_rel = std::max(worst_rel, std::abs(r.inertia - optimum) / std::max(1.0, optimum));
        }
    }
    const double t = seconds_since(t0);
    return {exact == cases && worst_rel <= kOracleInertiaRel && t < kOracleBudgetS,
            fmt("%zu/%zu (instance, k) pairs reach the optimal partition, inertia rel diff %.1e <= %.0e, %.1f s",
                exact, cases, worst_rel, kOracleInertiaRel, t)};
}

// 4. Cluster count of the full probe.
Outcome probe_counts() {
    const auto& s = stage1();
    std::size_t six = 0, known = 0;
    double slowest = 0;
    std::string novel_ks, known_ks;
    for (std::uint64_t seed = 0; seed < kProbeRuns; ++seed) {
        ProbeConfig cfg;
        cfg.seed = seed;
        auto t0 = Clock::now();
        const auto crack = windows_of(5, kProbeWindows, 1000 + seed, 2);
        const auto d = novelty_probe(s.model, crack.samples, kProbeWindows, s.train, cfg);
        slowest = std::max(slowest, seconds_since(t0));
        six += d.kind == DecisionKind::novel_class && d.estimated_cluster_count == 6;
        novel_ks += std::to_string(d.estimated_cluster_count);

        t0 = Clock::now();
        const auto cls2 = windows_of(2, kProbeWindows, 2000 + seed, 2);
        const auto e = novelty_probe(s.model, cls2.samples, kProbeWindows, s.train, cfg);
        slowest = std::max(slowest, seconds_since(t0));
        known += e.kind == DecisionKind::known_class && e.estimated_cluster_count <= 5;
        known_ks += std::to_string(e.estimated_cluster_count);
    }
    return {six >= kProbeNeeded && known >= kProbeNeeded && slowest < kProbeRunBudgetS,
            fmt("novel class -> 6 in %zu/%zu [%s], known class 2 -> <=5 in %zu/%zu [%s], need %zu; slowest run %.1f s",
                six, kProbeRuns, novel_ks.c_str(), known, kProbeRuns, known_ks.c_str(), kProbeNeeded, slowest)};
}

// 5. Integration of the crack class with 5-fold CV.
Outcome retraining() {
    const auto& s = stage1();
    const auto t0 = Clock::now();
    // The full crack column of the reference table: 1280 train + 320 test windows.
    auto crack = windows_of(5, default_train_counts()[5], kSeed, 0);
    crack.append(windows_of(5, default_test_counts()[5], kSeed, 1));
    IntegrationConfig cfg;
    cfg.new_class_name = "Crack";
    const auto r = integrate_new_class(s.model, s.train, crack.samples, crack.size(), cfg);
    const double t = seconds_since(t0);
    std::printf("%s", cv_table(r.cv).c_str());
    std::printf("%s", confusion_csv(r.confusion).c_str());
    return {r.new_label == 5 && r.cv.mean >= kRetrainAccuracy && t < kRetrainBudgetS,
            fmt("new label %zu, 5-fold CV %.3f%% +- %.3f%% >= %.0f%%, %.0f s < %.0f s", r.new_label, 100 * r.cv.mean,
                100 * r.cv.stddev, 100 * kRetrainAccuracy, t, kRetrainBudgetS)};
}

// 6. Perplexity calibration and KL descent.
Outcome tsne_calibration() {
    double worst = 0;
    std::size_t descending = 0;
    std::string kls;
    for (std::uint64_t seed = 1; seed <= kTsneSeeds; ++seed) {
        Tensor x({600, 64});
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g;
        for (double& v : x.storage()) v = g(rng);
        TsneConfig cfg;
        cfg.seed = seed;
        const auto c = conditional_affinities(x, cfg.perplexity);
        for (std::size_t i = 0; i < 600; ++i) {
            double h = 0;
            for (std::size_t j = 0; j < 600; ++j)
                if (c.p.at(i, j) > 0) h -= c.p.at(i, j) * std::log(c.p.at(i, j));
            worst = std::max(worst, std::abs(std::exp(h) - cfg.perplexity));
        }
        Tensor y0({600, 2});
        std::normal_distribution<double> start(0.0, cfg.init_stddev);
        for (double& v : y0.storage()) v = start(rng);
        const Tensor joint = symmetrize_affinities(c.p);
        const double before = tsne_kl(joint, y0);
        const double after = tsne_kl(joint, tsne_embed(x, cfg, y0).embedding.y);
        descending += after < before;
        kls += fmt(" %.3f->%.3f", before, after);
    }
    return {worst <= kPerplexityTolerance && descending == kTsneSeeds,
            fmt("n=600, d=64: max |perplexity - 30| %.1e <= %.0e; KL initial->final%s", worst, kPerplexityTolerance,
                kls.c_str())};
}

// 7. Augmented output layer keeps the old-class distribution.
Outcome augmentation() {
    const auto& s = stage1();
    const auto aug = augment_output_layer(s.model, "Crack");
    std::vector<double> windows;
    std::mt19937_64 rng(kSeed);
    std::normal_distribution<double> g;
    for (std::size_t i = 0; i < kAugmentWindows / 2; ++i) {
        std::vector<double> w(kWindowLength);
        for (double& v : w) v = g(rng);
        normalize_in_place(w);
        windows.insert(windows.end(), w.begin(), w.end());
    }
    const auto gen = generate_synthetic_dataset(default_class_specs(),
                                                std::vector<std::size_t>(6, kAugmentWindows / 12 + 1), 99, 3);
    windows.insert(windows.end(), gen.samples.begin(),
                   gen.samples.begin() + static_cast<std::ptrdiff_t>((kAugmentWindows / 2) * kWindowLength));
    const Tensor p0 = predict_batch(s.model, windows, kAugmentWindows);
    const Tensor p1 = predict_batch(aug, windows, kAugmentWindows);
    double worst = 0;
    for (std::size_t i = 0; i < kAugmentWindows; ++i) {
        const double kept = 1.0 - p1.at(i, 5);
        for (std::size_t c = 0; c < 5; ++c) worst = std::max(worst, std::abs(p1.at(i, c) / kept - p0.at(i, c)));
    }
    return {worst <= kAugmentTolerance,
            fmt("%zu windows, max |renormalized - old| %.1e <= %.0e", kAugmentWindows, worst, kAugmentTolerance)};
}

// 8. Two replays of one stream file.
Outcome monitor_determinism() {
    const auto& s = stage1();
    const auto dir = std::filesystem::temp_directory_path() / "novaclass_acceptance";
    std::filesystem::create_directories(dir);
    // A draw whose probe reads 6, so both replays go through retraining.
    auto stream = windows_of(0, 20, 79, 5);
    stream.append(windows_of(5, 160, 80, 5));
    save_dataset(stream, dir / "stream.ds");

    MonitorConfig cfg;
    cfg.probe.seed = kSeed;
    cfg.integration.balance_threshold = 40;
    cfg.integration.cv_folds = 2;
    cfg.integration.train.epochs = 2;
    cfg.integration.new_class_name = "Crack";
    auto run = [&](std::string& log) {
        auto src = stream_replay(dir / "stream.ds", ReplayOrder::shuffled, kSeed);
        std::ostringstream out;
        const auto r = monitor_loop(s.model, src, s.train, cfg, &out);
        log = out.str();
        return r;
    };
    std::string log_a, log_b;
    const auto a = run(log_a);
    const auto b = run(log_b);
    const bool same_log = log_a == log_b;
    const bool same_model = model_to_text(a.model) == model_to_text(b.model);
    std::set<std::string> kinds;
    for (const auto& e : a.events) kinds.insert(e.type);
    std::string covered;
    for (const auto& k : kinds) covered += " " + k;
    std::filesystem::remove_all(dir);
    return {same_log && same_model,
            fmt("logs %s (%zu events, %zu bytes), checkpoints %s, retrained %s; events seen:%s",
                same_log ? "identical" : "DIFFER", a.events.size(), log_a.size(), same_model ? "identical" : "DIFFER",
                kinds.contains("retrained") ? "yes" : "no", covered.c_str())};
}

// 9. Knee of piecewise-linear curves.
Outcome knee_detector() {
    std::mt19937_64 rng(kSeed);
    std::uniform_int_distribution<std::size_t> knee_at(2, 19);
    std::uniform_real_distribution<double> ratio(20, 500), steep(1, 1e4), base(0, 1e6), scale(1e-6, 1e6),
        shift(-1e9, 1e9);
    std::size_t hits = 0, invariant = 0;
    for (std::size_t n = 0; n < kKneeCurves; ++n) {
        const std::size_t b = knee_at(rng);
        const double s1 = steep(rng), s2 = s1 / ratio(rng);
        SseCurve c;
        double v = base(rng) + s1 * 19;
        for (std::size_t k = 1; k <= 20; ++k) {
            c.k_values.push_back(k);
            c.sse.push_back(v);
            v -= k < b ? s1 : s2;
        }
        const std::size_t got = detect_knee(c).k;
        hits += got == b;
        bool same = true;
        for (int rep = 0; rep < 3; ++rep) {
            SseCurve t = c;
            const double a = scale(rng), o = shift(rng);
            for (double& y : t.sse) y = a * y + o;
            same = same && detect_knee(t).k == got;
        }
        invariant += same;
    }
    return {hits == kKneeCurves && invariant == kKneeCurves,
            fmt("breakpoint recovered on %zu/%zu curves (slope ratio 20..500), affine-invariant on %zu/%zu", hits,
                kKneeCurves, invariant, kKneeCurves)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"gradient check", gradients},
        {"stage-one classification", stage_one},
        {"k-means optimality oracle", kmeans_oracle},
        {"probe cluster count", probe_counts},
        {"retraining with the new class", retraining},
        {"t-SNE calibration", tsne_calibration},
        {"augmentation invariant", augmentation},
        {"monitor determinism", monitor_determinism},
        {"knee detector", knee_detector}};

    std::set<std::size_t> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::stoul(argv[i]));

    std::size_t failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!selected.empty() && !selected.contains(i + 1)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("criterion %zu %s %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
