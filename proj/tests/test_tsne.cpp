#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "novaclass/errors.hpp"
#include "novaclass/tsne.hpp"

using namespace novaclass;

namespace {

Tensor gaussian_points(std::size_t n, std::size_t d, std::uint64_t seed, double scale = 1.0) {
    Tensor t({n, d});
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, scale);
    for (double& v : t.storage()) v = g(rng);
    return t;
}

// Perplexity of a conditional row recomputed from its probabilities.
double row_perplexity(const Tensor& p, std::size_t i) {
    double h = 0.0;
    for (std::size_t j = 0; j < p.dim(1); ++j)
        if (p.at(i, j) > 0.0) h -= p.at(i, j) * std::log(p.at(i, j));
    return std::exp(h);
}

}  // namespace

TEST_CASE("equilateral triangle") {
    const Tensor x({3, 2}, std::vector<double>{0, 0, 1, 0, 0.5, std::sqrt(3.0) / 2});
    const auto c = conditional_affinities(x, 2.0);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(c.p.at(i, j) == doctest::Approx(i == j ? 0.0 : 0.5).epsilon(1e-12));
    const auto p = symmetrize_affinities(c.p);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(p.at(i, j) == doctest::Approx(i == j ? 0.0 : 1.0 / 6).epsilon(1e-12));
}

TEST_CASE("achieved perplexity matches the target") {
    const Tensor x = gaussian_points(150, 64, 4);
    for (double perp : {5.0, 30.0, 45.0}) {
        const auto c = conditional_affinities(x, perp);
        for (std::size_t i = 0; i < 150; ++i) {
            CHECK(std::abs(c.achieved_perplexity[i] - perp) < 1e-3);
            CHECK(std::abs(row_perplexity(c.p, i) - perp) < 1e-3);
            CHECK(c.p.at(i, i) == 0.0);
            CHECK(c.sigma[i] > 0.0);
        }
    }
}

TEST_CASE("a duplicated point gets the row's largest probability") {
    Tensor x = gaussian_points(30, 5, 8);
    for (std::size_t c = 0; c < 5; ++c) x.at(7, c) = x.at(3, c);
    const auto p = conditional_affinities(x, 8.0).p;
    for (auto [i, dup] : {std::pair<std::size_t, std::size_t>{3, 7}, {7, 3}}) {
        for (std::size_t j = 0; j < 30; ++j) CHECK(p.at(i, j) <= p.at(i, dup));
    }
}

TEST_CASE("joint affinities") {
    const auto c = conditional_affinities(gaussian_points(40, 6, 2), 10.0);
    const auto p = symmetrize_affinities(c.p);
    double total = 0;
    for (std::size_t i = 0; i < 40; ++i) {
        CHECK(p.at(i, i) == 0.0);
        for (std::size_t j = 0; j < 40; ++j) {
            CHECK(p.at(i, j) >= 0.0);
            CHECK(p.at(i, j) == p.at(j, i));
            total += p.at(i, j);
        }
    }
    CHECK(std::abs(total - 1.0) < 1e-9);

    // Symmetric conditional input: P_ij = p_{j|i} / n.
    Tensor sym({4, 4}, std::vector<double>{0, .5, .25, .25, .5, 0, .25, .25, .25, .25, 0, .5, .25, .25, .5, 0});
    const auto ps = symmetrize_affinities(sym);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) CHECK(ps.at(i, j) == doctest::Approx(sym.at(i, j) / 4));
    CHECK_THROWS_AS(symmetrize_affinities(Tensor({2, 3})), InvalidArgument);
}

TEST_CASE("affinity errors") {
    CHECK_THROWS_AS(conditional_affinities(gaussian_points(1, 3, 1), 1.0), InvalidArgument);
    CHECK_THROWS_AS(conditional_affinities(gaussian_points(5, 3, 1), 4.5), InvalidArgument);
    CHECK_THROWS_AS(conditional_affinities(gaussian_points(5, 3, 1), 0.5), InvalidArgument);
    // All points identical: every perplexity is n-1, any other target is unreachable.
    CHECK_THROWS_AS(conditional_affinities(Tensor({6, 2}, 1.0), 2.0), NumericError);
}

TEST_CASE("two separated blobs stay separated") {
    const std::size_t per = 60, d = 64;
    Tensor x({2 * per, d});
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::size_t i = 0; i < 2 * per; ++i)
        for (std::size_t c = 0; c < d; ++c) x.at(i, c) = g(rng) + (i >= per && c == 0 ? 10.0 * std::sqrt(double(d)) : 0.0);
    TsneConfig cfg;
    cfg.perplexity = 20;
    cfg.iterations = 500;
    const auto r = tsne_embed(x, cfg);
    const auto& y = r.embedding.y;
    double c[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < 2 * per; ++i)
        for (std::size_t k = 0; k < 2; ++k) c[i / per][k] += y.at(i, k) / per;
    double spread = 0;
    for (std::size_t i = 0; i < 2 * per; ++i)
        spread += std::hypot(y.at(i, 0) - c[i / per][0], y.at(i, 1) - c[i / per][1]) / (2 * per);
    CHECK(std::hypot(c[0][0] - c[1][0], c[0][1] - c[1][1]) > 3 * spread);
}

TEST_CASE("embedding output contract") {
    const Tensor x = gaussian_points(60, 8, 5);
    TsneConfig cfg;
    cfg.perplexity = 10;
    const auto r = tsne_embed(x, cfg);
    CHECK(r.embedding.y.shape() == std::vector<std::size_t>{60, 2});
    CHECK(r.embedding.y.all_finite());
    CHECK(r.kl_history.size() == 1001);
    CHECK(r.kl_history.back() < r.kl_history.front());
    CHECK(r.embedding.ids[59].index == 59);

    double cx = 0, cy = 0;
    for (std::size_t i = 0; i < 60; ++i) {
        cx += r.embedding.y.at(i, 0);
        cy += r.embedding.y.at(i, 1);
    }
    CHECK(std::abs(cx) < 1e-9);
    CHECK(std::abs(cy) < 1e-9);

    const auto again = tsne_embed(x, cfg);
    CHECK(again.embedding.y == r.embedding.y);
    cfg.seed += 1;
    CHECK(tsne_embed(x, cfg).embedding.y != r.embedding.y);

    // The final KL equals the objective recomputed from scratch.
    const auto p = symmetrize_affinities(conditional_affinities(x, 10).p);
    CHECK(tsne_kl(p, r.embedding.y) == doctest::Approx(r.kl_history.back()).epsilon(1e-12));
}

TEST_CASE("default initial spread") {
    TsneConfig cfg;
    cfg.perplexity = 5;
    cfg.iterations = 0;
    const auto r = tsne_embed(gaussian_points(400, 3, 1), cfg);
    double sq = 0;
    for (double v : r.embedding.y.values()) sq += v * v;
    CHECK(std::sqrt(sq / 800) == doctest::Approx(1e-2).epsilon(0.1));
}

TEST_CASE("supplied initial layout and ids") {
    const Tensor x = gaussian_points(20, 4, 3);
    TsneConfig cfg;
    cfg.perplexity = 4;
    cfg.iterations = 0;
    Tensor init({20, 2});
    for (std::size_t i = 0; i < 20; ++i) init.at(i, 0) = double(i) - 9.5;
    std::vector<PointId> ids(20);
    for (std::size_t i = 0; i < 20; ++i) ids[i] = {i, i % 3};
    const auto r = tsne_embed(x, cfg, init, ids);
    CHECK(r.embedding.y == init);
    CHECK(r.embedding.ids[4].label == 1u);

    CHECK_THROWS_AS(tsne_embed(x, cfg, Tensor({19, 2})), InvalidArgument);
    CHECK_THROWS_AS(tsne_embed(x, cfg, std::nullopt, std::vector<PointId>(3)), InvalidArgument);
}

TEST_CASE("embedding errors") {
    TsneConfig cfg;
    cfg.perplexity = 1.0;
    CHECK_THROWS_AS(tsne_embed(gaussian_points(3, 2, 1), cfg), InvalidArgument);
    cfg.perplexity = 30;
    CHECK_THROWS_AS(tsne_embed(gaussian_points(90, 2, 1), cfg), InvalidArgument);  // needs n > 91
    Tensor bad = gaussian_points(10, 2, 1);
    bad.at(3, 1) = NAN;
    cfg.perplexity = 2;
    CHECK_THROWS_AS(tsne_embed(bad, cfg), InvalidArgument);
}

TEST_CASE("embedding table round trip") {
    Embedding2D e{Tensor({3, 2}, std::vector<double>{0.1, -2, 3.25, 1e-7, -0.5, 8}), {{0, std::nullopt}, {1, 2}, {2, 0}}};
    const auto path = std::filesystem::temp_directory_path() / "novaclass_test_embedding.csv";
    save_embedding(e, path);
    const auto back = load_embedding(path);
    CHECK(back.y == e.y);
    CHECK(!back.ids[0].label);
    CHECK(back.ids[1].label == 2u);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(save_embedding(e, "/nonexistent/dir/e.csv"), IoError);
}
