// Parallel kernels against the serial reference loops, over random geometries.

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "novaclass/kernels.hpp"

namespace k = novaclass::kernels;

namespace {

constexpr double kTol = 1e-12;  // relative; only summation order differs

std::vector<double> randn(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> d;
    std::vector<double> v(n);
    for (double& x : v) x = d(rng);
    return v;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max(1.0, std::abs(a[i]));
        CHECK(std::abs(a[i] - b[i]) <= kTol * scale);
    }
}

void set_threads(int n) {
#ifdef _OPENMP
    omp_set_num_threads(n);
#else
    (void)n;
#endif
}

k::ConvGeometry random_conv(std::mt19937_64& rng) {
    auto pick = [&](std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    };
    k::ConvGeometry g;
    g.batch = pick(1, 4);
    g.in_channels = pick(1, 4);
    g.out_channels = pick(1, 5);
    g.kernel = pick(1, 9);
    g.stride = pick(1, 4);
    g.in_length = pick(g.kernel, 40);
    if (pick(0, 1) == 0) {
        g.pad_left = 0;
        g.out_length = (g.in_length - g.kernel) / g.stride + 1;
    } else {
        g.out_length = (g.in_length + g.stride - 1) / g.stride;
        const std::size_t need = (g.out_length - 1) * g.stride + g.kernel;
        g.pad_left = need > g.in_length ? (need - g.in_length) / 2 : 0;
    }
    return g;
}

}  // namespace

TEST_CASE("conv kernels: omp matches serial") {
    std::mt19937_64 rng(101);
    for (int trial = 0; trial < 200; ++trial) {
        const auto g = random_conv(rng);
        const auto x = randn(g.batch * g.in_channels * g.in_length, rng);
        const auto w = randn(g.out_channels * g.in_channels * g.kernel, rng);
        const auto b = randn(g.out_channels, rng);
        const auto go = randn(g.batch * g.out_channels * g.out_length, rng);
        const std::size_t out_n = g.batch * g.out_channels * g.out_length;

        std::vector<double> y_s(out_n), y_o(out_n, 99.0);
        k::serial::conv1d_forward(g, x, w, b, y_s);
        set_threads(3);
        k::omp::conv1d_forward(g, x, w, b, y_o);
        check_close(y_s, y_o);

        std::vector<double> gi_s(x.size()), gw_s(w.size()), gb_s(b.size());
        std::vector<double> gi_o(x.size(), 7.0), gw_o(w.size(), 7.0), gb_o(b.size(), 7.0);
        k::serial::conv1d_backward(g, x, w, go, gi_s, gw_s, gb_s);
        k::omp::conv1d_backward(g, x, w, go, gi_o, gw_o, gb_o);
        check_close(gi_s, gi_o);
        check_close(gw_s, gw_o);
        check_close(gb_s, gb_o);
        set_threads(1);
    }
}

TEST_CASE("dense kernels: omp matches serial") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::size_t> dim(1, 30);
    for (int trial = 0; trial < 100; ++trial) {
        const k::DenseGeometry g{dim(rng), dim(rng), dim(rng)};
        const auto x = randn(g.batch * g.in_features, rng);
        const auto w = randn(g.out_features * g.in_features, rng);
        const auto b = randn(g.out_features, rng);
        const auto go = randn(g.batch * g.out_features, rng);

        std::vector<double> y_s(g.batch * g.out_features), y_o(y_s.size());
        set_threads(4);
        k::serial::dense_forward(g, x, w, b, y_s);
        k::omp::dense_forward(g, x, w, b, y_o);
        check_close(y_s, y_o);

        std::vector<double> gi_s(x.size()), gw_s(w.size()), gb_s(b.size());
        std::vector<double> gi_o(x.size(), 3.0), gw_o(w.size(), 3.0), gb_o(b.size(), 3.0);
        k::serial::dense_backward(g, x, w, go, gi_s, gw_s, gb_s);
        k::omp::dense_backward(g, x, w, go, gi_o, gw_o, gb_o);
        check_close(gi_s, gi_o);
        check_close(gw_s, gw_o);
        check_close(gb_s, gb_o);
        set_threads(1);
    }
}

TEST_CASE("t-SNE and distance kernels: omp matches serial") {
    std::mt19937_64 rng(55);
    for (std::size_t n : {2u, 5u, 17u, 60u}) {
        const std::size_t d = 7;
        const auto pts = randn(n * d, rng);
        std::vector<double> ds(n * n), dom(n * n);
        k::serial::pairwise_sq_distances(pts, n, d, ds);
        k::omp::pairwise_sq_distances(pts, n, d, dom);
        check_close(ds, dom);
        for (std::size_t i = 0; i < n; ++i) CHECK(ds[i * n + i] == 0.0);

        // A symmetric joint P with zero diagonal summing to 1.
        std::vector<double> p(n * n, 0.0);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        double total = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                p[i * n + j] = p[j * n + i] = u(rng);
                total += 2 * p[i * n + j];
            }
        for (double& v : p) v /= total;
        const auto y = randn(n * 2, rng);
        for (double ex : {1.0, 12.0}) {
            std::vector<double> gs(n * 2), go(n * 2, 5.0);
            const auto ks = k::serial::tsne_gradient(p, y, n, ex, gs);
            set_threads(3);
            const auto ko = k::omp::tsne_gradient(p, y, n, ex, go);
            set_threads(1);
            check_close(gs, go);
            CHECK(std::abs(ks.kl - ko.kl) <= kTol * std::max(1.0, ks.kl));
        }
    }
}

TEST_CASE("k-means assignment: omp matches serial, ties to the lower index") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + trial * 3, d = 2, kk = 1 + trial % 6;
        const auto pts = randn(n * d, rng);
        const auto cen = randn(kk * d, rng);
        std::vector<std::size_t> as(n), ao(n);
        std::vector<double> ds(n), dso(n);
        const double is = k::serial::kmeans_assign(pts, n, d, cen, kk, as, ds);
        set_threads(2);
        const double io = k::omp::kmeans_assign(pts, n, d, cen, kk, ao, dso);
        set_threads(1);
        CHECK(as == ao);
        check_close(ds, dso);
        CHECK(std::abs(is - io) <= kTol * std::max(1.0, is));
    }
    const std::vector<double> pts{0.0, 0.0};
    const std::vector<double> cen{1.0, 0.0, -1.0, 0.0};
    std::vector<std::size_t> a(1);
    std::vector<double> dist(1);
    k::omp::kmeans_assign(pts, 1, 2, cen, 2, a, dist);
    CHECK(a[0] == 0);
    k::serial::kmeans_assign(pts, 1, 2, cen, 2, a, dist);
    CHECK(a[0] == 0);
}

TEST_CASE("omp kernels give identical results for any thread count") {
    std::mt19937_64 rng(3);
    k::ConvGeometry g{8, 3, 4, 50, 5, 2, 2, 25};
    const auto x = randn(g.batch * g.in_channels * g.in_length, rng);
    const auto w = randn(g.out_channels * g.in_channels * g.kernel, rng);
    const auto go = randn(g.batch * g.out_channels * g.out_length, rng);
    std::vector<std::vector<double>> runs;
    for (int threads : {1, 2, 5}) {
        set_threads(threads);
        std::vector<double> gi(x.size()), gw(w.size()), gb(g.out_channels);
        k::omp::conv1d_backward(g, x, w, go, gi, gw, gb);
        gi.insert(gi.end(), gw.begin(), gw.end());
        runs.push_back(gi);
    }
    set_threads(1);
    CHECK(runs[0] == runs[1]);
    CHECK(runs[0] == runs[2]);
}
