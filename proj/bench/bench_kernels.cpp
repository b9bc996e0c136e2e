// Serial reference vs OpenMP kernels at the shapes the default network and
// the probe actually use. Run with OMP_NUM_THREADS to vary the pool.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "novaclass/kernels.hpp"

namespace k = novaclass::kernels;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<double> v(n);
    for (double& x : v) x = g(rng);
    return v;
}

// First and second convolution of the default network, batch 64.
k::ConvGeometry conv_shape(int which) {
    if (which == 0) return {64, 1, 16, 1024, 64, 16, 24, 64};
    return {64, 16, 32, 32, 3, 1, 1, 32};
}

template <auto Fn>
void conv_forward(benchmark::State& st) {
    const auto g = conv_shape(int(st.range(0)));
    const auto in = noise(g.batch * g.in_channels * g.in_length, 1);
    const auto w = noise(g.out_channels * g.in_channels * g.kernel, 2);
    const auto b = noise(g.out_channels, 3);
    std::vector<double> out(g.batch * g.out_channels * g.out_length);
    for (auto _ : st) {
        Fn(g, in, w, b, out);
        benchmark::DoNotOptimize(out.data());
    }
}

template <auto Fn>
void conv_backward(benchmark::State& st) {
    const auto g = conv_shape(int(st.range(0)));
    const auto in = noise(g.batch * g.in_channels * g.in_length, 1);
    const auto w = noise(g.out_channels * g.in_channels * g.kernel, 2);
    const auto go = noise(g.batch * g.out_channels * g.out_length, 3);
    std::vector<double> gi(in.size()), gw(w.size()), gb(g.out_channels);
    for (auto _ : st) {
        Fn(g, in, w, go, gi, gw, gb);
        benchmark::DoNotOptimize(gi.data());
    }
}

template <auto Fn>
void dense_forward(benchmark::State& st) {
    const k::DenseGeometry g{64, 192, 64};
    const auto in = noise(64 * 192, 1), w = noise(64 * 192, 2), b = noise(64, 3);
    std::vector<double> out(64 * 64);
    for (auto _ : st) {
        Fn(g, in, w, b, out);
        benchmark::DoNotOptimize(out.data());
    }
}

template <auto Fn>
void pairwise(benchmark::State& st) {
    const std::size_t n = 600, d = 64;
    const auto pts = noise(n * d, 1);
    std::vector<double> out(n * n);
    for (auto _ : st) {
        Fn(pts, n, d, out);
        benchmark::DoNotOptimize(out.data());
    }
}

template <auto Fn>
void tsne_grad(benchmark::State& st) {
    const std::size_t n = 600;
    auto p = noise(n * n, 1);
    double total = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double v = i == j ? 0.0 : std::abs(p[i * n + j]) + std::abs(p[j * n + i]);
            p[i * n + j] = v;
            total += v;
        }
    for (double& v : p) v /= total;
    const auto y = noise(n * 2, 2);
    std::vector<double> grad(n * 2);
    for (auto _ : st) {
        const auto step = Fn(p, y, n, 1.0, grad);
        benchmark::DoNotOptimize(step.kl);
    }
}

template <auto Fn>
void kmeans_assign(benchmark::State& st) {
    const std::size_t n = 600, kk = 20;
    const auto pts = noise(n * 2, 1), cent = noise(kk * 2, 2);
    std::vector<std::size_t> assignment(n);
    std::vector<double> dist(n);
    for (auto _ : st) benchmark::DoNotOptimize(Fn(pts, n, 2, cent, kk, assignment, dist));
}

}  // namespace

BENCHMARK(conv_forward<k::serial::conv1d_forward>)->Name("conv_forward/serial")->Arg(0)->Arg(1);
BENCHMARK(conv_forward<k::omp::conv1d_forward>)->Name("conv_forward/omp")->Arg(0)->Arg(1);
BENCHMARK(conv_backward<k::serial::conv1d_backward>)->Name("conv_backward/serial")->Arg(0)->Arg(1);
BENCHMARK(conv_backward<k::omp::conv1d_backward>)->Name("conv_backward/omp")->Arg(0)->Arg(1);
BENCHMARK(dense_forward<k::serial::dense_forward>)->Name("dense_forward/serial");
BENCHMARK(dense_forward<k::omp::dense_forward>)->Name("dense_forward/omp");
BENCHMARK(pairwise<k::serial::pairwise_sq_distances>)->Name("pairwise_sq_distances/serial");
BENCHMARK(pairwise<k::omp::pairwise_sq_distances>)->Name("pairwise_sq_distances/omp");
BENCHMARK(tsne_grad<k::serial::tsne_gradient>)->Name("tsne_gradient/serial");
BENCHMARK(tsne_grad<k::omp::tsne_gradient>)->Name("tsne_gradient/omp");
BENCHMARK(kmeans_assign<k::serial::kmeans_assign>)->Name("kmeans_assign/serial");
BENCHMARK(kmeans_assign<k::omp::kmeans_assign>)->Name("kmeans_assign/omp");

BENCHMARK_MAIN();
