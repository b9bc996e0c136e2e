#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "novaclass/kernels.hpp"

namespace novaclass::kernels {

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

namespace omp {

namespace {

struct TapRange {
    std::size_t begin;
    std::size_t end;
};

// Output positions t whose tap k lands inside the unpadded input.
TapRange valid_outputs(const ConvGeometry& g, std::size_t k) {
    const std::size_t pad = g.pad_left;
    std::size_t begin = 0;
    if (k < pad) begin = (pad - k + g.stride - 1) / g.stride;
    if (g.in_length + pad <= k) return {0, 0};
    const std::size_t end = std::min(g.out_length, (g.in_length + pad - k - 1) / g.stride + 1);
    return {begin, std::max(begin, end)};
}

}  // namespace

// The conv kernels work on an im2col layout: row j = ic * kernel + k of
// `col` holds tap k of channel ic for every (sample, output position), i.e.
// M = batch * out_length contiguous entries with zeros where the tap falls in
// the padding. Every inner loop then runs over contiguous memory.

namespace {

constexpr std::size_t kBlock = 512;  // columns per tile

std::vector<double> im2col(const ConvGeometry& g, const double* x) {
    const std::size_t rows = g.in_channels * g.kernel;
    const std::size_t m = g.batch * g.out_length;
    std::vector<double> col(rows * m);
    const long jobs = static_cast<long>(rows);
#pragma omp parallel for schedule(static)
    for (long lj = 0; lj < jobs; ++lj) {
        const std::size_t j = static_cast<std::size_t>(lj);
        const std::size_t ic = j / g.kernel, k = j % g.kernel;
        const auto [t0, t1] = valid_outputs(g, k);
        for (std::size_t n = 0; n < g.batch; ++n) {
            double* dst = col.data() + j * m + n * g.out_length;
            const double* src = x + (n * g.in_channels + ic) * g.in_length;
            std::fill(dst, dst + t0, 0.0);
            for (std::size_t t = t0; t < t1; ++t) dst[t] = src[t * g.stride + k - g.pad_left];
            std::fill(dst + t1, dst + g.out_length, 0.0);
        }
    }
    return col;
}

}  // namespace

void conv1d_forward(const ConvGeometry& g, std::span<const double> input,
                    std::span<const double> weights, std::span<const double> bias,
                    std::span<double> output) {
    const std::size_t rows = g.in_channels * g.kernel;
    const std::size_t m = g.batch * g.out_length;
    const auto col = im2col(g, input.data());
    const long blocks = static_cast<long>((m + kBlock - 1) / kBlock);
#pragma omp parallel
    {
        std::vector<double> acc(kBlock);
#pragma omp for schedule(static)
        for (long lb = 0; lb < blocks; ++lb) {
            const std::size_t b0 = static_cast<std::size_t>(lb) * kBlock;
            const std::size_t len = std::min(kBlock, m - b0);
            for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
                std::fill(acc.begin(), acc.begin() + static_cast<std::ptrdiff_t>(len), bias[oc]);
                const double* w = weights.data() + oc * rows;
                for (std::size_t j = 0; j < rows; ++j) {
                    const double wj = w[j];
                    const double* c = col.data() + j * m + b0;
                    for (std::size_t i = 0; i < len; ++i) acc[i] += wj * c[i];
                }
                for (std::size_t i = 0; i < len; ++i) {
                    const std::size_t n = (b0 + i) / g.out_length, t = (b0 + i) % g.out_length;
                    output[(n * g.out_channels + oc) * g.out_length + t] = acc[i];
                }
            }
        }
    }
}

void conv1d_backward(const ConvGeometry& g, std::span<const double> input,
                     std::span<const double> weights, std::span<const double> grad_output,
                     std::span<double> grad_input, std::span<double> grad_weights,
                     std::span<double> grad_bias) {
    const std::size_t rows = g.in_channels * g.kernel;
    const std::size_t m = g.batch * g.out_length;
    const auto col = im2col(g, input.data());

    // grad_output as out_channels x M, matching the column order.
    std::vector<double> go(g.out_channels * m);
    for (std::size_t n = 0; n < g.batch; ++n)
        for (std::size_t oc = 0; oc < g.out_channels; ++oc)
            std::copy_n(grad_output.data() + (n * g.out_channels + oc) * g.out_length, g.out_length,
                        go.data() + oc * m + n * g.out_length);

    const long channels = static_cast<long>(g.out_channels);
#pragma omp parallel for schedule(static)
    for (long loc = 0; loc < channels; ++loc) {
        const std::size_t oc = static_cast<std::size_t>(loc);
        const double* gro = go.data() + oc * m;
        double gb = 0.0;
#pragma omp simd reduction(+ : gb)
        for (std::size_t i = 0; i < m; ++i) gb += gro[i];
        grad_bias[oc] = gb;
        for (std::size_t j = 0; j < rows; ++j) {
            const double* c = col.data() + j * m;
            double acc = 0.0;
#pragma omp simd reduction(+ : acc)
            for (std::size_t i = 0; i < m; ++i) acc += gro[i] * c[i];
            grad_weights[oc * rows + j] = acc;
        }
    }

    // Column gradient, then scattered back onto the input positions.
    std::vector<double> gcol(rows * m, 0.0);
    const long blocks = static_cast<long>((m + kBlock - 1) / kBlock);
#pragma omp parallel for schedule(static)
    for (long lb = 0; lb < blocks; ++lb) {
        const std::size_t b0 = static_cast<std::size_t>(lb) * kBlock;
        const std::size_t len = std::min(kBlock, m - b0);
        for (std::size_t j = 0; j < rows; ++j) {
            double* dst = gcol.data() + j * m + b0;
            for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
                const double w = weights[oc * rows + j];
                const double* gro = go.data() + oc * m + b0;
                for (std::size_t i = 0; i < len; ++i) dst[i] += w * gro[i];
            }
        }
    }

    const long in_channels = static_cast<long>(g.in_channels);
#pragma omp parallel for schedule(static)
    for (long lic = 0; lic < in_channels; ++lic) {
        const std::size_t ic = static_cast<std::size_t>(lic);
        for (std::size_t n = 0; n < g.batch; ++n) {
            double* gin = grad_input.data() + (n * g.in_channels + ic) * g.in_length;
            std::fill(gin, gin + g.in_length, 0.0);
            for (std::size_t k = 0; k < g.kernel; ++k) {
                const auto [t0, t1] = valid_outputs(g, k);
                const double* src = gcol.data() + (ic * g.kernel + k) * m + n * g.out_length;
                for (std::size_t t = t0; t < t1; ++t) gin[t * g.stride + k - g.pad_left] += src[t];
            }
        }
    }
}

void dense_forward(const DenseGeometry& g, std::span<const double> input,
                   std::span<const double> weights, std::span<const double> bias,
                   std::span<double> output) {
    const long batch = static_cast<long>(g.batch);
#pragma omp parallel for schedule(static)
    for (long ln = 0; ln < batch; ++ln) {
        const std::size_t n = static_cast<std::size_t>(ln);
        const double* a = input.data() + n * g.in_features;
        for (std::size_t o = 0; o < g.out_features; ++o) {
            const double* w = weights.data() + o * g.in_features;
            double acc = bias[o];
            for (std::size_t i = 0; i < g.in_features; ++i) acc += w[i] * a[i];
            output[n * g.out_features + o] = acc;
        }
    }
}

void dense_backward(const DenseGeometry& g, std::span<const double> input,
                    std::span<const double> weights, std::span<const double> grad_output,
                    std::span<double> grad_input, std::span<double> grad_weights,
                    std::span<double> grad_bias) {
    const long batch = static_cast<long>(g.batch);
#pragma omp parallel for schedule(static)
    for (long ln = 0; ln < batch; ++ln) {
        const std::size_t n = static_cast<std::size_t>(ln);
        double* gin = grad_input.data() + n * g.in_features;
        std::fill(gin, gin + g.in_features, 0.0);
        for (std::size_t o = 0; o < g.out_features; ++o) {
            const double go = grad_output[n * g.out_features + o];
            const double* w = weights.data() + o * g.in_features;
            for (std::size_t i = 0; i < g.in_features; ++i) gin[i] += go * w[i];
        }
    }
    const long outs = static_cast<long>(g.out_features);
#pragma omp parallel for schedule(static)
    for (long lo = 0; lo < outs; ++lo) {
        const std::size_t o = static_cast<std::size_t>(lo);
        double* gw = grad_weights.data() + o * g.in_features;
        std::fill(gw, gw + g.in_features, 0.0);
        double gb = 0.0;
        for (std::size_t n = 0; n < g.batch; ++n) {
            const double go = grad_output[n * g.out_features + o];
            gb += go;
            const double* a = input.data() + n * g.in_features;
            for (std::size_t i = 0; i < g.in_features; ++i) gw[i] += go * a[i];
        }
        grad_bias[o] = gb;
    }
}

void pairwise_sq_distances(std::span<const double> points, std::size_t n, std::size_t dim,
                           std::span<double> out) {
    const long rows = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic, 16)
    for (long li = 0; li < rows; ++li) {
        const std::size_t i = static_cast<std::size_t>(li);
        const double* xi = points.data() + i * dim;
        out[i * n + i] = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double* xj = points.data() + j * dim;
            double acc = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                const double diff = xi[d] - xj[d];
                acc += diff * diff;
            }
            out[i * n + j] = acc;
            out[j * n + i] = acc;
        }
    }
}

TsneStep tsne_gradient(std::span<const double> p, std::span<const double> y, std::size_t n,
                       double exaggeration, std::span<double> grad) {
    std::vector<double> row_z(n, 0.0);
    const long rows = static_cast<long>(n);
#pragma omp parallel for schedule(static)
    for (long li = 0; li < rows; ++li) {
        const std::size_t i = static_cast<std::size_t>(li);
        const double yx = y[2 * i], yy = y[2 * i + 1];
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double dx = yx - y[2 * j];
            const double dy = yy - y[2 * j + 1];
            acc += 1.0 / (1.0 + dx * dx + dy * dy);
        }
        row_z[i] = acc - 1.0;  // drop j == i, whose kernel value is exactly 1
    }
    double z = 0.0;
    for (double v : row_z) z += v;
    const double inv_z = 1.0 / z;

    std::vector<double> row_kl(n, 0.0);
#pragma omp parallel for schedule(static)
    for (long li = 0; li < rows; ++li) {
        const std::size_t i = static_cast<std::size_t>(li);
        const double yx = y[2 * i], yy = y[2 * i + 1];
        const double* prow = p.data() + i * n;
        double gx = 0.0, gy = 0.0, kl = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dx = yx - y[2 * j];
            const double dy = yy - y[2 * j + 1];
            const double num = 1.0 / (1.0 + dx * dx + dy * dy);
            const double q = num * inv_z;
            const double mult = (exaggeration * prow[j] - q) * num;
            gx += mult * dx;
            gy += mult * dy;
            if (prow[j] > 0.0)
                kl += prow[j] * std::log(std::max(prow[j], 1e-12) / std::max(q, 1e-12));
        }
        grad[2 * i] = 4.0 * gx;
        grad[2 * i + 1] = 4.0 * gy;
        row_kl[i] = kl;
    }
    TsneStep step;
    for (double v : row_kl) step.kl += v;
    return step;
}

double kmeans_assign(std::span<const double> points, std::size_t n, std::size_t dim,
                     std::span<const double> centroids, std::size_t k,
                     std::span<std::size_t> assignment, std::span<double> sq_dist) {
    const long rows = static_cast<long>(n);
#pragma omp parallel for schedule(static)
    for (long li = 0; li < rows; ++li) {
        const std::size_t i = static_cast<std::size_t>(li);
        const double* x = points.data() + i * dim;
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_c = 0;
        for (std::size_t c = 0; c < k; ++c) {
            const double* m = centroids.data() + c * dim;
            double acc = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                const double diff = x[d] - m[d];
                acc += diff * diff;
            }
            if (acc < best) {
                best = acc;
                best_c = c;
            }
        }
        assignment[i] = best_c;
        sq_dist[i] = best;
    }
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) inertia += sq_dist[i];
    return inertia;
}

}  // namespace omp
}  // namespace novaclass::kernels
