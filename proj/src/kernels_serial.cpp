#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "novaclass/kernels.hpp"

namespace novaclass::kernels::serial {

namespace {

// Input sample feeding output position t through kernel tap k, or -1 if it
// falls in the zero padding.
long tap_index(const ConvGeometry& g, std::size_t t, std::size_t k) {
    const long pos = static_cast<long>(t * g.stride + k) - static_cast<long>(g.pad_left);
    return (pos < 0 || pos >= static_cast<long>(g.in_length)) ? -1 : pos;
}

}  // namespace

void conv1d_forward(const ConvGeometry& g, std::span<const double> input,
                    std::span<const double> weights, std::span<const double> bias,
                    std::span<double> output) {
    for (std::size_t n = 0; n < g.batch; ++n)
        for (std::size_t oc = 0; oc < g.out_channels; ++oc)
            for (std::size_t t = 0; t < g.out_length; ++t) {
                double acc = bias[oc];
                for (std::size_t ic = 0; ic < g.in_channels; ++ic)
                    for (std::size_t k = 0; k < g.kernel; ++k) {
                        const long pos = tap_index(g, t, k);
                        if (pos < 0) continue;
                        acc += weights[(oc * g.in_channels + ic) * g.kernel + k] *
                               input[(n * g.in_channels + ic) * g.in_length + pos];
                    }
                output[(n * g.out_channels + oc) * g.out_length + t] = acc;
            }
}

void conv1d_backward(const ConvGeometry& g, std::span<const double> input,
                     std::span<const double> weights, std::span<const double> grad_output,
                     std::span<double> grad_input, std::span<double> grad_weights,
                     std::span<double> grad_bias) {
    std::fill(grad_input.begin(), grad_input.end(), 0.0);
    std::fill(grad_weights.begin(), grad_weights.end(), 0.0);
    std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
    for (std::size_t n = 0; n < g.batch; ++n)
        for (std::size_t oc = 0; oc < g.out_channels; ++oc)
            for (std::size_t t = 0; t < g.out_length; ++t) {
                const double go = grad_output[(n * g.out_channels + oc) * g.out_length + t];
                grad_bias[oc] += go;
                for (std::size_t ic = 0; ic < g.in_channels; ++ic)
                    for (std::size_t k = 0; k < g.kernel; ++k) {
                        const long pos = tap_index(g, t, k);
                        if (pos < 0) continue;
                        const std::size_t wi = (oc * g.in_channels + ic) * g.kernel + k;
                        const std::size_t xi = (n * g.in_channels + ic) * g.in_length + pos;
                        grad_weights[wi] += go * input[xi];
                        grad_input[xi] += go * weights[wi];
                    }
            }
}

void dense_forward(const DenseGeometry& g, std::span<const double> input,
                   std::span<const double> weights, std::span<const double> bias,
                   std::span<double> output) {
    for (std::size_t n = 0; n < g.batch; ++n)
        for (std::size_t o = 0; o < g.out_features; ++o) {
            double acc = bias[o];
            for (std::size_t i = 0; i < g.in_features; ++i)
                acc += weights[o * g.in_features + i] * input[n * g.in_features + i];
            output[n * g.out_features + o] = acc;
        }
}

void dense_backward(const DenseGeometry& g, std::span<const double> input,
                    std::span<const double> weights, std::span<const double> grad_output,
                    std::span<double> grad_input, std::span<double> grad_weights,
                    std::span<double> grad_bias) {
    std::fill(grad_input.begin(), grad_input.end(), 0.0);
    std::fill(grad_weights.begin(), grad_weights.end(), 0.0);
    std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
    for (std::size_t n = 0; n < g.batch; ++n)
        for (std::size_t o = 0; o < g.out_features; ++o) {
            const double go = grad_output[n * g.out_features + o];
            grad_bias[o] += go;
            for (std::size_t i = 0; i < g.in_features; ++i) {
                grad_weights[o * g.in_features + i] += go * input[n * g.in_features + i];
                grad_input[n * g.in_features + i] += go * weights[o * g.in_features + i];
            }
        }
}

void pairwise_sq_distances(std::span<const double> points, std::size_t n, std::size_t dim,
                           std::span<double> out) {
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                const double diff = points[i * dim + d] - points[j * dim + d];
                acc += diff * diff;
            }
            out[i * n + j] = acc;
        }
}

TsneStep tsne_gradient(std::span<const double> p, std::span<const double> y, std::size_t n,
                       double exaggeration, std::span<double> grad) {
    std::vector<double> num(n * n, 0.0);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double dx = y[2 * i] - y[2 * j];
            const double dy = y[2 * i + 1] - y[2 * j + 1];
            num[i * n + j] = 1.0 / (1.0 + dx * dx + dy * dy);
            z += num[i * n + j];
        }
    TsneStep step;
    for (std::size_t i = 0; i < n; ++i) {
        double gx = 0.0, gy = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double q = num[i * n + j] / z;
            const double pij = p[i * n + j];
            const double mult = (exaggeration * pij - q) * num[i * n + j];
            gx += mult * (y[2 * i] - y[2 * j]);
            gy += mult * (y[2 * i + 1] - y[2 * j + 1]);
            if (pij > 0.0)
                step.kl += pij * std::log(std::max(pij, 1e-12) / std::max(q, 1e-12));
        }
        grad[2 * i] = 4.0 * gx;
        grad[2 * i + 1] = 4.0 * gy;
    }
    return step;
}

double kmeans_assign(std::span<const double> points, std::size_t n, std::size_t dim,
                     std::span<const double> centroids, std::size_t k,
                     std::span<std::size_t> assignment, std::span<double> sq_dist) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_c = 0;
        for (std::size_t c = 0; c < k; ++c) {
            double acc = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                const double diff = points[i * dim + d] - centroids[c * dim + d];
                acc += diff * diff;
            }
            if (acc < best) {
                best = acc;
                best_c = c;
            }
        }
        assignment[i] = best_c;
        sq_dist[i] = best;
        inertia += best;
    }
    return inertia;
}

}  // namespace novaclass::kernels::serial
