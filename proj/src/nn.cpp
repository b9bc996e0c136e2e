#include "novaclass/nn.hpp"

#include <algorithm>
#include <cmath>

#include "novaclass/errors.hpp"
#include "novaclass/kernels.hpp"

namespace novaclass {

std::size_t PredictionDistribution::argmax() const {
    return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

PredictionDistribution softmax(std::span<const double> logits) {
    if (logits.empty()) throw InvalidArgument("softmax of an empty vector");
    for (double v : logits)
        if (!std::isfinite(v)) throw InvalidArgument("softmax input is not finite");
    const double top = *std::max_element(logits.begin(), logits.end());
    PredictionDistribution out;
    out.probs.resize(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out.probs[i] = std::exp(logits[i] - top);
        total += out.probs[i];
    }
    for (double& p : out.probs) p /= total;
    return out;
}

double cross_entropy(const PredictionDistribution& p, OneHotLabel r) {
    if (r.class_index >= p.size())
        throw InvalidArgument("label " + std::to_string(r.class_index) + " outside " +
                              std::to_string(p.size()) + " classes");
    return -std::log(std::max(p.probs[r.class_index], 1e-12));
}

// --- conv -------------------------------------------------------------------

Conv1DLayer::Conv1DLayer(std::size_t in_channels, std::size_t out_channels,
                         std::size_t kernel_length, std::size_t stride_, Padding padding_)
    : kernels({out_channels, in_channels, kernel_length}), bias({out_channels}),
      stride(stride_), padding(padding_) {
    if (kernel_length < 1 || stride_ < 1 || in_channels < 1 || out_channels < 1)
        throw InvalidArgument("conv layer needs positive channels, kernel length and stride");
}

std::size_t Conv1DLayer::output_length(std::size_t input_length) const {
    const std::size_t k = kernel_length();
    if (padding == Padding::same) return (input_length + stride - 1) / stride;
    if (input_length < k)
        throw InvalidArgument("input length " + std::to_string(input_length) +
                              " shorter than kernel " + std::to_string(k));
    return (input_length - k) / stride + 1;
}

std::size_t Conv1DLayer::pad_left(std::size_t input_length) const {
    if (padding == Padding::valid) return 0;
    const std::size_t out = output_length(input_length);
    const std::size_t needed = (out - 1) * stride + kernel_length();
    const std::size_t total = needed > input_length ? needed - input_length : 0;
    return total / 2;
}

namespace {

struct BatchView {
    std::size_t n, c, l;
};

BatchView batch_view(const Tensor& t, const char* what) {
    if (t.rank() == 2) return {1, t.dim(0), t.dim(1)};
    if (t.rank() == 3) return {t.dim(0), t.dim(1), t.dim(2)};
    throw InvalidArgument(std::string(what) + " expects a C x L or N x C x L tensor, got " +
                          shape_string(t.shape()));
}

kernels::ConvGeometry conv_geometry(const BatchView& v, const Conv1DLayer& layer) {
    if (v.c != layer.in_channels())
        throw InvalidArgument("conv input has " + std::to_string(v.c) + " channels, layer expects " +
                              std::to_string(layer.in_channels()));
    kernels::ConvGeometry g;
    g.batch = v.n;
    g.in_channels = v.c;
    g.out_channels = layer.out_channels();
    g.in_length = v.l;
    g.kernel = layer.kernel_length();
    g.stride = layer.stride;
    g.out_length = layer.output_length(v.l);
    g.pad_left = layer.pad_left(v.l);
    return g;
}

std::vector<std::size_t> with_batch_rank(const Tensor& like, std::size_t n, std::size_t c,
                                         std::size_t l) {
    if (like.rank() == 2) return {c, l};
    return {n, c, l};
}

}  // namespace

Tensor conv1d_forward(const Tensor& input, const Conv1DLayer& layer) {
    const BatchView v = batch_view(input, "conv1d");
    const auto g = conv_geometry(v, layer);
    Tensor out(with_batch_rank(input, g.batch, g.out_channels, g.out_length));
    kernels::omp::conv1d_forward(g, input.values(), layer.kernels.values(), layer.bias.values(),
                                 out.values());
    return out;
}

Conv1DGrads conv1d_backward(const Tensor& input, const Conv1DLayer& layer,
                            const Tensor& grad_output) {
    const BatchView v = batch_view(input, "conv1d");
    const auto g = conv_geometry(v, layer);
    if (grad_output.size() != g.batch * g.out_channels * g.out_length)
        throw InvalidArgument("conv grad_output shape mismatch");
    Conv1DGrads grads{Tensor(input.shape()), Tensor(layer.kernels.shape()),
                      Tensor(layer.bias.shape())};
    kernels::omp::conv1d_backward(g, input.values(), layer.kernels.values(), grad_output.values(),
                                  grads.input.values(), grads.kernels.values(),
                                  grads.bias.values());
    return grads;
}

// --- pooling ----------------------------------------------------------------

PoolResult maxpool1d_forward(const Tensor& input, std::size_t size, std::size_t stride) {
    if (size < 1 || stride < 1) throw InvalidArgument("pool size and stride must be >= 1");
    const BatchView v = batch_view(input, "maxpool1d");
    if (v.l < size)
        throw InvalidArgument("pool input length " + std::to_string(v.l) + " shorter than window " +
                              std::to_string(size));
    const std::size_t out_len = (v.l - size) / stride + 1;
    PoolResult r{Tensor(with_batch_rank(input, v.n, v.c, out_len)), {}};
    r.argmax.resize(r.output.size());
    const double* x = input.data();
    for (std::size_t row = 0; row < v.n * v.c; ++row) {
        for (std::size_t t = 0; t < out_len; ++t) {
            const std::size_t start = row * v.l + t * stride;
            std::size_t best = start;
            for (std::size_t idx = start + 1; idx < start + size; ++idx)
                if (x[idx] > x[best]) best = idx;
            r.output[row * out_len + t] = x[best];
            r.argmax[row * out_len + t] = best;
        }
    }
    return r;
}

Tensor maxpool1d_backward(const std::vector<std::size_t>& input_shape, const PoolResult& pooled,
                          const Tensor& grad_output) {
    if (grad_output.size() != pooled.argmax.size())
        throw InvalidArgument("pool grad_output shape mismatch");
    Tensor grad(input_shape);
    for (std::size_t i = 0; i < pooled.argmax.size(); ++i) grad[pooled.argmax[i]] += grad_output[i];
    return grad;
}

// --- dense ------------------------------------------------------------------

DenseLayer::DenseLayer(std::size_t in_features, std::size_t out_features)
    : weights({out_features, in_features}), bias({out_features}) {}

std::vector<double> dense_forward(std::span<const double> a, const DenseLayer& layer) {
    if (a.size() != layer.in_features())
        throw InvalidArgument("dense input has " + std::to_string(a.size()) +
                              " features, layer expects " + std::to_string(layer.in_features()));
    std::vector<double> out(layer.out_features());
    kernels::omp::dense_forward({1, layer.in_features(), layer.out_features()}, a,
                                layer.weights.values(), layer.bias.values(), out);
    return out;
}

Tensor dense_forward(const Tensor& batch, const DenseLayer& layer) {
    if (batch.rank() != 2 || batch.dim(1) != layer.in_features())
        throw InvalidArgument("dense batch " + shape_string(batch.shape()) + " does not match " +
                              std::to_string(layer.in_features()) + " input features");
    Tensor out({batch.dim(0), layer.out_features()});
    kernels::omp::dense_forward({batch.dim(0), layer.in_features(), layer.out_features()},
                                batch.values(), layer.weights.values(), layer.bias.values(),
                                out.values());
    return out;
}

DenseGrads dense_backward(const Tensor& input, const DenseLayer& layer, const Tensor& grad_output) {
    const std::size_t n = input.dim(0);
    if (grad_output.size() != n * layer.out_features())
        throw InvalidArgument("dense grad_output shape mismatch");
    DenseGrads grads{Tensor(input.shape()), Tensor(layer.weights.shape()),
                     Tensor(layer.bias.shape())};
    kernels::omp::dense_backward({n, layer.in_features(), layer.out_features()}, input.values(),
                                 layer.weights.values(), grad_output.values(),
                                 grads.input.values(), grads.weights.values(),
                                 grads.bias.values());
    return grads;
}

// --- batch norm -------------------------------------------------------------

BatchNorm1DLayer::BatchNorm1DLayer(std::size_t channels)
    : gamma({channels}, 1.0), beta({channels}, 0.0), running_mean({channels}, 0.0),
      running_var({channels}, 1.0) {}

namespace {

BatchView bn_view(const Tensor& batch, std::size_t channels) {
    BatchView v{};
    if (batch.rank() == 2) {
        v = {batch.dim(0), batch.dim(1), 1};
    } else if (batch.rank() == 3) {
        v = {batch.dim(0), batch.dim(1), batch.dim(2)};
    } else {
        throw InvalidArgument("batch norm expects N x C or N x C x L, got " +
                              shape_string(batch.shape()));
    }
    if (v.c != channels)
        throw InvalidArgument("batch norm channel mismatch: " + std::to_string(v.c) + " vs " +
                              std::to_string(channels));
    return v;
}

}  // namespace

Tensor batchnorm_infer(const Tensor& batch, const BatchNorm1DLayer& layer) {
    const BatchView v = bn_view(batch, layer.channels());
    Tensor out(batch.shape());
    for (std::size_t c = 0; c < v.c; ++c) {
        const double inv = 1.0 / std::sqrt(layer.running_var[c] + layer.epsilon);
        const double scale = layer.gamma[c] * inv;
        const double shift = layer.beta[c] - layer.running_mean[c] * scale;
        for (std::size_t n = 0; n < v.n; ++n) {
            const std::size_t base = (n * v.c + c) * v.l;
            for (std::size_t t = 0; t < v.l; ++t) out[base + t] = batch[base + t] * scale + shift;
        }
    }
    return out;
}

Tensor batchnorm_forward(const Tensor& batch, BatchNorm1DLayer& layer, Mode mode,
                         BatchNormCache* cache) {
    if (mode == Mode::infer) return batchnorm_infer(batch, layer);
    const BatchView v = bn_view(batch, layer.channels());
    if (v.n < 2) throw InvalidArgument("batch norm in train mode needs at least 2 samples");
    const double m = static_cast<double>(v.n * v.l);
    Tensor out(batch.shape());
    Tensor x_hat(batch.shape());
    std::vector<double> inv_std(v.c);
    for (std::size_t c = 0; c < v.c; ++c) {
        double sum = 0.0;
        for (std::size_t n = 0; n < v.n; ++n) {
            const std::size_t base = (n * v.c + c) * v.l;
            for (std::size_t t = 0; t < v.l; ++t) sum += batch[base + t];
        }
        const double mean = sum / m;
        double sq = 0.0;
        for (std::size_t n = 0; n < v.n; ++n) {
            const std::size_t base = (n * v.c + c) * v.l;
            for (std::size_t t = 0; t < v.l; ++t) {
                const double d = batch[base + t] - mean;
                sq += d * d;
            }
        }
        const double var = sq / m;
        inv_std[c] = 1.0 / std::sqrt(var + layer.epsilon);
        for (std::size_t n = 0; n < v.n; ++n) {
            const std::size_t base = (n * v.c + c) * v.l;
            for (std::size_t t = 0; t < v.l; ++t) {
                const double xh = (batch[base + t] - mean) * inv_std[c];
                x_hat[base + t] = xh;
                out[base + t] = layer.gamma[c] * xh + layer.beta[c];
            }
        }
        // Running variance tracks the unbiased estimate.
        const double unbiased = m > 1.0 ? sq / (m - 1.0) : var;
        layer.running_mean[c] = (1.0 - layer.momentum) * layer.running_mean[c] + layer.momentum * mean;
        layer.running_var[c] = (1.0 - layer.momentum) * layer.running_var[c] + layer.momentum * unbiased;
    }
    if (cache) {
        cache->x_hat = std::move(x_hat);
        cache->inv_std = std::move(inv_std);
    }
    return out;
}

BatchNormGrads batchnorm_backward(const Tensor& grad_output, const BatchNorm1DLayer& layer,
                                  const BatchNormCache& cache) {
    const BatchView v = bn_view(cache.x_hat, layer.channels());
    if (grad_output.size() != cache.x_hat.size())
        throw InvalidArgument("batch norm grad_output shape mismatch");
    const double m = static_cast<double>(v.n * v.l);
    BatchNormGrads g{Tensor(cache.x_hat.shape()), Tensor({v.c}), Tensor({v.c})};
    for (std::size_t c = 0; c < v.c; ++c) {
        double sum_dy = 0.0, sum_dy_xh = 0.0;
        for (std::size_t n = 0; n < v.n; ++n) {
            const std::size_t base = (n * v.c + c) * v.l;
            for (std::size_t t = 0; t < v.l; ++t) {
                sum_dy += grad_output[base + t];
                sum_dy_xh += grad_output[base + t] * cache.x_hat[base + t];
            }
        }
        g.beta[c] = sum_dy;
        g.gamma[c] = sum_dy_xh;
        const double scale = layer.gamma[c] * cache.inv_std[c] / m;
        for (std::size_t n = 0; n < v.n; ++n) {
            const std::size_t base = (n * v.c + c) * v.l;
            for (std::size_t t = 0; t < v.l; ++t)
                g.input[base + t] =
                    scale * (m * grad_output[base + t] - sum_dy - cache.x_hat[base + t] * sum_dy_xh);
        }
    }
    return g;
}

// --- dropout / relu ---------------------------------------------------------

DropoutResult dropout_apply(const Tensor& input, double rate, Mode mode, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0))
        throw InvalidArgument("dropout rate must lie in [0, 1), got " + std::to_string(rate));
    DropoutResult r{input, std::vector<double>(input.size(), 1.0)};
    if (mode == Mode::infer || rate == 0.0) return r;
    const double keep_scale = 1.0 / (1.0 - rate);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < input.size(); ++i) {
        r.mask[i] = unit(rng) < rate ? 0.0 : keep_scale;
        r.output[i] = input[i] * r.mask[i];
    }
    return r;
}

Tensor relu_forward(const Tensor& input) {
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0 ? input[i] : 0.0;
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_output) {
    Tensor g(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) g[i] = input[i] > 0.0 ? grad_output[i] : 0.0;
    return g;
}

void he_uniform(Tensor& t, std::size_t fan_in, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& v : t.storage()) v = dist(rng);
}

}  // namespace novaclass
