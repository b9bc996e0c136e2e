#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "novaclass/tensor.hpp"

namespace novaclass {

using Rng = std::mt19937_64;

enum class Mode { train, infer };
enum class Padding { same, valid };

/// Class probabilities; entries in [0,1] summing to 1.
struct PredictionDistribution {
    std::vector<double> probs;

    std::size_t argmax() const;
    std::size_t size() const noexcept { return probs.size(); }
    double operator[](std::size_t i) const { return probs[i]; }
};

struct OneHotLabel {
    std::size_t class_index = 0;
};

PredictionDistribution softmax(std::span<const double> logits);

/// -log(max(p[r], 1e-12)).
double cross_entropy(const PredictionDistribution& p, OneHotLabel r);

// ---------------------------------------------------------------------------
// Layers. Batched tensors are N x C x L for the conv stack and N x F for
// the dense head.

struct Conv1DLayer {
    Tensor kernels;  // out_channels x in_channels x kernel_length
    Tensor bias;     // out_channels
    std::size_t stride = 1;
    Padding padding = Padding::valid;

    Conv1DLayer() = default;
    Conv1DLayer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_length,
                std::size_t stride, Padding padding);

    std::size_t in_channels() const { return kernels.dim(1); }
    std::size_t out_channels() const { return kernels.dim(0); }
    std::size_t kernel_length() const { return kernels.dim(2); }

    /// Throws InvalidArgument when a valid-mode input is shorter than the kernel.
    std::size_t output_length(std::size_t input_length) const;
    std::size_t pad_left(std::size_t input_length) const;
};

struct DenseLayer {
    Tensor weights;  // out x in
    Tensor bias;     // out

    DenseLayer() = default;
    DenseLayer(std::size_t in_features, std::size_t out_features);

    std::size_t in_features() const { return weights.dim(1); }
    std::size_t out_features() const { return weights.dim(0); }
};

struct BatchNorm1DLayer {
    Tensor gamma;
    Tensor beta;
    Tensor running_mean;
    Tensor running_var;
    double momentum = 0.1;
    double epsilon = 1e-5;

    BatchNorm1DLayer() = default;
    explicit BatchNorm1DLayer(std::size_t channels);

    std::size_t channels() const { return gamma.size(); }
};

struct BatchNormCache {
    Tensor x_hat;
    std::vector<double> inv_std;
};

struct PoolResult {
    Tensor output;
    std::vector<std::size_t> argmax;  // flat input index per output element
};

struct DropoutResult {
    Tensor output;
    std::vector<double> mask;  // 0 or 1/(1-rate) per element
};

/// Accepts C x L or N x C x L input; the output has the same rank.
Tensor conv1d_forward(const Tensor& input, const Conv1DLayer& layer);

struct Conv1DGrads {
    Tensor input;
    Tensor kernels;
    Tensor bias;
};
Conv1DGrads conv1d_backward(const Tensor& input, const Conv1DLayer& layer,
                            const Tensor& grad_output);

/// Accepts C x L or N x C x L input.
PoolResult maxpool1d_forward(const Tensor& input, std::size_t size, std::size_t stride);
Tensor maxpool1d_backward(const std::vector<std::size_t>& input_shape, const PoolResult& pooled,
                          const Tensor& grad_output);

/// W a + b for a single vector; softmax is applied separately.
std::vector<double> dense_forward(std::span<const double> a, const DenseLayer& layer);
/// Row-wise over an N x in batch.
Tensor dense_forward(const Tensor& batch, const DenseLayer& layer);

struct DenseGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};
DenseGrads dense_backward(const Tensor& input, const DenseLayer& layer, const Tensor& grad_output);

/// Train mode normalizes with batch statistics and updates the running
/// statistics; infer mode only reads the running statistics. `cache` receives
/// what batchnorm_backward needs (train mode only).
Tensor batchnorm_forward(const Tensor& batch, BatchNorm1DLayer& layer, Mode mode,
                         BatchNormCache* cache = nullptr);
Tensor batchnorm_infer(const Tensor& batch, const BatchNorm1DLayer& layer);

struct BatchNormGrads {
    Tensor input;
    Tensor gamma;
    Tensor beta;
};
BatchNormGrads batchnorm_backward(const Tensor& grad_output, const BatchNorm1DLayer& layer,
                                  const BatchNormCache& cache);

/// Inverted dropout.
DropoutResult dropout_apply(const Tensor& input, double rate, Mode mode, Rng& rng);

Tensor relu_forward(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& grad_output);

/// He-uniform draws in [-sqrt(6/fan_in), sqrt(6/fan_in)].
void he_uniform(Tensor& t, std::size_t fan_in, Rng& rng);

}  // namespace novaclass
