#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "novaclass/nn.hpp"

namespace novaclass {

struct ReluLayer {};
struct MaxPool1DLayer {
    std::size_t size = 2;
    std::size_t stride = 2;
};
struct FlattenLayer {};
struct DropoutLayer {
    double rate = 0.0;
};

using Layer = std::variant<Conv1DLayer, BatchNorm1DLayer, ReluLayer, MaxPool1DLayer, FlattenLayer,
                           DenseLayer, DropoutLayer>;

/// Activations cached by a train-mode forward pass for the backward pass.
struct ForwardTrace {
    using Cache = std::variant<std::monostate, BatchNormCache, std::vector<std::size_t>,
                               std::vector<double>>;
    std::vector<Tensor> inputs;  // input of every layer
    std::vector<Cache> caches;
    Tensor output;

    bool empty() const noexcept { return inputs.empty(); }
};

/// One gradient tensor per trainable parameter, aligned with Network::parameters().
using Gradients = std::vector<Tensor>;

struct NamedTensor {
    std::string name;
    Tensor* tensor;
};

struct ConstNamedTensor {
    std::string name;
    const Tensor* tensor;
};

/// Sequential stack over the fixed layer set.
class Network {
public:
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    Network() = default;
    explicit Network(std::vector<Layer> layers) : layers_(std::move(layers)) {}

    std::vector<Layer>& layers() noexcept { return layers_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }

    /// Inference pass. With `stop_after` set, returns the output of that layer.
    Tensor forward(const Tensor& batch, std::size_t stop_after = npos) const;

    /// Train-mode pass: batch statistics, dropout masks drawn from `rng`,
    /// running statistics updated.
    ForwardTrace forward_train(const Tensor& batch, Rng& rng);

    /// Back-propagates `grad_output` (gradient w.r.t. the final output).
    /// Throws StateError on an empty trace.
    Gradients backward(const ForwardTrace& trace, const Tensor& grad_output) const;

    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;
    std::vector<std::string> parameter_names() const;
    std::size_t parameter_count() const;

    /// Trainable parameters followed by batch-norm running statistics.
    std::vector<NamedTensor> state();
    std::vector<ConstNamedTensor> state() const;

private:
    std::vector<Layer> layers_;
};

struct LossResult {
    double loss = 0.0;  // mean cross-entropy
    Tensor probs;       // N x K
    Tensor grad_logits; // (p - r) / N
};

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> labels);

struct BackwardResult {
    double loss = 0.0;
    Tensor probs;
    Gradients grads;
};

/// Gradient of the mean cross-entropy over the traced batch w.r.t. every
/// trainable parameter.
BackwardResult network_backward(const Network& net, const ForwardTrace& trace,
                                std::span<const std::size_t> labels);

}  // namespace novaclass
