#include "novaclass/network.hpp"

#include <type_traits>

#include "novaclass/errors.hpp"

namespace novaclass {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

namespace {

Tensor flatten(const Tensor& x) {
    if (x.rank() < 2) throw InvalidArgument("flatten needs a batched tensor");
    const std::size_t n = x.dim(0);
    return x.reshaped({n, x.size() / n});
}

}  // namespace

Tensor Network::forward(const Tensor& batch, std::size_t stop_after) const {
    Tensor x = batch;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        x = std::visit(
            overloaded{
                [&](const Conv1DLayer& l) { return conv1d_forward(x, l); },
                [&](const BatchNorm1DLayer& l) { return batchnorm_infer(x, l); },
                [&](const ReluLayer&) { return relu_forward(x); },
                [&](const MaxPool1DLayer& l) { return maxpool1d_forward(x, l.size, l.stride).output; },
                [&](const FlattenLayer&) { return flatten(x); },
                [&](const DenseLayer& l) { return dense_forward(x, l); },
                [&](const DropoutLayer&) { return x; },
            },
            layers_[i]);
        if (i == stop_after) break;
    }
    return x;
}

ForwardTrace Network::forward_train(const Tensor& batch, Rng& rng) {
    ForwardTrace trace;
    trace.inputs.reserve(layers_.size());
    trace.caches.reserve(layers_.size());
    Tensor x = batch;
    for (auto& layer : layers_) {
        trace.inputs.push_back(x);
        ForwardTrace::Cache cache;
        x = std::visit(
            overloaded{
                [&](Conv1DLayer& l) { return conv1d_forward(x, l); },
                [&](BatchNorm1DLayer& l) {
                    BatchNormCache c;
                    Tensor y = batchnorm_forward(x, l, Mode::train, &c);
                    cache = std::move(c);
                    return y;
                },
                [&](ReluLayer&) { return relu_forward(x); },
                [&](MaxPool1DLayer& l) {
                    PoolResult r = maxpool1d_forward(x, l.size, l.stride);
                    cache = std::move(r.argmax);
                    return std::move(r.output);
                },
                [&](FlattenLayer&) { return flatten(x); },
                [&](DenseLayer& l) { return dense_forward(x, l); },
                [&](DropoutLayer& l) {
                    DropoutResult r = dropout_apply(x, l.rate, Mode::train, rng);
                    cache = std::move(r.mask);
                    return std::move(r.output);
                },
            },
            layer);
        trace.caches.push_back(std::move(cache));
    }
    trace.output = x;
    return trace;
}

Gradients Network::backward(const ForwardTrace& trace, const Tensor& grad_output) const {
    if (trace.empty() || trace.inputs.size() != layers_.size())
        throw StateError("backward called without cached activations from forward_train");
    // Collected per layer in reverse, then flattened into parameter order.
    std::vector<std::vector<Tensor>> per_layer(layers_.size());
    Tensor grad = grad_output;
    for (std::size_t idx = layers_.size(); idx-- > 0;) {
        const Tensor& input = trace.inputs[idx];
        const auto& cache = trace.caches[idx];
        grad = std::visit(
            overloaded{
                [&](const Conv1DLayer& l) {
                    Conv1DGrads g = conv1d_backward(input, l, grad);
                    per_layer[idx] = {std::move(g.kernels), std::move(g.bias)};
                    return std::move(g.input);
                },
                [&](const BatchNorm1DLayer& l) {
                    BatchNormGrads g = batchnorm_backward(grad, l, std::get<BatchNormCache>(cache));
                    per_layer[idx] = {std::move(g.gamma), std::move(g.beta)};
                    return std::move(g.input);
                },
                [&](const ReluLayer&) { return relu_backward(input, grad); },
                [&](const MaxPool1DLayer&) {
                    PoolResult pooled{Tensor(), std::get<std::vector<std::size_t>>(cache)};
                    return maxpool1d_backward(input.shape(), pooled, grad);
                },
                [&](const FlattenLayer&) { return grad.reshaped(input.shape()); },
                [&](const DenseLayer& l) {
                    DenseGrads g = dense_backward(input, l, grad);
                    per_layer[idx] = {std::move(g.weights), std::move(g.bias)};
                    return std::move(g.input);
                },
                [&](const DropoutLayer&) {
                    const auto& mask = std::get<std::vector<double>>(cache);
                    Tensor g(grad.shape());
                    for (std::size_t i = 0; i < g.size(); ++i) g[i] = grad[i] * mask[i];
                    return g;
                },
            },
            layers_[idx]);
    }
    Gradients out;
    for (auto& grads : per_layer)
        for (auto& g : grads) out.push_back(std::move(g));
    return out;
}

std::vector<Tensor*> Network::parameters() {
    std::vector<Tensor*> out;
    for (auto& layer : layers_) {
        std::visit(overloaded{
                       [&](Conv1DLayer& l) { out.insert(out.end(), {&l.kernels, &l.bias}); },
                       [&](BatchNorm1DLayer& l) { out.insert(out.end(), {&l.gamma, &l.beta}); },
                       [&](DenseLayer& l) { out.insert(out.end(), {&l.weights, &l.bias}); },
                       [](auto&) {},
                   },
                   layer);
    }
    return out;
}

std::vector<const Tensor*> Network::parameters() const {
    auto mutable_params = const_cast<Network*>(this)->parameters();
    return {mutable_params.begin(), mutable_params.end()};
}

std::vector<std::string> Network::parameter_names() const {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const std::string p = std::to_string(i) + ".";
        std::visit(overloaded{
                       [&](const Conv1DLayer&) {
                           names.insert(names.end(), {p + "conv.kernels", p + "conv.bias"});
                       },
                       [&](const BatchNorm1DLayer&) {
                           names.insert(names.end(), {p + "bn.gamma", p + "bn.beta"});
                       },
                       [&](const DenseLayer&) {
                           names.insert(names.end(), {p + "dense.weights", p + "dense.bias"});
                       },
                       [](const auto&) {},
                   },
                   layers_[i]);
    }
    return names;
}

std::size_t Network::parameter_count() const {
    std::size_t total = 0;
    for (const Tensor* t : parameters()) total += t->size();
    return total;
}

std::vector<NamedTensor> Network::state() {
    std::vector<NamedTensor> out;
    const auto names = parameter_names();
    const auto params = parameters();
    for (std::size_t i = 0; i < params.size(); ++i) out.push_back({names[i], params[i]});
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (auto* bn = std::get_if<BatchNorm1DLayer>(&layers_[i])) {
            const std::string p = std::to_string(i) + ".bn.";
            out.push_back({p + "running_mean", &bn->running_mean});
            out.push_back({p + "running_var", &bn->running_var});
        }
    }
    return out;
}

std::vector<ConstNamedTensor> Network::state() const {
    std::vector<ConstNamedTensor> out;
    for (const auto& [name, t] : const_cast<Network*>(this)->state()) out.push_back({name, t});
    return out;
}

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> labels) {
    if (logits.rank() != 2) throw InvalidArgument("logits must be N x K");
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    if (labels.size() != n) throw InvalidArgument("label count does not match batch size");
    LossResult r{0.0, Tensor({n, k}), Tensor({n, k})};
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = softmax(std::span<const double>(logits.data() + i * k, k));
        r.loss += cross_entropy(p, {labels[i]});
        for (std::size_t j = 0; j < k; ++j) {
            r.probs.at(i, j) = p.probs[j];
            r.grad_logits.at(i, j) = (p.probs[j] - (j == labels[i] ? 1.0 : 0.0)) * inv_n;
        }
    }
    r.loss *= inv_n;
    return r;
}

BackwardResult network_backward(const Network& net, const ForwardTrace& trace,
                                 std::span<const std::size_t> labels) {
    if (trace.empty()) throw StateError("network_backward needs a forward_train trace");
    LossResult loss = softmax_cross_entropy(trace.output, labels);
    BackwardResult r;
    r.loss = loss.loss;
    r.grads = net.backward(trace, loss.grad_logits);
    r.probs = std::move(loss.probs);
    return r;
}

}  // namespace novaclass
