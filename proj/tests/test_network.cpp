#include <doctest.h>

#include <cmath>

#include "gradcheck_util.hpp"
#include "novaclass/errors.hpp"
#include "novaclass/wdcnn.hpp"

using namespace novaclass;

TEST_CASE("softmax cross-entropy logit gradient is p - r") {
    const Tensor logits({1, 3}, std::vector<double>{std::log(2.0), 0, 0});
    const std::vector<std::size_t> labels{0};
    const auto r = softmax_cross_entropy(logits, labels);
    CHECK(std::abs(r.grad_logits[0] + 0.5) < 1e-15);
    CHECK(std::abs(r.grad_logits[1] - 0.25) < 1e-15);
    CHECK(std::abs(r.grad_logits[2] - 0.25) < 1e-15);
    CHECK(r.loss == doctest::Approx(std::log(2.0)).epsilon(1e-14));

    const Tensor two({2, 2}, std::vector<double>{0, 0, 0, 0});
    const auto m = softmax_cross_entropy(two, std::vector<std::size_t>{0, 1});
    CHECK(m.grad_logits[0] == doctest::Approx(-0.25));  // mean over the batch
    CHECK_THROWS_AS(softmax_cross_entropy(two, std::vector<std::size_t>{0}), InvalidArgument);
    CHECK_THROWS_AS(softmax_cross_entropy(two, std::vector<std::size_t>{0, 2}), InvalidArgument);
}

TEST_CASE("single dense layer: dW is dz outer a") {
    DenseLayer d(3, 2);
    d.weights = Tensor({2, 3}, std::vector<double>{0.1, -0.2, 0.3, 0.5, 0.4, -0.6});
    d.bias = Tensor({2}, std::vector<double>{0.05, -0.05});
    Network net({d});
    const Tensor a({1, 3}, std::vector<double>{1.5, -2, 0.5});
    Rng rng(1);
    const auto trace = net.forward_train(a, rng);
    const auto r = network_backward(net, trace, std::vector<std::size_t>{1});
    const auto loss = softmax_cross_entropy(trace.output, std::vector<std::size_t>{1});
    for (std::size_t o = 0; o < 2; ++o) {
        for (std::size_t i = 0; i < 3; ++i)
            CHECK(r.grads[0].at(o, i) == doctest::Approx(loss.grad_logits[o] * a[i]).epsilon(1e-15));
        CHECK(r.grads[1][o] == doctest::Approx(loss.grad_logits[o]).epsilon(1e-15));
    }
}

TEST_CASE("gradients of random small networks match finite differences") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto c = testing::random_grad_case(seed);
        const auto rep = testing::compare_gradients(c);
        INFO("seed " << seed << " worst tensor " << rep.worst_tensor);
        CHECK(rep.max_relative_error < 1e-3);
        CHECK(rep.coordinates == c.net.parameter_count());
    }
}

TEST_CASE("parameter count of the default architecture") {
    // Frozen from tests/oracles/param_count.py, which builds the same stack in torch.
    CHECK(build_model(ArchitectureConfig::wdcnn(5), 1).network.parameter_count() == 34197);
    CHECK(build_model(ArchitectureConfig::wdcnn(6), 1).network.parameter_count() == 34262);
    CHECK(ArchitectureConfig::wdcnn(5).flattened_length() == 192);
}

TEST_CASE("parameter names and state") {
    const auto m = build_model(ArchitectureConfig::wdcnn(5), 3);
    const auto names = m.network.parameter_names();
    CHECK(names.size() == m.network.parameters().size());
    CHECK(names.front() == "0.conv.kernels");
    const auto state = m.network.state();
    CHECK(state.size() == names.size() + 8);  // running mean and var of four batch norms
}

TEST_CASE("backward without a trace is a state error") {
    const auto m = build_model(ArchitectureConfig::wdcnn(5), 3);
    CHECK_THROWS_AS(m.network.backward(ForwardTrace{}, Tensor({1, 5})), StateError);
}

TEST_CASE("forward and forward_train agree when dropout and batch statistics are out of the way") {
    Conv1DLayer conv(1, 2, 3, 1, Padding::same);
    std::mt19937_64 g(4);
    conv.kernels = testing::random_normal(conv.kernels.shape(), g);
    Network net({conv, ReluLayer{}, MaxPool1DLayer{2, 2}, FlattenLayer{}, DenseLayer(8, 3), DropoutLayer{0.0}});
    const Tensor x = testing::random_normal({2, 1, 8}, g);
    Rng rng(1);
    const auto trace = net.forward_train(x, rng);
    CHECK(trace.output == net.forward(x));
    CHECK(net.forward(x, 0).shape() == std::vector<std::size_t>{2, 2, 8});
}
