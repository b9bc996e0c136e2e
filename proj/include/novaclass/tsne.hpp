#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "novaclass/tensor.hpp"

namespace novaclass {

struct TsneConfig {
    double perplexity = 30.0;
    std::size_t iterations = 1000;
    double learning_rate = 200.0;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    std::size_t momentum_switch_iteration = 250;
    double exaggeration = 12.0;
    std::size_t exaggeration_iterations = 250;
    double init_stddev = 1e-2;  // variance 1e-4
    bool standardize = false;   // z-score input columns first
    std::uint64_t seed = 42;
};

struct ConditionalAffinities {
    Tensor p;  // n x n, row i holds p_{j|i}
    std::vector<double> sigma;
    std::vector<double> achieved_perplexity;
};

/// Gaussian conditional affinities with each row's bandwidth bisected until
/// exp(entropy) matches `perplexity`. Needs n >= 2 and 1 <= perplexity <= n-1.
/// Throws NumericError if a row has not converged after 100 bisection steps.
ConditionalAffinities conditional_affinities(const Tensor& points, double perplexity);

/// Joint P_ij = (p_{j|i} + p_{i|j}) / 2n.
Tensor symmetrize_affinities(const Tensor& conditional);

struct PointId {
    std::size_t index = 0;
    std::optional<std::size_t> label;
};

struct Embedding2D {
    Tensor y;  // n x 2
    std::vector<PointId> ids;
};

struct TsneResult {
    Embedding2D embedding;
    /// KL(P||Q) before every update plus the final value: iterations + 1 entries.
    std::vector<double> kl_history;
};

/// Exact t-SNE to two dimensions. `init` (n x 2) replaces the seeded Gaussian
/// start. Requires n >= 4 and perplexity < (n-1)/3.
TsneResult tsne_embed(const Tensor& points, const TsneConfig& cfg,
                      std::optional<Tensor> init = std::nullopt, std::vector<PointId> ids = {});

/// KL(P||Q) of an embedding, Q clamped at 1e-12.
double tsne_kl(const Tensor& joint_p, const Tensor& y);

/// Text table `id,label,y1,y2`; unknown labels are written as -1.
void save_embedding(const Embedding2D& embedding, const std::filesystem::path& path);
Embedding2D load_embedding(const std::filesystem::path& path);

}  // namespace novaclass
