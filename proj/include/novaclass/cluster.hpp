#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "novaclass/tensor.hpp"

namespace novaclass {

struct KmeansConfig {
    std::size_t restarts = 10;
    std::size_t max_iter = 300;
    std::uint64_t seed = 42;
};

struct KmeansResult {
    Tensor centroids;  // k x d
    std::vector<std::size_t> assignment;
    double inertia = 0.0;
    std::size_t iterations_run = 0;
    /// Inertia after every assignment step of the winning restart.
    std::vector<double> inertia_trace;
};

/// Lloyd iterations from k-means++ seeds; the lowest-inertia restart wins
/// (ties go to the lower restart index).
KmeansResult kmeans(const Tensor& points, std::size_t k, const KmeansConfig& cfg = {});

struct SseCurve {
    std::vector<std::size_t> k_values;
    std::vector<double> sse;
    std::vector<std::string> warnings;  // non-monotone steps, reported not fatal
};

SseCurve sse_sweep(const Tensor& points, std::size_t k_min = 1, std::size_t k_max = 20,
                   const KmeansConfig& cfg = {});

struct KneeResult {
    std::size_t k = 0;
    bool degenerate = false;  // flat curve
    std::vector<double> chord_distance;  // per curve point, normalized units
};

/// Knee of an SSE curve: with k and SSE rescaled to [0,1], the point farthest
/// from the chord joining the first and last points. Ties go to smaller k.
KneeResult detect_knee(const SseCurve& curve);

/// Two-column text `k,sse`.
void save_sse_curve(const SseCurve& curve, const std::filesystem::path& path);
SseCurve load_sse_curve(const std::filesystem::path& path);

}  // namespace novaclass
