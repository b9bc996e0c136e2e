#pragma once

// Hot loops of the pipeline, each in two flavors:
//   kernels::serial  straightforward index-formula loops, used as the
//                    reference in parity tests and benchmarks;
//   kernels::omp     loop-reordered, OpenMP-parallel versions used by the
//                    library. Every parallel loop writes disjoint outputs and
//                    reduces in a fixed order, so results do not depend on the
//                    thread count.

#include <cstddef>
#include <span>

namespace novaclass::kernels {

struct ConvGeometry {
    std::size_t batch = 1;
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t in_length = 1;
    std::size_t kernel = 1;
    std::size_t stride = 1;
    std::size_t pad_left = 0;
    std::size_t out_length = 1;
};

struct DenseGeometry {
    std::size_t batch = 1;
    std::size_t in_features = 1;
    std::size_t out_features = 1;
};

struct TsneStep {
    double kl = 0.0;  // KL(P || Q) for the unexaggerated P
};

#define NOVACLASS_KERNEL_DECLS                                                                  \
    void conv1d_forward(const ConvGeometry& g, std::span<const double> input,                   \
                        std::span<const double> weights, std::span<const double> bias,          \
                        std::span<double> output);                                              \
    void conv1d_backward(const ConvGeometry& g, std::span<const double> input,                  \
                         std::span<const double> weights, std::span<const double> grad_output,  \
                         std::span<double> grad_input, std::span<double> grad_weights,          \
                         std::span<double> grad_bias);                                          \
    void dense_forward(const DenseGeometry& g, std::span<const double> input,                   \
                       std::span<const double> weights, std::span<const double> bias,           \
                       std::span<double> output);                                               \
    void dense_backward(const DenseGeometry& g, std::span<const double> input,                  \
                        std::span<const double> weights, std::span<const double> grad_output,   \
                        std::span<double> grad_input, std::span<double> grad_weights,           \
                        std::span<double> grad_bias);                                           \
    void pairwise_sq_distances(std::span<const double> points, std::size_t n, std::size_t dim,  \
                               std::span<double> out);                                          \
    TsneStep tsne_gradient(std::span<const double> p, std::span<const double> y, std::size_t n, \
                           double exaggeration, std::span<double> grad);                        \
    double kmeans_assign(std::span<const double> points, std::size_t n, std::size_t dim,        \
                         std::span<const double> centroids, std::size_t k,                      \
                         std::span<std::size_t> assignment, std::span<double> sq_dist);

// Shapes: conv input N*Cin*L, weights Cout*Cin*K, output N*Cout*Lout; dense
// input N*I, weights O*I. Zero padding outside [0, L). Backward kernels
// overwrite (not accumulate) their outputs. tsne_gradient expects a 2-d y
// (n*2) and a symmetric joint P. kmeans_assign returns the total inertia and
// breaks distance ties toward the lower centroid index.
namespace serial {
NOVACLASS_KERNEL_DECLS
}

namespace omp {
NOVACLASS_KERNEL_DECLS
}

#undef NOVACLASS_KERNEL_DECLS

/// Number of threads the omp kernels will use (1 without OpenMP).
int max_threads();

}  // namespace novaclass::kernels
