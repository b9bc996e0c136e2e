#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "novaclass/adam.hpp"
#include "novaclass/data.hpp"
#include "novaclass/network.hpp"

namespace novaclass {

struct ConvBlockSpec {
    std::size_t out_channels = 16;
    std::size_t kernel_length = 3;
    std::size_t stride = 1;
    Padding padding = Padding::same;
    std::size_t pool_size = 2;
    std::size_t pool_stride = 2;
    double dropout_rate = 0.0;  // optional dropout after the block's activation
};

struct ArchitectureConfig {
    std::size_t input_length = kWindowLength;
    std::vector<ConvBlockSpec> conv_blocks;
    std::size_t feature_units = 64;
    std::size_t num_classes = 5;
    double dropout_rate = 0.5;  // on the feature layer
    double bn_momentum = 0.1;
    double bn_epsilon = 1e-5;

    /// Wide first kernel (64, stride 16) followed by three narrow blocks.
    static ArchitectureConfig wdcnn(std::size_t num_classes = 5);

    /// Throws InvalidConfig on a broken shape chain or a first kernel that
    /// is not strictly the widest.
    void validate() const;
    /// Signal length entering the flatten layer.
    std::size_t flattened_length() const;
};

struct Model {
    ArchitectureConfig config;
    Network network;
    std::vector<std::string> class_names;

    std::size_t num_classes() const { return config.num_classes; }
    /// Index of the layer whose output is the feature vector (ReLU after the
    /// penultimate dense layer).
    std::size_t feature_layer() const;
    const DenseLayer& output_layer() const;
    DenseLayer& output_layer();
};

Model build_model(const ArchitectureConfig& config, std::uint64_t seed);

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainConfig {
    std::size_t epochs = 60;
    std::size_t batch_size = 64;
    std::uint64_t seed = 42;
    AdamConfig adam;
    std::optional<std::size_t> patience;
    double validation_fraction = 0.1;
    std::function<void(const EpochStats&)> on_epoch;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    std::size_t best_epoch = 0;
};

/// Trains in place; the model is left at its best-validation epoch (or the
/// last epoch when there is no validation split).
TrainHistory train(Model& model, const LabeledDataset& dataset, const TrainConfig& cfg);

PredictionDistribution predict(const Model& model, std::span<const double> window);
/// Probabilities for many windows stored back to back, N x num_classes.
Tensor predict_batch(const Model& model, std::span<const double> windows, std::size_t count);

std::vector<double> extract_features(const Model& model, std::span<const double> window);
/// Feature vectors for many windows, N x feature_units.
Tensor extract_features_batch(const Model& model, std::span<const double> windows,
                              std::size_t count);

struct ConfusionMatrix {
    std::size_t num_classes = 0;
    std::vector<std::size_t> counts;  // row = true, column = predicted

    explicit ConfusionMatrix(std::size_t classes = 0) : num_classes(classes), counts(classes * classes) {}
    std::size_t& at(std::size_t truth, std::size_t predicted) {
        return counts[truth * num_classes + predicted];
    }
    std::size_t at(std::size_t truth, std::size_t predicted) const {
        return counts[truth * num_classes + predicted];
    }
    std::size_t total() const;
    std::size_t trace() const;
    std::size_t row_sum(std::size_t truth) const;
    double accuracy() const;
};

ConfusionMatrix confusion_from_predictions(std::span<const std::size_t> truth,
                                           std::span<const std::size_t> predicted,
                                           std::size_t num_classes);

struct Evaluation {
    ConfusionMatrix confusion;
    double accuracy = 0.0;
};

Evaluation evaluate(const Model& model, const LabeledDataset& dataset);

/// Copy of `model` with one more output neuron: zero weights and the minimum
/// existing output bias. Existing parameters are copied bit for bit.
Model augment_output_layer(const Model& model, std::string new_class_name = {});

/// Stratified fold assignment: fold index per sample.
std::vector<std::size_t> stratified_folds(std::span<const std::size_t> labels, std::size_t folds,
                                          std::uint64_t seed);

struct CvReport {
    std::vector<double> fold_accuracies;
    double mean = 0.0;
    double stddev = 0.0;  // population
    ConfusionMatrix pooled;  // summed over folds
};

/// Every fold trains a fresh model from `arch` (seeded per fold).
CvReport kfold_cross_validate(const LabeledDataset& dataset, std::size_t folds,
                              const ArchitectureConfig& arch, const TrainConfig& cfg);
/// Every fold fine-tunes a copy of `initial`.
CvReport kfold_cross_validate(const LabeledDataset& dataset, std::size_t folds,
                              const Model& initial, const TrainConfig& cfg);

}  // namespace novaclass
