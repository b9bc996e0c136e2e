#include "novaclass/wdcnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "novaclass/errors.hpp"

namespace novaclass {

// --- architecture -----------------------------------------------------------

ArchitectureConfig ArchitectureConfig::wdcnn(std::size_t num_classes) {
    ArchitectureConfig c;
    c.num_classes = num_classes;
    c.conv_blocks = {
        {16, 64, 16, Padding::same, 2, 2, 0.0},
        {32, 3, 1, Padding::same, 2, 2, 0.0},
        {64, 3, 1, Padding::same, 2, 2, 0.0},
        {64, 3, 1, Padding::valid, 2, 2, 0.0},
    };
    return c;
}

std::size_t ArchitectureConfig::flattened_length() const {
    std::size_t length = input_length;
    for (std::size_t b = 0; b < conv_blocks.size(); ++b) {
        const auto& blk = conv_blocks[b];
        const std::string where = "block " + std::to_string(b + 1);
        if (blk.kernel_length < 1 || blk.stride < 1 || blk.out_channels < 1 || blk.pool_size < 1 ||
            blk.pool_stride < 1)
            throw InvalidConfig(where + ": sizes and strides must be positive");
        if (blk.padding == Padding::valid) {
            if (length < blk.kernel_length)
                throw InvalidConfig(where + ": signal length " + std::to_string(length) +
                                    " shorter than kernel " + std::to_string(blk.kernel_length));
            length = (length - blk.kernel_length) / blk.stride + 1;
        } else {
            length = (length + blk.stride - 1) / blk.stride;
        }
        if (length < blk.pool_size)
            throw InvalidConfig(where + ": signal length " + std::to_string(length) +
                                " shorter than pool window " + std::to_string(blk.pool_size));
        length = (length - blk.pool_size) / blk.pool_stride + 1;
    }
    return length * conv_blocks.back().out_channels;
}

void ArchitectureConfig::validate() const {
    if (input_length < 1) throw InvalidConfig("input length must be positive");
    if (conv_blocks.empty()) throw InvalidConfig("at least one conv block is required");
    if (num_classes < 2) throw InvalidConfig("need at least two classes");
    if (feature_units < 1) throw InvalidConfig("feature layer needs at least one unit");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw InvalidConfig("dropout rate must be in [0,1)");
    for (std::size_t b = 1; b < conv_blocks.size(); ++b)
        if (conv_blocks[b].kernel_length >= conv_blocks[0].kernel_length)
            throw InvalidConfig("first kernel must be strictly wider than every later kernel");
    for (const auto& blk : conv_blocks)
        if (!(blk.dropout_rate >= 0.0 && blk.dropout_rate < 1.0))
            throw InvalidConfig("block dropout rate must be in [0,1)");
    flattened_length();
}

// --- model ------------------------------------------------------------------

std::size_t Model::feature_layer() const {
    const auto& layers = network.layers();
    for (std::size_t i = layers.size(); i-- > 0;)
        if (std::holds_alternative<ReluLayer>(layers[i])) return i;
    throw StateError("model has no feature layer");
}

const DenseLayer& Model::output_layer() const { return std::get<DenseLayer>(network.layers().back()); }
DenseLayer& Model::output_layer() { return std::get<DenseLayer>(network.layers().back()); }

Model build_model(const ArchitectureConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    std::vector<Layer> layers;
    std::size_t channels = 1;
    for (const auto& blk : config.conv_blocks) {
        Conv1DLayer conv(channels, blk.out_channels, blk.kernel_length, blk.stride, blk.padding);
        he_uniform(conv.kernels, channels * blk.kernel_length, rng);
        layers.emplace_back(std::move(conv));
        BatchNorm1DLayer bn(blk.out_channels);
        bn.momentum = config.bn_momentum;
        bn.epsilon = config.bn_epsilon;
        layers.emplace_back(std::move(bn));
        layers.emplace_back(ReluLayer{});
        if (blk.dropout_rate > 0.0) layers.emplace_back(DropoutLayer{blk.dropout_rate});
        layers.emplace_back(MaxPool1DLayer{blk.pool_size, blk.pool_stride});
        channels = blk.out_channels;
    }
    layers.emplace_back(FlattenLayer{});
    DenseLayer hidden(config.flattened_length(), config.feature_units);
    he_uniform(hidden.weights, hidden.in_features(), rng);
    layers.emplace_back(std::move(hidden));
    layers.emplace_back(ReluLayer{});
    if (config.dropout_rate > 0.0) layers.emplace_back(DropoutLayer{config.dropout_rate});
    DenseLayer out(config.feature_units, config.num_classes);
    he_uniform(out.weights, out.in_features(), rng);
    layers.emplace_back(std::move(out));

    Model m{config, Network(std::move(layers)), {}};
    for (std::size_t c = 0; c < config.num_classes; ++c) m.class_names.push_back(default_class_name(c));
    return m;
}

// --- training ---------------------------------------------------------------

namespace {

Tensor make_batch(const LabeledDataset& ds, std::span<const std::size_t> idx) {
    const std::size_t len = ds.window_length;
    Tensor x({idx.size(), 1, len});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto w = ds.window(idx[i]);
        std::copy(w.begin(), w.end(), x.data() + i * len);
    }
    return x;
}

void check_dataset(const Model& model, const LabeledDataset& ds) {
    if (ds.empty()) throw InvalidArgument("dataset is empty");
    if (ds.window_length != model.config.input_length)
        throw InvalidArgument("dataset windows have " + std::to_string(ds.window_length) +
                              " samples, model expects " + std::to_string(model.config.input_length));
    for (std::size_t l : ds.labels)
        if (l >= model.num_classes())
            throw InvalidArgument("label " + std::to_string(l) + " outside the model's " +
                                  std::to_string(model.num_classes()) + " classes");
}

struct LossAccuracy {
    double loss = 0.0;
    double accuracy = 0.0;
};

LossAccuracy infer_loss(const Model& model, const LabeledDataset& ds,
                        std::span<const std::size_t> idx) {
    constexpr std::size_t chunk = 256;
    LossAccuracy r;
    if (idx.empty()) return r;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < idx.size(); start += chunk) {
        const auto part = idx.subspan(start, std::min(chunk, idx.size() - start));
        const Tensor logits = model.network.forward(make_batch(ds, part));
        if (!logits.all_finite()) {
            r.loss = std::numeric_limits<double>::quiet_NaN();
            return r;
        }
        std::vector<std::size_t> labels(part.size());
        for (std::size_t i = 0; i < part.size(); ++i) labels[i] = ds.labels[part[i]];
        const LossResult lr = softmax_cross_entropy(logits, labels);
        r.loss += lr.loss * static_cast<double>(part.size());
        const std::size_t k = logits.dim(1);
        for (std::size_t i = 0; i < part.size(); ++i) {
            const double* row = lr.probs.data() + i * k;
            if (static_cast<std::size_t>(std::max_element(row, row + k) - row) == labels[i]) ++correct;
        }
    }
    r.loss /= static_cast<double>(idx.size());
    r.accuracy = static_cast<double>(correct) / static_cast<double>(idx.size());
    return r;
}

}  // namespace

TrainHistory train(Model& model, const LabeledDataset& dataset, const TrainConfig& cfg) {
    check_dataset(model, dataset);
    if (cfg.batch_size < 2) throw InvalidArgument("batch size must be at least 2 for batch norm");
    if (!(cfg.validation_fraction >= 0.0 && cfg.validation_fraction < 1.0))
        throw InvalidArgument("validation fraction must be in [0,1)");

    Rng rng(cfg.seed);
    std::vector<std::size_t> train_idx, val_idx;
    {
        std::vector<std::vector<std::size_t>> by_class(model.num_classes());
        for (std::size_t i = 0; i < dataset.size(); ++i) by_class[dataset.labels[i]].push_back(i);
        for (auto& members : by_class) {
            std::shuffle(members.begin(), members.end(), rng);
            const auto n_val = static_cast<std::size_t>(
                std::floor(cfg.validation_fraction * static_cast<double>(members.size()) + 0.5));
            const std::size_t take = std::min(n_val, members.size() > 0 ? members.size() - 1 : 0);
            val_idx.insert(val_idx.end(), members.begin(), members.begin() + take);
            train_idx.insert(train_idx.end(), members.begin() + take, members.end());
        }
    }
    if (train_idx.size() < 2) throw InvalidArgument("need at least two training windows");

    AdamState adam{cfg.adam, {}, {}, 0};
    auto params = model.network.parameters();
    TrainHistory history;
    Network best = model.network;
    double best_acc = -1.0, best_loss = 0.0;
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(train_idx.begin(), train_idx.end(), rng);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < train_idx.size();) {
            std::size_t count = std::min(cfg.batch_size, train_idx.size() - start);
            if (train_idx.size() - start - count == 1) ++count;  // never leave a batch of one
            const std::span<const std::size_t> part(train_idx.data() + start, count);
            start += count;

            std::vector<std::size_t> labels(count);
            for (std::size_t i = 0; i < count; ++i) labels[i] = dataset.labels[part[i]];
            const ForwardTrace trace = model.network.forward_train(make_batch(dataset, part), rng);
            if (!trace.output.all_finite())
                throw NumericDivergence(epoch, "training logits became non-finite in epoch " +
                                                   std::to_string(epoch));
            const BackwardResult br = network_backward(model.network, trace, labels);
            if (!std::isfinite(br.loss))
                throw NumericDivergence(epoch, "training loss became non-finite in epoch " +
                                                   std::to_string(epoch));
            adam_step(params, br.grads, adam);

            loss_sum += br.loss * static_cast<double>(count);
            const std::size_t k = br.probs.dim(1);
            for (std::size_t i = 0; i < count; ++i) {
                const double* row = br.probs.data() + i * k;
                if (static_cast<std::size_t>(std::max_element(row, row + k) - row) == labels[i])
                    ++correct;
            }
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(train_idx.size());
        stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_idx.size());
        if (!val_idx.empty()) {
            const auto v = infer_loss(model, dataset, val_idx);
            stats.val_loss = v.loss;
            stats.val_accuracy = v.accuracy;
            if (!std::isfinite(v.loss))
                throw NumericDivergence(epoch, "validation loss became non-finite in epoch " +
                                                   std::to_string(epoch));
        }
        history.epochs.push_back(stats);
        if (cfg.on_epoch) cfg.on_epoch(stats);

        if (val_idx.empty()) {
            history.best_epoch = epoch;
            continue;
        }
        const bool better = stats.val_accuracy > best_acc ||
                            (stats.val_accuracy == best_acc && stats.val_loss < best_loss);
        if (better) {
            best_acc = stats.val_accuracy;
            best_loss = stats.val_loss;
            best = model.network;
            history.best_epoch = epoch;
            since_best = 0;
        } else if (cfg.patience && ++since_best >= *cfg.patience) {
            break;
        }
    }
    if (!val_idx.empty()) model.network = std::move(best);
    return history;
}

// --- inference --------------------------------------------------------------

namespace {

Tensor forward_windows(const Model& model, std::span<const double> windows, std::size_t count,
                       std::size_t stop_after) {
    const std::size_t len = model.config.input_length;
    if (windows.size() != count * len)
        throw InvalidArgument("expected " + std::to_string(count) + " windows of " +
                              std::to_string(len) + " samples, got " +
                              std::to_string(windows.size()) + " values");
    constexpr std::size_t chunk = 256;
    Tensor result;
    for (std::size_t start = 0; start < count; start += chunk) {
        const std::size_t n = std::min(chunk, count - start);
        Tensor x({n, 1, len},
                 std::vector<double>(windows.begin() + static_cast<std::ptrdiff_t>(start * len),
                                     windows.begin() + static_cast<std::ptrdiff_t>((start + n) * len)));
        Tensor y = model.network.forward(x, stop_after);
        if (start == 0) {
            result = Tensor({count, y.dim(1)});
        }
        std::copy(y.data(), y.data() + y.size(), result.data() + start * y.dim(1));
    }
    return result;
}

}  // namespace

Tensor predict_batch(const Model& model, std::span<const double> windows, std::size_t count) {
    Tensor logits = forward_windows(model, windows, count, Network::npos);
    const std::size_t k = logits.dim(1);
    for (std::size_t i = 0; i < count; ++i) {
        const auto p = softmax(std::span<const double>(logits.data() + i * k, k));
        std::copy(p.probs.begin(), p.probs.end(), logits.data() + i * k);
    }
    return logits;
}

PredictionDistribution predict(const Model& model, std::span<const double> window) {
    const Tensor p = predict_batch(model, window, 1);
    return {p.storage()};
}

Tensor extract_features_batch(const Model& model, std::span<const double> windows,
                              std::size_t count) {
    return forward_windows(model, windows, count, model.feature_layer());
}

std::vector<double> extract_features(const Model& model, std::span<const double> window) {
    return extract_features_batch(model, window, 1).storage();
}

// --- evaluation -------------------------------------------------------------

std::size_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::size_t ConfusionMatrix::trace() const {
    std::size_t t = 0;
    for (std::size_t i = 0; i < num_classes; ++i) t += at(i, i);
    return t;
}

std::size_t ConfusionMatrix::row_sum(std::size_t truth) const {
    std::size_t s = 0;
    for (std::size_t j = 0; j < num_classes; ++j) s += at(truth, j);
    return s;
}

double ConfusionMatrix::accuracy() const {
    const std::size_t n = total();
    return n ? static_cast<double>(trace()) / static_cast<double>(n) : 0.0;
}

ConfusionMatrix confusion_from_predictions(std::span<const std::size_t> truth,
                                           std::span<const std::size_t> predicted,
                                           std::size_t num_classes) {
    if (truth.size() != predicted.size()) throw InvalidArgument("prediction count mismatch");
    if (truth.empty()) throw InvalidArgument("no predictions to evaluate");
    ConfusionMatrix cm(num_classes);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] >= num_classes || predicted[i] >= num_classes)
            throw InvalidArgument("label outside the confusion matrix");
        ++cm.at(truth[i], predicted[i]);
    }
    return cm;
}

Evaluation evaluate(const Model& model, const LabeledDataset& dataset) {
    check_dataset(model, dataset);
    const Tensor probs = predict_batch(model, dataset.samples, dataset.size());
    const std::size_t k = probs.dim(1);
    std::vector<std::size_t> pred(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const double* row = probs.data() + i * k;
        pred[i] = static_cast<std::size_t>(std::max_element(row, row + k) - row);
    }
    Evaluation e{confusion_from_predictions(dataset.labels, pred, model.num_classes()), 0.0};
    e.accuracy = e.confusion.accuracy();
    return e;
}

// --- augmentation -----------------------------------------------------------

Model augment_output_layer(const Model& model, std::string new_class_name) {
    Model out = model;
    const DenseLayer& old = model.output_layer();
    const std::size_t in = old.in_features(), k = old.out_features();
    DenseLayer grown(in, k + 1);
    std::copy(old.weights.data(), old.weights.data() + old.weights.size(), grown.weights.data());
    std::copy(old.bias.data(), old.bias.data() + k, grown.bias.data());
    grown.bias[k] = *std::min_element(old.bias.data(), old.bias.data() + k);
    out.output_layer() = std::move(grown);
    out.config.num_classes = k + 1;
    out.class_names.push_back(new_class_name.empty() ? default_class_name(k) : std::move(new_class_name));
    return out;
}

// --- cross validation -------------------------------------------------------

std::vector<std::size_t> stratified_folds(std::span<const std::size_t> labels, std::size_t folds,
                                          std::uint64_t seed) {
    if (folds < 2) throw InvalidArgument("need at least two folds");
    if (labels.size() < folds) throw InvalidArgument("fewer samples than folds");
    const std::size_t slots = *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<std::vector<std::size_t>> by_class(slots);
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    Rng rng(seed);
    std::vector<std::size_t> fold_of(labels.size());
    std::size_t offset = 0;
    for (std::size_t c = 0; c < slots; ++c) {
        auto& members = by_class[c];
        if (members.empty()) continue;
        if (members.size() < folds)
            throw InvalidArgument("class " + std::to_string(c) + " has " +
                                  std::to_string(members.size()) + " samples, fewer than " +
                                  std::to_string(folds) + " folds");
        std::shuffle(members.begin(), members.end(), rng);
        for (std::size_t i = 0; i < members.size(); ++i) fold_of[members[i]] = (offset + i) % folds;
        offset = (offset + members.size()) % folds;
    }
    return fold_of;
}

namespace {

CvReport run_folds(const LabeledDataset& dataset, std::size_t folds, const TrainConfig& cfg,
                   std::size_t num_classes,
                   const std::function<Model(std::size_t)>& make_model) {
    const auto fold_of = stratified_folds(dataset.labels, folds, cfg.seed);
    CvReport report;
    report.pooled = ConfusionMatrix(num_classes);
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> train_idx, test_idx;
        for (std::size_t i = 0; i < dataset.size(); ++i)
            (fold_of[i] == f ? test_idx : train_idx).push_back(i);
        Model model = make_model(f);
        TrainConfig fold_cfg = cfg;
        fold_cfg.seed = cfg.seed + 1000 * (f + 1);
        train(model, dataset.subset(train_idx), fold_cfg);
        const Evaluation e = evaluate(model, dataset.subset(test_idx));
        report.fold_accuracies.push_back(e.accuracy);
        for (std::size_t i = 0; i < report.pooled.counts.size(); ++i)
            report.pooled.counts[i] += e.confusion.counts[i];
    }
    const double n = static_cast<double>(folds);
    for (double a : report.fold_accuracies) report.mean += a;
    report.mean /= n;
    double var = 0.0;
    for (double a : report.fold_accuracies) var += (a - report.mean) * (a - report.mean);
    report.stddev = std::sqrt(var / n);
    return report;
}

}  // namespace

CvReport kfold_cross_validate(const LabeledDataset& dataset, std::size_t folds,
                              const ArchitectureConfig& arch, const TrainConfig& cfg) {
    return run_folds(dataset, folds, cfg, arch.num_classes, [&](std::size_t f) {
        return build_model(arch, cfg.seed + f + 1);
    });
}

CvReport kfold_cross_validate(const LabeledDataset& dataset, std::size_t folds,
                              const Model& initial, const TrainConfig& cfg) {
    return run_folds(dataset, folds, cfg, initial.num_classes(),
                     [&](std::size_t) { return initial; });
}

}  // namespace novaclass
