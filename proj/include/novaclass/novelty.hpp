#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "novaclass/cluster.hpp"
#include "novaclass/data.hpp"
#include "novaclass/tsne.hpp"
#include "novaclass/wdcnn.hpp"

namespace novaclass {

inline constexpr std::size_t kProbeWindows = 100;
inline constexpr std::size_t kReferenceWindows = 500;

enum class HealthStatus { healthy, faulty };

struct HealthVerdict {
    HealthStatus status = HealthStatus::healthy;
    PredictionDistribution mean_distribution;
    std::size_t windows_used = 0;
};

/// Averages the model's predictions over `count` windows; faulty when the
/// mean probability of the healthy class falls below 0.5.
HealthVerdict health_check(const Model& model, std::span<const double> windows, std::size_t count,
                           std::size_t expected_count = kProbeWindows);

struct ProbeConfig {
    std::size_t new_windows = kProbeWindows;
    std::size_t reference_windows = kReferenceWindows;
    bool stratified_reference = true;
    std::size_t k_min = 1;
    std::size_t k_max = 20;
    TsneConfig tsne;
    KmeansConfig kmeans;
    std::uint64_t seed = 42;  // drives sampling, t-SNE init and k-means seeds
};

enum class DecisionKind { known_class, novel_class };

struct NoveltyDecision {
    DecisionKind kind = DecisionKind::known_class;
    std::optional<std::size_t> label;  // majority prediction, for known_class
    std::size_t estimated_cluster_count = 0;
    SseCurve sse_curve;
    KneeResult knee;
    /// Probe windows first (label unset), then reference windows with labels.
    Embedding2D embedding;
    std::vector<double> kl_history;
};

/// Embeds the new windows together with a reference sample and counts the
/// clusters; more clusters than known classes means a novel class.
NoveltyDecision novelty_probe(const Model& model, std::span<const double> new_windows,
                              std::size_t count, const LabeledDataset& reference,
                              const ProbeConfig& cfg = {});

/// Indices of the reference sample used by novelty_probe.
std::vector<std::size_t> sample_reference(const LabeledDataset& reference, std::size_t num_classes,
                                          std::size_t total, bool stratified, std::uint64_t seed);

struct IntegrationConfig {
    TrainConfig train;
    std::size_t cv_folds = 5;  // 0 skips cross-validation
    std::optional<std::size_t> balance_threshold;  // default: median per-class count
    std::string new_class_name;
};

struct IntegrationResult {
    Model model;
    std::size_t new_label = 0;
    ConfusionMatrix confusion;  // pooled over CV folds, or on the training data without CV
    CvReport cv;
};

/// Median of the non-zero per-class counts (upper median for an even count).
std::size_t balance_threshold(const LabeledDataset& base);

/// Adds the next label, grows the output layer and retrains on base + new.
/// Throws NeedsMoreData when the new class has fewer windows than the threshold.
IntegrationResult integrate_new_class(const Model& model, const LabeledDataset& base,
                                      std::span<const double> new_windows, std::size_t count,
                                      const IntegrationConfig& cfg = {});

// --- monitor ----------------------------------------------------------------

enum class Phase { normal, suspect_collecting, probing, awaiting_data, retraining };

const char* phase_name(Phase p);
bool legal_transition(Phase from, Phase to);

struct MonitorEvent {
    std::size_t window_index = 0;
    Phase phase = Phase::normal;
    std::string type;
    nlohmann::json payload;
};

/// One JSON object per line; `ts` (wall clock) is added only when enabled.
std::string format_event(const MonitorEvent& e, bool with_timestamp);

struct MonitorConfig {
    std::size_t probe_windows = kProbeWindows;
    ProbeConfig probe;
    IntegrationConfig integration;
    bool timestamps = false;
};

struct MonitorResult {
    std::vector<MonitorEvent> events;
    Model model;
    LabeledDataset reference;  // grows with each integrated class
    Phase final_phase = Phase::normal;
};

/// Consumes the stream until it is exhausted. Events are appended to the
/// result and, if `log` is set, written to it as they happen.
MonitorResult monitor_loop(Model model, WindowSource& stream, LabeledDataset reference,
                           const MonitorConfig& cfg, std::ostream* log = nullptr);

}  // namespace novaclass
