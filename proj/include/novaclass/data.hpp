#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace novaclass {

inline constexpr std::size_t kWindowLength = 1024;
inline constexpr double kSampleRate = 1600.0;
inline constexpr std::size_t kHealthyLabel = 0;

struct Window {
    std::vector<double> samples;
    double sample_rate = kSampleRate;
};

/// Per-window z-score; a window with std < 1e-12 becomes all zeros.
Window normalize_window(const Window& w);
void normalize_in_place(std::span<double> samples);

/// Windows stored back to back; labels index into class_names.
struct LabeledDataset {
    std::size_t window_length = kWindowLength;
    double sample_rate = kSampleRate;
    std::vector<double> samples;
    std::vector<std::size_t> labels;
    std::vector<std::string> class_names;
    std::optional<std::uint64_t> seed;

    std::size_t size() const noexcept { return labels.size(); }
    bool empty() const noexcept { return labels.empty(); }
    std::span<const double> window(std::size_t i) const {
        return {samples.data() + i * window_length, window_length};
    }
    std::span<double> window(std::size_t i) {
        return {samples.data() + i * window_length, window_length};
    }

    void add(std::span<const double> window, std::size_t label);
    /// Appends every window of `other`; class names are merged by label.
    void append(const LabeledDataset& other);
    LabeledDataset subset(std::span<const std::size_t> indices) const;
    /// Windows whose label is in `keep`, labels unchanged.
    LabeledDataset filter_labels(std::span<const std::size_t> keep) const;
    /// counts[label] for label in [0, max label]. Empty for an empty dataset.
    std::vector<std::size_t> class_counts() const;
    std::size_t num_label_slots() const;
};

// --- synthetic generator ----------------------------------------------------

struct Harmonic {
    double frequency_hz = 50.0;
    double amplitude = 1.0;
};

/// Additive vibration model: harmonics (optionally amplitude-modulated),
/// periodic decaying impulses, broadband noise bursts and stationary noise.
struct SignalRecipe {
    std::vector<Harmonic> harmonics;
    double am_depth = 0.0;
    double am_rate_hz = 0.0;
    double impulse_rate_hz = 0.0;
    double impulse_amplitude = 0.0;
    double impulse_resonance_hz = 420.0;
    double impulse_decay_per_s = 150.0;
    double burst_rate_hz = 0.0;
    double burst_level = 0.0;
    double burst_duration_s = 0.02;
    double noise_level = 0.1;
    double frequency_jitter = 0.01;  // relative, uniform
    double amplitude_jitter = 0.1;   // relative, uniform
};

struct ClassSpec {
    std::size_t label = 0;
    std::string name;
    SignalRecipe recipe;
    std::optional<std::pair<double, double>> flow_range_lpm;  // descriptive only
};

/// The six pump conditions, labels 0..5.
std::vector<ClassSpec> default_class_specs();
/// Per-class train / test counts of the reference pump dataset, by label.
std::vector<std::size_t> default_train_counts();
std::vector<std::size_t> default_test_counts();
/// Name for `label` from the default specs, or "label-<n>" beyond them.
std::string default_class_name(std::size_t label);

/// One window of `recipe`; deterministic in `rng`. Not normalized.
std::vector<double> synthesize_window(const SignalRecipe& recipe, std::size_t length,
                                      double sample_rate, std::uint64_t seed);

/// counts[i] windows of specs[i], normalized per window. Each window draws
/// from its own stream keyed by (seed, label, index), so changing one class's
/// count leaves the other classes' windows untouched. `stream` separates
/// disjoint draws (e.g. train vs test) under the same seed.
LabeledDataset generate_synthetic_dataset(const std::vector<ClassSpec>& specs,
                                          const std::vector<std::size_t>& counts,
                                          std::uint64_t seed, std::uint64_t stream = 0);

// --- files ------------------------------------------------------------------

/// Header `novaclass-ds-1,n=<count>,len=<len>,rate=<rate>` then one
/// `label,<values>` record per line.
void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path);
LabeledDataset load_dataset(const std::filesystem::path& path);

// --- stream replay ----------------------------------------------------------

struct StreamItem {
    std::size_t index = 0;
    std::vector<double> window;  // normalized
    std::size_t hidden_label = 0;  // ground truth for log scoring only
};

class WindowSource {
public:
    virtual ~WindowSource() = default;
    virtual std::optional<StreamItem> next() = 0;
};

enum class ReplayOrder { sequential, shuffled };

/// Replays a dataset one normalized window at a time.
class DatasetReplay : public WindowSource {
public:
    DatasetReplay(LabeledDataset ds, ReplayOrder order, std::uint64_t seed = 0);
    std::optional<StreamItem> next() override;
    std::size_t size() const noexcept { return order_.size(); }

private:
    LabeledDataset ds_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

DatasetReplay stream_replay(const std::filesystem::path& path, ReplayOrder order,
                            std::uint64_t seed = 0);

}  // namespace novaclass
