#include "novaclass/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "novaclass/errors.hpp"

namespace novaclass {

// --- normalization ----------------------------------------------------------

void normalize_in_place(std::span<double> samples) {
    if (samples.empty()) return;
    const double n = static_cast<double>(samples.size());
    double mean = 0.0;
    for (double v : samples) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : samples) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / n);
    if (sd < 1e-12) {
        std::fill(samples.begin(), samples.end(), 0.0);
        return;
    }
    for (double& v : samples) v = (v - mean) / sd;
}

Window normalize_window(const Window& w) {
    Window out = w;
    normalize_in_place(out.samples);
    return out;
}

// --- dataset ----------------------------------------------------------------

void LabeledDataset::add(std::span<const double> w, std::size_t label) {
    if (w.size() != window_length)
        throw InvalidArgument("window has " + std::to_string(w.size()) + " samples, dataset expects " +
                              std::to_string(window_length));
    samples.insert(samples.end(), w.begin(), w.end());
    labels.push_back(label);
    if (class_names.size() <= label) {
        const std::size_t old = class_names.size();
        class_names.resize(label + 1);
        for (std::size_t l = old; l <= label; ++l) class_names[l] = default_class_name(l);
    }
}

void LabeledDataset::append(const LabeledDataset& other) {
    if (!other.empty() && other.window_length != window_length)
        throw InvalidArgument("cannot append datasets with different window lengths");
    for (std::size_t i = 0; i < other.size(); ++i) add(other.window(i), other.labels[i]);
    for (std::size_t l = 0; l < other.class_names.size() && l < class_names.size(); ++l)
        if (!other.class_names[l].empty()) class_names[l] = other.class_names[l];
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
    LabeledDataset out;
    out.window_length = window_length;
    out.sample_rate = sample_rate;
    out.class_names = class_names;
    out.seed = seed;
    out.samples.reserve(indices.size() * window_length);
    out.labels.reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= size()) throw InvalidArgument("subset index out of range");
        const auto w = window(i);
        out.samples.insert(out.samples.end(), w.begin(), w.end());
        out.labels.push_back(labels[i]);
    }
    return out;
}

LabeledDataset LabeledDataset::filter_labels(std::span<const std::size_t> keep) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < size(); ++i)
        if (std::find(keep.begin(), keep.end(), labels[i]) != keep.end()) idx.push_back(i);
    return subset(idx);
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
    std::vector<std::size_t> counts(num_label_slots(), 0);
    for (std::size_t l : labels) ++counts[l];
    return counts;
}

std::size_t LabeledDataset::num_label_slots() const {
    if (labels.empty()) return 0;
    return *std::max_element(labels.begin(), labels.end()) + 1;
}

// --- generator --------------------------------------------------------------

std::vector<ClassSpec> default_class_specs() {
    const std::vector<Harmonic> base = {{50.0, 1.0}, {100.0, 0.4}, {150.0, 0.2}};
    std::vector<ClassSpec> specs;

    ClassSpec healthy{0, "Healthy", {}, std::pair{170.0, 220.0}};
    healthy.recipe.harmonics = base;
    healthy.recipe.noise_level = 0.1;
    specs.push_back(healthy);

    ClassSpec low_flow{1, "Low flow rate", {}, std::pair{80.0, 120.0}};
    low_flow.recipe.harmonics = {{50.0, 1.0}, {100.0, 1.2}, {150.0, 0.2}};
    low_flow.recipe.am_depth = 0.6;
    low_flow.recipe.am_rate_hz = 4.0;
    low_flow.recipe.noise_level = 0.15;
    specs.push_back(low_flow);

    ClassSpec cavitation{2, "Cavitation", {}, std::pair{120.0, 170.0}};
    cavitation.recipe.harmonics = base;
    cavitation.recipe.burst_rate_hz = 12.0;
    cavitation.recipe.burst_level = 1.5;
    cavitation.recipe.burst_duration_s = 0.03;
    cavitation.recipe.noise_level = 0.1;
    specs.push_back(cavitation);

    ClassSpec major{3, "Major defect", {}, std::pair{150.0, 200.0}};
    major.recipe.harmonics = base;
    major.recipe.impulse_rate_hz = 25.0;
    major.recipe.impulse_amplitude = 3.0;
    major.recipe.noise_level = 0.1;
    specs.push_back(major);

    ClassSpec minor{4, "Minor defect", {}, std::pair{130.0, 160.0}};
    minor.recipe.harmonics = base;
    minor.recipe.impulse_rate_hz = 25.0;
    minor.recipe.impulse_amplitude = 0.8;
    minor.recipe.noise_level = 0.1;
    specs.push_back(minor);

    // Same fundamental as healthy, plus a strong close sideband pair that
    // beats against it at 3 Hz.
    ClassSpec crack{5, "Crack", {}, std::pair{150.0, 200.0}};
    crack.recipe.harmonics = base;
    crack.recipe.harmonics.push_back({47.0, 2.5});
    crack.recipe.harmonics.push_back({53.0, 2.5});
    crack.recipe.noise_level = 0.1;
    specs.push_back(crack);
    return specs;
}

std::vector<std::size_t> default_train_counts() { return {1460, 1120, 1440, 1440, 1040, 1280}; }
std::vector<std::size_t> default_test_counts() { return {360, 280, 360, 360, 360, 320}; }

std::string default_class_name(std::size_t label) {
    static const std::vector<ClassSpec> specs = default_class_specs();
    for (const auto& s : specs)
        if (s.label == label) return s.name;
    return "label-" + std::to_string(label);
}

std::vector<double> synthesize_window(const SignalRecipe& r, std::size_t length,
                                      double sample_rate, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double duration = static_cast<double>(length) / sample_rate;
    const double speed = 1.0 + r.frequency_jitter * (2.0 * unit(rng) - 1.0);

    std::vector<double> x(length, 0.0);
    for (const Harmonic& h : r.harmonics) {
        const double amp = h.amplitude * (1.0 + r.amplitude_jitter * (2.0 * unit(rng) - 1.0));
        const double phase = two_pi * unit(rng);
        const double f = h.frequency_hz * speed;
        for (std::size_t i = 0; i < length; ++i)
            x[i] += amp * std::sin(two_pi * f * static_cast<double>(i) / sample_rate + phase);
    }
    if (r.am_depth > 0.0) {
        const double phase = two_pi * unit(rng);
        for (std::size_t i = 0; i < length; ++i)
            x[i] *= 1.0 + r.am_depth * std::sin(two_pi * r.am_rate_hz * static_cast<double>(i) /
                                                     sample_rate + phase);
    }
    if (r.impulse_rate_hz > 0.0 && r.impulse_amplitude > 0.0) {
        const double period = 1.0 / (r.impulse_rate_hz * speed);
        // Start one period early so ringing from an impulse just before the
        // window is present too.
        double hit = unit(rng) * period - period;
        for (; hit < duration; hit += period) {
            const double amp = r.impulse_amplitude * (1.0 + 0.2 * (2.0 * unit(rng) - 1.0));
            const auto first = static_cast<std::size_t>(std::max(0.0, std::ceil(hit * sample_rate)));
            for (std::size_t i = first; i < length; ++i) {
                const double tau = static_cast<double>(i) / sample_rate - hit;
                const double env = std::exp(-r.impulse_decay_per_s * tau);
                if (env < 1e-4) break;
                x[i] += amp * env * std::sin(two_pi * r.impulse_resonance_hz * tau);
            }
        }
    }
    if (r.burst_rate_hz > 0.0 && r.burst_level > 0.0) {
        std::exponential_distribution<double> gap(r.burst_rate_hz);
        double start = -r.burst_duration_s + gap(rng);
        // Guarantee at least one burst per window.
        if (start >= duration) start = unit(rng) * (duration - r.burst_duration_s);
        for (; start < duration; start += r.burst_duration_s + gap(rng)) {
            for (std::size_t i = 0; i < length; ++i) {
                const double tau = static_cast<double>(i) / sample_rate - start;
                if (tau < 0.0 || tau > r.burst_duration_s) continue;
                const double hann = std::sin(std::numbers::pi * tau / r.burst_duration_s);
                x[i] += r.burst_level * hann * hann * gauss(rng);
            }
        }
    }
    if (r.noise_level > 0.0)
        for (double& v : x) v += r.noise_level * gauss(rng);
    return x;
}

namespace {

std::uint64_t window_seed(std::uint64_t seed, std::size_t label, std::size_t index,
                          std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(label), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace

LabeledDataset generate_synthetic_dataset(const std::vector<ClassSpec>& specs,
                                          const std::vector<std::size_t>& counts,
                                          std::uint64_t seed, std::uint64_t stream) {
    if (specs.empty()) throw InvalidArgument("no class specs given");
    if (counts.size() != specs.size())
        throw InvalidArgument("need one count per class spec");
    for (std::size_t i = 0; i < specs.size(); ++i)
        for (std::size_t j = i + 1; j < specs.size(); ++j)
            if (specs[i].label == specs[j].label)
                throw InvalidArgument("duplicate class label " + std::to_string(specs[i].label));
    for (std::size_t c : counts)
        if (c < 1) throw InvalidArgument("every class needs at least one window");

    LabeledDataset ds;
    ds.seed = seed;
    std::size_t total = 0;
    for (std::size_t c : counts) total += c;
    ds.samples.reserve(total * kWindowLength);
    for (std::size_t s = 0; s < specs.size(); ++s) {
        for (std::size_t i = 0; i < counts[s]; ++i) {
            auto w = synthesize_window(specs[s].recipe, kWindowLength, kSampleRate,
                                       window_seed(seed, specs[s].label, i, stream));
            normalize_in_place(w);
            ds.add(w, specs[s].label);
        }
    }
    for (const auto& spec : specs) ds.class_names[spec.label] = spec.name;
    return ds;
}

// --- files ------------------------------------------------------------------

namespace {

void append_double(std::string& out, double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

std::string header_line(std::size_t n, std::size_t len, double rate) {
    std::string h = "novaclass-ds-1,n=" + std::to_string(n) + ",len=" + std::to_string(len) + ",rate=";
    append_double(h, rate);
    return h;
}

template <class T>
T parse_number(std::string_view text, std::size_t line, const char* what) {
    T value{};
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw ParseError(line, std::string("bad ") + what + " '" + std::string(text) + "'");
    return value;
}

std::string_view header_field(std::string_view field, std::string_view key, std::size_t line) {
    if (field.substr(0, key.size()) != key)
        throw ParseError(line, "header field '" + std::string(field) + "' should start with '" +
                                   std::string(key) + "'");
    return field.substr(key.size());
}

}  // namespace

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << header_line(ds.size(), ds.window_length, ds.sample_rate) << '\n';
    std::string line;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        line = std::to_string(ds.labels[i]);
        for (double v : ds.window(i)) {
            line += ',';
            append_double(line, v);
        }
        line += '\n';
        out << line;
    }
    if (!out) throw IoError("write failed for " + path.string());
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.empty()) throw ParseError(1, "no header");

    std::vector<std::string_view> fields;
    auto split = [&fields](std::string_view s) {
        fields.clear();
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = s.find(',', start);
            fields.push_back(s.substr(start, comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
    };
    if (!line.empty() && line.back() == '\r') line.pop_back();
    split(line);
    if (fields.size() != 4 || fields[0] != "novaclass-ds-1")
        throw ParseError(1, "no header (expected novaclass-ds-1,n=..,len=..,rate=..)");
    LabeledDataset ds;
    const auto n = parse_number<std::size_t>(header_field(fields[1], "n=", 1), 1, "count");
    ds.window_length = parse_number<std::size_t>(header_field(fields[2], "len=", 1), 1, "length");
    ds.sample_rate = parse_number<double>(header_field(fields[3], "rate=", 1), 1, "rate");
    if (ds.window_length == 0) throw ParseError(1, "window length must be positive");

    ds.samples.reserve(n * ds.window_length);
    std::vector<double> w(ds.window_length);
    std::size_t row = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row;
        split(line);
        if (fields.size() != ds.window_length + 1)
            throw ParseError(line_no, "row " + std::to_string(row) + " has " +
                                          std::to_string(fields.size() - 1) + " values, expected " +
                                          std::to_string(ds.window_length));
        const auto label = parse_number<std::size_t>(fields[0], line_no, "label");
        for (std::size_t j = 0; j < ds.window_length; ++j)
            w[j] = parse_number<double>(fields[j + 1], line_no, "value");
        ds.add(w, label);
    }
    if (ds.size() != n)
        throw ParseError(line_no, "header announces " + std::to_string(n) + " rows, found " +
                                      std::to_string(ds.size()));
    return ds;
}

// --- replay -----------------------------------------------------------------

DatasetReplay::DatasetReplay(LabeledDataset ds, ReplayOrder order, std::uint64_t seed)
    : ds_(std::move(ds)), order_(ds_.size()) {
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    if (order == ReplayOrder::shuffled) {
        std::mt19937_64 rng(seed);
        std::shuffle(order_.begin(), order_.end(), rng);
    }
}

std::optional<StreamItem> DatasetReplay::next() {
    if (pos_ >= order_.size()) return std::nullopt;
    const std::size_t src = order_[pos_];
    StreamItem item;
    item.index = pos_++;
    const auto w = ds_.window(src);
    item.window.assign(w.begin(), w.end());
    normalize_in_place(item.window);
    item.hidden_label = ds_.labels[src];
    return item;
}

DatasetReplay stream_replay(const std::filesystem::path& path, ReplayOrder order,
                            std::uint64_t seed) {
    return DatasetReplay(load_dataset(path), order, seed);
}

}  // namespace novaclass
