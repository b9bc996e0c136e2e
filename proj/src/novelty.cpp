#include "novaclass/novelty.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <random>

#include "novaclass/errors.hpp"

namespace novaclass {

HealthVerdict health_check(const Model& model, std::span<const double> windows, std::size_t count,
                           std::size_t expected_count) {
    if (count != expected_count)
        throw InvalidArgument("health check needs exactly " + std::to_string(expected_count) +
                              " windows, got " + std::to_string(count));
    const Tensor probs = predict_batch(model, windows, count);
    const std::size_t k = probs.dim(1);
    HealthVerdict v;
    v.windows_used = count;
    v.mean_distribution.probs.assign(k, 0.0);
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t j = 0; j < k; ++j) v.mean_distribution.probs[j] += probs.at(i, j);
    for (double& p : v.mean_distribution.probs) p /= static_cast<double>(count);
    v.status = v.mean_distribution.probs[kHealthyLabel] < 0.5 ? HealthStatus::faulty
                                                                : HealthStatus::healthy;
    return v;
}

std::vector<std::size_t> sample_reference(const LabeledDataset& reference, std::size_t num_classes,
                                          std::size_t total, bool stratified, std::uint64_t seed) {
    if (reference.size() < total)
        throw InvalidArgument("reference has " + std::to_string(reference.size()) +
                              " windows, probe needs " + std::to_string(total));
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> picked;
    if (!stratified) {
        std::vector<std::size_t> all(reference.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        std::shuffle(all.begin(), all.end(), rng);
        picked.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(total));
        std::sort(picked.begin(), picked.end());
        return picked;
    }
    std::vector<std::vector<std::size_t>> by_class(num_classes);
    for (std::size_t i = 0; i < reference.size(); ++i)
        if (reference.labels[i] < num_classes) by_class[reference.labels[i]].push_back(i);
    for (std::size_t c = 0; c < num_classes; ++c) {
        const std::size_t quota = total / num_classes + (c < total % num_classes ? 1 : 0);
        auto& members = by_class[c];
        if (members.size() < quota)
            throw InvalidArgument("reference class " + std::to_string(c) + " has " +
                                  std::to_string(members.size()) + " windows, probe needs " +
                                  std::to_string(quota));
        std::shuffle(members.begin(), members.end(), rng);
        picked.insert(picked.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(quota));
    }
    return picked;
}

NoveltyDecision novelty_probe(const Model& model, std::span<const double> new_windows,
                              std::size_t count, const LabeledDataset& reference,
                              const ProbeConfig& cfg) {
    if (count < cfg.new_windows)
        throw InvalidArgument("novelty probe needs " + std::to_string(cfg.new_windows) +
                              " new windows, got " + std::to_string(count));
    const std::size_t len = model.config.input_length;
    if (new_windows.size() != count * len) throw InvalidArgument("new windows do not match the declared count");
    if (reference.window_length != len) throw InvalidArgument("reference window length mismatch");
    const std::size_t k = model.num_classes();
    const auto ref_idx = sample_reference(reference, k, cfg.reference_windows,
                                          cfg.stratified_reference, cfg.seed);

    const std::size_t n_new = cfg.new_windows;
    const std::size_t n = n_new + ref_idx.size();
    std::vector<double> stacked(new_windows.begin(),
                                new_windows.begin() + static_cast<std::ptrdiff_t>(n_new * len));
    std::vector<PointId> ids(n);
    for (std::size_t i = 0; i < n_new; ++i) ids[i].index = i;
    for (std::size_t r = 0; r < ref_idx.size(); ++r) {
        const auto w = reference.window(ref_idx[r]);
        stacked.insert(stacked.end(), w.begin(), w.end());
        ids[n_new + r] = {n_new + r, reference.labels[ref_idx[r]]};
    }
    const Tensor features = extract_features_batch(model, stacked, n);

    TsneConfig tsne_cfg = cfg.tsne;
    tsne_cfg.seed = cfg.seed + 1;
    TsneResult embedded = tsne_embed(features, tsne_cfg, std::nullopt, std::move(ids));

    KmeansConfig km = cfg.kmeans;
    km.seed = cfg.seed + 2;
    NoveltyDecision d;
    d.sse_curve = sse_sweep(embedded.embedding.y, cfg.k_min, cfg.k_max, km);
    d.knee = detect_knee(d.sse_curve);
    d.estimated_cluster_count = d.knee.k;
    d.embedding = std::move(embedded.embedding);
    d.kl_history = std::move(embedded.kl_history);

    if (d.estimated_cluster_count > k) {
        d.kind = DecisionKind::novel_class;
    } else {
        d.kind = DecisionKind::known_class;
        const Tensor probs = predict_batch(model, std::span<const double>(stacked.data(), n_new * len), n_new);
        std::vector<std::size_t> votes(k, 0);
        for (std::size_t i = 0; i < n_new; ++i) {
            const double* row = probs.data() + i * k;
            ++votes[static_cast<std::size_t>(std::max_element(row, row + k) - row)];
        }
        d.label = static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    }
    return d;
}

std::size_t balance_threshold(const LabeledDataset& base) {
    std::vector<std::size_t> counts;
    for (std::size_t c : base.class_counts())
        if (c > 0) counts.push_back(c);
    if (counts.empty()) throw InvalidArgument("base dataset is empty");
    std::sort(counts.begin(), counts.end());
    return counts[counts.size() / 2];
}

IntegrationResult integrate_new_class(const Model& model, const LabeledDataset& base,
                                      std::span<const double> new_windows, std::size_t count,
                                      const IntegrationConfig& cfg) {
    const std::size_t len = model.config.input_length;
    if (new_windows.size() != count * len)
        throw InvalidArgument("new windows do not match the declared count");
    const std::size_t threshold = cfg.balance_threshold.value_or(balance_threshold(base));
    if (count < threshold) throw NeedsMoreData(threshold - count);

    IntegrationResult result;
    result.new_label = model.num_classes();
    const Model augmented = augment_output_layer(model, cfg.new_class_name);

    LabeledDataset combined = base;
    for (std::size_t i = 0; i < count; ++i)
        combined.add(new_windows.subspan(i * len, len), result.new_label);
    combined.class_names = augmented.class_names;

    if (cfg.cv_folds >= 2) {
        result.cv = kfold_cross_validate(combined, cfg.cv_folds, augmented, cfg.train);
        result.confusion = result.cv.pooled;
    }
    result.model = augmented;
    train(result.model, combined, cfg.train);
    if (cfg.cv_folds < 2) result.confusion = evaluate(result.model, combined).confusion;
    return result;
}

// --- monitor ----------------------------------------------------------------

const char* phase_name(Phase p) {
    switch (p) {
        case Phase::normal: return "NORMAL";
        case Phase::suspect_collecting: return "SUSPECT_COLLECTING";
        case Phase::probing: return "PROBING";
        case Phase::awaiting_data: return "AWAITING_DATA";
        case Phase::retraining: return "RETRAINING";
    }
    return "?";
}

bool legal_transition(Phase from, Phase to) {
    switch (from) {
        case Phase::normal: return to == Phase::suspect_collecting;
        case Phase::suspect_collecting: return to == Phase::probing;
        case Phase::probing: return to == Phase::normal || to == Phase::awaiting_data;
        case Phase::awaiting_data: return to == Phase::retraining;
        case Phase::retraining: return to == Phase::normal;
    }
    return false;
}

std::string format_event(const MonitorEvent& e, bool with_timestamp) {
    nlohmann::ordered_json j;
    j["window"] = e.window_index;
    j["phase"] = phase_name(e.phase);
    j["event"] = e.type;
    j["payload"] = e.payload;
    if (with_timestamp) {
        const auto now = std::chrono::system_clock::now();
        const std::time_t t = std::chrono::system_clock::to_time_t(now);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
        j["ts"] = buf;
    }
    return j.dump();
}

namespace {

class Monitor {
public:
    Monitor(Model model, LabeledDataset reference, const MonitorConfig& cfg, std::ostream* log)
        : cfg_(cfg), log_(log) {
        result_.model = std::move(model);
        result_.reference = std::move(reference);
    }

    void consume(const StreamItem& item) {
        const auto p = predict(result_.model, item.window);
        const std::size_t label = p.argmax();
        const std::size_t at = item.index;
        switch (phase_) {
            case Phase::normal:
                emit(at, "classify", {{"label", label}, {"probs", p.probs}});
                if (label != kHealthyLabel) {
                    move_to(at, Phase::suspect_collecting, "single-window fault prediction");
                    buffer_.assign(item.window.begin(), item.window.end());
                    buffered_ = 1;
                    if (buffered_ == cfg_.probe_windows) probe(at);
                }
                break;
            case Phase::suspect_collecting:
                emit(at, "collect", {{"label", label}, {"buffered", buffered_ + 1}});
                buffer_.insert(buffer_.end(), item.window.begin(), item.window.end());
                if (++buffered_ == cfg_.probe_windows) probe(at);
                break;
            case Phase::awaiting_data:
                novel_.insert(novel_.end(), item.window.begin(), item.window.end());
                ++novel_count_;
                emit(at, "collect", {{"label", label}, {"collected", novel_count_}, {"needed", needed_}});
                if (novel_count_ >= needed_) retrain(at);
                break;
            case Phase::probing:
            case Phase::retraining:
                throw StateError("monitor received a window while busy");
        }
    }

    MonitorResult finish(std::size_t last_index) {
        if (phase_ != Phase::normal)
            emit(last_index, "shutdown",
                 {{"reason", "stream exhausted"},
                  {"buffered", phase_ == Phase::awaiting_data ? novel_count_ : buffered_}});
        else
            emit(last_index, "shutdown", {{"reason", "stream exhausted"}});
        result_.final_phase = phase_;
        return std::move(result_);
    }

private:
    void emit(std::size_t at, std::string type, nlohmann::json payload) {
        MonitorEvent e{at, phase_, std::move(type), std::move(payload)};
        if (log_) *log_ << format_event(e, cfg_.timestamps) << '\n';
        result_.events.push_back(std::move(e));
    }

    void move_to(std::size_t at, Phase to, const std::string& reason) {
        if (!legal_transition(phase_, to))
            throw StateError(std::string("illegal transition ") + phase_name(phase_) + " -> " +
                             phase_name(to));
        const Phase from = phase_;
        phase_ = to;
        emit(at, "transition", {{"from", phase_name(from)}, {"to", phase_name(to)}, {"reason", reason}});
    }

    void probe(std::size_t at) {
        move_to(at, Phase::probing, "probe buffer full");
        const auto verdict = health_check(result_.model, buffer_, buffered_, cfg_.probe_windows);
        emit(at, "health_check",
             {{"status", verdict.status == HealthStatus::faulty ? "faulty" : "healthy"},
              {"mean_probs", verdict.mean_distribution.probs},
              {"windows", verdict.windows_used}});
        if (verdict.status == HealthStatus::healthy) {
            move_to(at, Phase::normal, "false alarm");
            return;
        }
        ProbeConfig pc = cfg_.probe;
        pc.new_windows = cfg_.probe_windows;
        pc.seed = cfg_.probe.seed + probes_++;
        const auto d = novelty_probe(result_.model, buffer_, buffered_, result_.reference, pc);
        nlohmann::json payload = {
            {"decision", d.kind == DecisionKind::novel_class ? "novel_class" : "known_class"},
            {"clusters", d.estimated_cluster_count},
            {"known_classes", result_.model.num_classes()},
            {"sse", d.sse_curve.sse}};
        if (d.label) payload["label"] = *d.label;
        emit(at, "probe", payload);
        if (d.kind == DecisionKind::known_class) {
            emit(at, "alarm", {{"label", *d.label}, {"name", result_.model.class_names[*d.label]}});
            move_to(at, Phase::normal, "known fault");
            return;
        }
        move_to(at, Phase::awaiting_data, "novel fault");
        novel_ = std::move(buffer_);
        novel_count_ = buffered_;
        buffer_.clear();
        buffered_ = 0;
        needed_ = cfg_.integration.balance_threshold.value_or(balance_threshold(result_.reference));
        emit(at, "collect", {{"collected", novel_count_}, {"needed", needed_}});
        if (novel_count_ >= needed_) retrain(at);
    }

    void retrain(std::size_t at) {
        move_to(at, Phase::retraining, "enough novel windows");
        IntegrationConfig ic = cfg_.integration;
        ic.balance_threshold = needed_;
        auto integrated =
            integrate_new_class(result_.model, result_.reference, novel_, novel_count_, ic);
        for (std::size_t i = 0; i < novel_count_; ++i)
            result_.reference.add(std::span<const double>(novel_).subspan(i * result_.reference.window_length,
                                                                         result_.reference.window_length),
                                  integrated.new_label);
        result_.reference.class_names = integrated.model.class_names;
        result_.model = std::move(integrated.model);
        nlohmann::json payload = {{"new_label", integrated.new_label},
                                  {"num_classes", result_.model.num_classes()}};
        if (!integrated.cv.fold_accuracies.empty()) {
            payload["cv_folds"] = integrated.cv.fold_accuracies;
            payload["cv_mean"] = integrated.cv.mean;
            payload["cv_std"] = integrated.cv.stddev;
        }
        emit(at, "retrained", payload);
        novel_.clear();
        novel_count_ = 0;
        move_to(at, Phase::normal, "model upgraded");
    }

    const MonitorConfig& cfg_;
    std::ostream* log_;
    MonitorResult result_;
    Phase phase_ = Phase::normal;
    std::vector<double> buffer_;
    std::size_t buffered_ = 0;
    std::vector<double> novel_;
    std::size_t novel_count_ = 0;
    std::size_t needed_ = 0;
    std::uint64_t probes_ = 0;
};

}  // namespace

MonitorResult monitor_loop(Model model, WindowSource& stream, LabeledDataset reference,
                           const MonitorConfig& cfg, std::ostream* log) {
    if (cfg.probe_windows < 1) throw InvalidArgument("probe window count must be positive");
    Monitor monitor(std::move(model), std::move(reference), cfg, log);
    std::size_t last = 0;
    while (auto item = stream.next()) {
        last = item->index;
        monitor.consume(*item);
    }
    return monitor.finish(last);
}

}  // namespace novaclass
