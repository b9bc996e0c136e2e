// novaclass: generate data, train, evaluate, probe for novel faults, replay a
// stream through the monitor, and re-plot exported curves.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "novaclass/checkpoint.hpp"
#include "novaclass/data.hpp"
#include "novaclass/errors.hpp"
#include "novaclass/novelty.hpp"
#include "novaclass/report.hpp"

using namespace novaclass;

namespace {

constexpr std::uint64_t kDefaultSeed = 42;

std::uint64_t seed_option(CLI::App* sub, std::uint64_t& seed) {
    seed = kDefaultSeed;
    sub->add_option("--seed", seed, "RNG seed (NOVACLASS_SEED when absent)")
        ->envname("NOVACLASS_SEED")
        ->capture_default_str();
    sub->add_option("--config", "flat key=value file with defaults for this command's flags");
    return seed;
}

void print_seed(std::uint64_t seed) { std::cout << "seed=" << seed << "\n"; }

// --- gen --------------------------------------------------------------------

struct GenArgs {
    std::string out;
    std::vector<std::size_t> classes{0, 1, 2, 3, 4, 5};
    std::vector<std::size_t> counts;
    std::string split = "train";
    std::uint64_t seed = kDefaultSeed;
};

void run_gen(const GenArgs& a) {
    print_seed(a.seed);
    const auto all = default_class_specs();
    const auto table = a.split == "train" ? default_train_counts() : default_test_counts();
    if (!a.counts.empty() && a.counts.size() != a.classes.size())
        throw InvalidArgument("--counts needs one value per class in --classes");
    std::vector<ClassSpec> specs;
    std::vector<std::size_t> counts;
    for (std::size_t i = 0; i < a.classes.size(); ++i) {
        const std::size_t label = a.classes[i];
        if (label >= all.size()) throw InvalidArgument("no recipe for label " + std::to_string(label));
        specs.push_back(all[label]);
        counts.push_back(a.counts.empty() ? table[label] : a.counts[i]);
    }
    const auto ds = generate_synthetic_dataset(specs, counts, a.seed, a.split == "train" ? 0 : 1);
    save_dataset(ds, a.out);
    std::cout << "wrote " << ds.size() << " windows to " << a.out << "\n";
}

// --- train / eval -----------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string out;
    std::string history;
    std::string report_dir;
    std::vector<std::size_t> classes{0, 1, 2, 3, 4};
    std::size_t epochs = 60;
    std::size_t batch_size = 64;
    double lr = 1e-3;
    std::size_t patience = 0;
    double validation_fraction = 0.1;
    std::size_t cv_folds = 0;
    std::uint64_t seed = kDefaultSeed;
};

TrainConfig train_config(const TrainArgs& a) {
    TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch_size;
    cfg.seed = a.seed;
    cfg.adam.lr = a.lr;
    if (a.patience > 0) cfg.patience = a.patience;
    cfg.validation_fraction = a.validation_fraction;
    return cfg;
}

LabeledDataset select_classes(const LabeledDataset& ds, const std::vector<std::size_t>& classes) {
    std::vector<std::size_t> sorted = classes;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i)
        if (sorted[i] != i) throw InvalidArgument("--classes must be 0..K-1 for some K");
    auto out = ds.filter_labels(sorted);
    out.class_names.resize(sorted.size());
    for (std::size_t l = 0; l < sorted.size(); ++l)
        if (out.class_names[l].empty()) out.class_names[l] = default_class_name(l);
    return out;
}

void run_train(const TrainArgs& a) {
    print_seed(a.seed);
    const auto ds = select_classes(load_dataset(a.data), a.classes);
    auto model = build_model(ArchitectureConfig::wdcnn(a.classes.size()), a.seed);
    model.class_names = ds.class_names;
    TrainConfig cfg = train_config(a);

    const std::string history_path = a.history.empty() ? a.out + ".history.csv" : a.history;
    std::ofstream history(history_path);
    if (!history) throw IoError("cannot write " + history_path);
    history << "epoch,train_loss,train_accuracy,val_loss,val_accuracy\n";
    cfg.on_epoch = [&](const EpochStats& s) {
        char line[160];
        std::snprintf(line, sizeof line, "%zu,%.6f,%.6f,%.6f,%.6f", s.epoch, s.train_loss,
                      s.train_accuracy, s.val_loss, s.val_accuracy);
        history << line << "\n";
        std::cout << "epoch " << line << std::endl;
    };
    const auto h = train(model, ds, cfg);
    save_model(model, a.out);
    std::cout << "best epoch " << h.best_epoch << ", checkpoint " << a.out << "\n";

    if (a.cv_folds >= 2) {
        TrainConfig quiet = cfg;
        quiet.on_epoch = nullptr;
        const auto cv = kfold_cross_validate(ds, a.cv_folds, model.config, quiet);
        std::cout << cv_table(cv);
        if (!a.report_dir.empty()) export_reports({.class_names = model.class_names, .cv = cv}, a.report_dir);
    }
}

struct EvalArgs {
    std::string model;
    std::string data;
    std::string report_dir;
    std::uint64_t seed = kDefaultSeed;
};

void run_eval(const EvalArgs& a) {
    print_seed(a.seed);
    const auto model = load_model(a.model);
    std::vector<std::size_t> classes(model.num_classes());
    std::iota(classes.begin(), classes.end(), 0);
    const auto ds = load_dataset(a.data).filter_labels(classes);
    const auto ev = evaluate(model, ds);
    std::printf("accuracy %.6f on %zu windows\n", ev.accuracy, ds.size());
    std::cout << confusion_csv(ev.confusion);
    if (!a.report_dir.empty())
        export_reports({.confusion = ev.confusion, .class_names = model.class_names}, a.report_dir);
}

// --- probe ------------------------------------------------------------------

struct ProbeArgs {
    std::string model;
    std::string new_data;
    std::string ref;
    std::string out_dir = "probe-report";
    std::size_t new_windows = kProbeWindows;
    std::size_t ref_windows = kReferenceWindows;
    bool uniform_ref = false;
    double perplexity = 30.0;
    std::size_t iterations = 1000;
    std::size_t restarts = 10;
    bool standardize = false;
    std::uint64_t seed = kDefaultSeed;
};

ProbeConfig probe_config(const ProbeArgs& a) {
    ProbeConfig cfg;
    cfg.new_windows = a.new_windows;
    cfg.reference_windows = a.ref_windows;
    cfg.stratified_reference = !a.uniform_ref;
    cfg.tsne.perplexity = a.perplexity;
    cfg.tsne.iterations = a.iterations;
    cfg.tsne.standardize = a.standardize;
    cfg.kmeans.restarts = a.restarts;
    cfg.seed = a.seed;
    return cfg;
}

void run_probe(const ProbeArgs& a) {
    print_seed(a.seed);
    const auto model = load_model(a.model);
    const auto fresh = load_dataset(a.new_data);
    std::vector<std::size_t> known(model.num_classes());
    std::iota(known.begin(), known.end(), 0);
    const auto ref = load_dataset(a.ref).filter_labels(known);
    if (fresh.size() < a.new_windows)
        throw InvalidArgument(a.new_data + " has " + std::to_string(fresh.size()) + " windows, probe needs " +
                              std::to_string(a.new_windows));
    const std::span<const double> windows(fresh.samples.data(), a.new_windows * fresh.window_length);
    const auto verdict = health_check(model, windows, a.new_windows, a.new_windows);
    const auto d = novelty_probe(model, windows, a.new_windows, ref, probe_config(a));

    nlohmann::ordered_json report;
    report["health"] = verdict.status == HealthStatus::faulty ? "faulty" : "healthy";
    report["mean_probs"] = verdict.mean_distribution.probs;
    report["decision"] = d.kind == DecisionKind::novel_class ? "novel_class" : "known_class";
    report["clusters"] = d.estimated_cluster_count;
    report["known_classes"] = model.num_classes();
    if (d.label) {
        report["label"] = *d.label;
        report["label_name"] = model.class_names[*d.label];
    }
    report["knee_degenerate"] = d.knee.degenerate;
    report["sse_warnings"] = d.sse_curve.warnings;
    report["final_kl"] = d.kl_history.empty() ? 0.0 : d.kl_history.back();

    export_reports({.sse = d.sse_curve, .knee = d.knee.k, .embedding = d.embedding}, a.out_dir);
    std::ofstream out(std::filesystem::path(a.out_dir) / "decision.json");
    if (!out) throw IoError("cannot write decision.json in " + a.out_dir);
    out << report.dump(2) << "\n";
    std::cout << report.dump(2) << "\n";
}

// --- monitor ----------------------------------------------------------------

struct MonitorArgs {
    std::string model;
    std::string stream;
    std::string ref;
    std::string log;
    std::string out_model;
    bool shuffle = false;
    bool timestamps = false;
    std::size_t probe_windows = kProbeWindows;
    std::size_t balance = 0;
    std::size_t cv_folds = 5;
    std::size_t epochs = 60;
    std::size_t patience = 0;
    std::string new_class_name;
    ProbeArgs probe;
    std::uint64_t seed = kDefaultSeed;
};

void run_monitor(MonitorArgs a) {
    print_seed(a.seed);
    auto model = load_model(a.model);
    std::vector<std::size_t> known(model.num_classes());
    std::iota(known.begin(), known.end(), 0);
    auto ref = load_dataset(a.ref).filter_labels(known);
    ref.class_names = model.class_names;
    auto source = stream_replay(a.stream, a.shuffle ? ReplayOrder::shuffled : ReplayOrder::sequential, a.seed);

    MonitorConfig cfg;
    cfg.probe_windows = a.probe_windows;
    a.probe.seed = a.seed;
    a.probe.new_windows = a.probe_windows;
    cfg.probe = probe_config(a.probe);
    cfg.integration.cv_folds = a.cv_folds;
    cfg.integration.train.epochs = a.epochs;
    cfg.integration.train.seed = a.seed;
    if (a.patience > 0) cfg.integration.train.patience = a.patience;
    if (a.balance > 0) cfg.integration.balance_threshold = a.balance;
    cfg.integration.new_class_name = a.new_class_name;
    cfg.timestamps = a.timestamps;

    std::ofstream file;
    std::ostream* log = &std::cout;
    if (!a.log.empty()) {
        file.open(a.log);
        if (!file) throw IoError("cannot write " + a.log);
        log = &file;
    }
    const auto result = monitor_loop(std::move(model), source, std::move(ref), cfg, log);
    if (!a.out_model.empty()) save_model(result.model, a.out_model);
    std::cout << "final phase " << phase_name(result.final_phase) << ", " << result.model.num_classes()
              << " classes, " << result.events.size() << " events\n";
}

// --- plot -------------------------------------------------------------------

struct PlotArgs {
    std::string sse;
    std::string embedding;
    std::string out_dir = ".";
    std::uint64_t seed = kDefaultSeed;
};

void run_plot(const PlotArgs& a) {
    print_seed(a.seed);
    if (a.sse.empty() && a.embedding.empty()) throw InvalidArgument("nothing to plot: give --sse or --embedding");
    ReportArtifacts art;
    if (!a.sse.empty()) {
        art.sse = load_sse_curve(a.sse);
        art.knee = detect_knee(*art.sse).k;
    }
    if (!a.embedding.empty()) art.embedding = load_embedding(a.embedding);
    for (const auto& p : export_reports(art, a.out_dir)) std::cout << "wrote " << p.string() << "\n";
}

std::string quote(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c == '\n' ? ' ' : c;
    }
    return out;
}

// CLI11 only reads config files for the top-level app, so a subcommand's
// --config file is spliced into argv right after the subcommand name. Keys the
// user also passes explicitly are dropped, so flags still win, and the spliced
// values count as given, so they beat NOVACLASS_SEED.
std::vector<std::string> expand_config(const CLI::App& app, std::vector<std::string> args) {
    auto at = std::find_if(args.begin() + 1, args.end(),
                           [&](const std::string& a) { return app.get_subcommand_no_throw(a) != nullptr; });
    if (at == args.end()) return args;
    const CLI::App* sub = app.get_subcommand_no_throw(*at);
    const std::size_t first = static_cast<std::size_t>(at - args.begin()) + 1;

    auto given = [&](const std::string& flag) {
        return std::any_of(args.begin() + static_cast<std::ptrdiff_t>(first), args.end(), [&](const std::string& a) {
            return a == flag || a.rfind(flag + "=", 0) == 0;
        });
    };
    std::string path;
    for (std::size_t i = first; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    }
    if (path.empty()) return args;

    std::vector<std::string> spliced;
    for (const auto& item : CLI::ConfigINI().from_file(path)) {
        if (item.name == "++" || item.name == "--") continue;
        const std::string flag = "--" + item.name;
        const CLI::Option* opt = sub->get_option_no_throw(flag);
        if (!item.parents.empty() || opt == nullptr || flag == "--config")
            throw CLI::ConfigError("unknown key '" + item.fullname() + "' in " + path);
        if (given(flag)) continue;
        if (opt->get_expected_max() == 0) {
            if (item.inputs.size() == 1 && (item.inputs[0] == "true" || item.inputs[0] == "1")) spliced.push_back(flag);
            continue;
        }
        spliced.push_back(flag);
        spliced.insert(spliced.end(), item.inputs.begin(), item.inputs.end());
    }
    args.insert(args.begin() + static_cast<std::ptrdiff_t>(first), spliced.begin(), spliced.end());
    return args;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"novaclass: vibration fault classifier with novel-class discovery"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* g = app.add_subcommand("gen", "generate a synthetic pump-vibration dataset");
    seed_option(g, gen.seed);
    g->add_option("--out", gen.out, "output dataset file")->required();
    g->add_option("--classes", gen.classes, "labels to generate")->delimiter(',')->capture_default_str();
    g->add_option("--counts", gen.counts, "windows per class, same order as --classes (default: split table)")
        ->delimiter(',');
    g->add_option("--split", gen.split, "train or test: picks default counts and a disjoint draw")
        ->check(CLI::IsMember({"train", "test"}))
        ->capture_default_str();

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "train a classifier on a subset of labels");
    seed_option(t, tr.seed);
    t->add_option("--data", tr.data, "training dataset file")->required()->check(CLI::ExistingFile);
    t->add_option("--out", tr.out, "checkpoint to write")->required();
    t->add_option("--classes", tr.classes, "labels to train on (0..K-1)")->delimiter(',')->capture_default_str();
    t->add_option("--history", tr.history, "per-epoch history CSV (default: <out>.history.csv)");
    t->add_option("--epochs", tr.epochs, "epochs")->capture_default_str();
    t->add_option("--batch-size", tr.batch_size, "mini-batch size")->capture_default_str();
    t->add_option("--lr", tr.lr, "Adam learning rate")->capture_default_str();
    t->add_option("--patience", tr.patience, "stop after this many epochs without improvement (0: off)")
        ->capture_default_str();
    t->add_option("--validation-fraction", tr.validation_fraction, "stratified validation share")
        ->capture_default_str();
    t->add_option("--cv-folds", tr.cv_folds, "also run k-fold cross-validation (0: off)")->capture_default_str();
    t->add_option("--report-dir", tr.report_dir, "write the CV table here");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "accuracy and confusion matrix of a checkpoint");
    seed_option(e, ev.seed);
    e->add_option("--model", ev.model, "checkpoint")->required()->check(CLI::ExistingFile);
    e->add_option("--data", ev.data, "dataset; labels beyond the model's classes are skipped")
        ->required()
        ->check(CLI::ExistingFile);
    e->add_option("--report-dir", ev.report_dir, "write confusion CSV and SVG here");

    auto add_probe_flags = [](CLI::App* sub, ProbeArgs& p) {
        sub->add_option("--ref-windows", p.ref_windows, "reference windows in the embedding")->capture_default_str();
        sub->add_flag("--uniform-ref", p.uniform_ref, "sample the reference uniformly instead of per class");
        sub->add_option("--perplexity", p.perplexity, "t-SNE perplexity")->capture_default_str();
        sub->add_option("--iterations", p.iterations, "t-SNE iterations")->capture_default_str();
        sub->add_option("--restarts", p.restarts, "k-means restarts per k")->capture_default_str();
        sub->add_flag("--standardize", p.standardize, "z-score feature columns before t-SNE");
    };

    ProbeArgs pr;
    auto* p = app.add_subcommand("probe", "test whether new windows form an unseen class");
    seed_option(p, pr.seed);
    p->add_option("--model", pr.model, "checkpoint")->required()->check(CLI::ExistingFile);
    p->add_option("--new", pr.new_data, "dataset whose first windows are probed")->required()->check(CLI::ExistingFile);
    p->add_option("--ref", pr.ref, "reference dataset of known classes")->required()->check(CLI::ExistingFile);
    p->add_option("--out-dir", pr.out_dir, "report directory")->capture_default_str();
    p->add_option("--new-windows", pr.new_windows, "windows taken from --new")->capture_default_str();
    add_probe_flags(p, pr);

    MonitorArgs mo;
    auto* m = app.add_subcommand("monitor", "replay a stream through the monitoring state machine");
    seed_option(m, mo.seed);
    m->add_option("--model", mo.model, "starting checkpoint")->required()->check(CLI::ExistingFile);
    m->add_option("--stream", mo.stream, "dataset replayed as the stream")->required()->check(CLI::ExistingFile);
    m->add_option("--ref", mo.ref, "reference dataset of known classes")->required()->check(CLI::ExistingFile);
    m->add_option("--log", mo.log, "event log (JSON lines; default stdout)");
    m->add_option("--out-model", mo.out_model, "write the final checkpoint here");
    m->add_flag("--shuffle", mo.shuffle, "replay in seeded random order");
    m->add_flag("--timestamps", mo.timestamps, "add wall-clock ts to events");
    m->add_option("--probe-windows", mo.probe_windows, "windows collected before probing")->capture_default_str();
    m->add_option("--balance", mo.balance, "novel windows needed before retraining (0: median class count)")
        ->capture_default_str();
    m->add_option("--cv-folds", mo.cv_folds, "cross-validation folds when retraining (0: skip)")
        ->capture_default_str();
    m->add_option("--epochs", mo.epochs, "retraining epochs")->capture_default_str();
    m->add_option("--patience", mo.patience, "retraining early stop (0: off)")->capture_default_str();
    m->add_option("--new-class-name", mo.new_class_name, "name for a discovered class");
    add_probe_flags(m, mo.probe);

    PlotArgs pl;
    auto* l = app.add_subcommand("plot", "render SVG plots from exported SSE / embedding tables");
    seed_option(l, pl.seed);
    l->add_option("--sse", pl.sse, "k,sse table")->check(CLI::ExistingFile);
    l->add_option("--embedding", pl.embedding, "id,label,y1,y2 table")->check(CLI::ExistingFile);
    l->add_option("--out-dir", pl.out_dir, "output directory")->capture_default_str();

    try {
        auto args = expand_config(app, std::vector<std::string>(argv, argv + argc));
        std::vector<char*> expanded;
        for (auto& a : args) expanded.push_back(a.data());
        app.parse(static_cast<int>(expanded.size()), expanded.data());
    } catch (const CLI::CallForHelp& err) {
        return app.exit(err);
    } catch (const CLI::CallForAllHelp& err) {
        return app.exit(err);
    } catch (const CLI::ParseError& err) {
        std::cerr << app.help();
        std::cerr << "error: kind=usage message=\"" << quote(err.what()) << "\"\n";
        return 2;
    }

    try {
        if (g->parsed()) run_gen(gen);
        if (t->parsed()) run_train(tr);
        if (e->parsed()) run_eval(ev);
        if (p->parsed()) run_probe(pr);
        if (m->parsed()) run_monitor(mo);
        if (l->parsed()) run_plot(pl);
    } catch (const Error& err) {
        std::cerr << "error: kind=" << err.kind() << " message=\"" << quote(err.what()) << "\"\n";
        return 1;
    } catch (const std::exception& err) {
        std::cerr << "error: kind=internal message=\"" << quote(err.what()) << "\"\n";
        return 1;
    }
    return 0;
}
