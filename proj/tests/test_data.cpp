#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "novaclass/data.hpp"
#include "novaclass/errors.hpp"

using namespace novaclass;
namespace fs = std::filesystem;

namespace {

double mean_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); }

double std_of(std::span<const double> v) {
    const double m = mean_of(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / double(v.size()));
}

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("novaclass_test_" + name); }

}  // namespace

TEST_CASE("default class table") {
    const auto specs = default_class_specs();
    REQUIRE(specs.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(specs[i].label == i);
        CHECK(!specs[i].name.empty());
        CHECK(specs[i].flow_range_lpm.has_value());
    }
    CHECK(specs[0].name == "Healthy");
    CHECK(specs[5].name == "Crack");
    CHECK(default_train_counts() == std::vector<std::size_t>{1460, 1120, 1440, 1440, 1040, 1280});
    CHECK(default_test_counts() == std::vector<std::size_t>{360, 280, 360, 360, 360, 320});
    CHECK(default_class_name(3) == specs[3].name);
    CHECK(default_class_name(9) == "label-9");
}

TEST_CASE("generator output") {
    const auto specs = default_class_specs();
    const std::vector<std::size_t> counts{3, 1, 4, 1, 5, 9};
    const auto ds = generate_synthetic_dataset(specs, counts, 77);
    CHECK(ds.size() == 23);
    CHECK(ds.class_counts() == counts);
    CHECK(ds.class_names.size() == 6);
    CHECK(ds.seed == 77u);
    CHECK(ds.samples.size() == 23 * kWindowLength);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto w = ds.window(i);
        for (double v : w) REQUIRE(std::isfinite(v));
        CHECK(std::abs(mean_of(w)) < 1e-9);
        CHECK(std::abs(std_of(w) - 1.0) < 1e-6);
    }

    SUBCASE("deterministic and stream-separated") {
        const auto again = generate_synthetic_dataset(specs, counts, 77);
        CHECK(again.samples == ds.samples);
        CHECK(again.labels == ds.labels);
        CHECK(generate_synthetic_dataset(specs, counts, 78).samples != ds.samples);
        CHECK(generate_synthetic_dataset(specs, counts, 77, 1).samples != ds.samples);
    }
    SUBCASE("changing one class count leaves the others alone") {
        auto more = counts;
        more[2] = 6;
        const auto other = generate_synthetic_dataset(specs, more, 77);
        const std::vector<std::size_t> keep{5};
        CHECK(other.filter_labels(keep).samples == ds.filter_labels(keep).samples);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(generate_synthetic_dataset({}, {}, 1), InvalidArgument);
        CHECK_THROWS_AS(generate_synthetic_dataset(specs, {1, 2}, 1), InvalidArgument);
        auto zero = counts;
        zero[0] = 0;
        CHECK_THROWS_AS(generate_synthetic_dataset(specs, zero, 1), InvalidArgument);
        auto dup = specs;
        dup[1].label = 0;
        CHECK_THROWS_AS(generate_synthetic_dataset(dup, counts, 1), InvalidArgument);
    }
}

TEST_CASE("window normalization") {
    Window flat{std::vector<double>(kWindowLength, 4.2)};
    for (double v : normalize_window(flat).samples) CHECK(v == 0.0);

    const auto raw = synthesize_window(default_class_specs()[3].recipe, kWindowLength, kSampleRate, 5);
    Window w{raw};
    for (double& v : w.samples) v = 3.0 * v + 11.0;
    const auto n1 = normalize_window(w);
    CHECK(std::abs(mean_of(n1.samples)) < 1e-9);
    CHECK(std::abs(std_of(n1.samples) - 1.0) < 1e-6);
    const auto n2 = normalize_window(n1);
    for (std::size_t i = 0; i < kWindowLength; ++i) CHECK(std::abs(n2.samples[i] - n1.samples[i]) < 1e-9);

    std::vector<double> in_place = w.samples;
    normalize_in_place(in_place);
    CHECK(in_place == n1.samples);
}

TEST_CASE("dataset file round trip") {
    const auto ds = generate_synthetic_dataset(default_class_specs(), {2, 2, 2, 1, 1, 2}, 3);
    const auto path = temp_file("ds.csv");
    save_dataset(ds, path);
    {
        std::ifstream in(path);
        std::string header;
        std::getline(in, header);
        CHECK(header == "novaclass-ds-1,n=10,len=1024,rate=1600");
    }
    const auto back = load_dataset(path);
    CHECK(back.labels == ds.labels);
    REQUIRE(back.samples.size() == ds.samples.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) CHECK(std::abs(back.samples[i] - ds.samples[i]) < 1e-9);
    fs::remove(path);
}

TEST_CASE("dataset file errors") {
    const auto path = temp_file("bad.csv");
    auto write = [&](const std::string& text) {
        std::ofstream out(path);
        out << text;
    };
    auto row = [](std::size_t label, std::size_t values) {
        std::string s = std::to_string(label);
        for (std::size_t i = 0; i < values; ++i) s += ",0.5";
        return s + "\n";
    };

    write("novaclass-ds-1,n=2,len=1024,rate=1600\n" + row(0, 1024) + row(1, 1023));
    try {
        load_dataset(path);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }

    write("");
    try {
        load_dataset(path);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("no header") != std::string::npos);
    }

    write("label,a,b\n");
    CHECK_THROWS_AS(load_dataset(path), ParseError);
    write("novaclass-ds-1,n=3,len=1024,rate=1600\n" + row(0, 1024));
    CHECK_THROWS_AS(load_dataset(path), ParseError);
    write("novaclass-ds-1,n=1,len=1024,rate=1600\n" + row(0, 1023) + "\n");
    CHECK_THROWS_AS(load_dataset(path), ParseError);

    fs::remove(path);
    CHECK_THROWS_AS(load_dataset(path), IoError);
    CHECK_THROWS_AS(save_dataset(LabeledDataset{}, "/nonexistent/dir/ds.csv"), IoError);
}

TEST_CASE("dataset helpers") {
    const auto ds = generate_synthetic_dataset(default_class_specs(), {2, 3, 1, 1, 1, 1}, 9);
    const std::vector<std::size_t> idx{4, 0};
    const auto sub = ds.subset(idx);
    CHECK(sub.size() == 2);
    CHECK(sub.labels == std::vector<std::size_t>{ds.labels[4], ds.labels[0]});
    CHECK(std::equal(sub.window(0).begin(), sub.window(0).end(), ds.window(4).begin()));
    const std::vector<std::size_t> bad{99};
    CHECK_THROWS_AS(ds.subset(bad), InvalidArgument);

    auto joined = ds;
    joined.append(sub);
    CHECK(joined.size() == ds.size() + 2);
    CHECK_THROWS_AS(joined.add(std::vector<double>(10, 0.0), 0), InvalidArgument);
    CHECK(LabeledDataset{}.class_counts().empty());
}

TEST_CASE("stream replay") {
    const auto ds = generate_synthetic_dataset(default_class_specs(), {3, 2, 2, 2, 2, 1}, 4);
    const auto path = temp_file("stream.csv");
    save_dataset(ds, path);

    auto drain = [](WindowSource& src) {
        std::vector<std::size_t> hidden;
        std::vector<std::size_t> index;
        while (auto item = src.next()) {
            CHECK(item->window.size() == kWindowLength);
            CHECK(std::abs(mean_of(item->window)) < 1e-9);
            hidden.push_back(item->hidden_label);
            index.push_back(item->index);
        }
        CHECK(!src.next());
        return std::pair{hidden, index};
    };

    auto seq = stream_replay(path, ReplayOrder::sequential);
    CHECK(seq.size() == 12);
    const auto [labels, index] = drain(seq);
    CHECK(labels == ds.labels);
    for (std::size_t i = 0; i < index.size(); ++i) CHECK(index[i] == i);

    auto a = stream_replay(path, ReplayOrder::shuffled, 5);
    auto b = stream_replay(path, ReplayOrder::shuffled, 5);
    auto c = stream_replay(path, ReplayOrder::shuffled, 6);
    const auto la = drain(a).first;
    CHECK(la == drain(b).first);
    CHECK(la != drain(c).first);
    CHECK(std::multiset(la.begin(), la.end()) == std::multiset(ds.labels.begin(), ds.labels.end()));

    fs::remove(path);
    CHECK_THROWS_AS(stream_replay(path, ReplayOrder::sequential), IoError);
}
