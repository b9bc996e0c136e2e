#include "novaclass/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "novaclass/errors.hpp"

namespace novaclass {

using nlohmann::json;

namespace {

json architecture_to_json(const ArchitectureConfig& c) {
    json blocks = json::array();
    for (const auto& b : c.conv_blocks) {
        blocks.push_back({{"out_channels", b.out_channels},
                          {"kernel_length", b.kernel_length},
                          {"stride", b.stride},
                          {"padding", b.padding == Padding::same ? "same" : "valid"},
                          {"pool_size", b.pool_size},
                          {"pool_stride", b.pool_stride},
                          {"dropout_rate", b.dropout_rate}});
    }
    return {{"input_length", c.input_length},  {"conv_blocks", blocks},
            {"feature_units", c.feature_units}, {"num_classes", c.num_classes},
            {"dropout_rate", c.dropout_rate},   {"bn_momentum", c.bn_momentum},
            {"bn_epsilon", c.bn_epsilon}};
}

ArchitectureConfig architecture_from_json(const json& j) {
    ArchitectureConfig c;
    c.input_length = j.at("input_length").get<std::size_t>();
    c.feature_units = j.at("feature_units").get<std::size_t>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    c.bn_momentum = j.at("bn_momentum").get<double>();
    c.bn_epsilon = j.at("bn_epsilon").get<double>();
    for (const auto& b : j.at("conv_blocks")) {
        ConvBlockSpec s;
        s.out_channels = b.at("out_channels").get<std::size_t>();
        s.kernel_length = b.at("kernel_length").get<std::size_t>();
        s.stride = b.at("stride").get<std::size_t>();
        const auto pad = b.at("padding").get<std::string>();
        if (pad != "same" && pad != "valid") throw ParseError(0, "unknown padding '" + pad + "'");
        s.padding = pad == "same" ? Padding::same : Padding::valid;
        s.pool_size = b.at("pool_size").get<std::size_t>();
        s.pool_stride = b.at("pool_stride").get<std::size_t>();
        s.dropout_rate = b.at("dropout_rate").get<double>();
        c.conv_blocks.push_back(s);
    }
    return c;
}

}  // namespace

std::string model_to_text(const Model& model) {
    json tensors = json::array();
    for (const auto& [name, t] : model.network.state())
        tensors.push_back({{"name", name}, {"shape", t->shape()}, {"data", t->storage()}});
    const json doc = {{"format", kCheckpointFormat},
                      {"architecture", architecture_to_json(model.config)},
                      {"class_names", model.class_names},
                      {"tensors", tensors}};
    return doc.dump(1) + "\n";
}

Model model_from_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(0, std::string("checkpoint is not valid JSON: ") + e.what());
    }
    try {
        if (doc.value("format", std::string{}) != kCheckpointFormat)
            throw ParseError(0, std::string("checkpoint format is not ") + kCheckpointFormat);
        Model model = build_model(architecture_from_json(doc.at("architecture")), 0);
        model.class_names = doc.at("class_names").get<std::vector<std::string>>();
        if (model.class_names.size() != model.num_classes())
            throw ParseError(0, "class name count does not match num_classes");
        auto state = model.network.state();
        const auto& tensors = doc.at("tensors");
        if (tensors.size() != state.size())
            throw ParseError(0, "checkpoint has " + std::to_string(tensors.size()) +
                                    " tensors, architecture needs " + std::to_string(state.size()));
        for (std::size_t i = 0; i < state.size(); ++i) {
            const auto& t = tensors[i];
            if (t.at("name").get<std::string>() != state[i].name)
                throw ParseError(0, "tensor " + std::to_string(i) + " should be " + state[i].name);
            auto shape = t.at("shape").get<std::vector<std::size_t>>();
            if (shape != state[i].tensor->shape())
                throw ParseError(0, "tensor " + state[i].name + " has shape " + shape_string(shape) +
                                        ", expected " + shape_string(state[i].tensor->shape()));
            *state[i].tensor = Tensor(std::move(shape), t.at("data").get<std::vector<double>>());
        }
        return model;
    } catch (const json::exception& e) {
        throw ParseError(0, std::string("malformed checkpoint: ") + e.what());
    }
}

void save_model(const Model& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << model_to_text(model);
    if (!out) throw IoError("write failed for " + path.string());
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return model_from_text(ss.str());
}

}  // namespace novaclass
