#pragma once

#include <filesystem>
#include <string>

#include "novaclass/wdcnn.hpp"

namespace novaclass {

inline constexpr const char* kCheckpointFormat = "novaclass-ckpt-1";

/// JSON document: format tag, architecture, class names, and every
/// parameter / running-statistic tensor as {name, shape, data}.
std::string model_to_text(const Model& model);
Model model_from_text(const std::string& text);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace novaclass
