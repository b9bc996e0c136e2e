#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "novaclass/cluster.hpp"
#include "novaclass/tsne.hpp"
#include "novaclass/wdcnn.hpp"

namespace novaclass {

struct ReportArtifacts {
    std::optional<ConfusionMatrix> confusion;
    std::vector<std::string> class_names;
    std::optional<SseCurve> sse;
    std::optional<std::size_t> knee;
    std::optional<Embedding2D> embedding;
    std::optional<CvReport> cv;
};

/// Fold rows, then "Average,<mean> ± <std>", all in percent.
std::string cv_table(const CvReport& cv);
std::string confusion_csv(const ConfusionMatrix& m);

std::string confusion_svg(const ConfusionMatrix& m, const std::vector<std::string>& names);
std::string sse_svg(const SseCurve& curve, std::optional<std::size_t> knee);
std::string embedding_svg(const Embedding2D& e);

/// Writes whichever artifacts are present; returns the written paths.
std::vector<std::filesystem::path> export_reports(const ReportArtifacts& artifacts,
                                                  const std::filesystem::path& out_dir);

}  // namespace novaclass
