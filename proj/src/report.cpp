#include "novaclass/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "novaclass/errors.hpp"

namespace novaclass {

namespace {

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    return colors[i % 10];
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

struct Axes {
    double x0, x1, y0, y1;
    static constexpr double w = 480, h = 360, m = 50;
    double px(double x) const { return m + (x - x0) / (x1 - x0 == 0 ? 1 : x1 - x0) * (w - 2 * m); }
    double py(double y) const { return h - m - (y - y0) / (y1 - y0 == 0 ? 1 : y1 - y0) * (h - 2 * m); }
};

std::string svg_open(double w, double h) {
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    return s.str();
}

}  // namespace

std::string cv_table(const CvReport& cv) {
    std::string out = "Fold,Test accuracy(%)\n";
    for (std::size_t f = 0; f < cv.fold_accuracies.size(); ++f)
        out += std::to_string(f + 1) + "," + fmt("%.3f", 100.0 * cv.fold_accuracies[f]) + "\n";
    out += "Average," + fmt("%.3f", 100.0 * cv.mean) + " ± " + fmt("%.3f", 100.0 * cv.stddev) + "\n";
    return out;
}

std::string confusion_csv(const ConfusionMatrix& m) {
    std::string out = "true\\predicted";
    for (std::size_t j = 0; j < m.num_classes; ++j) out += "," + std::to_string(j);
    out += "\n";
    for (std::size_t i = 0; i < m.num_classes; ++i) {
        out += std::to_string(i);
        for (std::size_t j = 0; j < m.num_classes; ++j) out += "," + std::to_string(m.at(i, j));
        out += "\n";
    }
    return out;
}

std::string confusion_svg(const ConfusionMatrix& m, const std::vector<std::string>& names) {
    const double cell = 60, margin = 110;
    const double size = margin + cell * static_cast<double>(m.num_classes) + 20;
    std::ostringstream s;
    s << svg_open(size, size);
    auto name = [&](std::size_t i) { return i < names.size() ? names[i] : std::to_string(i); };
    for (std::size_t i = 0; i < m.num_classes; ++i) {
        const double row = static_cast<double>(m.row_sum(i));
        const double y = margin + cell * static_cast<double>(i);
        s << "<text x=\"" << margin - 5 << "\" y=\"" << y + cell / 2 << "\" text-anchor=\"end\">"
          << escape(name(i)) << "</text>\n";
        for (std::size_t j = 0; j < m.num_classes; ++j) {
            const double x = margin + cell * static_cast<double>(j);
            const double frac = row > 0 ? static_cast<double>(m.at(i, j)) / row : 0.0;
            const int shade = static_cast<int>(std::lround(255 * (1 - frac)));
            s << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
              << "\" fill=\"rgb(" << shade << "," << shade << ",255)\" stroke=\"#888\"/>\n"
              << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2
              << "\" text-anchor=\"middle\" fill=\"" << (frac > 0.5 ? "white" : "black") << "\">"
              << m.at(i, j) << "</text>\n";
        }
    }
    for (std::size_t j = 0; j < m.num_classes; ++j)
        s << "<text x=\"" << margin + cell * (static_cast<double>(j) + 0.5) << "\" y=\"" << margin - 8
          << "\" text-anchor=\"middle\">" << escape(name(j)) << "</text>\n";
    s << "</svg>\n";
    return s.str();
}

std::string sse_svg(const SseCurve& curve, std::optional<std::size_t> knee) {
    if (curve.k_values.empty()) throw InvalidArgument("empty SSE curve");
    Axes a{static_cast<double>(curve.k_values.front()), static_cast<double>(curve.k_values.back()), 0,
           *std::max_element(curve.sse.begin(), curve.sse.end())};
    std::ostringstream s;
    s << svg_open(Axes::w, Axes::h);
    s << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < curve.k_values.size(); ++i)
        s << a.px(static_cast<double>(curve.k_values[i])) << "," << a.py(curve.sse[i]) << " ";
    s << "\"/>\n";
    for (std::size_t i = 0; i < curve.k_values.size(); ++i) {
        const double x = a.px(static_cast<double>(curve.k_values[i]));
        s << "<circle cx=\"" << x << "\" cy=\"" << a.py(curve.sse[i]) << "\" r=\"3\" fill=\"#1f77b4\"/>\n"
          << "<text x=\"" << x << "\" y=\"" << Axes::h - Axes::m + 15 << "\" text-anchor=\"middle\">"
          << curve.k_values[i] << "</text>\n";
    }
    if (knee) {
        const double x = a.px(static_cast<double>(*knee));
        s << "<line x1=\"" << x << "\" y1=\"" << Axes::m << "\" x2=\"" << x << "\" y2=\""
          << Axes::h - Axes::m << "\" stroke=\"#d62728\" stroke-dasharray=\"4,3\"/>\n";
    }
    s << "<text x=\"" << Axes::w / 2 << "\" y=\"" << Axes::h - 10 << "\" text-anchor=\"middle\">k</text>\n"
      << "<text x=\"12\" y=\"" << Axes::h / 2 << "\" transform=\"rotate(-90 12 " << Axes::h / 2
      << ")\" text-anchor=\"middle\">SSE</text>\n</svg>\n";
    return s.str();
}

std::string embedding_svg(const Embedding2D& e) {
    const std::size_t n = e.y.dim(0);
    if (n == 0) throw InvalidArgument("empty embedding");
    double x0 = e.y.at(0, 0), x1 = x0, y0 = e.y.at(0, 1), y1 = y0;
    for (std::size_t i = 1; i < n; ++i) {
        x0 = std::min(x0, e.y.at(i, 0));
        x1 = std::max(x1, e.y.at(i, 0));
        y0 = std::min(y0, e.y.at(i, 1));
        y1 = std::max(y1, e.y.at(i, 1));
    }
    Axes a{x0, x1, y0, y1};
    std::ostringstream s;
    s << svg_open(Axes::w, Axes::h);
    for (std::size_t i = 0; i < n; ++i) {
        const char* color = "black";
        if (i < e.ids.size() && e.ids[i].label) color = palette(*e.ids[i].label);
        s << "<circle cx=\"" << a.px(e.y.at(i, 0)) << "\" cy=\"" << a.py(e.y.at(i, 1)) << "\" r=\"2.5\" fill=\""
          << color << "\"/>\n";
    }
    s << "</svg>\n";
    return s.str();
}

std::vector<std::filesystem::path> export_reports(const ReportArtifacts& artifacts,
                                                  const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir))
        throw IoError("cannot create report directory " + out_dir.string());
    std::vector<std::filesystem::path> written;
    auto put = [&](const char* name, const std::string& text) {
        written.push_back(out_dir / name);
        write_file(written.back(), text);
    };
    if (artifacts.confusion) {
        put("confusion.csv", confusion_csv(*artifacts.confusion));
        put("confusion.svg", confusion_svg(*artifacts.confusion, artifacts.class_names));
    }
    if (artifacts.sse) {
        written.push_back(out_dir / "sse.csv");
        save_sse_curve(*artifacts.sse, written.back());
        put("sse.svg", sse_svg(*artifacts.sse, artifacts.knee));
    }
    if (artifacts.embedding) {
        written.push_back(out_dir / "embedding.csv");
        save_embedding(*artifacts.embedding, written.back());
        put("embedding.svg", embedding_svg(*artifacts.embedding));
    }
    if (artifacts.cv) put("cv_table.csv", cv_table(*artifacts.cv));
    return written;
}

}  // namespace novaclass
