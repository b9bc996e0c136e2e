#include "novaclass/tsne.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "novaclass/errors.hpp"
#include "novaclass/kernels.hpp"

namespace novaclass {

namespace {

constexpr std::size_t kMaxBisection = 100;
constexpr double kEntropyTolerance = 1e-9;

struct RowFit {
    double beta;
    double entropy;
};

// Fills row (length n, entry `self` zeroed) for precision beta, returns the
// natural-log entropy. Distances are shifted by their minimum for stability.
double gaussian_row(const double* dist, std::size_t n, std::size_t self, double d_min, double beta,
                    double* row) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        row[j] = j == self ? 0.0 : std::exp(-beta * (dist[j] - d_min));
        sum += row[j];
    }
    double weighted = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        row[j] /= sum;
        if (j != self) weighted += row[j] * (dist[j] - d_min);
    }
    return std::log(sum) + beta * weighted;
}

}  // namespace

ConditionalAffinities conditional_affinities(const Tensor& points, double perplexity) {
    if (points.rank() != 2) throw InvalidArgument("points must be an n x d matrix");
    const std::size_t n = points.dim(0), d = points.dim(1);
    if (n < 2) throw InvalidArgument("need at least two points");
    if (!(perplexity >= 1.0 && perplexity <= static_cast<double>(n - 1)))
        throw InvalidArgument("perplexity must lie in [1, n-1]");

    std::vector<double> dist(n * n);
    kernels::omp::pairwise_sq_distances(points.values(), n, d, dist);

    ConditionalAffinities out{Tensor({n, n}), std::vector<double>(n), std::vector<double>(n)};
    const double target = std::log(perplexity);
    for (std::size_t i = 0; i < n; ++i) {
        const double* di = dist.data() + i * n;
        double* row = out.p.data() + i * n;
        double d_min = std::numeric_limits<double>::infinity(), d_sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            d_min = std::min(d_min, di[j]);
            d_sum += di[j];
        }
        const double d_mean = d_sum / static_cast<double>(n - 1);
        double beta = d_mean > 0.0 ? 1.0 / d_mean : 1.0;
        double lo = 0.0, hi = std::numeric_limits<double>::infinity();
        double entropy = gaussian_row(di, n, i, d_min, beta, row);
        std::size_t steps = 0;
        while (std::abs(entropy - target) > kEntropyTolerance) {
            if (++steps > kMaxBisection)
                throw NumericError("perplexity search did not converge for point " +
                                   std::to_string(i));
            if (entropy > target) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
            entropy = gaussian_row(di, n, i, d_min, beta, row);
        }
        out.sigma[i] = std::sqrt(1.0 / (2.0 * beta));
        out.achieved_perplexity[i] = std::exp(entropy);
    }
    return out;
}

Tensor symmetrize_affinities(const Tensor& conditional) {
    if (conditional.rank() != 2 || conditional.dim(0) != conditional.dim(1))
        throw InvalidArgument("conditional affinities must be square");
    const std::size_t n = conditional.dim(0);
    Tensor p({n, n});
    const double scale = 1.0 / (2.0 * static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            p.at(i, j) = i == j ? 0.0 : (conditional.at(i, j) + conditional.at(j, i)) * scale;
    return p;
}

double tsne_kl(const Tensor& joint_p, const Tensor& y) {
    const std::size_t n = y.dim(0);
    std::vector<double> grad(2 * n);
    return kernels::omp::tsne_gradient(joint_p.values(), y.values(), n, 1.0, grad).kl;
}

TsneResult tsne_embed(const Tensor& points, const TsneConfig& cfg, std::optional<Tensor> init,
                      std::vector<PointId> ids) {
    if (points.rank() != 2) throw InvalidArgument("points must be an n x d matrix");
    const std::size_t n = points.dim(0), d = points.dim(1);
    if (n < 4) throw InvalidArgument("t-SNE needs at least 4 points");
    if (!(cfg.perplexity > 0.0 && cfg.perplexity < static_cast<double>(n - 1) / 3.0))
        throw InvalidArgument("perplexity must be below (n-1)/3 = " +
                              std::to_string(static_cast<double>(n - 1) / 3.0));
    if (!points.all_finite()) throw InvalidArgument("t-SNE input contains non-finite values");

    Tensor x = points;
    if (cfg.standardize) {
        for (std::size_t c = 0; c < d; ++c) {
            double mean = 0.0, sq = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean += x.at(i, c);
            mean /= static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) sq += (x.at(i, c) - mean) * (x.at(i, c) - mean);
            const double sd = std::sqrt(sq / static_cast<double>(n));
            for (std::size_t i = 0; i < n; ++i)
                x.at(i, c) = sd > 1e-12 ? (x.at(i, c) - mean) / sd : 0.0;
        }
    }
    const Tensor p = symmetrize_affinities(conditional_affinities(x, cfg.perplexity).p);

    Tensor y({n, 2});
    if (init) {
        if (init->shape() != std::vector<std::size_t>{n, 2})
            throw InvalidArgument("initial embedding must be n x 2");
        y = std::move(*init);
    } else {
        std::mt19937_64 rng(cfg.seed);
        std::normal_distribution<double> gauss(0.0, cfg.init_stddev);
        for (double& v : y.storage()) v = gauss(rng);
    }

    TsneResult result;
    result.kl_history.reserve(cfg.iterations + 1);
    std::vector<double> grad(2 * n), update(2 * n, 0.0), gains(2 * n, 1.0);
    for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
        const double exaggeration = iter < cfg.exaggeration_iterations ? cfg.exaggeration : 1.0;
        const auto step = kernels::omp::tsne_gradient(p.values(), y.values(), n, exaggeration, grad);
        result.kl_history.push_back(step.kl);
        const double momentum =
            iter < cfg.momentum_switch_iteration ? cfg.initial_momentum : cfg.final_momentum;
        for (std::size_t k = 0; k < 2 * n; ++k) {
            if (!std::isfinite(grad[k]))
                throw NumericError("t-SNE gradient became non-finite at iteration " +
                                   std::to_string(iter));
            const bool same_sign = (grad[k] > 0.0) == (update[k] > 0.0);
            gains[k] = same_sign ? std::max(gains[k] * 0.8, 0.01) : gains[k] + 0.2;
            update[k] = momentum * update[k] - cfg.learning_rate * gains[k] * grad[k];
            y[k] += update[k];
        }
        double cx = 0.0, cy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            cx += y[2 * i];
            cy += y[2 * i + 1];
        }
        cx /= static_cast<double>(n);
        cy /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[2 * i] -= cx;
            y[2 * i + 1] -= cy;
        }
    }
    result.kl_history.push_back(tsne_kl(p, y));
    if (!y.all_finite()) throw NumericError("t-SNE produced non-finite coordinates");

    if (ids.empty()) {
        ids.resize(n);
        for (std::size_t i = 0; i < n; ++i) ids[i].index = i;
    } else if (ids.size() != n) {
        throw InvalidArgument("point id count does not match the number of points");
    }
    result.embedding = {std::move(y), std::move(ids)};
    return result;
}

void save_embedding(const Embedding2D& e, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "id,label,y1,y2\n";
    char buf[32];
    for (std::size_t i = 0; i < e.ids.size(); ++i) {
        out << e.ids[i].index << ',';
        if (e.ids[i].label)
            out << *e.ids[i].label;
        else
            out << -1;
        for (std::size_t c = 0; c < 2; ++c) {
            auto res = std::to_chars(buf, buf + sizeof buf, e.y.at(i, c));
            out << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

Embedding2D load_embedding(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("id,label,y1,y2", 0) != 0)
        throw ParseError(1, "expected header id,label,y1,y2");
    std::vector<double> coords;
    Embedding2D e;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const char* p = line.data();
        const char* end = p + line.size();
        std::size_t id = 0;
        long long label = 0;
        double y1 = 0.0, y2 = 0.0;
        auto field = [&](auto& value) {
            auto r = std::from_chars(p, end, value);
            if (r.ec != std::errc{}) throw ParseError(line_no, "bad number");
            p = r.ptr;
            if (p != end) {
                if (*p != ',') throw ParseError(line_no, "expected 4 comma-separated fields");
                ++p;
            }
        };
        field(id);
        field(label);
        field(y1);
        field(y2);
        if (p != end) throw ParseError(line_no, "expected 4 comma-separated fields");
        PointId pid{id, std::nullopt};
        if (label >= 0) pid.label = static_cast<std::size_t>(label);
        e.ids.push_back(pid);
        coords.push_back(y1);
        coords.push_back(y2);
    }
    e.y = Tensor({e.ids.size(), 2}, std::move(coords));
    return e;
}

}  // namespace novaclass
