#include "novaclass/cluster.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "novaclass/errors.hpp"
#include "novaclass/kernels.hpp"

namespace novaclass {

namespace {

using Rng64 = std::mt19937_64;

Tensor plus_plus_seeds(const Tensor& points, std::size_t k, Rng64& rng) {
    const std::size_t n = points.dim(0), d = points.dim(1);
    Tensor centroids({k, d});
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    std::vector<bool> chosen(n, false);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    auto take = [&](std::size_t c, std::size_t idx) {
        chosen[idx] = true;
        std::copy(points.data() + idx * d, points.data() + (idx + 1) * d, centroids.data() + c * d);
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = points.at(i, j) - centroids.at(c, j);
                acc += diff * diff;
            }
            nearest[i] = std::min(nearest[i], acc);
        }
    };

    take(0, std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (double v : nearest) total += v;
        std::size_t pick = n;
        if (total > 0.0) {
            const double r = unit(rng) * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += nearest[i];
                if (nearest[i] > 0.0 && acc >= r) {
                    pick = i;
                    break;
                }
            }
            if (pick == n)  // rounding at the tail
                for (std::size_t i = n; i-- > 0;)
                    if (nearest[i] > 0.0) {
                        pick = i;
                        break;
                    }
        } else {
            // Every point coincides with a seed; fall back to unused indices.
            std::vector<std::size_t> unused;
            for (std::size_t i = 0; i < n; ++i)
                if (!chosen[i]) unused.push_back(i);
            pick = unused[std::uniform_int_distribution<std::size_t>(0, unused.size() - 1)(rng)];
        }
        take(c, pick);
    }
    return centroids;
}

KmeansResult lloyd(const Tensor& points, std::size_t k, std::size_t max_iter, Rng64& rng) {
    const std::size_t n = points.dim(0), d = points.dim(1);
    KmeansResult r;
    r.centroids = plus_plus_seeds(points, k, rng);
    r.assignment.assign(n, 0);
    std::vector<double> sq(n);
    r.inertia = kernels::omp::kmeans_assign(points.values(), n, d, r.centroids.values(), k,
                                            r.assignment, sq);
    r.inertia_trace.push_back(r.inertia);

    std::vector<std::size_t> next(n);
    std::vector<double> count(k);
    for (std::size_t it = 1; it <= max_iter; ++it) {
        r.iterations_run = it;
        r.centroids.fill(0.0);
        std::fill(count.begin(), count.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = r.assignment[i];
            count[c] += 1.0;
            for (std::size_t j = 0; j < d; ++j) r.centroids.at(c, j) += points.at(i, j);
        }
        std::vector<bool> used(n, false);
        for (std::size_t c = 0; c < k; ++c) {
            if (count[c] > 0.0) {
                for (std::size_t j = 0; j < d; ++j) r.centroids.at(c, j) /= count[c];
                continue;
            }
            // Empty cluster: move it onto the point farthest from its centroid.
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i)
                if (!used[i] && sq[i] > far_d) {
                    far_d = sq[i];
                    far = i;
                }
            used[far] = true;
            for (std::size_t j = 0; j < d; ++j) r.centroids.at(c, j) = points.at(far, j);
        }
        r.inertia = kernels::omp::kmeans_assign(points.values(), n, d, r.centroids.values(), k,
                                                next, sq);
        r.inertia_trace.push_back(r.inertia);
        const bool fixpoint = next == r.assignment;
        r.assignment.swap(next);
        if (fixpoint) break;
    }
    return r;
}

}  // namespace

KmeansResult kmeans(const Tensor& points, std::size_t k, const KmeansConfig& cfg) {
    if (points.rank() != 2 || points.dim(0) == 0) throw InvalidArgument("points must be a non-empty n x d matrix");
    const std::size_t n = points.dim(0);
    if (k == 0) throw InvalidArgument("k must be positive");
    if (k > n)
        throw InvalidArgument("k = " + std::to_string(k) + " exceeds " + std::to_string(n) + " points");
    if (cfg.restarts < 1) throw InvalidArgument("need at least one restart");

    KmeansResult best;
    for (std::size_t r = 0; r < cfg.restarts; ++r) {
        std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                          static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(r)};
        Rng64 rng(seq);
        KmeansResult run = lloyd(points, k, cfg.max_iter, rng);
        if (r == 0 || run.inertia < best.inertia) best = std::move(run);
    }
    return best;
}

SseCurve sse_sweep(const Tensor& points, std::size_t k_min, std::size_t k_max,
                   const KmeansConfig& cfg) {
    if (k_min < 1 || k_min > k_max) throw InvalidArgument("need 1 <= k_min <= k_max");
    if (k_max > points.dim(0))
        throw InvalidArgument("k_max = " + std::to_string(k_max) + " exceeds " +
                              std::to_string(points.dim(0)) + " points");
    SseCurve curve;
    for (std::size_t k = k_min; k <= k_max; ++k) {
        curve.k_values.push_back(k);
        curve.sse.push_back(kmeans(points, k, cfg).inertia);
        const std::size_t m = curve.sse.size();
        if (m >= 2 && curve.sse[m - 1] > curve.sse[m - 2] * (1.0 + 1e-6) + 1e-12) {
            std::ostringstream msg;
            msg << "sse rose from k=" << k - 1 << " to k=" << k << " (" << curve.sse[m - 2]
                << " -> " << curve.sse[m - 1] << ")";
            curve.warnings.push_back(msg.str());
        }
    }
    return curve;
}

KneeResult detect_knee(const SseCurve& curve) {
    const std::size_t m = curve.k_values.size();
    if (m < 3 || curve.sse.size() != m) throw InvalidArgument("knee detection needs at least 3 curve points");
    const double k0 = static_cast<double>(curve.k_values.front());
    const double k1 = static_cast<double>(curve.k_values.back());
    const auto [lo_it, hi_it] = std::minmax_element(curve.sse.begin(), curve.sse.end());
    const double lo = *lo_it, hi = *hi_it;
    KneeResult r;
    r.chord_distance.assign(m, 0.0);
    if (!(hi > lo)) {
        r.k = curve.k_values.front();
        r.degenerate = true;
        return r;
    }
    auto x = [&](std::size_t i) { return (static_cast<double>(curve.k_values[i]) - k0) / (k1 - k0); };
    auto y = [&](std::size_t i) { return (curve.sse[i] - lo) / (hi - lo); };
    const double ax = x(0), ay = y(0), bx = x(m - 1), by = y(m - 1);
    const double len = std::hypot(bx - ax, by - ay);
    std::size_t best = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const double cross = (bx - ax) * (y(i) - ay) - (by - ay) * (x(i) - ax);
        r.chord_distance[i] = std::abs(cross) / len;
        if (r.chord_distance[i] > r.chord_distance[best]) best = i;
    }
    r.k = curve.k_values[best];
    return r;
}

void save_sse_curve(const SseCurve& curve, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "k,sse\n";
    char buf[32];
    for (std::size_t i = 0; i < curve.k_values.size(); ++i) {
        auto res = std::to_chars(buf, buf + sizeof buf, curve.sse[i]);
        out << curve.k_values[i] << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)) << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

SseCurve load_sse_curve(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("k,sse", 0) != 0) throw ParseError(1, "expected header k,sse");
    SseCurve curve;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw ParseError(line_no, "expected k,sse");
        std::size_t k = 0;
        double sse = 0.0;
        const char* b = line.data();
        auto r1 = std::from_chars(b, b + comma, k);
        auto r2 = std::from_chars(b + comma + 1, b + line.size(), sse);
        if (r1.ec != std::errc{} || r2.ec != std::errc{}) throw ParseError(line_no, "bad number");
        curve.k_values.push_back(k);
        curve.sse.push_back(sse);
    }
    return curve;
}

}  // namespace novaclass
