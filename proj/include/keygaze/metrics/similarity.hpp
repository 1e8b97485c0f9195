#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "keygaze/core/types.hpp"

namespace keygaze::metrics {

/// Fixation in unit screen coordinates with duration in seconds.
struct NormalizedFixation {
    double x = 0.0;
    double y = 0.0;
    double t = 0.0;
};

inline NormalizedFixation normalize(const Fixation& f, const ScreenGeometry& geom) {
    return {f.x / geom.width, f.y / geom.height, f.duration_ms / 1000.0};
}

inline std::vector<NormalizedFixation> normalize(const Scanpath& s, const ScreenGeometry& geom) {
    std::vector<NormalizedFixation> out;
    out.reserve(s.size());
    for (const auto& f : s.fixations) out.push_back(normalize(f, geom));
    return out;
}

/// Accumulated-cost DTW over a precomputed n x m local cost matrix
/// (row-major). Steps: (1,0), (0,1), (1,1).
inline double dtw_accumulated(const std::vector<double>& cost, std::size_t n, std::size_t m) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> acc(n * m, inf);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double best;
            if (i == 0 && j == 0)
                best = 0.0;
            else {
                best = inf;
                if (i > 0) best = std::min(best, acc[(i - 1) * m + j]);
                if (j > 0) best = std::min(best, acc[i * m + j - 1]);
                if (i > 0 && j > 0) best = std::min(best, acc[(i - 1) * m + j - 1]);
            }
            acc[i * m + j] = best + cost[i * m + j];
        }
    }
    return acc.back();
}

/// Dynamic time warping distance over (x/width, y/height, duration_s)
/// triples with Euclidean local cost. Not path-length normalised.
inline double dtwd(const Scanpath& a, const Scanpath& b, const ScreenGeometry& geom) {
    if (a.empty() || b.empty()) throw UsageError("dtwd: empty scanpath");
    const auto na = normalize(a, geom);
    const auto nb = normalize(b, geom);
    std::vector<double> cost(na.size() * nb.size());
    for (std::size_t i = 0; i < na.size(); ++i)
        for (std::size_t j = 0; j < nb.size(); ++j) {
            const double dx = na[i].x - nb[j].x, dy = na[i].y - nb[j].y, dt = na[i].t - nb[j].t;
            cost[i * nb.size() + j] = std::sqrt(dx * dx + dy * dy + dt * dt);
        }
    return dtw_accumulated(cost, na.size(), nb.size());
}

/// Delay-embedding windows of the normalised (x, y) trail, each translated
/// so that its first point sits at the origin. Window w has 2k entries.
inline std::vector<std::vector<double>> centered_windows(const Scanpath& s, const ScreenGeometry& geom,
                                                         std::size_t k) {
    std::vector<std::vector<double>> out;
    if (s.size() < k) return out;
    for (std::size_t start = 0; start + k <= s.size(); ++start) {
        std::vector<double> w(2 * k);
        const double x0 = s.fixations[start].x / geom.width;
        const double y0 = s.fixations[start].y / geom.height;
        for (std::size_t q = 0; q < k; ++q) {
            w[2 * q] = s.fixations[start + q].x / geom.width - x0;
            w[2 * q + 1] = s.fixations[start + q].y / geom.height - y0;
        }
        out.push_back(std::move(w));
    }
    return out;
}

/// Scaled time-delay-embedding distance: mean nearest-window distance,
/// averaged over both directions.
inline double sted(const Scanpath& a, const Scanpath& b, const ScreenGeometry& geom, std::size_t k = 3) {
    if (k == 0) throw UsageError("sted: embedding dimension must be positive");
    if (a.size() < k || b.size() < k) throw UsageError("sted: scanpath shorter than embedding dimension");
    const auto wa = centered_windows(a, geom, k);
    const auto wb = centered_windows(b, geom, k);
    auto dist = [](const std::vector<double>& u, const std::vector<double>& v) {
        double s = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) s += (u[i] - v[i]) * (u[i] - v[i]);
        return std::sqrt(s);
    };
    auto directed = [&](const auto& from, const auto& to) {
        double total = 0.0;
        for (const auto& u : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& v : to) best = std::min(best, dist(u, v));
            total += best;
        }
        return total / static_cast<double>(from.size());
    };
    return 0.5 * (directed(wa, wb) + directed(wb, wa));
}

} // namespace keygaze::metrics
