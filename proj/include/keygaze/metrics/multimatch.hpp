#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include "keygaze/core/types.hpp"

namespace keygaze::metrics {

struct MultiMatchScores {
    double shape = 1.0;
    double direction = 1.0;
    double length = 1.0;
    double position = 1.0;
    double duration = 1.0;
};

struct SaccadeVector {
    double dx = 0.0;
    double dy = 0.0;
    double norm() const { return std::hypot(dx, dy); }
};

inline std::vector<SaccadeVector> saccades(const Scanpath& s) {
    std::vector<SaccadeVector> out;
    for (std::size_t i = 1; i < s.size(); ++i)
        out.push_back({s.fixations[i].x - s.fixations[i - 1].x, s.fixations[i].y - s.fixations[i - 1].y});
    return out;
}

struct SaccadeAlignment {
    std::vector<std::pair<std::size_t, std::size_t>> path; // (saccade in a, saccade in b)
    double cost = 0.0;                                      // summed |u - v|
};

/// Monotone alignment of two saccade sequences minimising the summed
/// vector-difference magnitude. Ties prefer the diagonal step.
inline SaccadeAlignment align_saccades(const std::vector<SaccadeVector>& u, const std::vector<SaccadeVector>& v) {
    const std::size_t n = u.size(), m = v.size();
    if (n == 0 || m == 0) throw UsageError("multimatch: scanpath needs at least two fixations");
    constexpr double inf = std::numeric_limits<double>::infinity();
    auto local = [&](std::size_t i, std::size_t j) { return std::hypot(u[i].dx - v[j].dx, u[i].dy - v[j].dy); };
    std::vector<double> acc(n * m, inf);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double best = (i == 0 && j == 0) ? 0.0 : inf;
            if (i > 0 && j > 0) best = std::min(best, acc[(i - 1) * m + j - 1]);
            if (i > 0) best = std::min(best, acc[(i - 1) * m + j]);
            if (j > 0) best = std::min(best, acc[i * m + j - 1]);
            acc[i * m + j] = best + local(i, j);
        }

    SaccadeAlignment out;
    out.cost = acc.back();
    std::size_t i = n - 1, j = m - 1;
    out.path.emplace_back(i, j);
    while (i > 0 || j > 0) {
        if (i == 0)
            --j;
        else if (j == 0)
            --i;
        else {
            const double d = acc[(i - 1) * m + j - 1], up = acc[(i - 1) * m + j], left = acc[i * m + j - 1];
            if (d <= up && d <= left) {
                --i;
                --j;
            } else if (up <= left)
                --i;
            else
                --j;
        }
        out.path.emplace_back(i, j);
    }
    std::reverse(out.path.begin(), out.path.end());
    return out;
}

/// Five-dimensional scanpath similarity on DP-aligned raw saccade vectors
/// (no simplification step). Position and duration compare the start
/// fixations of each aligned saccade pair. Normalisers: screen diagonal for
/// shape/length/position, pi for direction, pairwise max for duration.
inline MultiMatchScores multimatch(const Scanpath& a, const Scanpath& b, const ScreenGeometry& geom) {
    if (a.size() < 2 || b.size() < 2) throw UsageError("multimatch: scanpath needs at least two fixations");
    const auto u = saccades(a);
    const auto v = saccades(b);
    const auto al = align_saccades(u, v);
    const double diag = geom.diagonal();

    double shape = 0, direction = 0, length = 0, position = 0, duration = 0;
    for (auto [i, j] : al.path) {
        shape += std::hypot(u[i].dx - v[j].dx, u[i].dy - v[j].dy);
        const double cross = u[i].dx * v[j].dy - u[i].dy * v[j].dx;
        const double dot = u[i].dx * v[j].dx + u[i].dy * v[j].dy;
        direction += std::atan2(std::abs(cross), dot);
        length += std::abs(u[i].norm() - v[j].norm());
        const auto& fa = a.fixations[i];
        const auto& fb = b.fixations[j];
        position += std::hypot(fa.x - fb.x, fa.y - fb.y);
        const double dmax = std::max(fa.duration_ms, fb.duration_ms);
        duration += dmax > 0.0 ? std::abs(fa.duration_ms - fb.duration_ms) / dmax : 0.0;
    }
    const double k = static_cast<double>(al.path.size());
    auto sim = [](double mean_dissimilarity, double normalizer) {
        return std::clamp(1.0 - mean_dissimilarity / normalizer, 0.0, 1.0);
    };
    return {sim(shape / k, diag), sim(direction / k, std::numbers::pi), sim(length / k, diag),
            sim(position / k, diag), sim(duration / k, 1.0)};
}

} // namespace keygaze::metrics
