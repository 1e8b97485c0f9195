#pragma once

#include <cstddef>

#include "keygaze/core/geometry.hpp"
#include "keygaze/core/types.hpp"

namespace keygaze::metrics {

inline std::size_t fixation_count(const Scanpath& s) {
    if (s.empty()) throw UsageError("fixation_count: empty scanpath");
    return s.size();
}

inline double mean_fixation_duration(const Scanpath& s) {
    if (s.empty()) throw UsageError("mean_fixation_duration: empty scanpath");
    double total = 0.0;
    for (const auto& f : s.fixations) total += f.duration_ms;
    return total / static_cast<double>(s.size());
}

/// Consecutive fixation pairs going keyboard -> text.
inline std::size_t gaze_shifts(const Scanpath& s, const ScreenGeometry& geom) {
    std::size_t n = 0;
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (region_of(s.fixations[i - 1].position(), geom) == Region::Keyboard &&
            region_of(s.fixations[i].position(), geom) == Region::Text)
            ++n;
    }
    return n;
}

/// Duration-weighted fraction of fixation time spent in `region`.
inline double region_time_ratio(const Scanpath& s, const ScreenGeometry& geom, Region region) {
    double total = 0.0, inside = 0.0;
    for (const auto& f : s.fixations) {
        total += f.duration_ms;
        if (region_of(f.position(), geom) == region) inside += f.duration_ms;
    }
    if (!(total > 0.0)) throw UsageError("region ratio: zero total fixation duration");
    return inside / total;
}

inline double gaze_on_keyboard_ratio(const Scanpath& s, const ScreenGeometry& geom) {
    return region_time_ratio(s, geom, Region::Keyboard);
}

inline double proofreading_rate(const Scanpath& s, const ScreenGeometry& geom) {
    return region_time_ratio(s, geom, Region::Text);
}

} // namespace keygaze::metrics
