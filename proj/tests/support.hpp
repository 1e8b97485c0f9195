#pragma once

#include <random>
#include <string>
#include <vector>

#include "keygaze/core/geometry.hpp"
#include "keygaze/core/types.hpp"

namespace kgtest {

using namespace keygaze;

inline Scanpath random_scanpath(std::mt19937_64& eng, std::size_t n, const ScreenGeometry& g = {}) {
    std::uniform_real_distribution<double> ux(0.0, g.width), uy(0.0, g.height), ud(50.0, 800.0);
    Scanpath s;
    s.trial_id = "t";
    double t = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        Fixation f{ux(eng), uy(eng), ud(eng), t};
        t += f.duration_ms;
        s.fixations.push_back(f);
    }
    return s;
}

inline Fixation fix(double x, double y, double dur, double onset = 0.0) { return {x, y, dur, onset}; }

inline Scanpath path(std::vector<Fixation> fs, bool fill_onsets = true) {
    Scanpath s;
    s.trial_id = "t";
    s.fixations = std::move(fs);
    if (fill_onsets) fill_onsets_from_durations(s);
    return s;
}

/// Taps on key centres, `step_ms` apart from `start_ms`.
inline KeypressLog tap_keys(const std::vector<std::string>& labels, const KeyboardLayout& layout,
                            double start_ms = 0.0, double step_ms = 300.0) {
    KeypressLog log;
    log.trial_id = "t";
    log.user_id = "u";
    log.reference_text = "x";
    double t = start_ms;
    for (const auto& l : labels) {
        const Key* k = layout.find(l);
        if (!k) throw UsageError("no key " + l);
        log.taps.push_back({k->center().x, k->center().y, t});
        t += step_ms;
    }
    return log;
}

inline std::vector<std::string> labels_of(const std::string& text) {
    std::vector<std::string> out;
    for (char c : text) out.push_back(label_for_char(c));
    return out;
}

} // namespace kgtest
