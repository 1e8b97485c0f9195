#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "keygaze/core/error.hpp"

namespace keygaze {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// One touch. `time_ms` is absolute (since trial start); the inter-tap
/// interval is derived from consecutive taps.
struct TapEvent {
    double x = 0.0;
    double y = 0.0;
    double time_ms = 0.0;

    Point position() const { return {x, y}; }
};

struct KeypressLog {
    std::string trial_id;
    std::string user_id;
    std::string reference_text;
    std::vector<TapEvent> taps;
};

struct Fixation {
    double x = 0.0;
    double y = 0.0;
    double duration_ms = 0.0;
    double onset_ms = 0.0;

    Point position() const { return {x, y}; }
    double end_ms() const { return onset_ms + duration_ms; }
};

struct Scanpath {
    std::string trial_id;
    std::vector<Fixation> fixations;

    std::size_t size() const { return fixations.size(); }
    bool empty() const { return fixations.empty(); }
};

/// Portrait canvas with a text band at the top and a keyboard band below.
/// The keyboard band may extend past the bottom edge; it is a classification
/// threshold, not a drawable area.
struct ScreenGeometry {
    double width = 1080.0;
    double height = 1920.0;
    double text_area_max_y = 400.0;
    double keyboard_min_y = 1230.0;
    double keyboard_max_y = 1980.0;

    double diagonal() const { return std::hypot(width, height); }

    void validate() const {
        if (!(width > 0.0 && height > 0.0))
            throw DataError("screen geometry: width and height must be positive");
        if (!(0.0 < text_area_max_y && text_area_max_y < keyboard_min_y &&
              keyboard_min_y < keyboard_max_y && keyboard_min_y < height))
            throw DataError("screen geometry: require 0 < text_area_max_y < keyboard_min_y < "
                            "keyboard_max_y and keyboard_min_y < height");
    }
};

struct Key {
    std::string label;
    double x = 0.0; // left edge
    double y = 0.0; // top edge
    double w = 0.0;
    double h = 0.0;

    Point center() const { return {x + w / 2.0, y + h / 2.0}; }
    bool contains(Point p) const { return p.x >= x && p.x <= x + w && p.y >= y && p.y <= y + h; }
};

struct KeyboardLayout {
    ScreenGeometry screen;
    std::vector<Key> keys;

    const Key* find(const std::string& label) const {
        for (const auto& k : keys)
            if (k.label == label) return &k;
        return nullptr;
    }
};

struct TypingMetrics {
    double wpm = 0.0;
    double mean_iki_ms = 0.0;
    double error_rate = 0.0;
    double backspace_count = 0.0; // fractional once averaged over trials
};

/// Latent per-user parameters: vision encoding time, finger imprecision,
/// memory retention. Each lies in [0, 1].
struct HumanParams {
    double e_k = 0.5;
    double f_k = 0.5;
    double lambda = 0.5;

    void validate() const {
        for (double v : {e_k, f_k, lambda})
            if (!(v >= 0.0 && v <= 1.0))
                throw DataError("human parameters must lie in [0,1]");
    }
};

enum class Region { Text, Keyboard, Other };

inline const char* to_string(Region r) {
    switch (r) {
    case Region::Text: return "text";
    case Region::Keyboard: return "keyboard";
    default: return "other";
    }
}

/// A keypress log with the scanpath recorded (or predicted) for the same trial.
struct TrialPair {
    KeypressLog log;
    Scanpath scanpath;
};

/// Checks the ordering and range invariants of a tap log.
inline void validate(const KeypressLog& log, const ScreenGeometry& geom) {
    if (log.taps.empty()) throw DataError("trial '" + log.trial_id + "': no taps");
    for (std::size_t i = 0; i < log.taps.size(); ++i) {
        const auto& t = log.taps[i];
        if (!std::isfinite(t.x) || !std::isfinite(t.y) || !std::isfinite(t.time_ms))
            throw DataError("trial '" + log.trial_id + "': non-finite tap value");
        if (t.x < 0.0 || t.x > geom.width || t.y < 0.0 || t.y > geom.height)
            throw DataError("trial '" + log.trial_id + "': tap " + std::to_string(i) + " off screen");
        if (t.time_ms < 0.0) throw DataError("trial '" + log.trial_id + "': negative tap time");
        if (i > 0 && !(t.time_ms > log.taps[i - 1].time_ms))
            throw DataError("trial '" + log.trial_id + "': tap times not strictly increasing at " +
                            std::to_string(i));
    }
}

inline void validate(const Scanpath& s, const ScreenGeometry& geom) {
    if (s.empty()) throw DataError("scanpath '" + s.trial_id + "': no fixations");
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto& f = s.fixations[i];
        if (!(f.duration_ms > 0.0))
            throw DataError("scanpath '" + s.trial_id + "': non-positive duration at " + std::to_string(i));
        if (f.x < 0.0 || f.x > geom.width || f.y < 0.0 || f.y > geom.height)
            throw DataError("scanpath '" + s.trial_id + "': fixation " + std::to_string(i) + " off screen");
        if (i > 0 && !(f.onset_ms > s.fixations[i - 1].onset_ms))
            throw DataError("scanpath '" + s.trial_id + "': onsets not strictly increasing at " +
                            std::to_string(i));
    }
}

/// Fills onsets as the running sum of prior durations (used when a file omits them).
inline void fill_onsets_from_durations(Scanpath& s) {
    double t = 0.0;
    for (auto& f : s.fixations) {
        f.onset_ms = t;
        t += f.duration_ms;
    }
}

} // namespace keygaze
