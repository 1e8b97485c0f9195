#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "keygaze/core/geometry.hpp"
#include "keygaze/core/types.hpp"
#include "keygaze/core/typing.hpp"

namespace keygaze::analysis {

struct CurvePoint {
    double offset_ms = 0.0;
    double mean_distance_px = 0.0;
    std::size_t samples = 0;
};

struct BinMean {
    double lo = 0.0;
    double hi = 0.0; // +inf for the overflow bin
    double mean = 0.0;
    std::size_t count = 0;
};

struct KeyAttention {
    double keyboard_ms = 0.0;
    double covered_ms = 0.0;
    double ratio() const { return keyboard_ms / covered_ms; }
};

struct IkiStats {
    double mean_ms = 0.0;
    double sd_ms = 0.0;
    std::size_t count = 0;
};

struct CoordinationReport {
    std::vector<CurvePoint> distance_curve;
    std::vector<BinMean> ratio_by_iki;
    std::vector<BinMean> ratio_by_travel;
    std::map<std::string, KeyAttention> per_key;
    IkiStats iki_stats;
};

struct CurveWindow {
    double from_ms = -1000.0;
    double to_ms = 500.0;
    double step_ms = 50.0;
};

/// Fixation whose [onset, onset + duration) contains t; gaps yield nothing.
inline const Fixation* active_fixation(const Scanpath& s, double t) {
    auto it = std::upper_bound(s.fixations.begin(), s.fixations.end(), t,
                               [](double v, const Fixation& f) { return v < f.onset_ms; });
    if (it == s.fixations.begin()) return nullptr;
    --it;
    return (t < it->end_ms()) ? &*it : nullptr;
}

/// Mean gaze-to-tap distance at each offset of the window grid, pooled over
/// every tap of every trial. Offsets without any sample are omitted.
inline std::vector<CurvePoint> gaze_tap_distance_curve(std::span<const TrialPair> trials, CurveWindow w = {}) {
    const auto steps = static_cast<std::size_t>(std::floor((w.to_ms - w.from_ms) / w.step_ms + 1e-9)) + 1;
    std::vector<double> sum(steps, 0.0);
    std::vector<std::size_t> cnt(steps, 0);
    for (const auto& tr : trials) {
        for (const auto& tap : tr.log.taps) {
            for (std::size_t k = 0; k < steps; ++k) {
                const double t = tap.time_ms + w.from_ms + static_cast<double>(k) * w.step_ms;
                if (const Fixation* f = active_fixation(tr.scanpath, t)) {
                    sum[k] += distance(f->position(), tap.position());
                    ++cnt[k];
                }
            }
        }
    }
    std::vector<CurvePoint> out;
    for (std::size_t k = 0; k < steps; ++k)
        if (cnt[k] > 0)
            out.push_back({w.from_ms + static_cast<double>(k) * w.step_ms, sum[k] / static_cast<double>(cnt[k]),
                           cnt[k]});
    if (out.empty()) throw DataError("distance curve: scanpaths never overlap the tap windows");
    return out;
}

inline std::vector<CurvePoint> gaze_tap_distance_curve(const KeypressLog& log, const Scanpath& s,
                                                       CurveWindow w = {}) {
    const TrialPair one{log, s};
    return gaze_tap_distance_curve(std::span<const TrialPair>(&one, 1), w);
}

/// Fixation time inside [t0, t1), split into keyboard time and total covered time.
struct Coverage {
    double keyboard_ms = 0.0;
    double text_ms = 0.0;
    double covered_ms = 0.0;
};

inline Coverage coverage(const Scanpath& s, double t0, double t1, const ScreenGeometry& geom) {
    Coverage c;
    for (const auto& f : s.fixations) {
        const double ov = std::min(f.end_ms(), t1) - std::max(f.onset_ms, t0);
        if (ov <= 0.0) continue;
        c.covered_ms += ov;
        const Region r = region_of(f.position(), geom);
        if (r == Region::Keyboard) c.keyboard_ms += ov;
        if (r == Region::Text) c.text_ms += ov;
    }
    return c;
}

/// One inter-tap gap with its keyboard ratio (absent when no fixation covers it).
struct GapSample {
    double iki_ms = 0.0;
    double travel_px = 0.0;
    double keyboard_ratio = 0.0;
};

inline std::vector<GapSample> gap_samples(std::span<const TrialPair> trials, const ScreenGeometry& geom) {
    std::vector<GapSample> out;
    for (const auto& tr : trials) {
        const auto& taps = tr.log.taps;
        for (std::size_t i = 1; i < taps.size(); ++i) {
            const auto c = coverage(tr.scanpath, taps[i - 1].time_ms, taps[i].time_ms, geom);
            if (!(c.covered_ms > 0.0)) continue;
            out.push_back({taps[i].time_ms - taps[i - 1].time_ms, distance(taps[i].position(), taps[i - 1].position()),
                           c.keyboard_ms / c.covered_ms});
        }
    }
    return out;
}

/// Unweighted mean of values per bin [k*width, (k+1)*width) over [0, range);
/// values at or beyond `range` pool into one overflow bin. Empty bins are omitted.
template <class Key>
std::vector<BinMean> bin_means(const std::vector<GapSample>& samples, Key key, double width, double range) {
    const auto nbins = static_cast<std::size_t>(std::ceil(range / width));
    std::vector<double> sum(nbins + 1, 0.0);
    std::vector<std::size_t> cnt(nbins + 1, 0);
    for (const auto& s : samples) {
        const double v = key(s);
        const std::size_t b =
            v >= range ? nbins : std::min(nbins - 1, static_cast<std::size_t>(std::floor(std::max(0.0, v) / width)));
        sum[b] += s.keyboard_ratio;
        ++cnt[b];
    }
    std::vector<BinMean> out;
    for (std::size_t b = 0; b <= nbins; ++b) {
        if (cnt[b] == 0) continue;
        const double lo = static_cast<double>(b) * width;
        const double hi = b == nbins ? std::numeric_limits<double>::infinity() : lo + width;
        out.push_back({b == nbins ? range : lo, hi, sum[b] / static_cast<double>(cnt[b]), cnt[b]});
    }
    return out;
}

inline std::vector<BinMean> ratio_by_iki(std::span<const TrialPair> trials, const ScreenGeometry& geom,
                                         double bin_ms = 100.0, double range_ms = 1000.0) {
    return bin_means(gap_samples(trials, geom), [](const GapSample& g) { return g.iki_ms; }, bin_ms, range_ms);
}

inline std::vector<BinMean> ratio_by_travel(std::span<const TrialPair> trials, const ScreenGeometry& geom,
                                            double bin_px = 50.0, double range_px = 1000.0) {
    return bin_means(gap_samples(trials, geom), [](const GapSample& g) { return g.travel_px; }, bin_px, range_px);
}

inline constexpr double kPreTapWindowMs = 350.0;

/// Keyboard share of fixation time in the window preceding each tap, pooled
/// per key label. Keys whose windows are never covered are omitted.
inline std::map<std::string, KeyAttention> per_key_attention(std::span<const TrialPair> trials,
                                                             const KeyboardLayout& layout,
                                                             double window_ms = kPreTapWindowMs) {
    std::map<std::string, KeyAttention> acc;
    for (const auto& tr : trials) {
        for (const auto& tap : tr.log.taps) {
            const auto label = key_at(tap.position(), layout);
            if (!label) continue;
            const auto c = coverage(tr.scanpath, tap.time_ms - window_ms, tap.time_ms, layout.screen);
            if (!(c.covered_ms > 0.0)) continue;
            auto& k = acc[*label];
            k.keyboard_ms += c.keyboard_ms;
            k.covered_ms += c.covered_ms;
        }
    }
    return acc;
}

/// Pools per-key attention into the groups {space, backspace, other}.
inline std::map<std::string, KeyAttention> group_key_attention(const std::map<std::string, KeyAttention>& per_key) {
    std::map<std::string, KeyAttention> out;
    for (const auto& [label, k] : per_key) {
        const std::string g = (label == kSpaceLabel || label == kBackspaceLabel) ? label : "other";
        out[g].keyboard_ms += k.keyboard_ms;
        out[g].covered_ms += k.covered_ms;
    }
    return out;
}

inline IkiStats iki_stats(std::span<const TrialPair> trials) {
    IkiStats st;
    double sum = 0.0, sq = 0.0;
    for (const auto& tr : trials) {
        for (double v : interkey_intervals(tr.log).values) {
            sum += v;
            sq += v * v;
            ++st.count;
        }
    }
    if (st.count == 0) return st;
    const double n = static_cast<double>(st.count);
    st.mean_ms = sum / n;
    st.sd_ms = st.count > 1 ? std::sqrt(std::max(0.0, (sq - n * st.mean_ms * st.mean_ms) / (n - 1.0))) : 0.0;
    return st;
}

inline CoordinationReport analyze(std::span<const TrialPair> trials, const KeyboardLayout& layout,
                                  CurveWindow window = {}) {
    if (trials.empty()) throw UsageError("analyze: no trials");
    CoordinationReport r;
    r.distance_curve = gaze_tap_distance_curve(trials, window);
    const auto gaps = gap_samples(trials, layout.screen);
    r.ratio_by_iki = bin_means(gaps, [](const GapSample& g) { return g.iki_ms; }, 100.0, 1000.0);
    r.ratio_by_travel = bin_means(gaps, [](const GapSample& g) { return g.travel_px; }, 50.0, 1000.0);
    r.per_key = per_key_attention(trials, layout);
    r.iki_stats = iki_stats(trials);
    return r;
}

} // namespace keygaze::analysis
