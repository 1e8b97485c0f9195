#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "keygaze/core/geometry.hpp"
#include "keygaze/core/types.hpp"

namespace keygaze {

struct IntervalSeries {
    std::vector<double> values;
    bool degenerate = false; // fewer than two taps
};

inline IntervalSeries interkey_intervals(const KeypressLog& log) {
    IntervalSeries out;
    if (log.taps.size() < 2) {
        out.degenerate = true;
        return out;
    }
    out.values.reserve(log.taps.size() - 1);
    for (std::size_t i = 1; i < log.taps.size(); ++i)
        out.values.push_back(log.taps[i].time_ms - log.taps[i - 1].time_ms);
    return out;
}

/// Replays taps: characters append, space appends ' ', backspace pops.
/// Taps outside every key are ignored.
inline std::string decode_text(const KeypressLog& log, const KeyboardLayout& layout) {
    std::string buffer;
    for (const auto& tap : log.taps) {
        const auto label = key_at(tap.position(), layout);
        if (!label) continue;
        if (*label == kBackspaceLabel) {
            if (!buffer.empty()) buffer.pop_back();
        } else if (auto c = char_for_label(*label)) {
            buffer.push_back(*c);
        }
    }
    return buffer;
}

inline std::size_t levenshtein(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    std::iota(prev.begin(), prev.end(), std::size_t{0});
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

inline double character_error_rate(std::string_view typed, std::string_view reference) {
    const double d = static_cast<double>(levenshtein(typed, reference));
    return std::clamp(d / std::max<double>(1.0, static_cast<double>(reference.size())), 0.0, 1.0);
}

inline std::size_t count_backspaces(const KeypressLog& log, const KeyboardLayout& layout) {
    std::size_t n = 0;
    for (const auto& tap : log.taps) {
        const auto label = key_at(tap.position(), layout);
        if (label && *label == kBackspaceLabel) ++n;
    }
    return n;
}

/// WPM uses 5-character words over the first-to-last tap span.
inline TypingMetrics compute_typing_metrics(const KeypressLog& log, const KeyboardLayout& layout) {
    if (log.reference_text.empty())
        throw DataError("trial '" + log.trial_id + "': empty reference text");
    if (log.taps.size() < 2)
        throw DataError("trial '" + log.trial_id + "': need at least two taps for typing metrics");
    const double span_ms = log.taps.back().time_ms - log.taps.front().time_ms;
    if (!(span_ms > 0.0)) throw DataError("trial '" + log.trial_id + "': zero trial duration");

    const std::string typed = decode_text(log, layout);
    const auto iki = interkey_intervals(log);

    TypingMetrics m;
    m.wpm = (static_cast<double>(typed.size()) / 5.0) / (span_ms / 60000.0);
    m.mean_iki_ms = std::accumulate(iki.values.begin(), iki.values.end(), 0.0) /
                    static_cast<double>(iki.values.size());
    m.error_rate = character_error_rate(typed, log.reference_text);
    m.backspace_count = static_cast<double>(count_backspaces(log, layout));
    return m;
}

inline TypingMetrics average_metrics(const std::vector<TypingMetrics>& ms) {
    if (ms.empty()) throw DataError("no typing metrics to average");
    TypingMetrics out;
    for (const auto& m : ms) {
        out.wpm += m.wpm;
        out.mean_iki_ms += m.mean_iki_ms;
        out.error_rate += m.error_rate;
        out.backspace_count += m.backspace_count;
    }
    const double n = static_cast<double>(ms.size());
    out.wpm /= n;
    out.mean_iki_ms /= n;
    out.error_rate /= n;
    out.backspace_count /= n;
    return out;
}

} // namespace keygaze
