#pragma once

#include <algorithm>
#include <optional>
#include <string>

#include "keygaze/core/types.hpp"

namespace keygaze {

inline constexpr double kKeyWidth = 98.0;
inline constexpr double kKeyHeight = 173.0;
inline constexpr const char* kSpaceLabel = "space";
inline constexpr const char* kBackspaceLabel = "backspace";

inline Region region_of(Point p, const ScreenGeometry& geom) {
    if (p.y < geom.text_area_max_y) return Region::Text;
    if (p.y >= geom.keyboard_min_y && p.y <= geom.keyboard_max_y) return Region::Keyboard;
    return Region::Other;
}

/// Label of the key containing `p`. Points on a shared edge resolve to the
/// key with the smaller left edge, then the smaller top edge.
inline std::optional<std::string> key_at(Point p, const KeyboardLayout& layout) {
    const Key* best = nullptr;
    for (const auto& k : layout.keys) {
        if (!k.contains(p)) continue;
        if (!best || k.x < best->x || (k.x == best->x && k.y < best->y)) best = &k;
    }
    if (!best) return std::nullopt;
    return best->label;
}

/// Key label typed by a character, or empty when the layout has no such key.
inline std::string label_for_char(char c) {
    if (c == ' ') return kSpaceLabel;
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return std::string(1, c);
}

/// Character emitted by a key label; nullopt for non-character keys.
inline std::optional<char> char_for_label(const std::string& label) {
    if (label == kSpaceLabel) return ' ';
    if (label.size() == 1) return label[0];
    return std::nullopt;
}

inline void validate(const KeyboardLayout& layout) {
    layout.screen.validate();
    if (!layout.find(kSpaceLabel) || !layout.find(kBackspaceLabel))
        throw DataError("layout must contain 'space' and 'backspace'");
    for (std::size_t i = 0; i < layout.keys.size(); ++i) {
        const auto& a = layout.keys[i];
        if (!(a.w > 0.0 && a.h > 0.0)) throw DataError("layout: key '" + a.label + "' has empty extent");
        if (a.y < layout.screen.keyboard_min_y || a.y + a.h > layout.screen.keyboard_max_y)
            throw DataError("layout: key '" + a.label + "' outside the keyboard band");
        for (std::size_t j = i + 1; j < layout.keys.size(); ++j) {
            const auto& b = layout.keys[j];
            const double ox = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
            const double oy = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
            if (ox > 0.0 && oy > 0.0)
                throw DataError("layout: keys '" + a.label + "' and '" + b.label + "' overlap");
        }
    }
}

/// Three 10-key letter rows of 98x173 px keys centred horizontally from the
/// top of the keyboard band, plus a bottom row holding a centred 490 px space
/// bar and a right-aligned 196 px backspace. The bottom row is clipped to the
/// screen edge (171 px tall on a 1920 px canvas).
inline KeyboardLayout default_layout(const ScreenGeometry& geom = {}) {
    static constexpr const char* rows[3] = {"qwertyuiop", "asdfghjkl'", "zxcvbnm,.?"};
    KeyboardLayout layout;
    layout.screen = geom;
    const double x0 = (geom.width - 10.0 * kKeyWidth) / 2.0;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 10; ++c) {
            layout.keys.push_back({std::string(1, rows[r][c]), x0 + c * kKeyWidth,
                                   geom.keyboard_min_y + r * kKeyHeight, kKeyWidth, kKeyHeight});
        }
    }
    const double y3 = geom.keyboard_min_y + 3 * kKeyHeight;
    const double h3 = std::min(kKeyHeight, geom.height - y3);
    const double space_w = 5.0 * kKeyWidth;
    layout.keys.push_back({kSpaceLabel, (geom.width - space_w) / 2.0, y3, space_w, h3});
    const double bs_w = 2.0 * kKeyWidth;
    layout.keys.push_back({kBackspaceLabel, x0 + 10.0 * kKeyWidth - bs_w, y3, bs_w, h3});
    return layout;
}

} // namespace keygaze
