#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "keygaze/analysis/coordination.hpp"
#include "keygaze/core/io.hpp"

namespace keygaze::analysis {

inline nlohmann::json to_json(const CoordinationReport& r) {
    using nlohmann::json;
    json curve = json::array();
    for (const auto& p : r.distance_curve)
        curve.push_back({{"offset_ms", p.offset_ms}, {"mean_distance_px", p.mean_distance_px}, {"samples", p.samples}});
    auto bins = [](const std::vector<BinMean>& v) {
        json a = json::array();
        for (const auto& b : v) {
            json hi = std::isinf(b.hi) ? json(nullptr) : json(b.hi);
            a.push_back({{"lo", b.lo}, {"hi", hi}, {"mean_keyboard_ratio", b.mean}, {"count", b.count}});
        }
        return a;
    };
    json keys = json::object();
    for (const auto& [label, k] : r.per_key)
        keys[label] = {{"keyboard_ratio", k.ratio()}, {"keyboard_ms", k.keyboard_ms}, {"covered_ms", k.covered_ms}};
    json groups = json::object();
    for (const auto& [label, k] : group_key_attention(r.per_key)) groups[label] = k.ratio();
    return {{"distance_curve", curve},
            {"ratio_by_iki", bins(r.ratio_by_iki)},
            {"ratio_by_travel", bins(r.ratio_by_travel)},
            {"per_key_ratio", keys},
            {"key_groups", groups},
            {"iki_stats", {{"mean_ms", r.iki_stats.mean_ms}, {"sd_ms", r.iki_stats.sd_ms}, {"count", r.iki_stats.count}}}};
}

namespace detail {

inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::string bins_csv(const std::vector<BinMean>& bins, const char* unit) {
    std::string out = std::string("bin_lo_") + unit + ",bin_hi_" + unit + ",mean_keyboard_ratio,count\n";
    for (const auto& b : bins)
        out += fmt(b.lo) + "," + (std::isinf(b.hi) ? std::string("inf") : fmt(b.hi)) + "," + fmt(b.mean) + "," +
               std::to_string(b.count) + "\n";
    return out;
}

struct Series {
    std::vector<std::string> labels;
    std::vector<double> xs;
    std::vector<double> ys;
};

inline std::string svg_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '\'': out += "&apos;"; break;
        default: out += c;
        }
    }
    return out;
}

/// Minimal self-contained chart: polyline when `line`, bars otherwise.
inline std::string svg_chart(const Series& s, const std::string& title, const std::string& xlabel,
                             const std::string& ylabel, bool line, double ymin, double ymax) {
    constexpr double W = 640, H = 400, L = 60, R = 20, T = 40, B = 60;
    const std::size_t n = s.ys.size();
    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
    out += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
    out += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" +
           svg_escape(title) + "</text>\n";
    out += "<line x1=\"60\" y1=\"340\" x2=\"620\" y2=\"340\" stroke=\"black\"/>\n";
    out += "<line x1=\"60\" y1=\"40\" x2=\"60\" y2=\"340\" stroke=\"black\"/>\n";
    out += "<text x=\"340\" y=\"385\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
           svg_escape(xlabel) + "</text>\n";
    out += "<text x=\"15\" y=\"190\" transform=\"rotate(-90 15 190)\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"12\">" + svg_escape(ylabel) + "</text>\n";
    out += "<text x=\"55\" y=\"344\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + fmt(ymin) +
           "</text>\n";
    out += "<text x=\"55\" y=\"44\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + fmt(ymax) +
           "</text>\n";
    if (n == 0) return out + "</svg>\n";
    const double span = ymax > ymin ? ymax - ymin : 1.0;
    auto py = [&](double y) { return T + (H - T - B) * (1.0 - (y - ymin) / span); };
    const double plot_w = W - L - R;
    if (line) {
        const double xmin = s.xs.front(), xmax = s.xs.back();
        const double xspan = xmax > xmin ? xmax - xmin : 1.0;
        std::string pts;
        for (std::size_t i = 0; i < n; ++i)
            pts += fmt(L + plot_w * (s.xs[i] - xmin) / xspan) + "," + fmt(py(s.ys[i])) + " ";
        out += "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
        out += "<text x=\"60\" y=\"356\" font-family=\"sans-serif\" font-size=\"10\">" + fmt(xmin) + "</text>\n";
        out += "<text x=\"620\" y=\"356\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + fmt(xmax) +
               "</text>\n";
    } else {
        const double bw = plot_w / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = L + bw * static_cast<double>(i);
            const double y = py(s.ys[i]);
            out += "<rect x=\"" + fmt(x + 1) + "\" y=\"" + fmt(y) + "\" width=\"" + fmt(std::max(1.0, bw - 2)) +
                   "\" height=\"" + fmt(H - B - y) + "\" fill=\"steelblue\"/>\n";
            out += "<text x=\"" + fmt(x + bw / 2) + "\" y=\"354\" text-anchor=\"middle\" font-family=\"sans-serif\" "
                   "font-size=\"9\">" + svg_escape(s.labels[i]) + "</text>\n";
        }
    }
    return out + "</svg>\n";
}

} // namespace detail

/// Writes report.json and one CSV per panel; SVG charts when `svg`.
inline void write_report(const std::filesystem::path& dir, const CoordinationReport& r, bool svg) {
    using detail::fmt;
    io::write_file_atomic(dir / "report.json", to_json(r).dump(2) + "\n");

    std::string curve = "offset_ms,mean_distance_px,samples\n";
    for (const auto& p : r.distance_curve)
        curve += fmt(p.offset_ms) + "," + fmt(p.mean_distance_px) + "," + std::to_string(p.samples) + "\n";
    io::write_file_atomic(dir / "distance_curve.csv", curve);
    io::write_file_atomic(dir / "ratio_by_iki.csv", detail::bins_csv(r.ratio_by_iki, "ms"));
    io::write_file_atomic(dir / "ratio_by_travel.csv", detail::bins_csv(r.ratio_by_travel, "px"));
    std::string keys = "key,keyboard_ratio,keyboard_ms,covered_ms\n";
    for (const auto& [label, k] : r.per_key)
        keys += label + "," + fmt(k.ratio()) + "," + fmt(k.keyboard_ms) + "," + fmt(k.covered_ms) + "\n";
    io::write_file_atomic(dir / "per_key_ratio.csv", keys);

    if (!svg) return;
    detail::Series c;
    double dmax = 1.0;
    for (const auto& p : r.distance_curve) {
        c.xs.push_back(p.offset_ms);
        c.ys.push_back(p.mean_distance_px);
        dmax = std::max(dmax, p.mean_distance_px);
    }
    io::write_file_atomic(dir / "distance_curve.svg",
                          detail::svg_chart(c, "Gaze-tap distance", "offset from tap (ms)", "distance (px)", true, 0.0,
                                            dmax));
    auto bar = [](const std::vector<BinMean>& bins) {
        detail::Series s;
        for (const auto& b : bins) {
            s.labels.push_back(std::isinf(b.hi) ? ">=" + fmt(b.lo) : fmt(b.lo));
            s.ys.push_back(b.mean);
        }
        return s;
    };
    io::write_file_atomic(dir / "ratio_by_iki.svg", detail::svg_chart(bar(r.ratio_by_iki), "Keyboard ratio by IKI",
                                                                      "IKI bin (ms)", "keyboard ratio", false, 0.0, 1.0));
    io::write_file_atomic(dir / "ratio_by_travel.svg",
                          detail::svg_chart(bar(r.ratio_by_travel), "Keyboard ratio by finger travel",
                                            "travel bin (px)", "keyboard ratio", false, 0.0, 1.0));
    detail::Series k;
    for (const auto& [label, a] : r.per_key) {
        k.labels.push_back(label == kBackspaceLabel ? "bksp" : label);
        k.ys.push_back(a.ratio());
    }
    io::write_file_atomic(dir / "per_key_ratio.svg",
                          detail::svg_chart(k, "Keyboard ratio before tap, per key", "key", "keyboard ratio", false,
                                            0.0, 1.0));
}

} // namespace keygaze::analysis
