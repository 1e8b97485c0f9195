#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "keygaze/core/geometry.hpp"
#include "keygaze/core/types.hpp"

namespace keygaze::io {

using nlohmann::json;

/// Writes `content` to a sibling temp file and renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out << content;
        if (!out) throw DataError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace detail {

inline double number_field(const json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_number()) throw DataError(where + ": missing numeric field '" + key + "'");
    return it->get<double>();
}

inline std::string string_field(const json& j, const char* key, const std::string& where,
                                bool required = true) {
    auto it = j.find(key);
    if (it == j.end()) {
        if (required) throw DataError(where + ": missing string field '" + key + "'");
        return {};
    }
    if (!it->is_string()) throw DataError(where + ": field '" + key + "' is not a string");
    return it->get<std::string>();
}

template <class F>
void for_each_jsonl(const std::filesystem::path& path, F&& f) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        f(j, path.string() + ":" + std::to_string(lineno));
    }
}

} // namespace detail

inline json to_json(const KeypressLog& log) {
    json taps = json::array();
    for (const auto& t : log.taps) taps.push_back({{"x", t.x}, {"y", t.y}, {"time_ms", t.time_ms}});
    return {{"trial_id", log.trial_id},
            {"user_id", log.user_id},
            {"reference_text", log.reference_text},
            {"taps", std::move(taps)}};
}

inline KeypressLog keylog_from_json(const json& j, const std::string& where) {
    KeypressLog log;
    log.trial_id = detail::string_field(j, "trial_id", where);
    log.user_id = detail::string_field(j, "user_id", where, false);
    log.reference_text = detail::string_field(j, "reference_text", where, false);
    auto it = j.find("taps");
    if (it == j.end() || !it->is_array()) throw DataError(where + ": missing 'taps' array");
    for (const auto& t : *it) {
        log.taps.push_back({detail::number_field(t, "x", where), detail::number_field(t, "y", where),
                            detail::number_field(t, "time_ms", where)});
    }
    return log;
}

inline json to_json(const Scanpath& s) {
    json fx = json::array();
    for (const auto& f : s.fixations)
        fx.push_back({{"x", f.x}, {"y", f.y}, {"duration_ms", f.duration_ms}, {"onset_ms", f.onset_ms}});
    return {{"trial_id", s.trial_id}, {"fixations", std::move(fx)}};
}

inline Scanpath scanpath_from_json(const json& j, const std::string& where) {
    Scanpath s;
    s.trial_id = detail::string_field(j, "trial_id", where);
    auto it = j.find("fixations");
    if (it == j.end() || !it->is_array()) throw DataError(where + ": missing 'fixations' array");
    bool has_onsets = true;
    for (const auto& f : *it) {
        Fixation fx{detail::number_field(f, "x", where), detail::number_field(f, "y", where),
                    detail::number_field(f, "duration_ms", where), 0.0};
        if (auto o = f.find("onset_ms"); o != f.end() && o->is_number())
            fx.onset_ms = o->get<double>();
        else
            has_onsets = false;
        s.fixations.push_back(fx);
    }
    if (!has_onsets) fill_onsets_from_durations(s);
    return s;
}

inline std::vector<KeypressLog> read_keylogs(const std::filesystem::path& path) {
    std::vector<KeypressLog> out;
    detail::for_each_jsonl(path, [&](const json& j, const std::string& where) {
        out.push_back(keylog_from_json(j, where));
    });
    return out;
}

inline std::vector<Scanpath> read_scanpaths(const std::filesystem::path& path) {
    std::vector<Scanpath> out;
    detail::for_each_jsonl(path, [&](const json& j, const std::string& where) {
        out.push_back(scanpath_from_json(j, where));
    });
    return out;
}

template <class T>
std::string to_jsonl(const std::vector<T>& items) {
    std::string out;
    for (const auto& item : items) {
        out += to_json(item).dump();
        out += '\n';
    }
    return out;
}

inline void write_keylogs(const std::filesystem::path& path, const std::vector<KeypressLog>& logs) {
    write_file_atomic(path, to_jsonl(logs));
}

inline void write_scanpaths(const std::filesystem::path& path, const std::vector<Scanpath>& paths) {
    write_file_atomic(path, to_jsonl(paths));
}

inline json to_json(const KeyboardLayout& layout) {
    const auto& g = layout.screen;
    json keys = json::array();
    for (const auto& k : layout.keys)
        keys.push_back({{"label", k.label}, {"x", k.x}, {"y", k.y}, {"w", k.w}, {"h", k.h}});
    return {{"screen",
             {{"width", g.width},
              {"height", g.height},
              {"text_area_max_y", g.text_area_max_y},
              {"keyboard_min_y", g.keyboard_min_y},
              {"keyboard_max_y", g.keyboard_max_y}}},
            {"keys", std::move(keys)}};
}

inline KeyboardLayout layout_from_json(const json& j, const std::string& where = "layout") {
    KeyboardLayout layout;
    auto s = j.find("screen");
    if (s == j.end() || !s->is_object()) throw DataError(where + ": missing 'screen' object");
    layout.screen.width = detail::number_field(*s, "width", where);
    layout.screen.height = detail::number_field(*s, "height", where);
    layout.screen.text_area_max_y = detail::number_field(*s, "text_area_max_y", where);
    layout.screen.keyboard_min_y = detail::number_field(*s, "keyboard_min_y", where);
    layout.screen.keyboard_max_y = detail::number_field(*s, "keyboard_max_y", where);
    auto k = j.find("keys");
    if (k == j.end() || !k->is_array()) throw DataError(where + ": missing 'keys' array");
    for (const auto& kj : *k) {
        layout.keys.push_back({detail::string_field(kj, "label", where), detail::number_field(kj, "x", where),
                               detail::number_field(kj, "y", where), detail::number_field(kj, "w", where),
                               detail::number_field(kj, "h", where)});
    }
    validate(layout);
    return layout;
}

inline KeyboardLayout read_layout(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return layout_from_json(j, path.string());
}

inline void write_layout(const std::filesystem::path& path, const KeyboardLayout& layout) {
    write_file_atomic(path, to_json(layout).dump(2) + "\n");
}

/// theta.csv: header `user_id,e_k,f_k,lambda`.
inline std::map<std::string, HumanParams> read_theta_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::map<std::string, HumanParams> out;
    std::string line;
    std::getline(in, line); // header
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string id, e, f, l;
        if (!std::getline(ss, id, ',') || !std::getline(ss, e, ',') || !std::getline(ss, f, ',') ||
            !std::getline(ss, l, ','))
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 4 columns");
        try {
            HumanParams p{std::stod(e), std::stod(f), std::stod(l)};
            p.validate();
            out[id] = p;
        } catch (const std::logic_error&) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad number");
        }
    }
    return out;
}

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_theta_csv(const std::filesystem::path& path,
                            const std::vector<std::pair<std::string, HumanParams>>& rows) {
    std::string out = "user_id,e_k,f_k,lambda\n";
    for (const auto& [id, p] : rows)
        out += id + "," + format_double(p.e_k) + "," + format_double(p.f_k) + "," + format_double(p.lambda) + "\n";
    write_file_atomic(path, out);
}

} // namespace keygaze::io
