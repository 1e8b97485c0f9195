#pragma once

#include <map>
#include <string>
#include <vector>

#include "keygaze/core/types.hpp"

namespace keygaze {

/// Index of items by trial id; duplicate ids are a data error.
template <class T>
std::map<std::string, const T*> index_by_trial(const std::vector<T>& items, const char* what) {
    std::map<std::string, const T*> out;
    for (const auto& it : items) {
        if (!out.emplace(it.trial_id, &it).second)
            throw DataError(std::string(what) + ": duplicate trial_id '" + it.trial_id + "'");
    }
    return out;
}

/// Pairs logs with scanpaths by trial id, in log order. Every id must be
/// present on both sides; the first unmatched id is named in the error.
inline std::vector<TrialPair> join_trials(const std::vector<KeypressLog>& logs,
                                          const std::vector<Scanpath>& scanpaths) {
    const auto by_id = index_by_trial(scanpaths, "scanpaths");
    const auto log_ids = index_by_trial(logs, "keylogs");
    std::vector<TrialPair> out;
    out.reserve(logs.size());
    for (const auto& log : logs) {
        auto it = by_id.find(log.trial_id);
        if (it == by_id.end()) throw DataError("trial_id '" + log.trial_id + "' has no scanpath");
        out.push_back({log, *it->second});
    }
    for (const auto& s : scanpaths)
        if (!log_ids.count(s.trial_id)) throw DataError("trial_id '" + s.trial_id + "' has no keylog");
    return out;
}

} // namespace keygaze
