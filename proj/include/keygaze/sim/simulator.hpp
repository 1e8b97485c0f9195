#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "keygaze/core/geometry.hpp"
#include "keygaze/core/types.hpp"
#include "keygaze/sim/phrases.hpp"

namespace keygaze::sim {

/// Parameters of the stochastic typist. The eye-finger policy is hand-built:
/// a guidance fixation per target key that peaks ~250 ms before the tap,
/// Fitts'-law finger timing, Gaussian touch noise, and word-boundary
/// proofreading that may trigger backspace corrections.
struct SimConfig {
    HumanParams theta;
    std::vector<std::string> phrases = default_phrases();
    std::uint64_t seed = 0;
    std::size_t trials_per_user = 5;

    double fitts_a = 100.0;          // ms
    double fitts_b = 150.0;          // ms / bit
    double base_encode_ms = 150.0;   // scaled by (0.5 + e_k)
    double sigma0 = 30.0;            // px, touch noise scaled by (0.5 + f_k)
    double proofread_base_p = 0.15;  // plus (1 - lambda) * 0.5 per word boundary
    double detection_p = 0.9;        // chance a proofread notices an existing error

    double motor_noise_ms = 30.0;
    double guidance_lead_ms = 250.0; // where the guidance fixation is centred before the tap
    double lead_jitter_ms = 40.0;
    double gaze_jitter_px = 40.0;    // scaled by e_k
    double merge_radius_px = 400.0;  // next target this close keeps the current fixation
    double transit_pull = 0.8;       // post-guidance fixation, fraction of the way to the keyboard centre
    double min_fixation_ms = 100.0;
    double read_fixation_ms = 600.0; // text-area fixations, scaled by (0.5 + e_k)
    std::size_t review_chars = 4;    // characters checked per proofreading fixation
    double slip_scale = 0.6;         // chance of resuming at the wrong place, times (1 - lambda)

    KeyboardLayout layout = default_layout();

    void validate() const {
        theta.validate();
        for (double p : {proofread_base_p, detection_p})
            if (!(p >= 0.0 && p <= 1.0)) throw UsageError("simulator: probabilities must lie in [0,1]");
        if (!(fitts_b > 0.0)) throw UsageError("simulator: fitts_b must be positive");
        if (!(sigma0 >= 0.0)) throw UsageError("simulator: sigma0 must be non-negative");
        if (!(base_encode_ms >= 0.0 && read_fixation_ms > 0.0 && min_fixation_ms > 0.0))
            throw UsageError("simulator: durations must be positive");
    }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Independent stream seed for (seed, user, stream).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t user, std::uint64_t stream) {
    return splitmix64(splitmix64(splitmix64(seed) ^ user) ^ (stream * 0xD1B54A32D192ED03ULL));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(eng_); }
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
    double normal(double mean, double sd) {
        if (sd <= 0.0) return mean;
        return std::normal_distribution<double>(mean, sd)(eng_);
    }
    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(eng_); }
    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
};

struct SimTrial {
    KeypressLog log;
    Scanpath scanpath;
    std::size_t typos = 0;      // taps that landed on a key other than the intended one
    std::size_t proofreads = 0; // text-area proofreading episodes
};

namespace detail {

struct GazeTarget {
    double onset = 0.0;
    Point pos;
    bool guidance = false;
};

class TrialGenerator {
public:
    TrialGenerator(const SimConfig& cfg, const std::string& sentence, Rng& rng)
        : cfg_(cfg), layout_(cfg.layout), ref_(sentence), rng_(rng) {
        const auto& th = cfg.theta;
        encode_ms_ = cfg.base_encode_ms * (0.5 + th.e_k);
        tap_sigma_ = cfg.sigma0 * (0.5 + th.f_k);
        gaze_sigma_ = cfg.gaze_jitter_px * th.e_k;
        proof_p_ = std::clamp(cfg.proofread_base_p + (1.0 - th.lambda) * 0.5, 0.0, 1.0);
        const auto& g = layout_.screen;
        finger_ = {g.width / 2.0, (g.keyboard_min_y + std::min(g.keyboard_max_y, g.height)) / 2.0};
        rest_ = finger_;
    }

    SimTrial run() {
        for (char c : ref_)
            if (!layout_.find(label_for_char(c)))
                throw DataError(std::string("simulator: character '") + c + "' absent from layout");
        if (ref_.empty()) throw DataError("simulator: empty sentence");

        urge_ = rng_.uniform();
        const std::size_t tap_cap = 4 * ref_.size() + 32;
        for (int round = 0; round < 6; ++round) {
            while (cursor_ < ref_.size() && taps_.size() < tap_cap) {
                const char c = ref_[cursor_];
                press(*layout_.find(label_for_char(c)));
                ++cursor_;
                if (c == ' ' && cursor_ < ref_.size()) word_boundary();
            }
            if (!word_boundary()) break;
        }
        return finish();
    }

private:
    double proof_scale() { return (0.5 + cfg_.theta.e_k) * std::exp(rng_.normal(0.0, 0.2)); }

    Point text_point(std::size_t char_index) {
        const auto& g = layout_.screen;
        const double x = std::clamp(60.0 + 28.0 * static_cast<double>(char_index % 34) + rng_.normal(0.0, 20.0),
                                    0.0, g.width);
        const double y = std::clamp(rng_.normal(200.0, 40.0), 20.0, g.text_area_max_y - 20.0);
        return {x, y};
    }

    void push_gaze(double onset, Point pos, bool guidance) {
        if (!gaze_.empty()) onset = std::max(onset, gaze_.back().onset + cfg_.min_fixation_ms);
        gaze_.push_back({std::max(0.0, onset), pos, guidance});
    }

    void press(const Key& key) {
        const auto& g = layout_.screen;
        const Point c = key.center();
        const double w = std::min(key.w, key.h);
        const double mt = cfg_.fitts_a + cfg_.fitts_b * std::log2(1.0 + distance(finger_, c) / w);
        const double iki = std::max(80.0, mt + encode_ms_ + rng_.normal(0.0, cfg_.motor_noise_ms));
        const double tap_time = last_time_ + iki;

        Point gaze{std::clamp(rng_.normal(c.x, gaze_sigma_), 0.0, g.width),
                   std::clamp(rng_.normal(c.y, gaze_sigma_), g.keyboard_min_y, g.height)};
        double onset = tap_time - rng_.normal(cfg_.guidance_lead_ms, cfg_.lead_jitter_ms) - encode_ms_ / 2.0;
        onset = std::max(onset, gaze_free_from_);
        const bool merge = !gaze_.empty() && gaze_.back().guidance &&
                           distance(gaze_.back().pos, gaze) < cfg_.merge_radius_px;
        if (!merge) {
            push_gaze(onset, gaze, true);
            // after encoding the key the eye drifts back toward the keyboard centre
            const double k = cfg_.transit_pull;
            push_gaze(gaze_.back().onset + encode_ms_, {gaze.x + k * (rest_.x - gaze.x), gaze.y + k * (rest_.y - gaze.y)},
                      true);
        }

        const Point tap{std::clamp(rng_.normal(c.x, tap_sigma_), 0.0, g.width),
                        std::clamp(rng_.normal(c.y, tap_sigma_), 0.0, g.height)};
        taps_.push_back({tap.x, tap.y, tap_time});
        finger_ = tap;
        last_time_ = tap_time;

        const auto hit = key_at(tap, layout_);
        if (hit != key.label) ++typos_;
        if (!hit) return;
        if (*hit == kBackspaceLabel) {
            if (!buffer_.empty()) buffer_.pop_back();
        } else if (auto ch = char_for_label(*hit)) {
            buffer_.push_back(*ch);
        }
    }

    /// First position inside the reviewed tail [from, cursor) where the buffer
    /// disagrees with the reference; errors before `from` go unnoticed.
    std::optional<std::size_t> first_error(std::size_t from) const {
        const std::size_t end = std::max(buffer_.size(), cursor_);
        for (std::size_t i = from; i < end; ++i)
            if (i >= buffer_.size() || i >= cursor_ || i >= ref_.size() || buffer_[i] != ref_[i]) return i;
        return std::nullopt;
    }

    /// Accumulates proofreading urge at the stated per-boundary rate; returns
    /// true when a proofread triggered a correction.
    bool word_boundary() {
        urge_ += proof_p_;
        if (urge_ < 1.0) return false;
        urge_ -= 1.0;
        return proofread();
    }

    bool proofread() {
        ++proofreads_;
        double t = std::max(last_time_ + 80.0, gaze_.empty() ? 0.0 : gaze_.back().onset + cfg_.min_fixation_ms);
        const std::size_t n = 1 + (rng_.uniform() < 0.5 ? 1 : 0);
        const std::size_t cur = buffer_.size();
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t back = 4 * (n - i - 1);
            push_gaze(t, text_point(cur > back ? cur - back : 0), false);
            t = gaze_.back().onset + cfg_.read_fixation_ms * proof_scale();
        }
        last_time_ = t;
        gaze_free_from_ = t;
        // forgetful typists re-read further back
        const auto span = static_cast<std::size_t>(
            std::lround(static_cast<double>(n * cfg_.review_chars) * (1.7 - 1.5 * cfg_.theta.lambda)));
        const auto err = first_error(cur > span ? cur - span : 0);
        if (!err || rng_.uniform() >= cfg_.detection_p) {
            lose_place();
            return false;
        }

        const Key& bs = *layout_.find(kBackspaceLabel);
        for (int attempt = 0; attempt < 3 && buffer_.size() > *err; ++attempt) {
            const std::size_t extra = buffer_.size() - *err;
            for (std::size_t k = 0; k < extra; ++k) press(bs);
        }
        cursor_ = std::min(buffer_.size(), ref_.size());
        return true;
    }

    /// Looking back at the keyboard, a forgetful typist may resume one
    /// character too early or too late.
    void lose_place() {
        if (cursor_ == 0 || cursor_ >= ref_.size()) return;
        if (rng_.uniform() >= cfg_.slip_scale * (1.0 - cfg_.theta.lambda)) return;
        if (rng_.uniform() < 0.5) --cursor_;
        else ++cursor_;
    }

    SimTrial finish() {
        const auto& g = layout_.screen;
        SimTrial out;
        out.typos = typos_;
        out.proofreads = proofreads_;
        out.log.reference_text = ref_;
        out.log.taps = taps_;
        const double end = std::max(last_time_, gaze_.back().onset + cfg_.min_fixation_ms) + 250.0;
        gaze_.front().onset = 0.0; // the scanpath covers the trial from its start
        for (std::size_t i = 0; i < gaze_.size(); ++i) {
            const double next = i + 1 < gaze_.size() ? gaze_[i + 1].onset : end;
            out.scanpath.fixations.push_back({std::clamp(gaze_[i].pos.x, 0.0, g.width),
                                              std::clamp(gaze_[i].pos.y, 0.0, g.height), next - gaze_[i].onset,
                                              gaze_[i].onset});
        }
        return out;
    }

    const SimConfig& cfg_;
    const KeyboardLayout& layout_;
    std::string ref_;
    Rng& rng_;

    double encode_ms_ = 0.0, tap_sigma_ = 0.0, gaze_sigma_ = 0.0, proof_p_ = 0.0;
    double urge_ = 0.0;
    double last_time_ = 0.0;      // time of the latest tap or proofread end
    double gaze_free_from_ = 0.0; // guidance fixations may not start before this
    Point finger_;
    Point rest_;                  // keyboard centre
    std::string buffer_;
    std::size_t cursor_ = 0;      // characters the typist believes are typed
    std::size_t typos_ = 0, proofreads_ = 0;
    std::vector<TapEvent> taps_;
    std::vector<GazeTarget> gaze_;
};

} // namespace detail

inline SimTrial simulate_trial(const SimConfig& cfg, const std::string& sentence, Rng& rng) {
    cfg.validate();
    return detail::TrialGenerator(cfg, sentence, rng).run();
}

inline std::string trial_id(std::size_t user, std::size_t trial) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "u%04zu_t%03zu", user, trial);
    return buf;
}

inline std::string user_id(std::size_t user) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "u%04zu", user);
    return buf;
}

struct SimulatedTrial {
    TrialPair trial;
    HumanParams theta;
    std::size_t user = 0;
    std::size_t index = 0;
    std::size_t typos = 0;
    std::size_t proofreads = 0;
};

struct SimDataset {
    std::vector<SimulatedTrial> trials; // sorted by (user, trial)
    std::vector<std::pair<std::string, HumanParams>> users;

    std::vector<KeypressLog> logs() const {
        std::vector<KeypressLog> out;
        for (const auto& t : trials) out.push_back(t.trial.log);
        return out;
    }
    std::vector<Scanpath> scanpaths() const {
        std::vector<Scanpath> out;
        for (const auto& t : trials) out.push_back(t.trial.scanpath);
        return out;
    }
};

inline HumanParams sample_theta(std::uint64_t seed, std::size_t user, double lo = 0.2, double hi = 0.8) {
    Rng rng(derive_seed(seed, user, 0));
    HumanParams p;
    p.e_k = rng.uniform(lo, hi);
    p.f_k = rng.uniform(lo, hi);
    p.lambda = rng.uniform(lo, hi);
    return p;
}

/// Generates one trial of a dataset in isolation; identical to the
/// corresponding entry of `simulate_dataset`.
inline SimulatedTrial simulate_dataset_trial(const SimConfig& cfg, std::size_t user, std::size_t trial,
                                             const std::optional<HumanParams>& fixed_theta = std::nullopt) {
    if (cfg.phrases.empty()) throw UsageError("simulator: empty phrase set");
    SimConfig c = cfg;
    c.theta = fixed_theta ? *fixed_theta : sample_theta(cfg.seed, user);
    Rng rng(derive_seed(cfg.seed, user, trial + 1));
    const std::string& sentence = cfg.phrases[rng.index(cfg.phrases.size())];
    auto t = simulate_trial(c, sentence, rng);
    SimulatedTrial out;
    out.trial.log = std::move(t.log);
    out.trial.scanpath = std::move(t.scanpath);
    out.trial.log.trial_id = trial_id(user, trial);
    out.trial.log.user_id = user_id(user);
    out.trial.scanpath.trial_id = out.trial.log.trial_id;
    out.theta = c.theta;
    out.user = user;
    out.index = trial;
    out.typos = t.typos;
    out.proofreads = t.proofreads;
    return out;
}

/// `n_users` users with theta ~ U[0.2, 0.8]^3 (or `fixed_theta`), each
/// typing `cfg.trials_per_user` sentences drawn from the phrase set.
inline SimDataset simulate_dataset(const SimConfig& cfg, std::size_t n_users,
                                   const std::optional<HumanParams>& fixed_theta = std::nullopt,
                                   std::size_t first_user = 0) {
    if (n_users == 0) throw UsageError("simulator: need at least one user");
    if (cfg.phrases.empty()) throw UsageError("simulator: empty phrase set");
    SimDataset ds;
    for (std::size_t u = first_user; u < first_user + n_users; ++u) {
        const HumanParams theta = fixed_theta ? *fixed_theta : sample_theta(cfg.seed, u);
        ds.users.emplace_back(user_id(u), theta);
        for (std::size_t k = 0; k < cfg.trials_per_user; ++k)
            ds.trials.push_back(simulate_dataset_trial(cfg, u, k, fixed_theta));
    }
    return ds;
}

} // namespace keygaze::sim
