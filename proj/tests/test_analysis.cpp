#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "keygaze/analysis/coordination.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace keygaze;
using namespace keygaze::analysis;
using kgtest::fix;
using kgtest::path;

namespace {

const KeyboardLayout kLayout = default_layout();

// Fixations with random gaps between them, mostly on keyboard or text.
Scanpath gappy_scanpath(std::mt19937_64& eng, std::size_t n) {
    std::uniform_real_distribution<double> u(0, 1), ux(0, 1080), dur(60, 500), gap(0, 120);
    Scanpath s;
    s.trial_id = "t";
    double t = u(eng) * 200;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = u(eng);
        const double y = r < 0.6 ? 1230 + u(eng) * 690 : (r < 0.85 ? u(eng) * 399 : 500 + u(eng) * 600);
        Fixation f{ux(eng), y, dur(eng), t};
        t += f.duration_ms + (u(eng) < 0.3 ? gap(eng) : 0.0);
        s.fixations.push_back(f);
    }
    return s;
}

TrialPair random_trial(std::mt19937_64& eng, std::size_t taps) {
    std::uniform_int_distribution<std::size_t> k(0, kLayout.keys.size() - 1);
    std::uniform_real_distribution<double> iki(80, 1300);
    TrialPair tp;
    tp.log.trial_id = "t";
    double t = 300;
    for (std::size_t i = 0; i < taps; ++i) {
        const auto c = kLayout.keys[k(eng)].center();
        tp.log.taps.push_back({c.x, c.y, t});
        t += iki(eng);
    }
    tp.scanpath = gappy_scanpath(eng, taps * 2 + 3);
    return tp;
}

} // namespace

TEST(ActiveFixation, MatchesLinearScan) {
    std::mt19937_64 eng(1);
    std::uniform_real_distribution<double> ut(-100, 8000);
    for (int i = 0; i < 20; ++i) {
        const auto s = gappy_scanpath(eng, 15);
        for (int q = 0; q < 200; ++q) {
            const double t = ut(eng);
            EXPECT_EQ(active_fixation(s, t), oracle::covering(s, t));
        }
        // boundaries: onset is inside, end is outside
        for (const auto& f : s.fixations) {
            EXPECT_EQ(active_fixation(s, f.onset_ms), &f);
            EXPECT_EQ(active_fixation(s, f.end_ms()), oracle::covering(s, f.end_ms()));
        }
    }
}

TEST(DistanceCurve, GazeOnTapGivesZero) {
    const auto log = kgtest::tap_keys({"g"}, kLayout, 1000.0);
    const auto c = log.taps[0].position();
    const auto s = path({fix(c.x, c.y, 2000)});
    const auto curve = gaze_tap_distance_curve(log, s);
    ASSERT_EQ(curve.size(), 31u);
    for (const auto& p : curve) {
        EXPECT_EQ(p.mean_distance_px, 0.0);
        EXPECT_EQ(p.samples, 1u);
    }
    EXPECT_EQ(curve.front().offset_ms, -1000.0);
    EXPECT_EQ(curve.back().offset_ms, 500.0);
}

TEST(DistanceCurve, StepAtArrival) {
    // gaze 300 px away until 200 ms before the tap, then on the key
    const auto log = kgtest::tap_keys({"g"}, kLayout, 1000.0);
    const auto c = log.taps[0].position();
    const auto s = path({fix(c.x, c.y - 300, 800), fix(c.x, c.y, 1000)});
    for (const auto& p : gaze_tap_distance_curve(log, s))
        EXPECT_DOUBLE_EQ(p.mean_distance_px, p.offset_ms < -200.0 ? 300.0 : 0.0) << p.offset_ms;
}

TEST(DistanceCurve, GapsAreOmittedAndNoOverlapThrows) {
    const auto log = kgtest::tap_keys({"g"}, kLayout, 1000.0);
    const auto c = log.taps[0].position();
    auto s = path({fix(c.x, c.y, 100, 900)}, false);
    const auto curve = gaze_tap_distance_curve(log, s);
    ASSERT_EQ(curve.size(), 2u); // -100 and -50
    EXPECT_EQ(curve[0].offset_ms, -100.0);
    s = path({fix(c.x, c.y, 100, 5000)}, false);
    EXPECT_THROW(gaze_tap_distance_curve(log, s), DataError);
}

TEST(DistanceCurve, MatchesPooledOracle) {
    std::mt19937_64 eng(2);
    std::vector<TrialPair> trials;
    for (int i = 0; i < 6; ++i) trials.push_back(random_trial(eng, 8));
    const auto curve = gaze_tap_distance_curve(trials);
    std::size_t idx = 0;
    for (int k = 0; k <= 30; ++k) {
        const double off = -1000.0 + 50.0 * k;
        double sum = 0;
        std::size_t n = 0;
        for (const auto& tr : trials)
            for (const auto& tap : tr.log.taps)
                if (const auto* f = oracle::covering(tr.scanpath, tap.time_ms + off)) {
                    sum += std::hypot(f->x - tap.x, f->y - tap.y);
                    ++n;
                }
        if (n == 0) continue;
        ASSERT_LT(idx, curve.size());
        EXPECT_EQ(curve[idx].offset_ms, off);
        EXPECT_EQ(curve[idx].samples, n);
        EXPECT_NEAR(curve[idx].mean_distance_px, sum / n, 1e-9);
        ++idx;
    }
    EXPECT_EQ(idx, curve.size());
}

TEST(DistanceCurve, TrialOrderDoesNotMatter) {
    std::mt19937_64 eng(3);
    std::vector<TrialPair> trials;
    for (int i = 0; i < 5; ++i) trials.push_back(random_trial(eng, 6));
    const auto a = gaze_tap_distance_curve(trials);
    std::reverse(trials.begin(), trials.end());
    const auto b = gaze_tap_distance_curve(trials);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i].mean_distance_px, b[i].mean_distance_px, 1e-9);
}

TEST(GapRatios, MatchOracleAndStayInUnitInterval) {
    std::mt19937_64 eng(4);
    for (int i = 0; i < 20; ++i) {
        const auto tr = random_trial(eng, 10);
        const auto gaps = gap_samples(std::span<const TrialPair>(&tr, 1), kLayout.screen);
        std::size_t g = 0;
        for (std::size_t k = 1; k < tr.log.taps.size(); ++k) {
            const auto [kb, all] = oracle::keyboard_cover(tr.scanpath, tr.log.taps[k - 1].time_ms,
                                                          tr.log.taps[k].time_ms, kLayout.screen);
            if (all <= 0) continue;
            ASSERT_LT(g, gaps.size());
            EXPECT_NEAR(gaps[g].keyboard_ratio, kb / all, 1e-12);
            EXPECT_NEAR(gaps[g].iki_ms, tr.log.taps[k].time_ms - tr.log.taps[k - 1].time_ms, 1e-12);
            EXPECT_GE(gaps[g].keyboard_ratio, 0.0);
            EXPECT_LE(gaps[g].keyboard_ratio, 1.0);
            ++g;
        }
        EXPECT_EQ(g, gaps.size());
    }
}

TEST(BinMeans, HandComputed) {
    std::vector<GapSample> s = {{50, 0, 1.0}, {90, 0, 0.5}, {150, 0, 0.2}, {1000, 0, 0.3}, {5000, 0, 0.1}};
    const auto bins = bin_means(s, [](const GapSample& g) { return g.iki_ms; }, 100.0, 1000.0);
    ASSERT_EQ(bins.size(), 3u);
    EXPECT_EQ(bins[0].lo, 0.0);
    EXPECT_EQ(bins[0].hi, 100.0);
    EXPECT_DOUBLE_EQ(bins[0].mean, 0.75);
    EXPECT_EQ(bins[0].count, 2u);
    EXPECT_DOUBLE_EQ(bins[1].mean, 0.2);
    EXPECT_EQ(bins[2].lo, 1000.0);
    EXPECT_TRUE(std::isinf(bins[2].hi));
    EXPECT_DOUBLE_EQ(bins[2].mean, 0.2);
}

TEST(BinMeans, CountsAddUpAndOrderFree) {
    std::mt19937_64 eng(5);
    std::vector<TrialPair> trials;
    for (int i = 0; i < 8; ++i) trials.push_back(random_trial(eng, 12));
    const auto gaps = gap_samples(trials, kLayout.screen);
    const auto a = ratio_by_iki(trials, kLayout.screen);
    std::size_t total = 0;
    for (const auto& b : a) {
        total += b.count;
        EXPECT_GE(b.mean, 0.0);
        EXPECT_LE(b.mean, 1.0);
    }
    EXPECT_EQ(total, gaps.size());
    std::reverse(trials.begin(), trials.end());
    const auto b = ratio_by_iki(trials, kLayout.screen);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i].mean, b[i].mean, 1e-12);
    for (const auto& bin : ratio_by_travel(trials, kLayout.screen)) EXPECT_GT(bin.count, 0u);
}

TEST(KeyAttention, WindowBeforeTap) {
    // 350 ms before the tap: 100 ms on text, 250 ms on keyboard
    const auto log = kgtest::tap_keys({"space"}, kLayout, 1000.0);
    const auto s = path({fix(500, 200, 750), fix(500, 1500, 600)});
    const auto pk = per_key_attention(std::span<const TrialPair>(std::vector<TrialPair>{{log, s}}), kLayout);
    ASSERT_EQ(pk.size(), 1u);
    const auto& k = pk.at("space");
    EXPECT_DOUBLE_EQ(k.keyboard_ms, 250.0);
    EXPECT_DOUBLE_EQ(k.covered_ms, 350.0);
    EXPECT_NEAR(k.ratio(), 250.0 / 350.0, 1e-12);
}

TEST(KeyAttention, GroupsConserveTime) {
    std::mt19937_64 eng(6);
    std::vector<TrialPair> trials;
    for (int i = 0; i < 10; ++i) trials.push_back(random_trial(eng, 15));
    const auto pk = per_key_attention(trials, kLayout);
    const auto groups = group_key_attention(pk);
    double kb = 0, all = 0, gkb = 0, gall = 0;
    for (const auto& [l, k] : pk) {
        kb += k.keyboard_ms;
        all += k.covered_ms;
        EXPECT_GE(k.ratio(), 0.0);
        EXPECT_LE(k.ratio(), 1.0);
    }
    for (const auto& [l, k] : groups) {
        EXPECT_TRUE(l == "space" || l == "backspace" || l == "other");
        gkb += k.keyboard_ms;
        gall += k.covered_ms;
    }
    EXPECT_NEAR(kb, gkb, 1e-9);
    EXPECT_NEAR(all, gall, 1e-9);
    std::reverse(trials.begin(), trials.end());
    const auto again = per_key_attention(trials, kLayout);
    for (const auto& [l, k] : pk) EXPECT_NEAR(again.at(l).ratio(), k.ratio(), 1e-12);
}

TEST(IkiStats, TwoPassOracle) {
    std::mt19937_64 eng(7);
    std::vector<TrialPair> trials;
    for (int i = 0; i < 5; ++i) trials.push_back(random_trial(eng, 9));
    std::vector<double> v;
    for (const auto& t : trials)
        for (std::size_t k = 1; k < t.log.taps.size(); ++k) v.push_back(t.log.taps[k].time_ms - t.log.taps[k - 1].time_ms);
    double m = 0;
    for (double x : v) m += x;
    m /= v.size();
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    const auto st = iki_stats(trials);
    EXPECT_EQ(st.count, v.size());
    EXPECT_NEAR(st.mean_ms, m, 1e-9);
    EXPECT_NEAR(st.sd_ms, std::sqrt(ss / (v.size() - 1)), 1e-6);
}

TEST(Analyze, EmptyInputIsUsageError) {
    EXPECT_THROW(analyze(std::span<const TrialPair>{}, kLayout), UsageError);
}
