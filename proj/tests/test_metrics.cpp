#include <gtest/gtest.h>

#include <random>

#include "keygaze/metrics/multimatch.hpp"
#include "keygaze/metrics/similarity.hpp"
#include "keygaze/metrics/statistics.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace keygaze;
using namespace keygaze::metrics;
using kgtest::fix;
using kgtest::path;

namespace {
const ScreenGeometry kGeom;
}

TEST(Dtwd, SingleCellIsEuclidean) {
    // normalized (0,0,0.1) and (0.3,0.4,0.1)
    const auto a = path({fix(0, 0, 100)});
    const auto b = path({fix(0.3 * 1080, 0.4 * 1920, 100)});
    EXPECT_NEAR(dtwd(a, b, kGeom), 0.5, 1e-12);
}

TEST(Dtwd, IdentitySymmetryAndOracle) {
    std::mt19937_64 eng(5);
    std::uniform_int_distribution<int> len(1, 6);
    for (int i = 0; i < 60; ++i) {
        const auto a = kgtest::random_scanpath(eng, len(eng));
        const auto b = kgtest::random_scanpath(eng, len(eng));
        EXPECT_EQ(dtwd(a, a, kGeom), 0.0);
        EXPECT_DOUBLE_EQ(dtwd(a, b, kGeom), dtwd(b, a, kGeom));
        EXPECT_GE(dtwd(a, b, kGeom), 0.0);
        EXPECT_NEAR(dtwd(a, b, kGeom), oracle::brute_dtwd(a, b, kGeom), 1e-9);
    }
}

TEST(Dtwd, LengthThreeVersusFour) {
    std::mt19937_64 eng(8);
    const auto a = kgtest::random_scanpath(eng, 3), b = kgtest::random_scanpath(eng, 4);
    EXPECT_NEAR(dtwd(a, b, kGeom), oracle::brute_dtwd(a, b, kGeom), 1e-12);
}

TEST(Dtwd, EmptyThrows) { EXPECT_THROW(dtwd(Scanpath{}, path({fix(1, 1, 1)}), kGeom), UsageError); }

TEST(Sted, IdentityAndTranslation) {
    std::mt19937_64 eng(9);
    auto a = kgtest::random_scanpath(eng, 8);
    for (auto& f : a.fixations) {
        f.x = std::min(f.x, 900.0);
        f.y = std::min(f.y, 1700.0);
    }
    EXPECT_EQ(sted(a, a, kGeom), 0.0);
    auto b = a;
    for (auto& f : b.fixations) {
        f.x += 100;
        f.y += 200;
    }
    EXPECT_NEAR(sted(a, b, kGeom), 0.0, 1e-12);
}

TEST(Sted, MatchesWindowEnumeration) {
    std::mt19937_64 eng(10);
    for (int i = 0; i < 40; ++i) {
        const auto a = kgtest::random_scanpath(eng, 8), b = kgtest::random_scanpath(eng, 3 + i % 6);
        EXPECT_NEAR(sted(a, b, kGeom, 3), oracle::brute_sted(a, b, kGeom, 3), 1e-12);
        EXPECT_DOUBLE_EQ(sted(a, b, kGeom), sted(b, a, kGeom));
    }
}

TEST(Sted, TooShortThrows) {
    const auto a = path({fix(1, 1, 100), fix(2, 2, 100)});
    EXPECT_THROW(sted(a, a, kGeom, 3), UsageError);
}

TEST(MultiMatch, IdentityIsAllOnes) {
    std::mt19937_64 eng(12);
    for (int i = 0; i < 30; ++i) {
        const auto a = kgtest::random_scanpath(eng, 2 + i % 10);
        const auto s = multimatch(a, a, kGeom);
        EXPECT_EQ(s.shape, 1.0);
        EXPECT_EQ(s.direction, 1.0);
        EXPECT_EQ(s.length, 1.0);
        EXPECT_EQ(s.position, 1.0);
        EXPECT_EQ(s.duration, 1.0);
    }
}

TEST(MultiMatch, DoubledDurationsOnlyAffectDuration) {
    std::mt19937_64 eng(13);
    const auto a = kgtest::random_scanpath(eng, 6);
    auto b = a;
    for (auto& f : b.fixations) f.duration_ms *= 2;
    const auto s = multimatch(a, b, kGeom);
    EXPECT_EQ(s.position, 1.0);
    EXPECT_EQ(s.shape, 1.0);
    EXPECT_EQ(s.direction, 1.0);
    EXPECT_EQ(s.length, 1.0);
    EXPECT_NEAR(s.duration, 0.5, 1e-12);
}

TEST(MultiMatch, AlignmentAndPositionMatchEnumeration) {
    std::mt19937_64 eng(14);
    std::uniform_int_distribution<int> len(2, 5);
    for (int i = 0; i < 60; ++i) {
        const auto a = kgtest::random_scanpath(eng, len(eng)), b = kgtest::random_scanpath(eng, len(eng));
        const auto al = align_saccades(saccades(a), saccades(b));
        EXPECT_NEAR(al.cost, oracle::brute_alignment_cost(a, b), 1e-9);
        EXPECT_NEAR(multimatch(a, b, kGeom).position, oracle::brute_position_similarity(a, b, kGeom), 1e-9);
    }
}

TEST(MultiMatch, BoundedAndSymmetric) {
    std::mt19937_64 eng(15);
    for (int i = 0; i < 100; ++i) {
        const auto a = kgtest::random_scanpath(eng, 2 + i % 9), b = kgtest::random_scanpath(eng, 2 + (i * 7) % 11);
        const auto s = multimatch(a, b, kGeom), t = multimatch(b, a, kGeom);
        for (double v : {s.shape, s.direction, s.length, s.position, s.duration}) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        EXPECT_NEAR(s.shape, t.shape, 1e-12);
        EXPECT_NEAR(s.direction, t.direction, 1e-12);
        EXPECT_NEAR(s.length, t.length, 1e-12);
        EXPECT_NEAR(s.position, t.position, 1e-12);
        EXPECT_NEAR(s.duration, t.duration, 1e-12);
    }
}

TEST(MultiMatch, SingleFixationThrows) {
    const auto a = path({fix(1, 1, 100)});
    EXPECT_THROW(multimatch(a, a, kGeom), UsageError);
}

TEST(Statistics, CountAndMeanDuration) {
    const auto s = path({fix(1, 1, 200), fix(1, 1, 300), fix(1, 1, 400)});
    EXPECT_EQ(fixation_count(s), 3u);
    EXPECT_DOUBLE_EQ(mean_fixation_duration(s), 300.0);
    const auto one = path({fix(1, 1, 500)});
    EXPECT_EQ(fixation_count(one), 1u);
    EXPECT_DOUBLE_EQ(mean_fixation_duration(one), 500.0);
    EXPECT_THROW(mean_fixation_duration(Scanpath{}), UsageError);
}

TEST(Statistics, GazeShifts) {
    // K, K, T, K, T
    const auto s = path({fix(1, 1500, 100), fix(1, 1500, 100), fix(1, 200, 100), fix(1, 1500, 100), fix(1, 200, 100)});
    EXPECT_EQ(gaze_shifts(s, kGeom), 2u);
    EXPECT_EQ(gaze_shifts(path({fix(1, 1500, 100), fix(1, 1300, 100)}), kGeom), 0u);
    // an "other" fixation in between breaks the keyboard-to-text pair
    EXPECT_EQ(gaze_shifts(path({fix(1, 1500, 100), fix(1, 800, 100), fix(1, 200, 100)}), kGeom), 0u);
}

TEST(Statistics, RegionRatios) {
    const auto s = path({fix(1, 1500, 600), fix(1, 200, 400)});
    EXPECT_DOUBLE_EQ(gaze_on_keyboard_ratio(s, kGeom), 0.6);
    EXPECT_DOUBLE_EQ(proofreading_rate(s, kGeom), 0.4);
    const auto other = path({fix(1, 800, 600), fix(1, 900, 400)});
    EXPECT_DOUBLE_EQ(gaze_on_keyboard_ratio(other, kGeom), 0.0);
    EXPECT_DOUBLE_EQ(proofreading_rate(other, kGeom), 0.0);
}

TEST(Statistics, RatiosSumToOneWithoutOther) {
    std::mt19937_64 eng(21);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 200; ++i) {
        auto s = kgtest::random_scanpath(eng, 1 + i % 12);
        bool any_other = false;
        for (auto& f : s.fixations) {
            if (u(eng) < 0.8) f.y = u(eng) < 0.5 ? 100 : 1500;
            any_other = any_other || region_of(f.position(), kGeom) == Region::Other;
        }
        const double sum = gaze_on_keyboard_ratio(s, kGeom) + proofreading_rate(s, kGeom);
        EXPECT_LE(sum, 1.0 + 1e-12);
        if (!any_other) EXPECT_NEAR(sum, 1.0, 1e-12);
        else EXPECT_LT(sum, 1.0);
    }
}
