#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>

#include "keygaze/core/io.hpp"
#include "keygaze/core/typing.hpp"
#include "keygaze/metrics/statistics.hpp"
#include "keygaze/sim/simulator.hpp"

using namespace keygaze;
using namespace keygaze::sim;

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = (i + j) / 2.0;
        i = j + 1;
    }
    return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

// two-sided p < 0.01 under the large-sample normal approximation
bool significant(double rho, std::size_t n) { return std::abs(rho) * std::sqrt(static_cast<double>(n) - 1.0) > 2.5758; }

SimConfig base_config(std::uint64_t seed = 3) {
    SimConfig c;
    c.seed = seed;
    return c;
}

// Trials from 250 users whose `which` parameter sweeps [0,1]; the others stay mid-range.
template <class Stat>
std::pair<std::vector<double>, std::vector<double>> sweep(int which, Stat stat) {
    std::vector<double> xs, ys;
    const auto cfg = base_config(17);
    const std::size_t n = 250;
    for (std::size_t u = 0; u < n; ++u) {
        HumanParams th;
        const double v = static_cast<double>(u) / (n - 1);
        (which == 0 ? th.e_k : which == 1 ? th.f_k : th.lambda) = v;
        const auto t = simulate_dataset_trial(cfg, u, 0, th);
        xs.push_back(v);
        ys.push_back(stat(t));
    }
    return {xs, ys};
}

} // namespace

TEST(Simulator, SameSeedIsByteIdentical) {
    auto cfg = base_config();
    cfg.trials_per_user = 3;
    const auto a = simulate_dataset(cfg, 4), b = simulate_dataset(cfg, 4);
    EXPECT_EQ(io::to_jsonl(a.logs()), io::to_jsonl(b.logs()));
    EXPECT_EQ(io::to_jsonl(a.scanpaths()), io::to_jsonl(b.scanpaths()));
    cfg.seed = 4;
    EXPECT_NE(io::to_jsonl(simulate_dataset(cfg, 4).logs()), io::to_jsonl(a.logs()));
}

TEST(Simulator, TrialReproducibleInIsolation) {
    auto cfg = base_config();
    cfg.trials_per_user = 4;
    const auto ds = simulate_dataset(cfg, 3, std::nullopt, 10);
    const auto t = simulate_dataset_trial(cfg, 11, 2);
    const auto& ref = ds.trials[4 + 2];
    EXPECT_EQ(ref.trial.log.trial_id, "u0011_t002");
    EXPECT_EQ(io::to_json(ref.trial.log).dump(), io::to_json(t.trial.log).dump());
    EXPECT_EQ(io::to_json(ref.trial.scanpath).dump(), io::to_json(t.trial.scanpath).dump());
}

TEST(Simulator, NoiseFreeTypistTypesTheSentence) {
    auto cfg = base_config();
    cfg.sigma0 = 0.0;
    cfg.slip_scale = 0.0;
    cfg.theta = {0.5, 0.0, 0.5};
    Rng rng(5);
    for (const auto& sentence : {std::string("the quick brown fox"), std::string("hello world.")}) {
        const auto t = simulate_trial(cfg, sentence, rng);
        EXPECT_EQ(t.typos, 0u);
        EXPECT_EQ(decode_text(t.log, cfg.layout), sentence);
    }
}

TEST(Simulator, NoProofreadingWhenPolicyForbidsIt) {
    auto cfg = base_config();
    cfg.theta = {0.5, 0.5, 1.0};
    cfg.proofread_base_p = 0.0;
    Rng rng(6);
    for (int i = 0; i < 20; ++i) {
        const auto t = simulate_trial(cfg, default_phrases()[i], rng);
        EXPECT_EQ(t.proofreads, 0u);
        EXPECT_DOUBLE_EQ(metrics::gaze_on_keyboard_ratio(t.scanpath, cfg.layout.screen), 1.0);
    }
}

TEST(Simulator, RealisticThetaYieldsValidTrial) {
    auto cfg = base_config();
    cfg.theta = {0.396, 0.298, 0.414};
    Rng rng(7);
    const auto t = simulate_trial(cfg, "my watch fell in the water", rng);
    EXPECT_NO_THROW(validate(t.log, cfg.layout.screen));
    EXPECT_NO_THROW(validate(t.scanpath, cfg.layout.screen));
    EXPECT_GT(t.log.taps.size(), 20u);
}

TEST(Simulator, AbsentCharacterAndEmptyInputsThrow) {
    auto cfg = base_config();
    Rng rng(1);
    EXPECT_THROW(simulate_trial(cfg, "hello!", rng), DataError);
    cfg.phrases.clear();
    EXPECT_THROW(simulate_dataset(cfg, 1), UsageError);
    EXPECT_THROW(simulate_dataset(base_config(), 0), UsageError);
}

TEST(Simulator, AugmentationCountAndInvariants) {
    auto cfg = base_config(9);
    cfg.trials_per_user = 300;
    const auto ds = simulate_dataset(cfg, 1, HumanParams{0.5, 0.5, 0.5});
    ASSERT_EQ(ds.trials.size(), 300u);
    double kb = 0, shifts = 0;
    for (const auto& t : ds.trials) {
        ASSERT_NO_THROW(validate(t.trial.log, cfg.layout.screen));
        ASSERT_NO_THROW(validate(t.trial.scanpath, cfg.layout.screen));
        kb += metrics::gaze_on_keyboard_ratio(t.trial.scanpath, cfg.layout.screen);
        shifts += static_cast<double>(metrics::gaze_shifts(t.trial.scanpath, cfg.layout.screen));
    }
    // human envelope, mean +- 2 SD
    EXPECT_NEAR(kb / 300, 0.63, 0.34);
    EXPECT_NEAR(shifts / 300, 3.81, 2.40);
}

TEST(Simulator, JsonlRoundTripIsLossless) {
    auto cfg = base_config(10);
    cfg.trials_per_user = 3;
    const auto ds = simulate_dataset(cfg, 3);
    const auto dir = std::filesystem::temp_directory_path() / "keygaze_sim_roundtrip";
    std::filesystem::create_directories(dir);
    io::write_keylogs(dir / "k.jsonl", ds.logs());
    io::write_scanpaths(dir / "s.jsonl", ds.scanpaths());
    const auto logs = io::read_keylogs(dir / "k.jsonl");
    const auto paths = io::read_scanpaths(dir / "s.jsonl");
    ASSERT_EQ(logs.size(), ds.trials.size());
    for (std::size_t i = 0; i < logs.size(); ++i) {
        const auto& a = ds.trials[i].trial;
        ASSERT_EQ(logs[i].taps.size(), a.log.taps.size());
        for (std::size_t k = 0; k < logs[i].taps.size(); ++k) {
            EXPECT_EQ(logs[i].taps[k].x, a.log.taps[k].x);
            EXPECT_EQ(logs[i].taps[k].time_ms, a.log.taps[k].time_ms);
        }
        ASSERT_EQ(paths[i].size(), a.scanpath.size());
        for (std::size_t k = 0; k < paths[i].size(); ++k) {
            EXPECT_EQ(paths[i].fixations[k].y, a.scanpath.fixations[k].y);
            EXPECT_EQ(paths[i].fixations[k].duration_ms, a.scanpath.fixations[k].duration_ms);
            EXPECT_EQ(paths[i].fixations[k].onset_ms, a.scanpath.fixations[k].onset_ms);
        }
    }
}

TEST(SimulatorMonotone, FixationDurationRisesWithEncoding) {
    const auto [x, y] = sweep(0, [](const SimulatedTrial& t) { return metrics::mean_fixation_duration(t.trial.scanpath); });
    const double rho = spearman(x, y);
    EXPECT_GT(rho, 0.0);
    EXPECT_TRUE(significant(rho, x.size())) << rho;
}

TEST(SimulatorMonotone, TypoRateRisesWithFingerImprecision) {
    const auto [x, y] = sweep(1, [](const SimulatedTrial& t) {
        return static_cast<double>(t.typos) / static_cast<double>(t.trial.log.taps.size());
    });
    const double rho = spearman(x, y);
    EXPECT_GT(rho, 0.0);
    EXPECT_TRUE(significant(rho, x.size())) << rho;
}

TEST(SimulatorMonotone, ProofreadingFallsWithRetention) {
    const KeyboardLayout layout = default_layout();
    const auto [x, y] = sweep(2, [&](const SimulatedTrial& t) {
        return metrics::proofreading_rate(t.trial.scanpath, layout.screen);
    });
    const double rho = spearman(x, y);
    EXPECT_LT(rho, 0.0);
    EXPECT_TRUE(significant(rho, x.size())) << rho;
}

TEST(SimulatorMonotone, ErrorRateNonDecreasingOverFingerSweep) {
    // 50 users, f_k rising; mean error rate compared across five blocks of ten
    const auto cfg = base_config(23);
    const KeyboardLayout layout = default_layout();
    std::vector<double> block(5, 0.0);
    for (std::size_t u = 0; u < 50; ++u) {
        const HumanParams th{0.5, static_cast<double>(u) / 49.0, 0.5};
        for (std::size_t k = 0; k < 8; ++k)
            block[u / 10] += compute_typing_metrics(simulate_dataset_trial(cfg, u, k, th).trial.log, layout).error_rate;
    }
    for (std::size_t b = 1; b < block.size(); ++b) EXPECT_GE(block[b], block[b - 1]) << b;
}

TEST(Simulator, GuidanceMinimumBeforeTap) {
    // the distance curve of raw simulator output bottoms out 150-350 ms pre-tap
    auto cfg = base_config(12);
    cfg.trials_per_user = 10;
    const auto ds = simulate_dataset(cfg, 5);
    double best = 1e300, at = 0;
    for (double off = -600; off <= 200; off += 50) {
        double sum = 0;
        std::size_t n = 0;
        for (const auto& t : ds.trials)
            for (const auto& tap : t.trial.log.taps)
                for (const auto& f : t.trial.scanpath.fixations)
                    if (tap.time_ms + off >= f.onset_ms && tap.time_ms + off < f.end_ms()) {
                        sum += distance(f.position(), tap.position());
                        ++n;
                    }
        if (n && sum / n < best) {
            best = sum / n;
            at = off;
        }
    }
    EXPECT_GE(at, -350.0);
    EXPECT_LE(at, -150.0);
}
