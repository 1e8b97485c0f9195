#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "keygaze/autodiff/checkpoint.hpp"
#include "keygaze/autodiff/optim.hpp"
#include "keygaze/model/loss.hpp"
#include "keygaze/model/network.hpp"
#include "keygaze/sim/simulator.hpp"

namespace keygaze::model {

struct TrainSample {
    KeypressLog log;
    Scanpath gt;
    HumanParams theta;
};

struct TrainConfig {
    std::size_t steps = 8000;
    std::size_t batch = 16;
    std::uint64_t seed = 0;
    ad::AdamConfig adam;            // lr is the initial rate of the step schedule
    double lr_decay = 0.97;
    std::uint64_t decay_every = 100;
    std::size_t checkpoint_every = 0; // 0: only at the end
    std::filesystem::path out_dir;    // empty: nothing written

    void validate() const {
        if (batch == 0) throw UsageError("train: batch must be >= 1");
        if (decay_every == 0) throw UsageError("train: decay interval must be >= 1");
        adam.validate();
    }
};

struct StepRecord {
    std::size_t step = 0;
    double lr = 0.0;
    LossBreakdown loss; // batch mean, before the update of this step
};

struct TrainResult {
    std::vector<StepRecord> history;
    std::vector<std::string> diagnostics;
};

/// True when the trial fits the model without chunking or slot truncation.
inline bool fits(const ModelConfig& cfg, const KeypressLog& log, const Scanpath& gt) {
    return !log.taps.empty() && log.taps.size() <= static_cast<std::size_t>(cfg.max_taps) && !gt.empty() &&
           gt.size() <= static_cast<std::size_t>(cfg.max_fixations);
}

/// Simulated trials as training samples with their true parameters, keeping
/// only those that fit the model.
inline std::vector<TrainSample> training_samples(const sim::SimDataset& ds, const ModelConfig& cfg) {
    std::vector<TrainSample> out;
    for (const auto& t : ds.trials)
        if (fits(cfg, t.trial.log, t.trial.scanpath)) out.push_back({t.trial.log, t.trial.scanpath, t.theta});
    return out;
}

inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string history_csv(const std::vector<StepRecord>& h) {
    std::string out = "step,lr,total,sim,len,f,v\n";
    for (const auto& r : h)
        out += std::to_string(r.step) + "," + format_real(r.lr) + "," + format_real(r.loss.total) + "," +
               format_real(r.loss.sim) + "," + format_real(r.loss.len) + "," + format_real(r.loss.f) + "," +
               format_real(r.loss.v) + "\n";
    return out;
}

inline ad::Checkpoint training_checkpoint(const ScanpathModel& model, const ad::Adam& opt) {
    ad::Checkpoint c = model.to_checkpoint(opt.steps());
    ad::store_optimizer(c, opt);
    return c;
}

/// Loss of one trial under the model's switches.
inline LossTerms sample_loss(const ScanpathModel& model, const TrainSample& s) {
    const auto pred = model.forward(s.log, s.theta);
    return total_loss(pred, s.gt, s.log, model.geometry(), model.config().loss);
}

/// Seeded mini-batch training with Adam and the step-decay schedule.
/// Batches walk a shuffled order, reshuffling after each pass.
inline TrainResult train(ScanpathModel& model, const std::vector<TrainSample>& data, const TrainConfig& cfg,
                         const std::function<void(const StepRecord&)>& on_step = {}) {
    cfg.validate();
    if (data.empty()) throw UsageError("train: empty dataset");
    for (const auto& s : data) {
        if (!fits(model.config(), s.log, s.gt))
            throw UsageError("train: trial '" + s.log.trial_id + "' exceeds max_taps/max_fixations or is empty");
        s.theta.validate();
    }
    ad::Adam opt(model.parameters(), cfg.adam);
    std::mt19937_64 eng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), eng);
    std::size_t cursor = 0;
    const std::size_t B = std::min(cfg.batch, data.size());

    auto save = [&](const std::string& name) {
        if (!cfg.out_dir.empty()) ad::save_checkpoint(cfg.out_dir / name, training_checkpoint(model, opt));
    };

    TrainResult result;
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        opt.zero_grad();
        StepRecord rec;
        rec.step = step;
        rec.lr = ad::lr_schedule(step, cfg.adam.lr, cfg.lr_decay, cfg.decay_every);
        for (std::size_t b = 0; b < B; ++b) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), eng);
                cursor = 0;
            }
            const auto& s = data[order[cursor++]];
            LossTerms t = sample_loss(model, s);
            const LossBreakdown v = t.values();
            if (!std::isfinite(v.total)) {
                save("last_good.ckpt");
                throw NumericalError("train: non-finite loss at step " + std::to_string(step) + " on trial '" +
                                     s.log.trial_id + "'" + (cfg.out_dir.empty() ? "" : "; last good state saved"));
            }
            for (auto& d : t.diagnostics)
                if (result.diagnostics.size() < 100) result.diagnostics.push_back(std::move(d));
            const double inv = 1.0 / static_cast<double>(B);
            rec.loss.total += v.total * inv;
            rec.loss.sim += v.sim * inv;
            rec.loss.len += v.len * inv;
            rec.loss.f += v.f * inv;
            rec.loss.v += v.v * inv;
            ad::scale(t.total, inv).backward();
        }
        opt.step(rec.lr);
        result.history.push_back(rec);
        if (on_step) on_step(rec);
        if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0) save("checkpoint.ckpt");
    }
    save("checkpoint.ckpt");
    if (!cfg.out_dir.empty()) io::write_file_atomic(cfg.out_dir / "loss_history.csv", history_csv(result.history));
    return result;
}

} // namespace keygaze::model
