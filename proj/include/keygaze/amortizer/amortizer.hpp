#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "keygaze/autodiff/checkpoint.hpp"
#include "keygaze/autodiff/optim.hpp"
#include "keygaze/core/typing.hpp"
#include "keygaze/model/layers.hpp"
#include "keygaze/sim/simulator.hpp"

namespace keygaze::amortizer {

using ad::Mat;
using ad::Tensor;

inline constexpr int kMetricCount = 4; // wpm, mean iki, error rate, backspaces

struct AmortizerConfig {
    std::vector<int> hidden = {32, 32};
    std::size_t epochs = 200;
    std::size_t batch = 128;
    double lr = 1e-3;
    double weight_decay = 0.0;
    double holdout_fraction = 0.1; // used only when no explicit held-out set is given
    std::uint64_t seed = 0;

    void validate() const {
        if (hidden.empty()) throw UsageError("amortizer: need at least one hidden layer");
        for (int w : hidden)
            if (w <= 0) throw UsageError("amortizer: hidden widths must be positive");
        if (batch == 0 || epochs == 0) throw UsageError("amortizer: epochs and batch must be >= 1");
        if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0))
            throw UsageError("amortizer: holdout fraction must lie in [0,1)");
    }
};

struct TrainingPair {
    TypingMetrics metrics;
    HumanParams theta;
};

inline std::array<double, kMetricCount> as_array(const TypingMetrics& m) {
    return {m.wpm, m.mean_iki_ms, m.error_rate, m.backspace_count};
}

/// Mean that does not depend on input order, and returns the value itself
/// when all inputs are equal.
inline double order_free_mean(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const double base = v.front();
    double s = 0.0;
    for (double x : v) s += x - base;
    return base + s / static_cast<double>(v.size());
}

inline TypingMetrics pooled_metrics(const std::vector<TypingMetrics>& ms) {
    if (ms.empty()) throw DataError("amortizer: no typing metrics to pool");
    std::array<std::vector<double>, kMetricCount> cols;
    for (const auto& m : ms) {
        const auto a = as_array(m);
        for (int i = 0; i < kMetricCount; ++i) cols[i].push_back(a[i]);
    }
    return {order_free_mean(cols[0]), order_free_mean(cols[1]), order_free_mean(cols[2]), order_free_mean(cols[3])};
}

/// Per-user metrics averaged over the user's simulated trials, paired with
/// the user's sampled theta. Users are numbered from `first_user`.
inline std::vector<TrainingPair> build_training_set(const sim::SimConfig& cfg, std::size_t n_users,
                                                    std::size_t first_user = 0) {
    if (n_users == 0) throw UsageError("amortizer: need at least one user");
    std::vector<TrainingPair> out;
    out.reserve(n_users);
    for (std::size_t u = first_user; u < first_user + n_users; ++u) {
        std::vector<TypingMetrics> ms;
        HumanParams theta;
        for (std::size_t k = 0; k < cfg.trials_per_user; ++k) {
            const auto t = sim::simulate_dataset_trial(cfg, u, k);
            theta = t.theta;
            ms.push_back(compute_typing_metrics(t.trial.log, cfg.layout));
        }
        out.push_back({pooled_metrics(ms), theta});
    }
    return out;
}

struct FitReport {
    std::array<double, 3> heldout_mae{};      // e_k, f_k, lambda
    std::array<double, 3> baseline_mae{};     // predicting the training mean
    double heldout_mse = 0.0;
    double baseline_mse = 0.0;
    double final_train_loss = 0.0;
    std::size_t train_pairs = 0;
    std::size_t heldout_pairs = 0;
};

/// Metric standardisation followed by a tanh MLP with a sigmoid output.
class Amortizer {
public:
    explicit Amortizer(AmortizerConfig cfg = {}) : cfg_(std::move(cfg)) {
        cfg_.validate();
        std::mt19937_64 eng(cfg_.seed ^ 0x616d6f7274ULL);
        int in = kMetricCount;
        for (int w : cfg_.hidden) {
            layers_.emplace_back(in, w, eng);
            in = w;
        }
        layers_.emplace_back(in, 3, eng);
        mean_ = Mat::Zero(1, kMetricCount);
        scale_ = Mat::Ones(1, kMetricCount);
    }

    const AmortizerConfig& config() const { return cfg_; }
    const Mat& norm_mean() const { return mean_; }
    const Mat& norm_scale() const { return scale_; }

    std::vector<ad::NamedParam> parameters() const {
        std::vector<ad::NamedParam> out;
        for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].collect(out, "layer" + std::to_string(i));
        return out;
    }

    Mat normalize(const std::vector<TypingMetrics>& ms) const {
        Mat x(static_cast<Eigen::Index>(ms.size()), kMetricCount);
        for (std::size_t r = 0; r < ms.size(); ++r) {
            const auto a = as_array(ms[r]);
            for (int c = 0; c < kMetricCount; ++c)
                x(static_cast<Eigen::Index>(r), c) = (a[c] - mean_(0, c)) / scale_(0, c);
        }
        return x;
    }

    Tensor forward(const Mat& x_normalized) const {
        Tensor h = Tensor::constant(x_normalized);
        for (std::size_t i = 0; i + 1 < layers_.size(); ++i) h = ad::tanh(layers_[i](h));
        return ad::sigmoid(layers_.back()(h));
    }

    HumanParams predict(const TypingMetrics& m) const {
        const Mat y = forward(normalize({m})).value();
        HumanParams p{std::clamp(y(0, 0), 0.0, 1.0), std::clamp(y(0, 1), 0.0, 1.0), std::clamp(y(0, 2), 0.0, 1.0)};
        return p;
    }

    /// Pools the trials' metrics and maps them to theta.
    HumanParams infer_theta(const std::vector<KeypressLog>& trials, const KeyboardLayout& layout) const {
        std::vector<TypingMetrics> ms;
        for (const auto& t : trials) {
            if (t.taps.size() < 2 || t.reference_text.empty()) continue;
            ms.push_back(compute_typing_metrics(t, layout));
        }
        if (ms.empty()) throw DataError("infer-theta: no trial with >= 2 taps and a reference text");
        return predict(pooled_metrics(ms));
    }

    /// Fits normalisation and weights. Without `heldout`, the last
    /// holdout_fraction of `pairs` is held out for the report.
    FitReport fit(const std::vector<TrainingPair>& pairs, const std::vector<TrainingPair>* heldout = nullptr) {
        std::vector<TrainingPair> train(pairs), test;
        if (heldout) {
            test = *heldout;
        } else {
            const auto n_test = static_cast<std::size_t>(std::floor(cfg_.holdout_fraction * pairs.size()));
            test.assign(pairs.end() - static_cast<std::ptrdiff_t>(n_test), pairs.end());
            train.resize(pairs.size() - n_test);
        }
        if (train.size() < 100) throw UsageError("amortizer: need at least 100 training pairs");

        std::vector<TypingMetrics> xs;
        Mat Y(static_cast<Eigen::Index>(train.size()), 3);
        for (std::size_t i = 0; i < train.size(); ++i) {
            xs.push_back(train[i].metrics);
            Y.row(static_cast<Eigen::Index>(i)) << train[i].theta.e_k, train[i].theta.f_k, train[i].theta.lambda;
        }
        for (int c = 0; c < kMetricCount; ++c) {
            double s = 0.0, ss = 0.0;
            for (const auto& m : xs) s += as_array(m)[c];
            const double mu = s / static_cast<double>(xs.size());
            for (const auto& m : xs) ss += (as_array(m)[c] - mu) * (as_array(m)[c] - mu);
            const double sd = std::sqrt(ss / static_cast<double>(xs.size()));
            mean_(0, c) = mu;
            scale_(0, c) = sd > 1e-12 ? sd : 1.0;
        }
        const Mat X = normalize(xs);

        ad::AdamConfig ac;
        ac.lr = cfg_.lr;
        ac.weight_decay = cfg_.weight_decay;
        ad::Adam opt(parameters(), ac);
        std::mt19937_64 eng(cfg_.seed);
        std::vector<Eigen::Index> order(train.size());
        std::iota(order.begin(), order.end(), 0);
        FitReport rep;
        for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), eng);
            double epoch_loss = 0.0;
            for (std::size_t s = 0; s < order.size(); s += cfg_.batch) {
                const std::size_t e = std::min(order.size(), s + cfg_.batch);
                Mat xb(static_cast<Eigen::Index>(e - s), kMetricCount), yb(static_cast<Eigen::Index>(e - s), 3);
                for (std::size_t i = s; i < e; ++i) {
                    xb.row(static_cast<Eigen::Index>(i - s)) = X.row(order[i]);
                    yb.row(static_cast<Eigen::Index>(i - s)) = Y.row(order[i]);
                }
                opt.zero_grad();
                Tensor loss = ad::mean(ad::square(ad::sub(forward(xb), Tensor::constant(yb))));
                const double lv = loss.item();
                if (!std::isfinite(lv)) throw NumericalError("amortizer: training diverged");
                loss.backward();
                opt.step();
                epoch_loss += lv * static_cast<double>(e - s);
            }
            rep.final_train_loss = epoch_loss / static_cast<double>(order.size());
        }

        rep.train_pairs = train.size();
        rep.heldout_pairs = test.size();
        if (!test.empty()) {
            const Mat ybar = Y.colwise().mean();
            for (const auto& p : test) {
                const HumanParams h = predict(p.metrics);
                const std::array<double, 3> pred{h.e_k, h.f_k, h.lambda}, truth{p.theta.e_k, p.theta.f_k, p.theta.lambda};
                for (int j = 0; j < 3; ++j) {
                    rep.heldout_mae[j] += std::abs(pred[j] - truth[j]);
                    rep.baseline_mae[j] += std::abs(ybar(0, j) - truth[j]);
                    rep.heldout_mse += (pred[j] - truth[j]) * (pred[j] - truth[j]);
                    rep.baseline_mse += (ybar(0, j) - truth[j]) * (ybar(0, j) - truth[j]);
                }
            }
            const double n = static_cast<double>(test.size());
            for (int j = 0; j < 3; ++j) {
                rep.heldout_mae[j] /= n;
                rep.baseline_mae[j] /= n;
            }
            rep.heldout_mse /= 3.0 * n;
            rep.baseline_mse /= 3.0 * n;
        }
        return rep;
    }

    ad::Checkpoint to_checkpoint() const {
        ad::Checkpoint c;
        nlohmann::json meta = {{"kind", "amortizer"},
                               {"hidden", cfg_.hidden},
                               {"epochs", cfg_.epochs},
                               {"batch", cfg_.batch},
                               {"lr", cfg_.lr},
                               {"seed", cfg_.seed}};
        c.metadata = meta.dump();
        for (const auto& p : parameters()) c.tensors[p.name] = p.tensor.value();
        c.tensors["norm.mean"] = mean_;
        c.tensors["norm.scale"] = scale_;
        return c;
    }

    static Amortizer from_checkpoint(const ad::Checkpoint& c) {
        AmortizerConfig cfg;
        try {
            const auto meta = nlohmann::json::parse(c.metadata);
            if (meta.value("kind", "") != "amortizer") throw DataError("checkpoint is not an amortizer");
            cfg.hidden = meta.at("hidden").get<std::vector<int>>();
            cfg.epochs = meta.value("epochs", cfg.epochs);
            cfg.batch = meta.value("batch", cfg.batch);
            cfg.lr = meta.value("lr", cfg.lr);
            cfg.seed = meta.value("seed", cfg.seed);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("amortizer checkpoint metadata: ") + e.what());
        }
        Amortizer a(cfg);
        ad::load_parameters(c, a.parameters());
        const Mat& m = c.at("norm.mean");
        const Mat& s = c.at("norm.scale");
        if (m.rows() != 1 || m.cols() != kMetricCount || s.rows() != 1 || s.cols() != kMetricCount)
            throw DataError("amortizer checkpoint: bad normalisation shape");
        if (!((s.array() > 0.0).all())) throw DataError("amortizer checkpoint: normalisation scales must be > 0");
        a.mean_ = m;
        a.scale_ = s;
        return a;
    }

private:
    AmortizerConfig cfg_;
    std::vector<model::Linear> layers_;
    Mat mean_, scale_;
};

} // namespace keygaze::amortizer
