#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "keygaze/autodiff/tensor.hpp"

namespace keygaze::ad {

struct AdamConfig {
    double lr = 5e-5;
    double weight_decay = 4e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const {
        if (!(lr >= 0.0) || !(weight_decay >= 0.0)) throw UsageError("adam: lr and weight decay must be >= 0");
        if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw UsageError("adam: betas must lie in [0,1)");
        if (!(eps > 0.0)) throw UsageError("adam: eps must be positive");
    }
};

/// lr0 * 0.97^floor(step / 100)
inline double lr_schedule(std::uint64_t step, double lr0 = 5e-5, double decay = 0.97, std::uint64_t every = 100) {
    return lr0 * std::pow(decay, static_cast<double>(step / every));
}

struct NamedParam {
    std::string name;
    Tensor tensor;
};

/// Adam with decoupled weight decay: p <- p - lr*wd*p, then the usual
/// bias-corrected moment update.
class Adam {
public:
    Adam(std::vector<NamedParam> params, AdamConfig cfg = {}) : params_(std::move(params)), cfg_(cfg) {
        cfg_.validate();
        for (const auto& p : params_) {
            m_.push_back(Mat::Zero(p.tensor.rows(), p.tensor.cols()));
            v_.push_back(Mat::Zero(p.tensor.rows(), p.tensor.cols()));
        }
    }

    /// One update using the gradients currently stored on the parameters.
    void step(double lr) {
        for (const auto& p : params_)
            if (!p.tensor.grad().allFinite()) throw NumericalError("adam: non-finite gradient in " + p.name);
        ++t_;
        const double b1 = cfg_.beta1, b2 = cfg_.beta2;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Tensor t = params_[i].tensor;
            Mat& w = t.mutable_value();
            const Mat& g = t.grad();
            if (cfg_.weight_decay != 0.0) w -= lr * cfg_.weight_decay * w;
            m_[i] = b1 * m_[i] + (1.0 - b1) * g;
            v_[i] = b2 * v_[i] + (1.0 - b2) * g.cwiseProduct(g);
            w.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.eps);
        }
    }

    void step() { step(cfg_.lr); }

    void zero_grad() {
        for (auto& p : params_) p.tensor.zero_grad();
    }

    std::uint64_t steps() const { return t_; }
    void set_steps(std::uint64_t t) { t_ = t; }
    const AdamConfig& config() const { return cfg_; }
    const std::vector<NamedParam>& params() const { return params_; }
    std::vector<Mat>& first_moments() { return m_; }
    std::vector<Mat>& second_moments() { return v_; }
    const std::vector<Mat>& first_moments() const { return m_; }
    const std::vector<Mat>& second_moments() const { return v_; }

private:
    std::vector<NamedParam> params_;
    AdamConfig cfg_;
    std::vector<Mat> m_, v_;
    std::uint64_t t_ = 0;
};

} // namespace keygaze::ad
