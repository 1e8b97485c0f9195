#pragma once

// Random small instances of the four loss terms, as functions of the raw head
// outputs (mu_x, mu_y, mu_t, logits), for gradient checking.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "keygaze/autodiff/grad_check.hpp"
#include "keygaze/model/loss.hpp"

namespace kgtest {

struct LossCase {
    std::string name;
    std::function<keygaze::ad::Tensor(const std::vector<keygaze::ad::Tensor>&)> f;
    std::vector<keygaze::ad::Mat> inputs;
};

inline std::vector<LossCase> loss_cases(std::uint64_t seed) {
    using namespace keygaze;
    using ad::Mat;
    using ad::Tensor;
    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    std::normal_distribution<double> nd(0, 1);
    const ScreenGeometry geom;
    const int N = 6;
    const int L = 2 + static_cast<int>(u(eng) * 4.999);

    Scanpath gt;
    gt.trial_id = "g";
    double t = 0;
    for (int i = 0; i < L; ++i) {
        const double r = u(eng);
        const double y = r < 0.3 ? 50 + 300 * u(eng) : (r < 0.8 ? 1250 + 600 * u(eng) : 500 + 600 * u(eng));
        gt.fixations.push_back({40 + 1000 * u(eng), y, 100 + 400 * u(eng), t});
        t += gt.fixations.back().duration_ms;
    }
    KeypressLog log;
    log.trial_id = "g";
    for (double tap = 200 + 150 * u(eng); tap < t + 300; tap += 250 + 300 * u(eng))
        log.taps.push_back({40 + 1000 * u(eng), 1250 + 600 * u(eng), tap});

    auto column = [&](double lo, double hi) {
        Mat m(N, 1);
        for (int i = 0; i < N; ++i) m(i, 0) = lo + (hi - lo) * u(eng);
        return m;
    };
    Mat logits(N, 1);
    for (int i = 0; i < N; ++i) logits(i, 0) = 1.5 * nd(eng);
    std::vector<Mat> inputs = {column(0.05, 0.95), column(0.03, 0.97), column(0.1, 0.5), logits};

    auto pred_of = [N](const std::vector<Tensor>& x) {
        model::FixationPrediction p;
        p.mu_x = x[0];
        p.mu_y = x[1];
        p.mu_t = x[2];
        p.logits = x[3];
        p.sigma_x = p.sigma_y = p.sigma_t = Tensor::constant(Mat::Constant(N, 1, 0.05));
        return p;
    };
    std::vector<LossCase> out;
    out.push_back({"loss_sim", [=](const std::vector<Tensor>& x) { return model::loss_sim(pred_of(x), gt, geom); }, inputs});
    out.push_back({"loss_len", [=](const std::vector<Tensor>& x) { return model::loss_len(x[3], L); }, inputs});
    out.push_back({"loss_f", [=](const std::vector<Tensor>& x) { return model::loss_f(pred_of(x), gt, log, geom); }, inputs});
    out.push_back({"loss_v", [=](const std::vector<Tensor>& x) { return model::loss_v(pred_of(x), gt, geom); }, inputs});
    return out;
}

} // namespace kgtest
