#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "keygaze/autodiff/tensor.hpp"
#include "keygaze/core/types.hpp"
#include "keygaze/model/config.hpp"
#include "keygaze/model/network.hpp"

namespace keygaze::model {

inline constexpr double kGuidanceWindowMs = 350.0;
inline constexpr double kSoftBandPx = 100.0;  // default temperature of soft region membership
inline constexpr double kSmoothNormEps = 1e-6; // px^2 (or s^2) inside sqrt(d^2 + eps) - sqrt(eps)
inline constexpr double kGuidanceNormEps = 1e-14; // px^2, gaze-tap distances; keeps the offset below 1e-10 diagonals

struct LossBreakdown {
    double total = 0.0, sim = 0.0, len = 0.0, f = 0.0, v = 0.0;
};

struct LossTerms {
    Tensor total, sim, len, f, v;
    std::vector<std::string> diagnostics;

    LossBreakdown values() const {
        auto val = [](const Tensor& t) { return t.defined() ? t.item() : 0.0; };
        return {val(total), val(sim), val(len), val(f), val(v)};
    }
};

namespace detail {

inline double sigmoid(double x) { return ad::detail::stable_sigmoid(x); }

/// sqrt(a^2 + b^2 + eps) - sqrt(eps): zero at the origin, smooth everywhere.
inline Tensor smooth_norm(const Tensor& a, const Tensor& b, double eps = kSmoothNormEps) {
    const double s = std::sqrt(eps);
    return ad::add_scalar(ad::sqrt(ad::add_scalar(ad::add(ad::square(a), ad::square(b)), eps)), -s);
}

inline Tensor smooth_abs(const Tensor& a) {
    const double s = std::sqrt(kSmoothNormEps);
    return ad::add_scalar(ad::sqrt(ad::add_scalar(ad::square(a), kSmoothNormEps)), -s);
}

inline double smooth_norm(double a, double b) {
    return std::sqrt(a * a + b * b + kSmoothNormEps) - std::sqrt(kSmoothNormEps);
}

inline double soft_text(double y, const ScreenGeometry& g, double band = kSoftBandPx) {
    return sigmoid((g.text_area_max_y - y) / band);
}

inline double soft_keyboard(double y, const ScreenGeometry& g, double band = kSoftBandPx) {
    return sigmoid((y - g.keyboard_min_y) / band) * sigmoid((g.keyboard_max_y - y) / band);
}

/// y_px: N x 1 tensor of pixel rows.
inline Tensor soft_text(const Tensor& y_px, const ScreenGeometry& g, double band = kSoftBandPx) {
    return ad::sigmoid(ad::scale(ad::add_scalar(y_px, -g.text_area_max_y), -1.0 / band));
}

inline Tensor soft_keyboard(const Tensor& y_px, const ScreenGeometry& g, double band = kSoftBandPx) {
    const Tensor lo = ad::sigmoid(ad::scale(ad::add_scalar(y_px, -g.keyboard_min_y), 1.0 / band));
    const Tensor hi = ad::sigmoid(ad::scale(ad::add_scalar(y_px, -g.keyboard_max_y), -1.0 / band));
    return ad::mul(lo, hi);
}

inline Eigen::Index gt_length(const Scanpath& gt, const FixationPrediction& pred, const char* op) {
    if (gt.empty()) throw DataError(std::string(op) + ": empty ground-truth scanpath");
    if (static_cast<Eigen::Index>(gt.size()) > pred.slots())
        throw UsageError(std::string(op) + ": ground truth has " + std::to_string(gt.size()) + " fixations, only " +
                         std::to_string(pred.slots()) + " slots");
    return static_cast<Eigen::Index>(gt.size());
}

} // namespace detail

/// MSE over the first L_gt slots on (x/width, y/height, seconds) minus the mean
/// of position, duration and saccade-length similarities on index-aligned pairs.
inline Tensor loss_sim(const FixationPrediction& pred, const Scanpath& gt, const ScreenGeometry& geom) {
    const Eigen::Index L = detail::gt_length(gt, pred, "loss_sim");
    Mat g(L, 3);
    for (Eigen::Index i = 0; i < L; ++i) {
        const auto& f = gt.fixations[static_cast<std::size_t>(i)];
        g(i, 0) = f.x / geom.width;
        g(i, 1) = f.y / geom.height;
        g(i, 2) = f.duration_ms / 1000.0;
    }
    const Tensor px = ad::slice_rows(pred.mu_x, 0, L);
    const Tensor py = ad::slice_rows(pred.mu_y, 0, L);
    const Tensor pt = ad::slice_rows(pred.mu_t, 0, L);
    const Tensor gx = Tensor::constant(g.col(0)), gy = Tensor::constant(g.col(1)), gt_t = Tensor::constant(g.col(2));
    const Tensor dx = ad::sub(px, gx), dy = ad::sub(py, gy), dt = ad::sub(pt, gt_t);
    const double invL = 1.0 / static_cast<double>(L);
    const Tensor mse = ad::scale(ad::sum(ad::add(ad::add(ad::square(dx), ad::square(dy)), ad::square(dt))), invL);

    const double diag = geom.diagonal();
    const Tensor pos_d = detail::smooth_norm(ad::scale(dx, geom.width), ad::scale(dy, geom.height));
    const Tensor pos_sim = ad::add_scalar(ad::scale(ad::sum(pos_d), -invL / diag), 1.0);

    const Tensor dur_d = ad::div(detail::smooth_abs(dt), ad::maximum(pt, gt_t));
    const Tensor dur_sim = ad::add_scalar(ad::scale(ad::sum(dur_d), -invL), 1.0);

    Tensor len_sim = Tensor::scalar(1.0);
    if (L >= 2) {
        auto diff = [&](const Tensor& v) { return ad::sub(ad::slice_rows(v, 1, L - 1), ad::slice_rows(v, 0, L - 1)); };
        const Tensor plen = detail::smooth_norm(ad::scale(diff(px), geom.width), ad::scale(diff(py), geom.height));
        Mat glen(L - 1, 1);
        for (Eigen::Index i = 0; i + 1 < L; ++i)
            glen(i, 0) = detail::smooth_norm((g(i + 1, 0) - g(i, 0)) * geom.width, (g(i + 1, 1) - g(i, 1)) * geom.height);
        const Tensor ld = detail::smooth_abs(ad::sub(plen, Tensor::constant(glen)));
        len_sim = ad::add_scalar(ad::scale(ad::sum(ld), -1.0 / (static_cast<double>(L - 1) * diag)), 1.0);
    }
    const Tensor sim = ad::scale(ad::add(ad::add(pos_sim, dur_sim), len_sim), 1.0 / 3.0);
    return ad::sub(mse, sim);
}

/// Mean BCE over all N slots; label 1 for the first L_gt slots.
inline Tensor loss_len(const Tensor& logits, Eigen::Index gt_len) {
    if (gt_len < 0 || gt_len > logits.rows())
        throw UsageError("loss_len: ground-truth length " + std::to_string(gt_len) + " outside [0, " +
                         std::to_string(logits.rows()) + "]");
    Mat y = Mat::Zero(logits.rows(), 1);
    y.topRows(gt_len).setOnes();
    return ad::mean(ad::bce_with_logits(logits, y));
}

/// Quantities of the finger-guidance term on the ground-truth side.
struct GuidanceStats {
    double mean_distance = 0.0; // in screen diagonals
    double count = 0.0;         // keyboard fixations touching any pre-tap window (soft membership)
    double weight = 0.0;        // total overlap time, s
};

/// Overlap of [on, on+dur) with [t-350ms, t); times in seconds.
inline double window_overlap(double on, double dur, double tap_s) {
    const double a = tap_s - kGuidanceWindowMs / 1000.0;
    return std::max(0.0, std::min(on + dur, tap_s) - std::max(on, a));
}

inline GuidanceStats guidance_stats(const Scanpath& gt, const KeypressLog& log, const ScreenGeometry& geom,
                                    double band = kSoftBandPx) {
    GuidanceStats s;
    double wd = 0.0;
    for (const auto& f : gt.fixations) {
        bool touched = false;
        for (const auto& tap : log.taps) {
            const double ov = window_overlap(f.onset_ms / 1000.0, f.duration_ms / 1000.0, tap.time_ms / 1000.0);
            if (ov <= 0.0) continue;
            touched = true;
            s.weight += ov;
            wd += ov * std::hypot(f.x - tap.x, f.y - tap.y) / geom.diagonal();
        }
        if (touched) s.count += detail::soft_keyboard(f.y, geom, band);
    }
    if (s.weight > 0.0) s.mean_distance = wd / s.weight;
    return s;
}

/// |dbar_pred - 0.5 dbar_gt| + 0.2 |C_pred - C_gt| over the 350 ms windows
/// before each tap. Predicted onsets are running sums of the predicted
/// durations from t = 0; contributions are weighted by overlap time and slot
/// validity.
inline Tensor loss_f(const FixationPrediction& pred, const Scanpath& gt, const KeypressLog& log,
                     const ScreenGeometry& geom, std::vector<std::string>* diagnostics = nullptr,
                     double band = kSoftBandPx) {
    if (log.taps.empty()) throw DataError("loss_f: trial '" + log.trial_id + "' has no taps");
    const GuidanceStats g = guidance_stats(gt, log, geom, band);
    if (!(g.weight > 0.0)) {
        if (diagnostics) diagnostics->push_back("loss_f: no ground-truth fixation overlaps a pre-tap window in '" +
                                                log.trial_id + "'; term set to 0");
        return Tensor::scalar(0.0);
    }
    const auto N = pred.slots();
    const auto K = static_cast<Eigen::Index>(log.taps.size());
    Mat a(1, K), b(1, K), tx(1, K), ty(1, K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const auto& t = log.taps[static_cast<std::size_t>(k)];
        b(0, k) = t.time_ms / 1000.0;
        a(0, k) = b(0, k) - kGuidanceWindowMs / 1000.0;
        tx(0, k) = t.x;
        ty(0, k) = t.y;
    }
    const Tensor valid = ad::sigmoid(pred.logits);
    const Tensor ends = ad::cumsum_rows(pred.mu_t);
    const Tensor onsets = ad::sub(ends, pred.mu_t);
    const Tensor hi = ad::minimum(ad::broadcast_to(ends, N, K), Tensor::constant(b));
    const Tensor lo = ad::maximum(ad::broadcast_to(onsets, N, K), Tensor::constant(a));
    const Tensor ov = ad::relu(ad::sub(hi, lo));
    const Tensor w = ad::mul(ov, valid);
    const Tensor xpx = ad::scale(pred.mu_x, geom.width), ypx = ad::scale(pred.mu_y, geom.height);
    const Tensor dist = ad::scale(detail::smooth_norm(ad::sub(xpx, Tensor::constant(tx)), ad::sub(ypx, Tensor::constant(ty)),
                                                      kGuidanceNormEps),
                                  1.0 / geom.diagonal());
    const Tensor dbar = ad::div(ad::sum(ad::mul(w, dist)), ad::add_scalar(ad::sum(w), 1e-12));

    Mat touched(N, 1);
    for (Eigen::Index i = 0; i < N; ++i) touched(i, 0) = ov.value().row(i).maxCoeff() > 0.0 ? 1.0 : 0.0;
    const Tensor count = ad::sum(ad::mul(ad::mul(valid, detail::soft_keyboard(ypx, geom, band)), Tensor::constant(touched)));

    const Tensor dterm = ad::abs(ad::add_scalar(dbar, -0.5 * g.mean_distance));
    const Tensor cterm = ad::abs(ad::add_scalar(count, -g.count));
    return ad::add(dterm, ad::scale(cterm, 0.2));
}

struct ProofreadStats {
    double duration_s = 0.0;
    double count = 0.0;
};

inline ProofreadStats proofread_stats(const Scanpath& gt, const ScreenGeometry& geom, double band = kSoftBandPx) {
    ProofreadStats s;
    for (const auto& f : gt.fixations) {
        const double m = detail::soft_text(f.y, geom, band);
        s.duration_s += m * f.duration_ms / 1000.0;
        s.count += m;
    }
    return s;
}

/// |D_pred - D_gt| + 0.8 |C_pred - C_gt| for text-area time (s) and count.
inline Tensor loss_v(const FixationPrediction& pred, const Scanpath& gt, const ScreenGeometry& geom,
                     double band = kSoftBandPx) {
    const ProofreadStats g = proofread_stats(gt, geom, band);
    const Tensor m = ad::mul(ad::sigmoid(pred.logits), detail::soft_text(ad::scale(pred.mu_y, geom.height), geom, band));
    const Tensor D = ad::sum(ad::mul(m, pred.mu_t));
    const Tensor C = ad::sum(m);
    return ad::add(ad::abs(ad::add_scalar(D, -g.duration_s)), ad::scale(ad::abs(ad::add_scalar(C, -g.count)), 0.8));
}

/// Sum of the enabled terms; disabled terms are reported as 0.
inline LossTerms total_loss(const FixationPrediction& pred, const Scanpath& gt, const KeypressLog& log,
                            const ScreenGeometry& geom, const LossSwitches& on, double band = kSoftBandPx) {
    LossTerms t;
    const Tensor zero = Tensor::scalar(0.0);
    t.sim = on.sim ? loss_sim(pred, gt, geom) : zero;
    t.len = on.len ? loss_len(pred.logits, detail::gt_length(gt, pred, "loss_len")) : zero;
    t.f = on.f ? loss_f(pred, gt, log, geom, &t.diagnostics, band) : zero;
    t.v = on.v ? loss_v(pred, gt, geom, band) : zero;
    t.total = ad::add(ad::add(t.sim, t.len), ad::add(t.f, t.v));
    return t;
}

/// Head outputs that reproduce `gt` exactly: means equal to the ground
/// truth, logits of +/- `saturation` marking the first L_gt slots valid.
/// Unused slots get `filler_s` durations. Values are leaf parameters.
inline FixationPrediction prediction_from_scanpath(const Scanpath& gt, const ScreenGeometry& geom, int slots,
                                                   double saturation = 40.0, double filler_s = 0.2) {
    if (static_cast<int>(gt.size()) > slots) throw UsageError("prediction_from_scanpath: more fixations than slots");
    Mat x = Mat::Constant(slots, 1, 0.5), y = Mat::Constant(slots, 1, 0.5), t = Mat::Constant(slots, 1, filler_s);
    Mat s = Mat::Constant(slots, 1, -saturation);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        x(r, 0) = gt.fixations[i].x / geom.width;
        y(r, 0) = gt.fixations[i].y / geom.height;
        t(r, 0) = gt.fixations[i].duration_ms / 1000.0;
        s(r, 0) = saturation;
    }
    FixationPrediction p;
    p.mu_x = Tensor::parameter(x);
    p.mu_y = Tensor::parameter(y);
    p.mu_t = Tensor::parameter(t);
    p.sigma_x = Tensor::parameter(Mat::Constant(slots, 1, 0.05));
    p.sigma_y = Tensor::parameter(Mat::Constant(slots, 1, 0.05));
    p.sigma_t = Tensor::parameter(Mat::Constant(slots, 1, 0.05));
    p.logits = Tensor::parameter(s);
    return p;
}

} // namespace keygaze::model
