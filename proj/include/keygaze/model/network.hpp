#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "keygaze/autodiff/checkpoint.hpp"
#include "keygaze/core/types.hpp"
#include "keygaze/model/config.hpp"
#include "keygaze/model/layers.hpp"

namespace keygaze::model {

/// Per-slot head outputs, each N x 1. Positions are fractions of the screen
/// width/height, durations are seconds.
struct FixationPrediction {
    Tensor mu_x, mu_y, sigma_x, sigma_y, mu_t, sigma_t, logits;

    Eigen::Index slots() const { return mu_x.rows(); }
};

struct TapEncoding {
    Tensor features; // max_taps x d_model
    Mat mask;        // 1 x max_taps, 1 for real taps
    int count = 0;
};

struct FusionResult {
    Tensor fused;
    Tensor context;           // 1 x d_model (undefined when fusion is off)
    std::vector<Mat> weights; // per head, 1 x max_taps
};

enum class DecodeMode { Mean, Sample };

struct DecodedScanpath {
    Scanpath scanpath;
    bool degenerate = false; // no slot was valid; slot 0 was emitted
};

/// Chunk boundaries for logs longer than max_taps: windows of `size` taps
/// advancing by size - overlap.
inline std::vector<std::pair<std::size_t, std::size_t>> tap_chunks(std::size_t n, std::size_t size,
                                                                   std::size_t overlap) {
    if (size <= overlap) throw UsageError("chunking: size must exceed overlap");
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (n <= size) return {{0, n}};
    for (std::size_t s = 0;; s += size - overlap) {
        const std::size_t e = std::min(n, s + size);
        out.push_back({s, e});
        if (e == n) break;
    }
    return out;
}

class ScanpathModel {
public:
    static constexpr int kHeadOutputs = 7; // mx, my, sx, sy, mt, st, logit
    static constexpr std::size_t kChunkOverlap = 8;

    explicit ScanpathModel(ModelConfig cfg = {}, ScreenGeometry geom = {}) : cfg_(cfg), geom_(geom) {
        cfg_.validate();
        geom_.validate();
        std::mt19937_64 eng(cfg_.seed ^ 0x6b657967617a65ULL);
        const int d = cfg_.d_model;
        tap_in_ = Linear(3, d, eng);
        theta_in_ = Linear(3, d, eng);
        fusion_ = MultiHeadAttention(d, cfg_.n_heads, eng);
        for (int i = 0; i < cfg_.n_encoder_layers; ++i) encoder_.emplace_back(d, cfg_.n_heads, cfg_.ffn_width, eng);
        for (int i = 0; i < cfg_.n_decoder_layers; ++i) decoder_.emplace_back(d, cfg_.n_heads, cfg_.ffn_width, eng);
        enc_norm_ = LayerNorm(d);
        dec_norm_ = LayerNorm(d);
        Mat q = positional_encoding(cfg_.max_fixations, d);
        std::normal_distribution<double> nd(0.0, 0.1);
        for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] += nd(eng);
        slots_ = Tensor::parameter(q);
        head_ = Linear(d, kHeadOutputs, eng);
        pe_ = positional_encoding(cfg_.max_taps, d);
    }

    const ModelConfig& config() const { return cfg_; }
    ModelConfig& mutable_config() { return cfg_; }
    const ScreenGeometry& geometry() const { return geom_; }

    std::vector<NamedParam> parameters() const {
        std::vector<NamedParam> p;
        tap_in_.collect(p, "tap_in");
        theta_in_.collect(p, "theta_in");
        fusion_.collect(p, "fusion");
        for (std::size_t i = 0; i < encoder_.size(); ++i) encoder_[i].collect(p, "encoder." + std::to_string(i));
        enc_norm_.collect(p, "enc_norm");
        p.push_back({"slots", slots_});
        for (std::size_t i = 0; i < decoder_.size(); ++i) decoder_[i].collect(p, "decoder." + std::to_string(i));
        dec_norm_.collect(p, "dec_norm");
        head_.collect(p, "head");
        return p;
    }

    /// Raw (x/width, y/height, iki/1000) rows; the first interval is measured
    /// from `origin_ms`.
    Mat raw_tap_features(const std::vector<TapEvent>& taps, double origin_ms = 0.0) const {
        Mat f(static_cast<Eigen::Index>(taps.size()), 3);
        double prev = origin_ms;
        for (std::size_t i = 0; i < taps.size(); ++i) {
            f(static_cast<Eigen::Index>(i), 0) = taps[i].x / geom_.width;
            f(static_cast<Eigen::Index>(i), 1) = taps[i].y / geom_.height;
            f(static_cast<Eigen::Index>(i), 2) = (taps[i].time_ms - prev) / 1000.0;
            prev = taps[i].time_ms;
        }
        return f;
    }

    TapEncoding encode_taps(const std::vector<TapEvent>& taps, double origin_ms = 0.0) const {
        if (taps.empty()) throw DataError("encode_taps: empty log");
        if (taps.size() > static_cast<std::size_t>(cfg_.max_taps))
            throw UsageError("encode_taps: " + std::to_string(taps.size()) + " taps exceed max_taps " +
                             std::to_string(cfg_.max_taps) + " (split the log first)");
        TapEncoding e;
        e.count = static_cast<int>(taps.size());
        Mat raw = Mat::Zero(cfg_.max_taps, 3);
        raw.topRows(e.count) = raw_tap_features(taps, origin_ms);
        e.mask = Mat::Zero(1, cfg_.max_taps);
        e.mask.leftCols(e.count).setOnes();
        e.features = ad::add(tap_in_(Tensor::constant(raw)), Tensor::constant(pe_));
        return e;
    }

    TapEncoding encode_taps(const KeypressLog& log) const { return encode_taps(log.taps, 0.0); }

    FusionResult fuse_params(const TapEncoding& taps, const HumanParams& theta) const {
        theta.validate();
        FusionResult r;
        if (!cfg_.use_param_inference) {
            r.fused = taps.features;
            return r;
        }
        Mat t(1, 3);
        t << theta.e_k, theta.f_k, theta.lambda;
        const Tensor query = theta_in_(Tensor::constant(t));
        auto att = fusion_.attend(query, taps.features, &taps.mask);
        r.context = att.out;
        r.weights = std::move(att.weights);
        r.fused = ad::add(taps.features, r.context);
        return r;
    }

    /// Encoder/decoder pass over a fused sequence.
    FixationPrediction heads(const Tensor& fused, const Mat& mask) const {
        Tensor x = fused;
        for (const auto& layer : encoder_) x = layer(x, &mask);
        const Tensor memory = enc_norm_(x);
        Tensor y = slots_;
        for (const auto& layer : decoder_) y = layer(y, memory, &mask);
        const Tensor out = head_(dec_norm_(y));
        FixationPrediction p;
        p.mu_x = ad::sigmoid(ad::slice_cols(out, 0, 1));
        p.mu_y = ad::sigmoid(ad::slice_cols(out, 1, 1));
        p.sigma_x = ad::add_scalar(ad::softplus(ad::slice_cols(out, 2, 1)), 1e-4);
        p.sigma_y = ad::add_scalar(ad::softplus(ad::slice_cols(out, 3, 1)), 1e-4);
        p.mu_t = ad::softplus(ad::slice_cols(out, 4, 1));
        p.sigma_t = ad::add_scalar(ad::softplus(ad::slice_cols(out, 5, 1)), 1e-4);
        p.logits = ad::slice_cols(out, 6, 1);
        return p;
    }

    FixationPrediction forward(const std::vector<TapEvent>& taps, const HumanParams& theta,
                               double origin_ms = 0.0) const {
        const TapEncoding enc = encode_taps(taps, origin_ms);
        return heads(fuse_params(enc, theta).fused, enc.mask);
    }

    FixationPrediction forward(const KeypressLog& log, const HumanParams& theta) const {
        return forward(log.taps, theta, 0.0);
    }

    /// Leading run of slots with sigmoid(logit) > 0.5; means or seeded
    /// Gaussian samples; pixels and milliseconds; onsets from `origin_ms`.
    DecodedScanpath decode(const FixationPrediction& p, DecodeMode mode = DecodeMode::Mean, std::uint64_t seed = 0,
                           double origin_ms = 0.0) const {
        std::mt19937_64 eng(seed);
        std::normal_distribution<double> nd(0.0, 1.0);
        DecodedScanpath out;
        Eigen::Index count = 0;
        while (count < p.slots() && p.logits.value()(count, 0) > 0.0) ++count;
        if (count == 0) {
            out.degenerate = true;
            count = 1;
        }
        double t = origin_ms;
        for (Eigen::Index i = 0; i < count; ++i) {
            double x = p.mu_x.value()(i, 0), y = p.mu_y.value()(i, 0), d = p.mu_t.value()(i, 0);
            if (mode == DecodeMode::Sample) {
                x += p.sigma_x.value()(i, 0) * nd(eng);
                y += p.sigma_y.value()(i, 0) * nd(eng);
                d += p.sigma_t.value()(i, 0) * nd(eng);
            }
            Fixation f;
            f.x = std::clamp(x, 0.0, 1.0) * geom_.width;
            f.y = std::clamp(y, 0.0, 1.0) * geom_.height;
            f.duration_ms = std::max(1.0, d * 1000.0);
            f.onset_ms = t;
            t += f.duration_ms;
            out.scanpath.fixations.push_back(f);
        }
        return out;
    }

    /// Full inference for a log of any length. Logs longer than max_taps are
    /// split into overlapping chunks; fixations of the overlap come from the
    /// later chunk.
    DecodedScanpath infer(const KeypressLog& log, const HumanParams& theta, DecodeMode mode = DecodeMode::Mean,
                          std::uint64_t seed = 0) const {
        if (log.taps.empty()) throw DataError("infer: trial '" + log.trial_id + "' has no taps");
        const auto chunks = tap_chunks(log.taps.size(), static_cast<std::size_t>(cfg_.max_taps), kChunkOverlap);
        DecodedScanpath out;
        out.scanpath.trial_id = log.trial_id;
        for (std::size_t c = 0; c < chunks.size(); ++c) {
            const auto [s, e] = chunks[c];
            const double origin = s == 0 ? 0.0 : log.taps[s - 1].time_ms;
            std::vector<TapEvent> part(log.taps.begin() + static_cast<std::ptrdiff_t>(s),
                                       log.taps.begin() + static_cast<std::ptrdiff_t>(e));
            auto d = decode(forward(part, theta, origin), mode, seed + c, origin);
            out.degenerate = out.degenerate || d.degenerate;
            auto& fx = out.scanpath.fixations;
            // drop earlier fixations starting at or after this chunk's origin; trim the one spanning it
            while (!fx.empty() && fx.back().onset_ms >= origin) fx.pop_back();
            if (!fx.empty()) fx.back().duration_ms = origin - fx.back().onset_ms;
            for (auto& f : d.scanpath.fixations) fx.push_back(f);
        }
        return out;
    }

    ad::Checkpoint to_checkpoint(std::uint64_t step = 0) const {
        ad::Checkpoint c;
        c.step = step;
        c.metadata = nlohmann::json{{"kind", "scanpath_model"}, {"config", to_json(cfg_)}}.dump();
        for (const auto& p : parameters()) c.tensors[p.name] = p.tensor.value();
        return c;
    }

    static ScanpathModel from_checkpoint(const ad::Checkpoint& c, ScreenGeometry geom = {}) {
        nlohmann::json meta;
        try {
            meta = nlohmann::json::parse(c.metadata);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("checkpoint metadata: ") + e.what());
        }
        if (meta.value("kind", "") != "scanpath_model") throw DataError("checkpoint is not a scanpath model");
        ScanpathModel m(model_config_from_json(meta.at("config")), geom);
        ad::load_parameters(c, m.parameters());
        return m;
    }

private:
    ModelConfig cfg_;
    ScreenGeometry geom_;
    Linear tap_in_, theta_in_;
    MultiHeadAttention fusion_;
    std::vector<EncoderLayer> encoder_;
    std::vector<DecoderLayer> decoder_;
    LayerNorm enc_norm_, dec_norm_;
    Tensor slots_;
    Linear head_;
    Mat pe_;
};

} // namespace keygaze::model
