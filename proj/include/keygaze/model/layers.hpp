#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "keygaze/autodiff/optim.hpp"
#include "keygaze/autodiff/tensor.hpp"

namespace keygaze::model {

using ad::Mat;
using ad::NamedParam;
using ad::Tensor;

/// Glorot-uniform initial weights.
inline Mat glorot(int in, int out, std::mt19937_64& eng) {
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-a, a);
    Mat m(in, out);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(eng);
    return m;
}

struct Linear {
    Tensor w, b;

    Linear() = default;
    Linear(int in, int out, std::mt19937_64& eng)
        : w(Tensor::parameter(glorot(in, out, eng))), b(Tensor::parameter(Mat::Zero(1, out))) {}

    Tensor operator()(const Tensor& x) const { return ad::add(ad::matmul(x, w), b); }

    void collect(std::vector<NamedParam>& out, const std::string& prefix) const {
        out.push_back({prefix + ".w", w});
        out.push_back({prefix + ".b", b});
    }
};

struct LayerNorm {
    Tensor gamma, beta;

    LayerNorm() = default;
    explicit LayerNorm(int d) : gamma(Tensor::parameter(Mat::Ones(1, d))), beta(Tensor::parameter(Mat::Zero(1, d))) {}

    Tensor operator()(const Tensor& x) const { return ad::layer_norm(x, gamma, beta); }

    void collect(std::vector<NamedParam>& out, const std::string& prefix) const {
        out.push_back({prefix + ".gamma", gamma});
        out.push_back({prefix + ".beta", beta});
    }
};

/// Scaled dot-product attention split over heads. `key_mask` (1 x Tk, 1 =
/// attend) hides padded keys from every query.
struct MultiHeadAttention {
    Linear q, k, v, o;
    int heads = 1;

    MultiHeadAttention() = default;
    MultiHeadAttention(int d, int h, std::mt19937_64& eng)
        : q(d, d, eng), k(d, d, eng), v(d, d, eng), o(d, d, eng), heads(h) {}

    struct Output {
        Tensor out;
        std::vector<Mat> weights; // per head, Tq x Tk
    };

    Output attend(const Tensor& query, const Tensor& keys, const Mat* key_mask = nullptr) const {
        const Tensor Q = q(query), K = k(keys), V = v(keys);
        const auto d = Q.cols();
        const auto dh = d / heads;
        const double s = 1.0 / std::sqrt(static_cast<double>(dh));
        Mat mask;
        if (key_mask) mask = key_mask->replicate(query.rows(), 1);
        Output r;
        std::vector<Tensor> parts;
        for (int h = 0; h < heads; ++h) {
            const Tensor qh = ad::slice_cols(Q, h * dh, dh);
            const Tensor kh = ad::slice_cols(K, h * dh, dh);
            const Tensor vh = ad::slice_cols(V, h * dh, dh);
            const Tensor a = ad::softmax(ad::scale(ad::matmul(qh, ad::transpose(kh)), s), 1, key_mask ? &mask : nullptr);
            r.weights.push_back(a.value());
            parts.push_back(ad::matmul(a, vh));
        }
        r.out = o(ad::concat_cols(parts));
        return r;
    }

    Tensor operator()(const Tensor& query, const Tensor& keys, const Mat* key_mask = nullptr) const {
        return attend(query, keys, key_mask).out;
    }

    void collect(std::vector<NamedParam>& out, const std::string& prefix) const {
        q.collect(out, prefix + ".q");
        k.collect(out, prefix + ".k");
        v.collect(out, prefix + ".v");
        o.collect(out, prefix + ".o");
    }
};

struct FeedForward {
    Linear in, out;

    FeedForward() = default;
    FeedForward(int d, int width, std::mt19937_64& eng) : in(d, width, eng), out(width, d, eng) {}

    Tensor operator()(const Tensor& x) const { return out(ad::gelu(in(x))); }

    void collect(std::vector<NamedParam>& o, const std::string& prefix) const {
        in.collect(o, prefix + ".in");
        out.collect(o, prefix + ".out");
    }
};

/// Pre-norm encoder block.
struct EncoderLayer {
    LayerNorm ln1, ln2;
    MultiHeadAttention attn;
    FeedForward ffn;

    EncoderLayer() = default;
    EncoderLayer(int d, int h, int width, std::mt19937_64& eng)
        : ln1(d), ln2(d), attn(d, h, eng), ffn(d, width, eng) {}

    Tensor operator()(const Tensor& x, const Mat* mask) const {
        const Tensor n1 = ln1(x);
        const Tensor y = ad::add(x, attn(n1, n1, mask));
        return ad::add(y, ffn(ln2(y)));
    }

    void collect(std::vector<NamedParam>& o, const std::string& prefix) const {
        ln1.collect(o, prefix + ".ln1");
        ln2.collect(o, prefix + ".ln2");
        attn.collect(o, prefix + ".attn");
        ffn.collect(o, prefix + ".ffn");
    }
};

/// Pre-norm decoder block: self-attention over slots, cross-attention to
/// the encoded taps, feed-forward.
struct DecoderLayer {
    LayerNorm ln1, ln2, ln3;
    MultiHeadAttention self_attn, cross_attn;
    FeedForward ffn;

    DecoderLayer() = default;
    DecoderLayer(int d, int h, int width, std::mt19937_64& eng)
        : ln1(d), ln2(d), ln3(d), self_attn(d, h, eng), cross_attn(d, h, eng), ffn(d, width, eng) {}

    Tensor operator()(const Tensor& x, const Tensor& memory, const Mat* memory_mask) const {
        const Tensor n1 = ln1(x);
        Tensor y = ad::add(x, self_attn(n1, n1));
        y = ad::add(y, cross_attn(ln2(y), memory, memory_mask));
        return ad::add(y, ffn(ln3(y)));
    }

    void collect(std::vector<NamedParam>& o, const std::string& prefix) const {
        ln1.collect(o, prefix + ".ln1");
        ln2.collect(o, prefix + ".ln2");
        ln3.collect(o, prefix + ".ln3");
        self_attn.collect(o, prefix + ".self_attn");
        cross_attn.collect(o, prefix + ".cross_attn");
        ffn.collect(o, prefix + ".ffn");
    }
};

/// Sinusoidal position table, rows = positions.
inline Mat positional_encoding(int rows, int d) {
    Mat pe(rows, d);
    for (int p = 0; p < rows; ++p)
        for (int i = 0; i < d; ++i) {
            const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
            pe(p, i) = (i % 2 == 0) ? std::sin(p * freq) : std::cos(p * freq);
        }
    return pe;
}

} // namespace keygaze::model
