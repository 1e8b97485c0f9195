#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "keygaze/core/error.hpp"

namespace keygaze::model {

struct LossSwitches {
    bool sim = true;
    bool len = true;
    bool f = true;
    bool v = true;
};

struct ModelConfig {
    int d_model = 64;
    int n_heads = 4;
    int n_encoder_layers = 2;
    int n_decoder_layers = 2;
    int max_fixations = 32; // N
    int max_taps = 48;
    int ffn_width = 128;
    double dropout = 0.0;   // accepted for completeness; only 0 is supported
    LossSwitches loss;
    bool use_param_inference = true;
    std::uint64_t seed = 0;

    void validate() const {
        if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0)
            throw UsageError("model: d_model must be a positive multiple of n_heads");
        if (max_fixations < 1) throw UsageError("model: max_fixations must be >= 1");
        if (max_taps < 2) throw UsageError("model: max_taps must be >= 2");
        if (n_encoder_layers < 0 || n_decoder_layers < 0 || ffn_width < 1)
            throw UsageError("model: layer counts must be non-negative");
        if (dropout != 0.0) throw UsageError("model: dropout is not supported (must be 0)");
    }
};

inline nlohmann::json to_json(const ModelConfig& c) {
    return {{"d_model", c.d_model},
            {"n_heads", c.n_heads},
            {"n_encoder_layers", c.n_encoder_layers},
            {"n_decoder_layers", c.n_decoder_layers},
            {"max_fixations", c.max_fixations},
            {"max_taps", c.max_taps},
            {"ffn_width", c.ffn_width},
            {"dropout", c.dropout},
            {"loss", {{"sim", c.loss.sim}, {"len", c.loss.len}, {"f", c.loss.f}, {"v", c.loss.v}}},
            {"use_param_inference", c.use_param_inference},
            {"seed", c.seed}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    try {
        c.d_model = j.at("d_model").get<int>();
        c.n_heads = j.at("n_heads").get<int>();
        c.n_encoder_layers = j.at("n_encoder_layers").get<int>();
        c.n_decoder_layers = j.at("n_decoder_layers").get<int>();
        c.max_fixations = j.at("max_fixations").get<int>();
        c.max_taps = j.at("max_taps").get<int>();
        c.ffn_width = j.at("ffn_width").get<int>();
        c.dropout = j.value("dropout", 0.0);
        const auto& l = j.at("loss");
        c.loss = {l.at("sim").get<bool>(), l.at("len").get<bool>(), l.at("f").get<bool>(), l.at("v").get<bool>()};
        c.use_param_inference = j.at("use_param_inference").get<bool>();
        c.seed = j.value("seed", std::uint64_t{0});
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model config: ") + e.what());
    }
    c.validate();
    return c;
}

} // namespace keygaze::model
