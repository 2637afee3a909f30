#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "lanecast/core/errors.hpp"
#include "lanecast/core/labels.hpp"
#include "lanecast/core/rng.hpp"
#include "lanecast/nn/adam.hpp"
#include "lanecast/nn/graph.hpp"
#include "lanecast/nn/tensor.hpp"

namespace lanecast {

struct LstmConfig {
    std::string name;
    std::vector<std::int64_t> layer_dims;  // hidden width per stacked layer
    nn::AdamConfig opt;
};

struct CnnConfig {
    std::string name;
    std::int64_t in_channels = 1;   // how the 36 columns are folded into channels
    std::int64_t conv1_channels = 12;
    std::int64_t conv2_channels = 18;
    std::int64_t pool = 2;
    std::int64_t kernel_t = 3;
    bool batch_norm = false;
    std::int64_t ff1 = 64;
    std::int64_t ff2 = 32;
    double dropout_rate = 0.5;
    nn::AdamConfig opt;
};

struct TransformerConfig {
    std::string name;
    std::int64_t n_layers = 1;
    std::int64_t n_heads = 16;
    std::int64_t d_emb = 16;
    std::int64_t ff_width = 16;
    double pe_dropout = 0.1;
    nn::AdamConfig opt;
};

using ModelConfig = std::variant<LstmConfig, CnnConfig, TransformerConfig>;

// The nine benchmark configurations.
inline ModelConfig model_config(const std::string& name) {
    const nn::AdamConfig lstm_opt{1e-3, 0.9, 0.999, 1e-8, 0.0};
    const nn::AdamConfig cnn_opt{1e-4, 0.9, 0.999, 1e-8, 0.0};
    const nn::AdamConfig tn_opt{7e-4, 0.9, 0.999, 1e-8, 0.004};
    if (name == "lstm1") return LstmConfig{name, {2, 2, 1}, lstm_opt};
    if (name == "lstm2") return LstmConfig{name, {2, 2}, lstm_opt};
    if (name == "lstm3") return LstmConfig{name, {2, 1}, lstm_opt};
    if (name == "cnn1") return CnnConfig{name, 9, 12, 18, 2, 5, true, 64, 32, 0.5, cnn_opt};
    if (name == "cnn2") return CnnConfig{name, 1, 12, 18, 2, 3, false, 256, 128, 0.5, cnn_opt};
    if (name == "cnn3") return CnnConfig{name, 1, 18, 6, 2, 5, true, 64, 32, 0.5, cnn_opt};
    if (name == "tn1") return TransformerConfig{name, 1, 16, 16, 16, 0.1, tn_opt};
    if (name == "tn2") return TransformerConfig{name, 1, 16, 128, 64, 0.1, tn_opt};
    if (name == "tn3") return TransformerConfig{name, 4, 16, 128, 64, 0.1, tn_opt};
    throw BadConfig("unknown architecture '" + name + "'");
}

inline const std::vector<std::string>& known_architectures() {
    static const std::vector<std::string> names = {"lstm1", "lstm2", "lstm3", "cnn1", "cnn2",
                                                   "cnn3",  "tn1",   "tn2",   "tn3"};
    return names;
}

inline nn::AdamConfig optimizer_config(const ModelConfig& cfg) {
    return std::visit([](const auto& c) { return c.opt; }, cfg);
}

inline std::string config_name(const ModelConfig& cfg) {
    return std::visit([](const auto& c) { return c.name; }, cfg);
}

// Head widths for multi-head attention: the first n-1 heads get
// floor(d_emb/n) dims each and the last head absorbs the remainder.
inline std::vector<std::int64_t> head_dims(std::int64_t d_emb, std::int64_t n_heads) {
    if (n_heads < 1) throw BadConfig("attention needs at least one head");
    const std::int64_t base = d_emb / n_heads;
    if (base < 1)
        throw TooManyHeads("cannot split " + std::to_string(d_emb) + " embedding dims into " +
                           std::to_string(n_heads) + " heads");
    std::vector<std::int64_t> dims(static_cast<std::size_t>(n_heads), base);
    dims.back() = d_emb - (n_heads - 1) * base;
    return dims;
}

// Sinusoidal positional encoding with base 1000 and 1-indexed positions and
// dimensions: odd dimensions carry sin((i-1)/1000^((j-1)/d)), even ones
// cos((i-1)/1000^((j-2)/d)).  In 0-indexed storage pe[0][0] = sin(0) = 0 and
// pe[0][1] = cos(0) = 1.
template <typename T>
nn::Tensor<T> positional_encoding(std::int64_t n, std::int64_t d_emb) {
    constexpr double kBase = 1000.0;
    nn::Tensor<T> pe = nn::Tensor<T>::zeros({n, d_emb});
    for (std::int64_t r = 0; r < n; ++r)
        for (std::int64_t c = 0; c < d_emb; ++c) {
            const double exponent =
                static_cast<double>(c % 2 == 0 ? c : c - 1) / static_cast<double>(d_emb);
            const double angle = static_cast<double>(r) / std::pow(kBase, exponent);
            pe.at2(r, c) = static_cast<T>(c % 2 == 0 ? std::sin(angle) : std::cos(angle));
        }
    return pe;
}

// Uniform init in (-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename T>
nn::Tensor<T> init_uniform(std::vector<std::int64_t> shape, std::int64_t fan_in, Rng& rng) {
    nn::Tensor<T> t(std::move(shape));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    t.fill_uniform(rng, -bound, bound);
    return t;
}

// What a model's forward pass hands back: classifier scores plus the graph
// leaves for each trainable tensor, in the same order as trainable_params().
template <typename T>
struct ForwardResult {
    nn::Var<T> logits = nullptr;
    std::vector<nn::Var<T>> param_leaves;
};

}  // namespace lanecast
