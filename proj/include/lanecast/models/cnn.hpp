#pragma once

#include <string>
#include <vector>

#include "lanecast/models/common.hpp"
#include "lanecast/nn/graph.hpp"
#include "lanecast/nn/ops.hpp"

namespace lanecast {

// Two temporal convolution blocks (conv -> optional batch norm -> ReLU ->
// max-pool) followed by a dropout-regularized two-layer classifier head.
// The feature axis is folded into channels up front: with in_channels = 9
// each surrounding-vehicle block becomes its own channel, with 1 the whole
// 36-column row stays a single image.
template <typename T>
class CnnNet {
public:
    CnnNet(CnnConfig cfg, std::int64_t seq_len, std::int64_t input_dim, Rng& init_rng)
        : cfg_(std::move(cfg)), seq_len_(seq_len), input_dim_(input_dim) {
        if (input_dim % cfg_.in_channels != 0)
            throw IndivisibleChannels(cfg_.name + ": " + std::to_string(input_dim) +
                                      " columns not divisible into " +
                                      std::to_string(cfg_.in_channels) + " channels");
        width_ = input_dim / cfg_.in_channels;
        t1_ = seq_len / cfg_.pool;
        t2_ = t1_ / cfg_.pool;
        if (t2_ < 1)
            throw ShapeError(cfg_.name + ": sequence of " + std::to_string(seq_len) +
                             " frames collapses to nothing after two pools");
        flat_ = cfg_.conv2_channels * t2_ * width_;

        const std::int64_t fan1 = cfg_.in_channels * cfg_.kernel_t;
        conv1_k_ = init_uniform<T>({cfg_.conv1_channels, cfg_.in_channels, cfg_.kernel_t}, fan1,
                                   init_rng);
        conv1_b_ = init_uniform<T>({cfg_.conv1_channels}, fan1, init_rng);
        const std::int64_t fan2 = cfg_.conv1_channels * cfg_.kernel_t;
        conv2_k_ = init_uniform<T>({cfg_.conv2_channels, cfg_.conv1_channels, cfg_.kernel_t}, fan2,
                                   init_rng);
        conv2_b_ = init_uniform<T>({cfg_.conv2_channels}, fan2, init_rng);
        if (cfg_.batch_norm) {
            bn1_gamma_ = nn::Tensor<T>::full({cfg_.conv1_channels}, T(1));
            bn1_beta_ = nn::Tensor<T>::zeros({cfg_.conv1_channels});
            bn1_mean_ = nn::Tensor<T>::zeros({cfg_.conv1_channels});
            bn1_var_ = nn::Tensor<T>::full({cfg_.conv1_channels}, T(1));
            bn2_gamma_ = nn::Tensor<T>::full({cfg_.conv2_channels}, T(1));
            bn2_beta_ = nn::Tensor<T>::zeros({cfg_.conv2_channels});
            bn2_mean_ = nn::Tensor<T>::zeros({cfg_.conv2_channels});
            bn2_var_ = nn::Tensor<T>::full({cfg_.conv2_channels}, T(1));
        }
        ff1_w_ = init_uniform<T>({cfg_.ff1, flat_}, flat_, init_rng);
        ff1_b_ = init_uniform<T>({cfg_.ff1}, flat_, init_rng);
        ff2_w_ = init_uniform<T>({cfg_.ff2, cfg_.ff1}, cfg_.ff1, init_rng);
        ff2_b_ = init_uniform<T>({cfg_.ff2}, cfg_.ff1, init_rng);
        head_w_ = init_uniform<T>({kClassCount, cfg_.ff2}, cfg_.ff2, init_rng);
        head_b_ = init_uniform<T>({kClassCount}, cfg_.ff2, init_rng);
    }

    const CnnConfig& config() const { return cfg_; }
    std::int64_t sequence_length() const { return seq_len_; }
    std::int64_t input_dim() const { return input_dim_; }

    std::vector<std::pair<std::string, nn::Tensor<T>*>> named_tensors() {
        std::vector<std::pair<std::string, nn::Tensor<T>*>> out = {
            {"conv1.k", &conv1_k_}, {"conv1.b", &conv1_b_},
            {"conv2.k", &conv2_k_}, {"conv2.b", &conv2_b_},
        };
        if (cfg_.batch_norm) {
            out.emplace_back("bn1.gamma", &bn1_gamma_);
            out.emplace_back("bn1.beta", &bn1_beta_);
            out.emplace_back("bn2.gamma", &bn2_gamma_);
            out.emplace_back("bn2.beta", &bn2_beta_);
        }
        out.emplace_back("ff1.w", &ff1_w_);
        out.emplace_back("ff1.b", &ff1_b_);
        out.emplace_back("ff2.w", &ff2_w_);
        out.emplace_back("ff2.b", &ff2_b_);
        out.emplace_back("head.w", &head_w_);
        out.emplace_back("head.b", &head_b_);
        if (cfg_.batch_norm) {
            // running statistics: saved with the model but not trained
            out.emplace_back("bn1.running_mean", &bn1_mean_);
            out.emplace_back("bn1.running_var", &bn1_var_);
            out.emplace_back("bn2.running_mean", &bn2_mean_);
            out.emplace_back("bn2.running_var", &bn2_var_);
        }
        return out;
    }

    std::vector<nn::Tensor<T>*> trainable_params() {
        std::vector<nn::Tensor<T>*> out = {&conv1_k_, &conv1_b_, &conv2_k_, &conv2_b_};
        if (cfg_.batch_norm) {
            out.push_back(&bn1_gamma_);
            out.push_back(&bn1_beta_);
            out.push_back(&bn2_gamma_);
            out.push_back(&bn2_beta_);
        }
        out.push_back(&ff1_w_);
        out.push_back(&ff1_b_);
        out.push_back(&ff2_w_);
        out.push_back(&ff2_b_);
        out.push_back(&head_w_);
        out.push_back(&head_b_);
        return out;
    }

    ForwardResult<T> forward(nn::Graph<T>& g, const nn::Tensor<T>& x, bool train_mode, Rng& rng) {
        if (x.rank() != 3 || x.dim(1) != seq_len_ || x.dim(2) != input_dim_)
            throw ShapeError(cfg_.name + ": input " + x.shape_string() + " does not match [B, " +
                             std::to_string(seq_len_) + ", " + std::to_string(input_dim_) + "]");

        ForwardResult<T> fr;
        auto bind = [&](nn::Tensor<T>& t) {
            nn::Var<T> v = g.leaf(t);
            fr.param_leaves.push_back(v);
            return v;
        };
        nn::Var<T> c1k = bind(conv1_k_), c1b = bind(conv1_b_);
        nn::Var<T> c2k = bind(conv2_k_), c2b = bind(conv2_b_);
        nn::Var<T> g1 = nullptr, b1 = nullptr, g2 = nullptr, b2 = nullptr;
        if (cfg_.batch_norm) {
            g1 = bind(bn1_gamma_);
            b1 = bind(bn1_beta_);
            g2 = bind(bn2_gamma_);
            b2 = bind(bn2_beta_);
        }
        nn::Var<T> f1w = bind(ff1_w_), f1b = bind(ff1_b_);
        nn::Var<T> f2w = bind(ff2_w_), f2b = bind(ff2_b_);
        nn::Var<T> hw = bind(head_w_), hb = bind(head_b_);

        nn::Var<T> h = nn::to_channels(g.constant(x), cfg_.in_channels);
        h = nn::conv_time(h, c1k, c1b);
        if (cfg_.batch_norm) h = nn::batch_norm_chan(h, g1, b1, bn1_mean_, bn1_var_, train_mode);
        h = nn::relu(h);
        h = nn::max_pool_time(h, cfg_.pool);
        h = nn::conv_time(h, c2k, c2b);
        if (cfg_.batch_norm) h = nn::batch_norm_chan(h, g2, b2, bn2_mean_, bn2_var_, train_mode);
        h = nn::relu(h);
        h = nn::max_pool_time(h, cfg_.pool);
        h = nn::reshape(h, {x.dim(0), flat_});
        h = nn::relu(nn::add_bias(nn::linear(h, f1w), f1b));
        h = nn::dropout(h, cfg_.dropout_rate, train_mode, rng);
        h = nn::relu(nn::add_bias(nn::linear(h, f2w), f2b));
        fr.logits = nn::add_bias(nn::linear(h, hw), hb);
        return fr;
    }

private:
    CnnConfig cfg_;
    std::int64_t seq_len_;
    std::int64_t input_dim_;
    std::int64_t width_ = 0;  // columns per channel
    std::int64_t t1_ = 0, t2_ = 0;
    std::int64_t flat_ = 0;

    nn::Tensor<T> conv1_k_, conv1_b_, conv2_k_, conv2_b_;
    nn::Tensor<T> bn1_gamma_, bn1_beta_, bn2_gamma_, bn2_beta_;
    nn::Tensor<T> bn1_mean_, bn1_var_, bn2_mean_, bn2_var_;  // buffers
    nn::Tensor<T> ff1_w_, ff1_b_, ff2_w_, ff2_b_;
    nn::Tensor<T> head_w_, head_b_;
};

}  // namespace lanecast
