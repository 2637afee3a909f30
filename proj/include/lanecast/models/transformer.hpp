#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "lanecast/models/common.hpp"
#include "lanecast/nn/graph.hpp"
#include "lanecast/nn/ops.hpp"

namespace lanecast {

// Encoder-only transformer classifier.  Input rows are linearly embedded
// (no bias), shifted by a dropout-regularized sinusoidal positional
// encoding, passed through the encoder stack, mean-pooled over time and
// mapped to three raw class scores.
//
// Attention follows the two-stage projection scheme: shared Q/K/V maps of
// size d_emb x d_emb feed per-head projections whose widths come from
// head_dims(); uneven splits land in the last head.
template <typename T>
class TransformerNet {
public:
    TransformerNet(TransformerConfig cfg, std::int64_t seq_len, std::int64_t input_dim,
                   Rng& init_rng)
        : cfg_(std::move(cfg)), seq_len_(seq_len), input_dim_(input_dim) {
        head_dims_ = head_dims(cfg_.d_emb, cfg_.n_heads);
        pe_ = positional_encoding<T>(seq_len, cfg_.d_emb);
        emb_w_ = init_uniform<T>({cfg_.d_emb, input_dim}, input_dim, init_rng);
        const std::int64_t d = cfg_.d_emb;
        for (std::int64_t l = 0; l < cfg_.n_layers; ++l) {
            Layer layer;
            layer.w_q = init_uniform<T>({d, d}, d, init_rng);
            layer.w_k = init_uniform<T>({d, d}, d, init_rng);
            layer.w_v = init_uniform<T>({d, d}, d, init_rng);
            for (std::int64_t dh : head_dims_) {
                layer.w_qh.push_back(init_uniform<T>({dh, d}, d, init_rng));
                layer.w_kh.push_back(init_uniform<T>({dh, d}, d, init_rng));
                layer.w_vh.push_back(init_uniform<T>({dh, d}, d, init_rng));
            }
            layer.w_a = init_uniform<T>({d, d}, d, init_rng);
            layer.ff1_w = init_uniform<T>({cfg_.ff_width, d}, d, init_rng);
            layer.ff1_b = init_uniform<T>({cfg_.ff_width}, d, init_rng);
            layer.ff2_w = init_uniform<T>({d, cfg_.ff_width}, cfg_.ff_width, init_rng);
            layer.ff2_b = init_uniform<T>({d}, cfg_.ff_width, init_rng);
            layer.ln1_g = nn::Tensor<T>::full({d}, T(1));
            layer.ln1_b = nn::Tensor<T>::zeros({d});
            layer.ln2_g = nn::Tensor<T>::full({d}, T(1));
            layer.ln2_b = nn::Tensor<T>::zeros({d});
            layers_.push_back(std::move(layer));
        }
        head_w_ = init_uniform<T>({kClassCount, d}, d, init_rng);
        head_b_ = init_uniform<T>({kClassCount}, d, init_rng);
    }

    const TransformerConfig& config() const { return cfg_; }
    std::int64_t sequence_length() const { return seq_len_; }
    std::int64_t input_dim() const { return input_dim_; }
    const nn::Tensor<T>& pe() const { return pe_; }

    std::vector<std::pair<std::string, nn::Tensor<T>*>> named_tensors() {
        std::vector<std::pair<std::string, nn::Tensor<T>*>> out;
        out.emplace_back("emb.w", &emb_w_);
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            Layer& layer = layers_[l];
            const std::string p = "layer" + std::to_string(l) + ".";
            out.emplace_back(p + "w_q", &layer.w_q);
            out.emplace_back(p + "w_k", &layer.w_k);
            out.emplace_back(p + "w_v", &layer.w_v);
            for (std::size_t h = 0; h < layer.w_qh.size(); ++h) {
                const std::string hp = p + "head" + std::to_string(h) + ".";
                out.emplace_back(hp + "w_q", &layer.w_qh[h]);
                out.emplace_back(hp + "w_k", &layer.w_kh[h]);
                out.emplace_back(hp + "w_v", &layer.w_vh[h]);
            }
            out.emplace_back(p + "w_a", &layer.w_a);
            out.emplace_back(p + "ff1.w", &layer.ff1_w);
            out.emplace_back(p + "ff1.b", &layer.ff1_b);
            out.emplace_back(p + "ff2.w", &layer.ff2_w);
            out.emplace_back(p + "ff2.b", &layer.ff2_b);
            out.emplace_back(p + "ln1.g", &layer.ln1_g);
            out.emplace_back(p + "ln1.b", &layer.ln1_b);
            out.emplace_back(p + "ln2.g", &layer.ln2_g);
            out.emplace_back(p + "ln2.b", &layer.ln2_b);
        }
        out.emplace_back("head.w", &head_w_);
        out.emplace_back("head.b", &head_b_);
        return out;
    }

    std::vector<nn::Tensor<T>*> trainable_params() {
        std::vector<nn::Tensor<T>*> out;
        for (auto& [name, t] : named_tensors()) out.push_back(t);
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

        nn::Var<T> emb_w = bind(emb_w_);
        struct BoundLayer {
            nn::Var<T> w_q, w_k, w_v, w_a;
            std::vector<nn::Var<T>> w_qh, w_kh, w_vh;
            nn::Var<T> ff1_w, ff1_b, ff2_w, ff2_b;
            nn::Var<T> ln1_g, ln1_b, ln2_g, ln2_b;
        };
        std::vector<BoundLayer> bound;
        for (Layer& layer : layers_) {
            BoundLayer bl;
            bl.w_q = bind(layer.w_q);
            bl.w_k = bind(layer.w_k);
            bl.w_v = bind(layer.w_v);
            for (std::size_t h = 0; h < layer.w_qh.size(); ++h) {
                bl.w_qh.push_back(bind(layer.w_qh[h]));
                bl.w_kh.push_back(bind(layer.w_kh[h]));
                bl.w_vh.push_back(bind(layer.w_vh[h]));
            }
            bl.w_a = bind(layer.w_a);
            bl.ff1_w = bind(layer.ff1_w);
            bl.ff1_b = bind(layer.ff1_b);
            bl.ff2_w = bind(layer.ff2_w);
            bl.ff2_b = bind(layer.ff2_b);
            bl.ln1_g = bind(layer.ln1_g);
            bl.ln1_b = bind(layer.ln1_b);
            bl.ln2_g = bind(layer.ln2_g);
            bl.ln2_b = bind(layer.ln2_b);
            bound.push_back(std::move(bl));
        }
        nn::Var<T> head_w = bind(head_w_);
        nn::Var<T> head_b = bind(head_b_);

        nn::Var<T> h = nn::linear(g.constant(x), emb_w);  // [B, n, d_emb]
        nn::Var<T> pe = nn::dropout(g.constant(pe_), cfg_.pe_dropout, train_mode, rng);
        h = nn::add_broadcast(h, pe);

        for (const BoundLayer& bl : bound) {
            nn::Var<T> q = nn::linear(h, bl.w_q);
            nn::Var<T> k = nn::linear(h, bl.w_k);
            nn::Var<T> v = nn::linear(h, bl.w_v);
            std::vector<nn::Var<T>> heads;
            for (std::size_t hi = 0; hi < bl.w_qh.size(); ++hi) {
                nn::Var<T> qh = nn::linear(q, bl.w_qh[hi]);
                nn::Var<T> kh = nn::linear(k, bl.w_kh[hi]);
                nn::Var<T> vh = nn::linear(v, bl.w_vh[hi]);
                const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dims_[hi]));
                nn::Var<T> attn = nn::softmax_last(nn::scale(nn::matmul_nt(qh, kh), inv_sqrt));
                heads.push_back(nn::matmul(attn, vh));
            }
            nn::Var<T> a = nn::linear(nn::concat_last(heads), bl.w_a);
            nn::Var<T> t1 = nn::layer_norm(nn::add(a, h), bl.ln1_g, bl.ln1_b);
            nn::Var<T> ff = nn::add_bias(
                nn::linear(nn::relu(nn::add_bias(nn::linear(t1, bl.ff1_w), bl.ff1_b)), bl.ff2_w),
                bl.ff2_b);
            h = nn::layer_norm(nn::add(t1, ff), bl.ln2_g, bl.ln2_b);
        }

        fr.logits = nn::add_bias(nn::linear(nn::mean_time(h), head_w), head_b);
        return fr;
    }

private:
    struct Layer {
        nn::Tensor<T> w_q, w_k, w_v, w_a;
        std::vector<nn::Tensor<T>> w_qh, w_kh, w_vh;
        nn::Tensor<T> ff1_w, ff1_b, ff2_w, ff2_b;
        nn::Tensor<T> ln1_g, ln1_b, ln2_g, ln2_b;
    };

    TransformerConfig cfg_;
    std::int64_t seq_len_;
    std::int64_t input_dim_;
    std::vector<std::int64_t> head_dims_;
    nn::Tensor<T> pe_;
    nn::Tensor<T> emb_w_;
    std::vector<Layer> layers_;
    nn::Tensor<T> head_w_, head_b_;
};

}  // namespace lanecast
