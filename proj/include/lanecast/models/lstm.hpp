#pragma once

#include <string>
#include <vector>

#include "lanecast/models/common.hpp"
#include "lanecast/nn/graph.hpp"
#include "lanecast/nn/ops.hpp"

namespace lanecast {

// Stacked LSTM classifier.  Every layer but the last returns its full
// hidden sequence to the layer above; the last layer contributes only its
// final hidden state, which feeds a single affine map to the three class
// scores.
template <typename T>
class LstmNet {
public:
    LstmNet(LstmConfig cfg, std::int64_t seq_len, std::int64_t input_dim, Rng& init_rng)
        : cfg_(std::move(cfg)), seq_len_(seq_len), input_dim_(input_dim) {
        if (cfg_.layer_dims.empty()) throw BadConfig(cfg_.name + ": needs at least one layer");
        std::int64_t in = input_dim;
        for (std::int64_t width : cfg_.layer_dims) {
            Cell cell;
            for (int gate = 0; gate < 4; ++gate) {
                cell.w_x[gate] = init_uniform<T>({width, in}, in, init_rng);
                cell.w_h[gate] = init_uniform<T>({width, width}, width, init_rng);
                cell.bias[gate] = init_uniform<T>({width}, in, init_rng);
            }
            layers_.push_back(std::move(cell));
            in = width;
        }
        head_w_ = init_uniform<T>({kClassCount, in}, in, init_rng);
        head_b_ = init_uniform<T>({kClassCount}, in, init_rng);
    }

    const LstmConfig& config() const { return cfg_; }
    std::int64_t sequence_length() const { return seq_len_; }
    std::int64_t input_dim() const { return input_dim_; }

    std::vector<std::pair<std::string, nn::Tensor<T>*>> named_tensors() {
        static constexpr const char* kGateNames[4] = {"f", "i", "c", "o"};
        std::vector<std::pair<std::string, nn::Tensor<T>*>> out;
        for (std::size_t l = 0; l < layers_.size(); ++l)
            for (int g = 0; g < 4; ++g) {
                const std::string prefix = "layer" + std::to_string(l) + ".";
                out.emplace_back(prefix + "w_x" + kGateNames[g], &layers_[l].w_x[g]);
                out.emplace_back(prefix + "w_h" + kGateNames[g], &layers_[l].w_h[g]);
                out.emplace_back(prefix + "bias_" + kGateNames[g], &layers_[l].bias[g]);
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

    ForwardResult<T> forward(nn::Graph<T>& g, const nn::Tensor<T>& x, bool /*train_mode*/,
                             Rng& /*rng*/) {
        if (x.rank() != 3 || x.dim(1) != seq_len_ || x.dim(2) != input_dim_)
            throw ShapeError(cfg_.name + ": input " + x.shape_string() + " does not match [B, " +
                             std::to_string(seq_len_) + ", " + std::to_string(input_dim_) + "]");
        const std::int64_t batch = x.dim(0);

        ForwardResult<T> fr;
        std::vector<BoundCell> bound;
        for (Cell& cell : layers_) {
            BoundCell bc;
            for (int gate = 0; gate < 4; ++gate) {
                bc.w_x[gate] = g.leaf(cell.w_x[gate]);
                bc.w_h[gate] = g.leaf(cell.w_h[gate]);
                bc.bias[gate] = g.leaf(cell.bias[gate]);
                fr.param_leaves.push_back(bc.w_x[gate]);
                fr.param_leaves.push_back(bc.w_h[gate]);
                fr.param_leaves.push_back(bc.bias[gate]);
            }
            bound.push_back(bc);
        }
        // named_tensors() interleaves (w_x, w_h, bias) per gate; keep the
        // leaf order identical so gradients line up with trainable_params().

        nn::Var<T> seq = g.constant(x);
        nn::Var<T> last_hidden = nullptr;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const std::int64_t width = cfg_.layer_dims[l];
            const BoundCell& bc = bound[l];
            nn::Var<T> h = g.constant(nn::Tensor<T>::zeros({batch, width}));
            nn::Var<T> s = g.constant(nn::Tensor<T>::zeros({batch, width}));
            std::vector<nn::Var<T>> outputs;
            for (std::int64_t t = 0; t < seq_len_; ++t) {
                nn::Var<T> xt = nn::slice_time(seq, t);
                auto gate_pre = [&](int gate) {
                    return nn::add_bias(
                        nn::add(nn::linear(xt, bc.w_x[gate]), nn::linear(h, bc.w_h[gate])),
                        bc.bias[gate]);
                };
                nn::Var<T> f = nn::sigmoid(gate_pre(0));
                nn::Var<T> i = nn::sigmoid(gate_pre(1));
                nn::Var<T> c = nn::tanh_op(gate_pre(2));
                nn::Var<T> o = nn::sigmoid(gate_pre(3));
                s = nn::add(nn::mul(s, f), nn::mul(i, c));
                h = nn::mul(o, nn::tanh_op(s));
                outputs.push_back(h);
            }
            if (l + 1 < layers_.size()) seq = nn::stack_time(outputs);
            last_hidden = h;
        }

        nn::Var<T> w = g.leaf(head_w_);
        nn::Var<T> b = g.leaf(head_b_);
        fr.param_leaves.push_back(w);
        fr.param_leaves.push_back(b);
        fr.logits = nn::add_bias(nn::linear(last_hidden, w), b);
        return fr;
    }

private:
    struct Cell {
        nn::Tensor<T> w_x[4];   // forget, input, candidate, output
        nn::Tensor<T> w_h[4];
        nn::Tensor<T> bias[4];
    };
    struct BoundCell {
        nn::Var<T> w_x[4];
        nn::Var<T> w_h[4];
        nn::Var<T> bias[4];
    };

    LstmConfig cfg_;
    std::int64_t seq_len_;
    std::int64_t input_dim_;
    std::vector<Cell> layers_;
    nn::Tensor<T> head_w_;
    nn::Tensor<T> head_b_;
};

}  // namespace lanecast
