#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "lanecast/core/errors.hpp"
#include "lanecast/nn/tensor.hpp"

namespace lanecast::nn {

template <typename T>
class Graph;

// One recorded operation result.  `pull` pushes this node's gradient into
// its parents; it is set by whichever op created the node.
template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    std::function<void()> pull;
    Graph<T>* graph = nullptr;
};

template <typename T>
using Var = Node<T>*;

// Define-by-run tape.  Ops append nodes in execution order, which is a
// valid topological order, so backpropagation is a single reverse sweep.
// A graph is built per forward pass and thrown away afterwards.
template <typename T>
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var<T> make(Tensor<T> value, bool requires_grad) {
        nodes_.push_back(std::make_unique<Node<T>>());
        Node<T>* n = nodes_.back().get();
        n->value = std::move(value);
        n->requires_grad = requires_grad;
        n->graph = this;
        return n;
    }

    // Trainable leaf: the gradient left on it after backward() is the
    // derivative of the loss with respect to this tensor.
    Var<T> leaf(Tensor<T> value) { return make(std::move(value), true); }

    // Non-trainable input (features, positional encodings, ...).
    Var<T> constant(Tensor<T> value) { return make(std::move(value), false); }

    std::size_t size() const { return nodes_.size(); }

    // Accumulates d(loss)/d(node) into every node with requires_grad.
    void backward(Var<T> loss) {
        if (loss->graph != this) throw GraphError("loss belongs to a different graph");
        if (loss->value.numel() != 1)
            throw GraphError("backward needs a scalar loss, got shape " +
                             loss->value.shape_string());
        for (auto& n : nodes_)
            if (n->requires_grad) n->grad = Tensor<T>::zeros(n->value.shape);
        if (!loss->requires_grad) return;  // loss doesn't depend on any leaf
        loss->grad.data[0] = T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
            if ((*it)->requires_grad && (*it)->pull) (*it)->pull();
    }

private:
    std::vector<std::unique_ptr<Node<T>>> nodes_;
};

namespace detail {

template <typename T>
void check_same_graph(Var<T> a, Var<T> b) {
    if (a->graph != b->graph) throw GraphError("operands belong to different graphs");
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
    for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace detail

}  // namespace lanecast::nn
