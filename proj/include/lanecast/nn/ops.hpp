#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "lanecast/core/rng.hpp"
#include "lanecast/nn/graph.hpp"
#include "lanecast/nn/tensor.hpp"

// Differentiable operations.  Every op computes its result eagerly, appends
// one node to the graph and, when a parent is trainable, installs a `pull`
// closure that accumulates gradients into the parents.  Cached forward
// intermediates are moved into the closure by value.

namespace lanecast::nn {

// ---- elementwise -------------------------------------------------------

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
    detail::check_same_graph(a, b);
    if (!same_shape(a->value, b->value))
        throw ShapeError("add: " + a->value.shape_string() + " vs " + b->value.shape_string());
    Tensor<T> out = a->value;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b->value.data[i];
    Var<T> n = a->graph->make(std::move(out), a->requires_grad || b->requires_grad);
    if (n->requires_grad)
        n->pull = [n, a, b] {
            if (a->requires_grad) detail::add_into(a->grad, n->grad);
            if (b->requires_grad) detail::add_into(b->grad, n->grad);
        };
    return n;
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
    detail::check_same_graph(a, b);
    if (!same_shape(a->value, b->value))
        throw ShapeError("mul: " + a->value.shape_string() + " vs " + b->value.shape_string());
    Tensor<T> out = a->value;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b->value.data[i];
    Var<T> n = a->graph->make(std::move(out), a->requires_grad || b->requires_grad);
    if (n->requires_grad)
        n->pull = [n, a, b] {
            if (a->requires_grad)
                for (std::size_t i = 0; i < a->grad.data.size(); ++i)
                    a->grad.data[i] += n->grad.data[i] * b->value.data[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < b->grad.data.size(); ++i)
                    b->grad.data[i] += n->grad.data[i] * a->value.data[i];
        };
    return n;
}

template <typename T>
Var<T> scale(Var<T> a, double s) {
    Tensor<T> out = a->value;
    for (T& v : out.data) v = static_cast<T>(v * s);
    Var<T> n = a->graph->make(std::move(out), a->requires_grad);
    if (n->requires_grad)
        n->pull = [n, a, s] {
            for (std::size_t i = 0; i < a->grad.data.size(); ++i)
                a->grad.data[i] += static_cast<T>(n->grad.data[i] * s);
        };
    return n;
}

template <typename T>
Var<T> neg(Var<T> a) {
    return scale(a, -1.0);
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
    Tensor<T> out = a->value;
    for (T& v : out.data) v = T(1) / (T(1) + std::exp(-v));
    Var<T> n = a->graph->make(std::move(out), a->requires_grad);
    if (n->requires_grad)
        n->pull = [n, a] {
            for (std::size_t i = 0; i < a->grad.data.size(); ++i) {
                const T y = n->value.data[i];
                a->grad.data[i] += n->grad.data[i] * y * (T(1) - y);
            }
        };
    return n;
}

template <typename T>
Var<T> tanh_op(Var<T> a) {
    Tensor<T> out = a->value;
    for (T& v : out.data) v = std::tanh(v);
    Var<T> n = a->graph->make(std::move(out), a->requires_grad);
    if (n->requires_grad)
        n->pull = [n, a] {
            for (std::size_t i = 0; i < a->grad.data.size(); ++i) {
                const T y = n->value.data[i];
                a->grad.data[i] += n->grad.data[i] * (T(1) - y * y);
            }
        };
    return n;
}

template <typename T>
Var<T> relu(Var<T> a) {
    Tensor<T> out = a->value;
    for (T& v : out.data) v = v > T(0) ? v : T(0);
    Var<T> n = a->graph->make(std::move(out), a->requires_grad);
    if (n->requires_grad)
        n->pull = [n, a] {
            for (std::size_t i = 0; i < a->grad.data.size(); ++i)
                if (a->value.data[i] > T(0)) a->grad.data[i] += n->grad.data[i];
        };
    return n;
}

// ---- broadcasts --------------------------------------------------------

// x[..., p] + b[p], bias repeated over every leading row.
template <typename T>
Var<T> add_bias(Var<T> x, Var<T> b) {
    detail::check_same_graph(x, b);
    const std::int64_t p = x->value.shape.back();
    if (b->value.rank() != 1 || b->value.dim(0) != p)
        throw ShapeError("add_bias: bias " + b->value.shape_string() + " vs input " +
                         x->value.shape_string());
    const std::int64_t rows = x->value.numel() / p;
    Tensor<T> out = x->value;
    for (std::int64_t r = 0; r < rows; ++r) {
        T* row = out.data.data() + r * p;
        for (std::int64_t j = 0; j < p; ++j) row[j] += b->value.data[j];
    }
    Var<T> n = x->graph->make(std::move(out), x->requires_grad || b->requires_grad);
    if (n->requires_grad)
        n->pull = [n, x, b, rows, p] {
            if (x->requires_grad) detail::add_into(x->grad, n->grad);
            if (b->requires_grad)
                for (std::int64_t r = 0; r < rows; ++r) {
                    const T* row = n->grad.data.data() + r * p;
                    for (std::int64_t j = 0; j < p; ++j) b->grad.data[j] += row[j];
                }
        };
    return n;
}

// x[B, ...] + c[...], the same c added to every batch element.
template <typename T>
Var<T> add_broadcast(Var<T> x, Var<T> c) {
    detail::check_same_graph(x, c);
    const std::int64_t m = c->value.numel();
    if (x->value.rank() < 2 || x->value.numel() % m != 0 ||
        x->value.numel() / x->value.dim(0) != m)
        throw ShapeError("add_broadcast: " + x->value.shape_string() + " vs " +
                         c->value.shape_string());
    const std::int64_t batch = x->value.dim(0);
    Tensor<T> out = x->value;
    for (std::int64_t b = 0; b < batch; ++b) {
        T* row = out.data.data() + b * m;
        for (std::int64_t i = 0; i < m; ++i) row[i] += c->value.data[i];
    }
    Var<T> n = x->graph->make(std::move(out), x->requires_grad || c->requires_grad);
    if (n->requires_grad)
        n->pull = [n, x, c, batch, m] {
            if (x->requires_grad) detail::add_into(x->grad, n->grad);
            if (c->requires_grad)
                for (std::int64_t b = 0; b < batch; ++b) {
                    const T* row = n->grad.data.data() + b * m;
                    for (std::int64_t i = 0; i < m; ++i) c->grad.data[i] += row[i];
                }
        };
    return n;
}

// ---- matrix products ---------------------------------------------------

namespace detail {

template <typename T>
void require_rank(const Tensor<T>& t, int r, const char* op) {
    if (t.rank() != r)
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(r) + ", got " +
                         t.shape_string());
}

}  // namespace detail

// y = x @ W^T with x [..., k] and W [p, k]; the usual dense-layer product.
// Any leading shape is treated as a stack of rows.
template <typename T>
Var<T> linear(Var<T> x, Var<T> w) {
    detail::check_same_graph(x, w);
    detail::require_rank(w->value, 2, "linear weight");
    const std::int64_t k = x->value.shape.back();
    const std::int64_t p = w->value.dim(0);
    if (w->value.dim(1) != k)
        throw ShapeError("linear: input " + x->value.shape_string() + " vs weight " +
                         w->value.shape_string());
    const std::int64_t rows = x->value.numel() / k;

    std::vector<std::int64_t> out_shape = x->value.shape;
    out_shape.back() = p;
    Tensor<T> out = Tensor<T>::zeros(out_shape);
    {
        Tensor<T> wt = Tensor<T>::zeros({k, p});
        transpose_into(w->value.data.data(), wt.data.data(), p, k);
        gemm_acc(x->value.data.data(), wt.data.data(), out.data.data(), rows, k, p);
    }
    Var<T> n = x->graph->make(std::move(out), x->requires_grad || w->requires_grad);
    if (n->requires_grad)
        n->pull = [n, x, w, rows, k, p] {
            if (x->requires_grad)
                gemm_acc(n->grad.data.data(), w->value.data.data(), x->grad.data.data(), rows, p,
                         k);
            if (w->requires_grad)
                gemm_tn_acc(n->grad.data.data(), x->value.data.data(), w->grad.data.data(), rows,
                            p, k);
        };
    return n;
}

// Plain product a @ b; both rank 2, or both rank 3 with matching batch.
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
    detail::check_same_graph(a, b);
    if (a->value.rank() != b->value.rank() || (a->value.rank() != 2 && a->value.rank() != 3))
        throw ShapeError("matmul: " + a->value.shape_string() + " vs " + b->value.shape_string());
    const bool batched = a->value.rank() == 3;
    const std::int64_t batch = batched ? a->value.dim(0) : 1;
    const std::int64_t m = a->value.dim(batched ? 1 : 0);
    const std::int64_t k = a->value.dim(batched ? 2 : 1);
    const std::int64_t p = b->value.dim(batched ? 2 : 1);
    if ((batched && (b->value.dim(0) != batch || b->value.dim(1) != k)) ||
        (!batched && b->value.dim(0) != k))
        throw ShapeError("matmul: " + a->value.shape_string() + " vs " + b->value.shape_string());

    Tensor<T> out = Tensor<T>::zeros(batched ? std::vector<std::int64_t>{batch, m, p}
                                             : std::vector<std::int64_t>{m, p});
    for (std::int64_t i = 0; i < batch; ++i)
        gemm_acc(a->value.data.data() + i * m * k, b->value.data.data() + i * k * p,
                 out.data.data() + i * m * p, m, k, p);

    Var<T> n = a->graph->make(std::move(out), a->requires_grad || b->requires_grad);
    if (n->requires_grad)
        n->pull = [n, a, b, batch, m, k, p] {
            for (std::int64_t i = 0; i < batch; ++i) {
                const T* dy = n->grad.data.data() + i * m * p;
                if (a->requires_grad) {
                    Tensor<T> bt = Tensor<T>::zeros({p, k});
                    transpose_into(b->value.data.data() + i * k * p, bt.data.data(), k, p);
                    gemm_acc(dy, bt.data.data(), a->grad.data.data() + i * m * k, m, p, k);
                }
                if (b->requires_grad)
                    gemm_tn_acc(a->value.data.data() + i * m * k, dy,
                                b->grad.data.data() + i * k * p, m, k, p);
            }
        };
    return n;
}

// a @ b^T per batch: a [B, m, k], b [B, p, k] -> [B, m, p].  This is the
// attention-score product, where b is a stack of row vectors.
template <typename T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
    detail::check_same_graph(a, b);
    if (a->value.rank() != 3 || b->value.rank() != 3)
        throw ShapeError("matmul_nt: " + a->value.shape_string() + " vs " +
                         b->value.shape_string());
    const std::int64_t batch = a->value.dim(0);
    const std::int64_t m = a->value.dim(1);
    const std::int64_t k = a->value.dim(2);
    const std::int64_t p = b->value.dim(1);
    if (b->value.dim(0) != batch || b->value.dim(2) != k)
        throw ShapeError("matmul_nt: " + a->value.shape_string() + " vs " +
                         b->value.shape_string());

    Tensor<T> out = Tensor<T>::zeros({batch, m, p});
    for (std::int64_t i = 0; i < batch; ++i) {
        Tensor<T> bt = Tensor<T>::zeros({k, p});
        transpose_into(b->value.data.data() + i * p * k, bt.data.data(), p, k);
        gemm_acc(a->value.data.data() + i * m * k, bt.data.data(), out.data.data() + i * m * p, m,
                 k, p);
    }
    Var<T> n = a->graph->make(std::move(out), a->requires_grad || b->requires_grad);
    if (n->requires_grad)
        n->pull = [n, a, b, batch, m, k, p] {
            for (std::int64_t i = 0; i < batch; ++i) {
                const T* dy = n->grad.data.data() + i * m * p;
                if (a->requires_grad)
                    gemm_acc(dy, b->value.data.data() + i * p * k, a->grad.data.data() + i * m * k,
                             m, p, k);
                if (b->requires_grad)
                    gemm_tn_acc(dy, a->value.data.data() + i * m * k,
                                b->grad.data.data() + i * p * k, m, p, k);
            }
        };
    return n;
}

// ---- shape plumbing ----------------------------------------------------

template <typename T>
Var<T> reshape(Var<T> x, std::vector<std::int64_t> new_shape) {
    if (Tensor<T>::numel_of(new_shape) != x->value.numel())
        throw ShapeError("reshape: " + x->value.shape_string() + " has wrong element count");
    Tensor<T> out;
    out.shape = std::move(new_shape);
    out.data = x->value.data;
    Var<T> n = x->graph->make(std::move(out), x->requires_grad);
    if (n->requires_grad)
        n->pull = [n, x] { detail::add_into(x->grad, n->grad); };
    return n;
}

// Row i of the time axis: x [B, n, d] -> [B, d].
template <typename T>
Var<T> slice_time(Var<T> x, std::int64_t i) {
    detail::require_rank(x->value, 3, "slice_time");
    const std::int64_t batch = x->value.dim(0), steps = x->value.dim(1), d = x->value.dim(2);
    if (i < 0 || i >= steps) throw ShapeError("slice_time: index out of range");
    Tensor<T> out = Tensor<T>::zeros({batch, d});
    for (std::int64_t b = 0; b < batch; ++b)
        std::copy_n(x->value.data.data() + (b * steps + i) * d, d, out.data.data() + b * d);
    Var<T> n = x->graph->make(std::move(out), x->requires_grad);
    if (n->requires_grad)
        n->pull = [n, x, i, batch, steps, d] {
            for (std::int64_t b = 0; b < batch; ++b) {
                T* dst = x->grad.data.data() + (b * steps + i) * d;
                const T* src = n->grad.data.data() + b * d;
                for (std::int64_t j = 0; j < d; ++j) dst[j] += src[j];
            }
        };
    return n;
}

// Stacks per-step outputs [B, d] back into a sequence [B, n, d].
template <typename T>
Var<T> stack_time(const std::vector<Var<T>>& steps) {
    if (steps.empty()) throw ShapeError("stack_time: no inputs");
    const std::int64_t batch = steps[0]->value.dim(0), d = steps[0]->value.dim(1);
    bool any_grad = false;
    for (Var<T> s : steps) {
        detail::check_same_graph(steps[0], s);
        if (s->value.rank() != 2 || s->value.dim(0) != batch || s->value.dim(1) != d)
            throw ShapeError("stack_time: mismatched step shapes");
        any_grad = any_grad || s->requires_grad;
    }
    const auto n_steps = static_cast<std::int64_t>(steps.size());
    Tensor<T> out = Tensor<T>::zeros({batch, n_steps, d});
    for (std::int64_t t = 0; t < n_steps; ++t)
        for (std::int64_t b = 0; b < batch; ++b)
            std::copy_n(steps[static_cast<std::size_t>(t)]->value.data.data() + b * d, d,
                        out.data.data() + (b * n_steps + t) * d);
    Var<T> n = steps[0]->graph->make(std::move(out), any_grad);
    if (n->requires_grad) {
        std::vector<Var<T>> parents = steps;
        n->pull = [n, parents, batch, n_steps, d] {
            for (std::int64_t t = 0; t < n_steps; ++t) {
                Var<T> s = parents[static_cast<std::size_t>(t)];
                if (!s->requires_grad) continue;
                for (std::int64_t b = 0; b < batch; ++b) {
                    const T* src = n->grad.data.data() + (b * n_steps + t) * d;
                    T* dst = s->grad.data.data() + b * d;
                    for (std::int64_t j = 0; j < d; ++j) dst[j] += src[j];
                }
            }
        };
    }
    return n;
}

// Concatenation along the last axis; leading dims must agree.
template <typename T>
Var<T> concat_last(const std::vector<Var<T>>& parts) {
    if (parts.empty()) throw ShapeError("concat_last: no inputs");
    const auto& lead = parts[0]->value.shape;
    std::int64_t total = 0;
    bool any_grad = false;
    for (Var<T> p : parts) {
        detail::check_same_graph(parts[0], p);
        if (p->value.rank() != static_cast<int>(lead.size()) ||
            !std::equal(lead.begin(), lead.end() - 1, p->value.shape.begin()))
            throw ShapeError("concat_last: mismatched leading dims");
        total += p->value.shape.back();
        any_grad = any_grad || p->requires_grad;
    }
    const std::int64_t rows = parts[0]->value.numel() / parts[0]->value.shape.back();
    std::vector<std::int64_t> out_shape = lead;
    out_shape.back() = total;
    Tensor<T> out = Tensor<T>::zeros(out_shape);
    std::int64_t offset = 0;
    for (Var<T> p : parts) {
        const std::int64_t d = p->value.shape.back();
        for (std::int64_t r = 0; r < rows; ++r)
            std::copy_n(p->value.data.data() + r * d, d, out.data.data() + r * total + offset);
        offset += d;
    }
    Var<T> n = parts[0]->graph->make(std::move(out), any_grad);
    if (n->requires_grad) {
        std::vector<Var<T>> parents = parts;
        n->pull = [n, parents, rows, total] {
            std::int64_t off = 0;
            for (Var<T> p : parents) {
                const std::int64_t d = p->value.shape.back();
                if (p->requires_grad)
                    for (std::int64_t r = 0; r < rows; ++r) {
                        const T* src = n->grad.data.data() + r * total + off;
                        T* dst = p->grad.data.data() + r * d;
                        for (std::int64_t j = 0; j < d; ++j) dst[j] += src[j];
                    }
                off += d;
            }
        };
    }
    return n;
}

// Mean over the time axis: [B, n, d] -> [B, d].
template <typename T>
Var<T> mean_time(Var<T> x) {
    detail::require_rank(x->value, 3, "mean_time");
    const std::int64_t batch = x->value.dim(0), steps = x->value.dim(1), d = x->value.dim(2);
    Tensor<T> out = Tensor<T>::zeros({batch, d});
    for (std::int64_t b = 0; b < batch; ++b)
        for (std::int64_t t = 0; t < steps; ++t) {
            const T* src = x->value.data.data() + (b * steps + t) * d;
            T* dst = out.data.data() + b * d;
            for (std::int64_t j = 0; j < d; ++j) dst[j] += src[j];
        }
    const T inv = T(1) / static_cast<T>(steps);
    for (T& v : out.data) v *= inv;
    Var<T> n = x->graph->make(std::move(out), x->requires_grad);
    if (n->requires_grad)
        n->pull = [n, x, batch, steps, d, inv] {
            for (std::int64_t b = 0; b < batch; ++b)
                for (std::int64_t t = 0; t < steps; ++t) {
                    T* dst = x->grad.data.data() + (b * steps + t) * d;
                    const T* src = n->grad.data.data() + b * d;
                    for (std::int64_t j = 0; j < d; ++j) dst[j] += src[j] * inv;
                }
        };
    return n;
}

// Splits the feature axis into channels: [B, n, d] -> [B, C, n, d/C] with
// channel c taking columns [c*d/C, (c+1)*d/C).
template <typename T>
Var<T> to_channels(Var<T> x, std::int64_t channels) {
    detail::require_rank(x->value, 3, "to_channels");
    const std::int64_t batch = x->value.dim(0), steps = x->value.dim(1), d = x->value.dim(2);
    if (channels < 1 || d % channels != 0)
        throw IndivisibleChannels("to_channels: " + std::to_string(d) +
                                  " columns not divisible into " + std::to_string(channels) +
                                  " channels");
    const std::int64_t w = d / channels;
    Tensor<T> out = Tensor<T>::zeros({batch, channels, steps, w});
    for (std::int64_t b = 0; b < batch; ++b)
        for (std::int64_t c = 0; c < channels; ++c)
            for (std::int64_t t = 0; t < steps; ++t)
                std::copy_n(x->value.data.data() + (b * steps + t) * d + c * w, w,
                            out.data.data() + ((b * channels + c) * steps + t) * w);
    Var<T> n = x->graph->make(std::move(out), x->requires_grad);
    if (n->requires_grad)
        n->pull = [n, x, batch, channels, steps, d, w] {
            for (std::int64_t b = 0; b < batch; ++b)
                for (std::int64_t c = 0; c < channels; ++c)
                    for (std::int64_t t = 0; t < steps; ++t) {
                        const T* src = n->grad.data.data() + ((b * channels + c) * steps + t) * w;
                        T* dst = x->grad.data.data() + (b * steps + t) * d + c * w;
                        for (std::int64_t j = 0; j < w; ++j) dst[j] += src[j];
                    }
        };
    return n;
}

template <typename T>
Var<T> sum_all(Var<T> x) {
    T total = T(0);
    for (T v : x->value.data) total += v;
    Var<T> n = x->graph->make(Tensor<T>::from({1}, {total}), x->requires_grad);
    if (n->requires_grad)
        n->pull = [n, x] {
            const T g = n->grad.data[0];
            for (T& v : x->grad.data) v += g;
        };
    return n;
}

// ---- softmax and normalizations ----------------------------------------

// Softmax over the last axis, max-shifted for stability.
template <typename T>
Var<T> softmax_last(Var<T> x) {
    const std::int64_t d = x->value.shape.back();
    const std::int64_t rows = x->value.numel() / d;
    Tensor<T> out = x->value;
    for (std::int64_t r = 0; r < rows; ++r) {
        T* row = out.data.data() + r * d;
        T mx = row[0];
        for (std::int64_t j = 1; j < d; ++j) mx = std::max(mx, row[j]);
        T sum = T(0);
        for (std::int64_t j = 0; j < d; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        const T inv = T(1) / sum;
        for (std::int64_t j = 0; j < d; ++j) row[j] *= inv;
    }
    Var<T> n = x->graph->make(std::move(out), x->requires_grad);
    if (n->requires_grad)
        n->pull = [n, x, rows, d] {
            for (std::int64_t r = 0; r < rows; ++r) {
                const T* y = n->value.data.data() + r * d;
                const T* dy = n->grad.data.data() + r * d;
                T* dx = x->grad.data.data() + r * d;
                T dot = T(0);
                for (std::int64_t j = 0; j < d; ++j) dot += dy[j] * y[j];
                for (std::int64_t j = 0; j < d; ++j) dx[j] += y[j] * (dy[j] - dot);
            }
        };
    return n;
}

inline constexpr double kNormEps = 1e-5;

// Per-row standardization over the last axis followed by a learned affine
// map: y = gain * (x - mean) / sqrt(var + eps) + bias.
template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias) {
    detail::check_same_graph(x, gain);
    detail::check_same_graph(x, bias);
    const std::int64_t d = x->value.shape.back();
    if (gain->value.numel() != d || bias->value.numel() != d)
        throw ShapeError("layer_norm: affine params must have " + std::to_string(d) + " entries");
    const std::int64_t rows = x->value.numel() / d;

    Tensor<T> x_hat = Tensor<T>::zeros(x->value.shape);
    Tensor<T> inv_std = Tensor<T>::zeros({rows});
    Tensor<T> out = Tensor<T>::zeros(x->value.shape);
    for (std::int64_t r = 0; r < rows; ++r) {
        const T* row = x->value.data.data() + r * d;
        T mean = T(0);
        for (std::int64_t j = 0; j < d; ++j) mean += row[j];
        mean /= static_cast<T>(d);
        T var = T(0);
        for (std::int64_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= static_cast<T>(d);
        const T istd = T(1) / std::sqrt(var + static_cast<T>(kNormEps));
        inv_std.data[static_cast<std::size_t>(r)] = istd;
        T* xh = x_hat.data.data() + r * d;
        T* o = out.data.data() + r * d;
        for (std::int64_t j = 0; j < d; ++j) {
            xh[j] = (row[j] - mean) * istd;
            o[j] = gain->value.data[j] * xh[j] + bias->value.data[j];
        }
    }
    Var<T> n = x->graph->make(std::move(out),
                              x->requires_grad || gain->requires_grad || bias->requires_grad);
    if (n->requires_grad)
        n->pull = [n, x, gain, bias, rows, d, x_hat = std::move(x_hat),
                   inv_std = std::move(inv_std)] {
            for (std::int64_t r = 0; r < rows; ++r) {
                const T* dy = n->grad.data.data() + r * d;
                const T* xh = x_hat.data.data() + r * d;
                if (bias->requires_grad)
                    for (std::int64_t j = 0; j < d; ++j) bias->grad.data[j] += dy[j];
                if (gain->requires_grad)
                    for (std::int64_t j = 0; j < d; ++j) gain->grad.data[j] += dy[j] * xh[j];
                if (x->requires_grad) {
                    T m1 = T(0), m2 = T(0);
                    for (std::int64_t j = 0; j < d; ++j) {
                        const T dxh = dy[j] * gain->value.data[j];
                        m1 += dxh;
                        m2 += dxh * xh[j];
                    }
                    m1 /= static_cast<T>(d);
                    m2 /= static_cast<T>(d);
                    const T istd = inv_std.data[static_cast<std::size_t>(r)];
                    T* dx = x->grad.data.data() + r * d;
                    for (std::int64_t j = 0; j < d; ++j) {
                        const T dxh = dy[j] * gain->value.data[j];
                        dx[j] += istd * (dxh - m1 - xh[j] * m2);
                    }
                }
            }
        };
    return n;
}

// Per-channel batch statistics, shared by forward and backward.
struct BatchNormBuffers {
    // Owned by the model, not the graph: running statistics carry state
    // across steps and into checkpoints.  Variance is the biased estimate,
    // matching what the forward pass divides by.
    template <typename T>
    struct Of {
        Tensor<T> running_mean;
        Tensor<T> running_var;
    };
};

// Batch normalization over (batch, time, width) per channel for inputs
// [B, C, t, w].  In training mode normalizes with batch statistics and
// updates the running buffers in place; in eval mode uses the buffers.
template <typename T>
Var<T> batch_norm_chan(Var<T> x, Var<T> gamma, Var<T> beta, Tensor<T>& running_mean,
                       Tensor<T>& running_var, bool train_mode, double momentum = 0.1) {
    detail::check_same_graph(x, gamma);
    detail::check_same_graph(x, beta);
    detail::require_rank(x->value, 4, "batch_norm_chan");
    const std::int64_t batch = x->value.dim(0), channels = x->value.dim(1);
    const std::int64_t t = x->value.dim(2), w = x->value.dim(3);
    if (gamma->value.numel() != channels || beta->value.numel() != channels ||
        running_mean.numel() != channels || running_var.numel() != channels)
        throw ShapeError("batch_norm_chan: per-channel params must have " +
                         std::to_string(channels) + " entries");
    if (train_mode && batch < 2)
        throw BatchTooSmall("batch_norm_chan: training statistics need a batch of at least 2");

    const std::int64_t plane = t * w;
    const T n_stat = static_cast<T>(batch * plane);
    Tensor<T> mean = Tensor<T>::zeros({channels});
    Tensor<T> inv_std = Tensor<T>::zeros({channels});
    for (std::int64_t c = 0; c < channels; ++c) {
        if (train_mode) {
            T sum = T(0), sum_sq = T(0);
            for (std::int64_t b = 0; b < batch; ++b) {
                const T* row = x->value.data.data() + (b * channels + c) * plane;
                for (std::int64_t i = 0; i < plane; ++i) {
                    sum += row[i];
                    sum_sq += row[i] * row[i];
                }
            }
            const T mu = sum / n_stat;
            const T var = std::max(T(0), sum_sq / n_stat - mu * mu);
            mean.data[static_cast<std::size_t>(c)] = mu;
            inv_std.data[static_cast<std::size_t>(c)] =
                T(1) / std::sqrt(var + static_cast<T>(kNormEps));
            running_mean.data[static_cast<std::size_t>(c)] =
                static_cast<T>((1.0 - momentum) * running_mean.data[static_cast<std::size_t>(c)] +
                               momentum * mu);
            running_var.data[static_cast<std::size_t>(c)] =
                static_cast<T>((1.0 - momentum) * running_var.data[static_cast<std::size_t>(c)] +
                               momentum * var);
        } else {
            mean.data[static_cast<std::size_t>(c)] = running_mean.data[static_cast<std::size_t>(c)];
            inv_std.data[static_cast<std::size_t>(c)] =
                T(1) / std::sqrt(running_var.data[static_cast<std::size_t>(c)] +
                                 static_cast<T>(kNormEps));
        }
    }

    Tensor<T> out = Tensor<T>::zeros(x->value.shape);
    for (std::int64_t b = 0; b < batch; ++b)
        for (std::int64_t c = 0; c < channels; ++c) {
            const T mu = mean.data[static_cast<std::size_t>(c)];
            const T istd = inv_std.data[static_cast<std::size_t>(c)];
            const T g = gamma->value.data[static_cast<std::size_t>(c)];
            const T bt = beta->value.data[static_cast<std::size_t>(c)];
            const T* src = x->value.data.data() + (b * channels + c) * plane;
            T* dst = out.data.data() + (b * channels + c) * plane;
            for (std::int64_t i = 0; i < plane; ++i) dst[i] = g * (src[i] - mu) * istd + bt;
        }

    Var<T> n = x->graph->make(std::move(out),
                              x->requires_grad || gamma->requires_grad || beta->requires_grad);
    if (n->requires_grad)
        n->pull = [n, x, gamma, beta, batch, channels, plane, n_stat, train_mode,
                   mean = std::move(mean), inv_std = std::move(inv_std)] {
            for (std::int64_t c = 0; c < channels; ++c) {
                const T mu = mean.data[static_cast<std::size_t>(c)];
                const T istd = inv_std.data[static_cast<std::size_t>(c)];
                const T g = gamma->value.data[static_cast<std::size_t>(c)];
                T sum_dy = T(0), sum_dy_xh = T(0);
                for (std::int64_t b = 0; b < batch; ++b) {
                    const T* dy = n->grad.data.data() + (b * channels + c) * plane;
                    const T* xv = x->value.data.data() + (b * channels + c) * plane;
                    for (std::int64_t i = 0; i < plane; ++i) {
                        sum_dy += dy[i];
                        sum_dy_xh += dy[i] * (xv[i] - mu) * istd;
                    }
                }
                if (beta->requires_grad) beta->grad.data[static_cast<std::size_t>(c)] += sum_dy;
                if (gamma->requires_grad)
                    gamma->grad.data[static_cast<std::size_t>(c)] += sum_dy_xh;
                if (!x->requires_grad) continue;
                for (std::int64_t b = 0; b < batch; ++b) {
                    const T* dy = n->grad.data.data() + (b * channels + c) * plane;
                    const T* xv = x->value.data.data() + (b * channels + c) * plane;
                    T* dx = x->grad.data.data() + (b * channels + c) * plane;
                    if (train_mode) {
                        for (std::int64_t i = 0; i < plane; ++i) {
                            const T xh = (xv[i] - mu) * istd;
                            dx[i] += g * istd * (dy[i] - sum_dy / n_stat - xh * sum_dy_xh / n_stat);
                        }
                    } else {
                        for (std::int64_t i = 0; i < plane; ++i) dx[i] += g * istd * dy[i];
                    }
                }
            }
        };
    return n;
}

// ---- convolution, pooling, dropout --------------------------------------

// 1-D convolution along the time axis with zero same-padding and stride 1:
// x [B, C, t, w], kernel [O, C, kt], bias [O] -> [B, O, t, w].  Each output
// column j only ever sees input column j, i.e. the kernel is kt x 1.
template <typename T>
Var<T> conv_time(Var<T> x, Var<T> kernel, Var<T> bias) {
    detail::check_same_graph(x, kernel);
    detail::check_same_graph(x, bias);
    detail::require_rank(x->value, 4, "conv_time input");
    detail::require_rank(kernel->value, 3, "conv_time kernel");
    const std::int64_t batch = x->value.dim(0), channels = x->value.dim(1);
    const std::int64_t t = x->value.dim(2), w = x->value.dim(3);
    const std::int64_t out_ch = kernel->value.dim(0), kt = kernel->value.dim(2);
    if (kernel->value.dim(1) != channels)
        throw ShapeError("conv_time: kernel " + kernel->value.shape_string() + " vs input " +
                         x->value.shape_string());
    if (bias->value.numel() != out_ch)
        throw ShapeError("conv_time: bias must have one entry per output channel");
    const std::int64_t pad = (kt - 1) / 2;

    Tensor<T> out = Tensor<T>::zeros({batch, out_ch, t, w});
    for (std::int64_t b = 0; b < batch; ++b)
        for (std::int64_t o = 0; o < out_ch; ++o) {
            T* plane = out.data.data() + (b * out_ch + o) * t * w;
            const T bv = bias->value.data[static_cast<std::size_t>(o)];
            for (std::int64_t i = 0; i < t * w; ++i) plane[i] = bv;
            for (std::int64_t c = 0; c < channels; ++c) {
                const T* xin = x->value.data.data() + (b * channels + c) * t * w;
                for (std::int64_t d = 0; d < kt; ++d) {
                    const T kv = kernel->value.at3(o, c, d);
                    const std::int64_t lo = std::max<std::int64_t>(0, pad - d);
                    const std::int64_t hi = std::min(t, t + pad - d);
                    for (std::int64_t tau = lo; tau < hi; ++tau) {
                        const T* src = xin + (tau + d - pad) * w;
                        T* dst = plane + tau * w;
                        for (std::int64_t j = 0; j < w; ++j) dst[j] += kv * src[j];
                    }
                }
            }
        }

    Var<T> n = x->graph->make(std::move(out), x->requires_grad || kernel->requires_grad ||
                                                  bias->requires_grad);
    if (n->requires_grad)
        n->pull = [n, x, kernel, bias, batch, channels, t, w, out_ch, kt, pad] {
            for (std::int64_t b = 0; b < batch; ++b)
                for (std::int64_t o = 0; o < out_ch; ++o) {
                    const T* dy = n->grad.data.data() + (b * out_ch + o) * t * w;
                    if (bias->requires_grad) {
                        T s = T(0);
                        for (std::int64_t i = 0; i < t * w; ++i) s += dy[i];
                        bias->grad.data[static_cast<std::size_t>(o)] += s;
                    }
                    for (std::int64_t c = 0; c < channels; ++c) {
                        const T* xin = x->value.data.data() + (b * channels + c) * t * w;
                        T* dxin = x->grad.data.data() + (b * channels + c) * t * w;
                        for (std::int64_t d = 0; d < kt; ++d) {
                            const std::int64_t lo = std::max<std::int64_t>(0, pad - d);
                            const std::int64_t hi = std::min(t, t + pad - d);
                            if (kernel->requires_grad) {
                                T s = T(0);
                                for (std::int64_t tau = lo; tau < hi; ++tau) {
                                    const T* src = xin + (tau + d - pad) * w;
                                    const T* g = dy + tau * w;
                                    for (std::int64_t j = 0; j < w; ++j) s += g[j] * src[j];
                                }
                                kernel->grad.at3(o, c, d) += s;
                            }
                            if (x->requires_grad) {
                                const T kv = kernel->value.at3(o, c, d);
                                for (std::int64_t tau = lo; tau < hi; ++tau) {
                                    T* dst = dxin + (tau + d - pad) * w;
                                    const T* g = dy + tau * w;
                                    for (std::int64_t j = 0; j < w; ++j) dst[j] += kv * g[j];
                                }
                            }
                        }
                    }
                }
        };
    return n;
}

// Max-pooling along time by factor p; trailing frames that don't fill a
// window are dropped.  Ties route the gradient to the earliest frame.
template <typename T>
Var<T> max_pool_time(Var<T> x, std::int64_t p) {
    detail::require_rank(x->value, 4, "max_pool_time");
    if (p < 1) throw ShapeError("max_pool_time: pool size must be >= 1");
    const std::int64_t batch = x->value.dim(0), channels = x->value.dim(1);
    const std::int64_t t = x->value.dim(2), w = x->value.dim(3);
    const std::int64_t t_out = t / p;
    if (t_out < 1) throw ShapeError("max_pool_time: time axis shorter than pool size");

    Tensor<T> out = Tensor<T>::zeros({batch, channels, t_out, w});
    std::vector<std::int32_t> argmax(static_cast<std::size_t>(out.numel()));
    for (std::int64_t b = 0; b < batch; ++b)
        for (std::int64_t c = 0; c < channels; ++c) {
            const T* xin = x->value.data.data() + (b * channels + c) * t * w;
            T* dst = out.data.data() + (b * channels + c) * t_out * w;
            std::int32_t* am = argmax.data() + (b * channels + c) * t_out * w;
            for (std::int64_t u = 0; u < t_out; ++u)
                for (std::int64_t j = 0; j < w; ++j) {
                    T best = xin[(u * p) * w + j];
                    std::int32_t best_d = 0;
                    for (std::int64_t d = 1; d < p; ++d) {
                        const T v = xin[(u * p + d) * w + j];
                        if (v > best) {
                            best = v;
                            best_d = static_cast<std::int32_t>(d);
                        }
                    }
                    dst[u * w + j] = best;
                    am[u * w + j] = best_d;
                }
        }

    Var<T> n = x->graph->make(std::move(out), x->requires_grad);
    if (n->requires_grad)
        n->pull = [n, x, p, batch, channels, t, w, t_out, argmax = std::move(argmax)] {
            for (std::int64_t b = 0; b < batch; ++b)
                for (std::int64_t c = 0; c < channels; ++c) {
                    T* dx = x->grad.data.data() + (b * channels + c) * t * w;
                    const T* dy = n->grad.data.data() + (b * channels + c) * t_out * w;
                    const std::int32_t* am = argmax.data() + (b * channels + c) * t_out * w;
                    for (std::int64_t u = 0; u < t_out; ++u)
                        for (std::int64_t j = 0; j < w; ++j)
                            dx[(u * p + am[u * w + j]) * w + j] += dy[u * w + j];
                }
        };
    return n;
}

// Inverted dropout: keeps each element with probability 1-rate and scales
// survivors by 1/(1-rate), so the expectation is the identity.  In eval
// mode (or rate 0) the input node passes through untouched.
template <typename T>
Var<T> dropout(Var<T> x, double rate, bool train_mode, Rng& rng) {
    if (!train_mode || rate <= 0.0) return x;
    if (rate >= 1.0) throw BadConfig("dropout rate must be below 1");
    const T scale_keep = static_cast<T>(1.0 / (1.0 - rate));
    Tensor<T> mask = Tensor<T>::zeros(x->value.shape);
    for (std::size_t i = 0; i < mask.data.size(); ++i)
        mask.data[i] = rng.uniform() >= rate ? scale_keep : T(0);
    Tensor<T> out = x->value;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= mask.data[i];
    Var<T> n = x->graph->make(std::move(out), x->requires_grad);
    if (n->requires_grad)
        n->pull = [n, x, mask = std::move(mask)] {
            for (std::size_t i = 0; i < x->grad.data.size(); ++i)
                x->grad.data[i] += n->grad.data[i] * mask.data[i];
        };
    return n;
}

// ---- loss ----------------------------------------------------------------

// Mean negative log-likelihood of the true classes under softmax(logits).
// logits [B, K], labels in [0, K).
template <typename T>
Var<T> cross_entropy(Var<T> logits, const std::vector<int>& labels) {
    detail::require_rank(logits->value, 2, "cross_entropy");
    const std::int64_t batch = logits->value.dim(0), classes = logits->value.dim(1);
    if (static_cast<std::int64_t>(labels.size()) != batch)
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch " +
                         std::to_string(batch));
    for (int l : labels)
        if (l < 0 || l >= classes) throw BadLabel("cross_entropy: label out of range");

    Tensor<T> probs = logits->value;
    T loss = T(0);
    for (std::int64_t b = 0; b < batch; ++b) {
        T* row = probs.data.data() + b * classes;
        T mx = row[0];
        for (std::int64_t j = 1; j < classes; ++j) mx = std::max(mx, row[j]);
        T sum = T(0);
        for (std::int64_t j = 0; j < classes; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        const T inv = T(1) / sum;
        for (std::int64_t j = 0; j < classes; ++j) row[j] *= inv;
        loss -= std::log(row[labels[static_cast<std::size_t>(b)]]);
    }
    loss /= static_cast<T>(batch);

    Var<T> n = logits->graph->make(Tensor<T>::from({1}, {loss}), logits->requires_grad);
    if (n->requires_grad)
        n->pull = [n, logits, batch, classes, labels, probs = std::move(probs)] {
            const T g = n->grad.data[0] / static_cast<T>(batch);
            for (std::int64_t b = 0; b < batch; ++b) {
                const T* p = probs.data.data() + b * classes;
                T* dl = logits->grad.data.data() + b * classes;
                const int y = labels[static_cast<std::size_t>(b)];
                for (std::int64_t j = 0; j < classes; ++j)
                    dl[j] += g * (p[j] - (j == y ? T(1) : T(0)));
            }
        };
    return n;
}

}  // namespace lanecast::nn
