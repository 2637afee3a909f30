#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "lanecast/core/errors.hpp"
#include "lanecast/nn/tensor.hpp"

namespace lanecast::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled: applied to params, not grads
};

// Adam with bias correction and decoupled weight decay.  The decay shrinks
// the parameter directly by lr*wd before the moment update is applied, so
// it never leaks into the moment estimates.
template <typename T>
class Adam {
public:
    explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

    const AdamConfig& config() const { return cfg_; }
    std::int64_t step_count() const { return step_; }

    void step(const std::vector<Tensor<T>*>& params, const std::vector<const Tensor<T>*>& grads) {
        if (params.size() != grads.size())
            throw ShapeError("adam: parameter/gradient count mismatch");
        if (m_.empty()) {
            for (const Tensor<T>* p : params) {
                m_.push_back(Tensor<T>::zeros(p->shape));
                v_.push_back(Tensor<T>::zeros(p->shape));
            }
        }
        ++step_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
        const T decay = static_cast<T>(1.0 - cfg_.lr * cfg_.weight_decay);
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor<T>& p = *params[i];
            const Tensor<T>& g = *grads[i];
            if (!same_shape(p, g) || !same_shape(p, m_[i]))
                throw ShapeError("adam: tensor shape changed between steps");
            Tensor<T>& m = m_[i];
            Tensor<T>& v = v_[i];
            for (std::size_t j = 0; j < p.data.size(); ++j) {
                p.data[j] *= decay;
                m.data[j] = static_cast<T>(cfg_.beta1 * m.data[j] + (1.0 - cfg_.beta1) * g.data[j]);
                v.data[j] = static_cast<T>(cfg_.beta2 * v.data[j] +
                                           (1.0 - cfg_.beta2) * g.data[j] * g.data[j]);
                const double m_hat = m.data[j] / bc1;
                const double v_hat = v.data[j] / bc2;
                p.data[j] -= static_cast<T>(cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps));
            }
        }
    }

private:
    AdamConfig cfg_;
    std::int64_t step_ = 0;
    std::vector<Tensor<T>> m_;
    std::vector<Tensor<T>> v_;
};

}  // namespace lanecast::nn
