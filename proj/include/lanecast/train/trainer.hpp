#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lanecast/core/errors.hpp"
#include "lanecast/core/rng.hpp"
#include "lanecast/features.hpp"
#include "lanecast/models/model.hpp"
#include "lanecast/nn/adam.hpp"
#include "lanecast/train/metrics.hpp"

namespace lanecast {

struct TrainConfig {
    std::int64_t batch_size = 64;
    std::int64_t max_epochs = 200;
    std::int64_t patience = 15;  // epochs without val-loss improvement before stopping
    std::uint64_t seed = 0;
    std::optional<double> lr;            // override the architecture default
    std::optional<double> weight_decay;
};

struct EpochStats {
    std::int64_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy_pct = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    std::int64_t best_epoch = 0;
    double best_val_loss = 0.0;
};

struct SampleResult {
    Label truth = Label::lane_keep;
    Label predicted = Label::lane_keep;
    std::optional<double> prediction_time_s;
};

struct EvalOutcome {
    ConfusionMatrix confusion;
    double mean_loss = 0.0;
    std::vector<SampleResult> samples;
};

namespace detail {

// Stacks a subset of samples into one [B, n, 36] tensor plus labels.
template <typename T>
std::pair<nn::Tensor<T>, std::vector<int>> make_batch(const std::vector<FeatureMatrix>& data,
                                                      const std::vector<std::size_t>& order,
                                                      std::size_t first, std::size_t count) {
    const std::int64_t n = data[order[first]].rows;
    nn::Tensor<T> x = nn::Tensor<T>::zeros({static_cast<std::int64_t>(count), n, kFeatureCount});
    std::vector<int> labels(count);
    for (std::size_t b = 0; b < count; ++b) {
        const FeatureMatrix& m = data[order[first + b]];
        if (m.rows != n) throw ShapeError("batch mixes samples of different lengths");
        T* dst = x.data.data() + static_cast<std::int64_t>(b) * n * kFeatureCount;
        for (std::size_t i = 0; i < m.values.size(); ++i) dst[i] = static_cast<T>(m.values[i]);
        labels[b] = static_cast<int>(m.label);
    }
    return {std::move(x), std::move(labels)};
}

template <typename T>
std::vector<nn::Tensor<T>> snapshot_tensors(AnyModel<T>& model) {
    std::vector<nn::Tensor<T>> out;
    for (auto& [name, t] : model_named_tensors(model)) out.push_back(*t);
    return out;
}

template <typename T>
void restore_tensors(AnyModel<T>& model, const std::vector<nn::Tensor<T>>& snapshot) {
    auto tensors = model_named_tensors(model);
    for (std::size_t i = 0; i < tensors.size(); ++i) *tensors[i].second = snapshot[i];
}

}  // namespace detail

// Runs the model over `data` in eval mode and collects the confusion
// matrix, mean cross-entropy and per-sample outcomes.
template <typename T>
EvalOutcome evaluate(AnyModel<T>& model, const std::vector<FeatureMatrix>& data,
                     std::int64_t batch_size = 64) {
    if (data.empty()) throw EmptyInput("evaluate: no samples");
    EvalOutcome out;
    Rng dummy(0);
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    double loss_sum = 0.0;
    for (std::size_t first = 0; first < data.size(); first += static_cast<std::size_t>(batch_size)) {
        const std::size_t count =
            std::min(static_cast<std::size_t>(batch_size), data.size() - first);
        auto [x, labels] = detail::make_batch<T>(data, order, first, count);
        nn::Graph<T> g;
        ForwardResult<T> fr = model_forward(model, g, x, /*train_mode=*/false, dummy);
        nn::Var<T> loss = nn::cross_entropy(fr.logits, labels);
        loss_sum += static_cast<double>(loss->value.data[0]) * static_cast<double>(count);
        const nn::Tensor<T>& logits = fr.logits->value;
        for (std::size_t b = 0; b < count; ++b) {
            int best = 0;
            for (int c = 1; c < kClassCount; ++c)
                if (logits.at2(static_cast<std::int64_t>(b), c) >
                    logits.at2(static_cast<std::int64_t>(b), best))
                    best = c;
            const FeatureMatrix& m = data[first + b];
            out.confusion.add(m.label, static_cast<Label>(best));
            out.samples.push_back({m.label, static_cast<Label>(best), m.prediction_time_s});
        }
    }
    out.mean_loss = loss_sum / static_cast<double>(data.size());
    return out;
}

// Minimizes cross-entropy with Adam, early-stops on validation loss and
// leaves the model holding the parameters of its best validation epoch.
// Deterministic for a fixed (model, data, config): shuffles and dropout
// draw from streams keyed by the config seed.
template <typename T>
TrainResult train(AnyModel<T>& model, const std::vector<FeatureMatrix>& train_set,
                  const std::vector<FeatureMatrix>& val_set, const TrainConfig& tc) {
    if (train_set.empty() || val_set.empty())
        throw EmptyInput("train: empty training or validation set");
    if (tc.batch_size < 1 || tc.max_epochs < 1 || tc.patience < 1)
        throw BadConfig("train: batch size, epochs and patience must be positive");

    nn::AdamConfig opt_cfg = model_opt(model);
    if (tc.lr) opt_cfg.lr = *tc.lr;
    if (tc.weight_decay) opt_cfg.weight_decay = *tc.weight_decay;
    nn::Adam<T> opt(opt_cfg);

    TrainResult result;
    result.best_val_loss = std::numeric_limits<double>::infinity();
    std::vector<nn::Tensor<T>> best_snapshot = detail::snapshot_tensors(model);
    std::int64_t epochs_since_best = 0;

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::int64_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
        Rng shuffle_rng = keyed_rng(tc.seed, {rng_tag("shuffle"), static_cast<std::uint64_t>(epoch)});
        shuffle_rng.shuffle(order.begin(), order.end());

        double loss_sum = 0.0;
        std::int64_t seen = 0;
        std::uint64_t batch_index = 0;
        for (std::size_t first = 0; first < order.size();
             first += static_cast<std::size_t>(tc.batch_size), ++batch_index) {
            const std::size_t count =
                std::min(static_cast<std::size_t>(tc.batch_size), order.size() - first);
            // a lone trailing sample has no batch statistics; skip it
            if (count < 2 && order.size() > 1) continue;
            auto [x, labels] = detail::make_batch<T>(train_set, order, first, count);
            Rng drop_rng = keyed_rng(
                tc.seed, {rng_tag("dropout"), static_cast<std::uint64_t>(epoch), batch_index});
            nn::Graph<T> g;
            ForwardResult<T> fr = model_forward(model, g, x, /*train_mode=*/true, drop_rng);
            nn::Var<T> loss = nn::cross_entropy(fr.logits, labels);
            const double batch_loss = static_cast<double>(loss->value.data[0]);
            if (!std::isfinite(batch_loss))
                throw Diverged("training loss became non-finite in epoch " +
                               std::to_string(epoch));
            g.backward(loss);
            std::vector<const nn::Tensor<T>*> grads;
            grads.reserve(fr.param_leaves.size());
            for (nn::Var<T> leaf : fr.param_leaves) grads.push_back(&leaf->grad);
            opt.step(model_params(model), grads);
            loss_sum += batch_loss * static_cast<double>(count);
            seen += static_cast<std::int64_t>(count);
        }

        EvalOutcome val = evaluate(model, val_set, tc.batch_size);
        if (!std::isfinite(val.mean_loss))
            throw Diverged("validation loss became non-finite in epoch " + std::to_string(epoch));
        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = seen > 0 ? loss_sum / static_cast<double>(seen) : 0.0;
        stats.val_loss = val.mean_loss;
        stats.val_accuracy_pct = accuracy_pct(val.confusion);
        result.history.push_back(stats);

        if (val.mean_loss < result.best_val_loss) {
            result.best_val_loss = val.mean_loss;
            result.best_epoch = epoch;
            best_snapshot = detail::snapshot_tensors(model);
            epochs_since_best = 0;
        } else if (++epochs_since_best >= tc.patience) {
            break;
        }
    }

    detail::restore_tensors(model, best_snapshot);
    return result;
}

}  // namespace lanecast
