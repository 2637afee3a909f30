#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "lanecast/core/errors.hpp"
#include "lanecast/core/labels.hpp"

namespace lanecast {

// 3x3 confusion matrix; rows are true classes, columns predictions, both in
// LK/LLC/RLC order.
struct ConfusionMatrix {
    std::array<std::array<std::int64_t, kClassCount>, kClassCount> counts{};

    void add(Label truth, Label predicted) {
        ++counts[static_cast<std::size_t>(truth)][static_cast<std::size_t>(predicted)];
    }

    std::int64_t total() const {
        std::int64_t n = 0;
        for (const auto& row : counts)
            for (auto v : row) n += v;
        return n;
    }

    std::int64_t correct() const {
        std::int64_t n = 0;
        for (int c = 0; c < kClassCount; ++c) n += counts[c][c];
        return n;
    }

    std::int64_t row_sum(int c) const {
        std::int64_t n = 0;
        for (auto v : counts[static_cast<std::size_t>(c)]) n += v;
        return n;
    }

    std::int64_t col_sum(int c) const {
        std::int64_t n = 0;
        for (const auto& row : counts) n += row[static_cast<std::size_t>(c)];
        return n;
    }
};

inline double accuracy_pct(const ConfusionMatrix& cm) {
    const std::int64_t n = cm.total();
    if (n == 0) throw EmptyInput("accuracy of an empty confusion matrix");
    return 100.0 * static_cast<double>(cm.correct()) / static_cast<double>(n);
}

// Recall/precision/F1 in percent for one class.  Ratios with an empty
// denominator come out as 0 and raise the degenerate flag instead of
// propagating NaN into reports.
struct ClassMetrics {
    double recall_pct = 0.0;
    double precision_pct = 0.0;
    double f1_pct = 0.0;
    bool degenerate = false;
};

inline ClassMetrics per_class_metrics(const ConfusionMatrix& cm, int c) {
    ClassMetrics m;
    const auto tp = static_cast<double>(cm.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)]);
    const auto row = static_cast<double>(cm.row_sum(c));
    const auto col = static_cast<double>(cm.col_sum(c));
    if (row > 0)
        m.recall_pct = 100.0 * tp / row;
    else
        m.degenerate = true;
    if (col > 0)
        m.precision_pct = 100.0 * tp / col;
    else
        m.degenerate = true;
    const double pr = m.precision_pct + m.recall_pct;
    if (pr > 0)
        m.f1_pct = 2.0 * m.precision_pct * m.recall_pct / pr;
    else
        m.degenerate = true;
    return m;
}

// Generalization gap in percentage points.
inline double delta_acc_pct(double train_accuracy_pct, double test_accuracy_pct) {
    return train_accuracy_pct - test_accuracy_pct;
}

// Correct-vs-total counts over the sampled prediction horizon, bucketed
// into (0, bin_width], (bin_width, 2*bin_width], ... up to the horizon cap.
struct PredictionTimeHistogram {
    double bin_width_s = 0.25;
    std::vector<double> bin_start;
    std::vector<double> bin_end;
    std::vector<std::int64_t> total;
    std::vector<std::int64_t> correct;
};

struct TimedOutcome {
    double prediction_time_s = 0.0;
    bool correct = false;
};

inline PredictionTimeHistogram prediction_time_histogram(const std::vector<TimedOutcome>& outcomes,
                                                         double max_pred_time_s,
                                                         double bin_width_s = 0.25) {
    if (!(bin_width_s > 0.0) || bin_width_s > max_pred_time_s)
        throw BadBinWidth("bin width must lie in (0, max prediction time]");
    const auto n_bins =
        static_cast<std::int64_t>(std::ceil(max_pred_time_s / bin_width_s - 1e-9));
    PredictionTimeHistogram h;
    h.bin_width_s = bin_width_s;
    h.total.assign(static_cast<std::size_t>(n_bins), 0);
    h.correct.assign(static_cast<std::size_t>(n_bins), 0);
    for (std::int64_t b = 0; b < n_bins; ++b) {
        h.bin_start.push_back(static_cast<double>(b) * bin_width_s);
        h.bin_end.push_back(std::min(static_cast<double>(b + 1) * bin_width_s, max_pred_time_s));
    }
    for (const TimedOutcome& o : outcomes) {
        if (o.prediction_time_s <= 0.0 || o.prediction_time_s > max_pred_time_s)
            throw BadBinWidth("prediction time outside (0, max prediction time]");
        auto idx = static_cast<std::int64_t>(std::ceil(o.prediction_time_s / bin_width_s)) - 1;
        idx = std::max<std::int64_t>(0, std::min(idx, n_bins - 1));
        ++h.total[static_cast<std::size_t>(idx)];
        if (o.correct) ++h.correct[static_cast<std::size_t>(idx)];
    }
    return h;
}

}  // namespace lanecast
