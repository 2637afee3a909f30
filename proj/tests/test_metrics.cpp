#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "lanecast/train/metrics.hpp"

using lanecast::ConfusionMatrix;
using lanecast::Label;
using lanecast::TimedOutcome;

namespace {

ConfusionMatrix from_counts(const std::int64_t (&c)[3][3]) {
    ConfusionMatrix cm;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) cm.counts[i][j] = c[i][j];
    return cm;
}

}  // namespace

TEST_CASE("confusion matrix bookkeeping") {
    ConfusionMatrix cm;
    cm.add(Label::lane_keep, Label::lane_keep);
    cm.add(Label::lane_keep, Label::left_change);
    cm.add(Label::left_change, Label::left_change);
    cm.add(Label::right_change, Label::lane_keep);
    cm.add(Label::right_change, Label::right_change);

    CHECK(cm.total() == 5);
    CHECK(cm.correct() == 3);
    CHECK(cm.row_sum(0) == 2);
    CHECK(cm.row_sum(1) == 1);
    CHECK(cm.row_sum(2) == 2);
    CHECK(cm.col_sum(0) == 2);
    CHECK(cm.col_sum(1) == 2);
    CHECK(cm.col_sum(2) == 1);
    CHECK(lanecast::accuracy_pct(cm) == 60.0);
}

TEST_CASE("benchmark confusion matrices reproduce the published scores") {
    struct Expected {
        std::int64_t counts[3][3];
        double acc;
        double f1[3];
    };
    // 3, 4, 5 and 6 second maximum prediction horizons
    const Expected cases[] = {
        {{{1607, 17, 27}, {28, 728, 0}, {39, 0, 919}}, 96.70, {96.66, 97.00, 96.53}},
        {{{1369, 30, 32}, {63, 603, 0}, {92, 0, 716}}, 92.53, {92.66, 92.84, 92.03}},
        {{{1098, 43, 78}, {65, 486, 7}, {103, 3, 557}}, 87.75, {88.37, 89.17, 85.36}},
        {{{849, 50, 98}, {69, 398, 7}, {88, 5, 407}}, 83.92, {84.77, 85.87, 80.43}},
    };
    for (const Expected& e : cases) {
        // published numbers are rounded to two decimals, so allow half a tick
        const ConfusionMatrix cm = from_counts(e.counts);
        CHECK(lanecast::accuracy_pct(cm) == Catch::Approx(e.acc).margin(0.00501));
        for (int c = 0; c < 3; ++c) {
            const auto m = lanecast::per_class_metrics(cm, c);
            INFO("class " << c);
            CHECK_FALSE(m.degenerate);
            CHECK(m.f1_pct == Catch::Approx(e.f1[c]).margin(0.00501));
        }
    }
}

TEST_CASE("per-class metrics from a hand-worked matrix") {
    const ConfusionMatrix cm = from_counts({{8, 1, 1}, {2, 6, 2}, {0, 1, 9}});
    const auto lk = lanecast::per_class_metrics(cm, 0);
    CHECK(lk.recall_pct == Catch::Approx(80.0));
    CHECK(lk.precision_pct == Catch::Approx(80.0));
    CHECK(lk.f1_pct == Catch::Approx(80.0));

    const auto llc = lanecast::per_class_metrics(cm, 1);
    CHECK(llc.recall_pct == Catch::Approx(60.0));
    CHECK(llc.precision_pct == Catch::Approx(75.0));
    CHECK(llc.f1_pct == Catch::Approx(2.0 * 60.0 * 75.0 / 135.0));
}

TEST_CASE("empty rows or columns degrade gracefully") {
    // nothing was ever truly RLC and nothing was predicted LLC
    const ConfusionMatrix cm = from_counts({{5, 0, 1}, {2, 0, 0}, {0, 0, 0}});
    const auto rlc = lanecast::per_class_metrics(cm, 2);
    CHECK(rlc.degenerate);
    CHECK(rlc.recall_pct == 0.0);
    const auto llc = lanecast::per_class_metrics(cm, 1);
    CHECK(llc.degenerate);
    CHECK(llc.precision_pct == 0.0);
    CHECK(llc.f1_pct == 0.0);

    CHECK_THROWS_AS(lanecast::accuracy_pct(ConfusionMatrix{}), lanecast::EmptyInput);
}

TEST_CASE("the generalization gap is train minus test accuracy") {
    CHECK(lanecast::delta_acc_pct(98.2, 96.7) == Catch::Approx(1.5));
    CHECK(lanecast::delta_acc_pct(90.0, 95.0) == Catch::Approx(-5.0));
}

TEST_CASE("prediction times land in half-open bins from above") {
    std::vector<TimedOutcome> outcomes = {
        {0.25, true},   // boundary belongs to the first bin
        {0.10, false},  //
        {0.26, true},   // just past the boundary
        {3.00, true},   // the cap lands in the last bin
        {2.80, false},  //
    };
    const auto h = lanecast::prediction_time_histogram(outcomes, 3.0, 0.25);
    REQUIRE(h.total.size() == 12);
    REQUIRE(h.bin_start.size() == 12);
    CHECK(h.bin_start.front() == 0.0);
    CHECK(h.bin_end.front() == 0.25);
    CHECK(h.bin_start.back() == Catch::Approx(2.75));
    CHECK(h.bin_end.back() == 3.0);

    CHECK(h.total[0] == 2);
    CHECK(h.correct[0] == 1);
    CHECK(h.total[1] == 1);
    CHECK(h.correct[1] == 1);
    CHECK(h.total[11] == 2);
    CHECK(h.correct[11] == 1);

    std::int64_t total = 0, correct = 0;
    for (std::size_t i = 0; i < h.total.size(); ++i) {
        CHECK(h.correct[i] <= h.total[i]);
        total += h.total[i];
        correct += h.correct[i];
    }
    CHECK(total == static_cast<std::int64_t>(outcomes.size()));
    CHECK(correct == 3);
}

TEST_CASE("a bin width that does not divide the horizon still covers it") {
    const auto h = lanecast::prediction_time_histogram({{0.95, true}}, 1.0, 0.3);
    REQUIRE(h.total.size() == 4);
    CHECK(h.bin_start.back() == Catch::Approx(0.9));
    CHECK(h.bin_end.back() == 1.0);  // clamped to the horizon
    CHECK(h.total[3] == 1);
}

TEST_CASE("histogram input validation") {
    CHECK_THROWS_AS(lanecast::prediction_time_histogram({}, 3.0, 0.0), lanecast::BadBinWidth);
    CHECK_THROWS_AS(lanecast::prediction_time_histogram({}, 3.0, -1.0), lanecast::BadBinWidth);
    CHECK_THROWS_AS(lanecast::prediction_time_histogram({}, 3.0, 3.5), lanecast::BadBinWidth);
    CHECK_THROWS_AS(lanecast::prediction_time_histogram({{0.0, true}}, 3.0, 0.25),
                    lanecast::BadBinWidth);
    CHECK_THROWS_AS(lanecast::prediction_time_histogram({{3.01, true}}, 3.0, 0.25),
                    lanecast::BadBinWidth);
}
