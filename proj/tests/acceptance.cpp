// Acceptance gate: nine checks, one PASS/FAIL line each, nonzero exit if
// any fail.  Tolerances and time budgets are pinned in the individual
// checks; run on a single core.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lanecast/lanecast.hpp"

namespace fs = std::filesystem;
namespace nn = lanecast::nn;
using lanecast::AnyModel;
using lanecast::ConfusionMatrix;
using lanecast::DatasetConfig;
using lanecast::Label;
using lanecast::Rng;
using lanecast::Segment;
using lanecast::kFeatureCount;
using DTensor = nn::Tensor<double>;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;

    void fail(const std::string& why) {
        ok = false;
        if (!detail.empty()) detail += "; ";
        detail += why;
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

DTensor random_input(std::int64_t batch, std::int64_t seq, std::int64_t dim, std::uint64_t seed) {
    DTensor x = DTensor::zeros({batch, seq, dim});
    Rng rng(seed);
    x.fill_uniform(rng, -1.0, 1.0);
    return x;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return "<unreadable:" + p.string() + ">";
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch_dir(const char* leaf) {
    const fs::path dir = fs::temp_directory_path() / "lanecast_acceptance" / leaf;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// --- 1: reference confusion matrices reproduce known accuracy/F1 -------

Outcome check_metric_oracle() {
    Outcome r;
    struct Case {
        std::int64_t c[3][3];
        double acc;
        double f1[3];
    };
    const Case cases[] = {
        {{{1607, 17, 27}, {28, 728, 0}, {39, 0, 919}}, 96.70, {96.66, 97.00, 96.53}},
        {{{1369, 30, 32}, {63, 603, 0}, {92, 0, 716}}, 92.53, {92.66, 92.84, 92.03}},
        {{{1098, 43, 78}, {65, 486, 7}, {103, 3, 557}}, 87.75, {88.37, 89.17, 85.36}},
        {{{849, 50, 98}, {69, 398, 7}, {88, 5, 407}}, 83.92, {84.77, 85.87, 80.43}},
    };
    const double tol = 0.01 + 1e-9;
    for (std::size_t k = 0; k < 4; ++k) {
        ConfusionMatrix cm;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) cm.counts[i][j] = cases[k].c[i][j];
        const double acc = lanecast::accuracy_pct(cm);
        if (std::abs(acc - cases[k].acc) > tol)
            r.fail("matrix " + std::to_string(k) + " accuracy " + fmt("%.4f", acc) + " vs " +
                   fmt("%.2f", cases[k].acc));
        for (int c = 0; c < 3; ++c) {
            const double f1 = lanecast::per_class_metrics(cm, c).f1_pct;
            if (std::abs(f1 - cases[k].f1[c]) > tol)
                r.fail("matrix " + std::to_string(k) + " class " + std::to_string(c) + " F1 " +
                       fmt("%.4f", f1) + " vs " + fmt("%.2f", cases[k].f1[c]));
        }
    }
    if (r.ok) r.detail = "16 metric values within 0.01pp";
    return r;
}

// --- 2: gradients vs central differences for all nine configs ----------

Outcome check_gradients() {
    Outcome r;
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::size_t coords = 0;
    std::string worst_arch;
    for (const std::string& arch : lanecast::known_architectures()) {
        AnyModel<double> model = lanecast::make_model<double>(arch, 8, kFeatureCount, 2024);
        const DTensor x = random_input(3, 8, kFeatureCount, 7);
        const std::vector<int> labels = {0, 1, 2};

        nn::Graph<double> g;
        Rng fwd_rng(0);
        auto fr = lanecast::model_forward(model, g, x, /*train_mode=*/false, fwd_rng);
        nn::Var<double> loss = nn::cross_entropy(fr.logits, labels);
        g.backward(loss);
        std::vector<DTensor> analytic;
        analytic.reserve(fr.param_leaves.size());
        for (nn::Var<double> leaf : fr.param_leaves) analytic.push_back(leaf->grad);

        auto loss_fn = [&]() {
            nn::Graph<double> g2;
            Rng r2(0);
            auto fr2 = lanecast::model_forward(model, g2, x, false, r2);
            return nn::cross_entropy(fr2.logits, labels)->value.data[0];
        };
        Rng coord_rng(4242);
        // eps near cbrt(machine epsilon) keeps central differences accurate
        // and narrow enough not to straddle relu/max-pool kinks
        const auto report = nn::grad_check(loss_fn, lanecast::model_params(model), analytic,
                                           coord_rng, 4, 1e-6);
        coords += report.coords_checked;
        if (report.coords_checked < 20)
            r.fail(arch + " sampled only " + std::to_string(report.coords_checked) + " coords");
        if (report.max_rel_err > worst) {
            worst = report.max_rel_err;
            worst_arch = arch;
        }
    }
    const double dt = seconds_since(t0);
    if (worst >= 1e-4) r.fail("max rel err " + fmt("%.3g", worst) + " in " + worst_arch);
    if (dt >= 120.0) r.fail("took " + fmt("%.1f", dt) + "s, budget 120s");
    if (r.ok)
        r.detail = "max rel err " + fmt("%.2g", worst) + " over " + std::to_string(coords) +
                   " coords in " + fmt("%.1f", dt) + "s";
    return r;
}

// --- 3: forward passes vs independent recomputations -------------------

Outcome check_forward_oracles() {
    Outcome r;

    // stacked lstm against a scalar stepwise recurrence
    {
        const std::int64_t batch = 2, seq = 5, dim = 4;
        AnyModel<double> model = lanecast::make_model<double>("lstm1", seq, dim, 42);
        const DTensor x = random_input(batch, seq, dim, 5);
        nn::Graph<double> g;
        Rng fwd_rng(0);
        auto fr = lanecast::model_forward(model, g, x, false, fwd_rng);

        std::map<std::string, DTensor*> named;
        for (auto& [name, t] : lanecast::model_named_tensors(model)) named[name] = t;
        const auto cfg = std::get<lanecast::LstmConfig>(lanecast::model_config("lstm1"));
        const auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };

        double max_diff = 0.0;
        for (std::int64_t b = 0; b < batch; ++b) {
            std::vector<std::vector<double>> inputs(static_cast<std::size_t>(seq));
            for (std::int64_t t = 0; t < seq; ++t)
                for (std::int64_t j = 0; j < dim; ++j)
                    inputs[static_cast<std::size_t>(t)].push_back(x.at3(b, t, j));

            std::vector<double> h;
            for (std::size_t l = 0; l < cfg.layer_dims.size(); ++l) {
                const std::int64_t width = cfg.layer_dims[l];
                const std::string p = "layer" + std::to_string(l) + ".";
                const char* gates = "fico";
                h.assign(static_cast<std::size_t>(width), 0.0);
                std::vector<double> s(static_cast<std::size_t>(width), 0.0);
                std::vector<std::vector<double>> outputs;
                for (std::int64_t t = 0; t < seq; ++t) {
                    const auto& xt = inputs[static_cast<std::size_t>(t)];
                    std::vector<double> hn(static_cast<std::size_t>(width));
                    std::vector<double> sn(static_cast<std::size_t>(width));
                    for (std::int64_t row = 0; row < width; ++row) {
                        double pre[4];
                        for (int gi = 0; gi < 4; ++gi) {
                            const std::string gs(1, gates[gi]);
                            const DTensor& wx = *named.at(p + "w_x" + gs);
                            const DTensor& wh = *named.at(p + "w_h" + gs);
                            const DTensor& bias = *named.at(p + "bias_" + gs);
                            double v = bias.data[static_cast<std::size_t>(row)];
                            for (std::size_t k = 0; k < xt.size(); ++k)
                                v += wx.at2(row, static_cast<std::int64_t>(k)) * xt[k];
                            for (std::size_t k = 0; k < h.size(); ++k)
                                v += wh.at2(row, static_cast<std::int64_t>(k)) * h[k];
                            pre[gi] = v;
                        }
                        const auto ri = static_cast<std::size_t>(row);
                        const double f = sigmoid(pre[0]), i = sigmoid(pre[1]);
                        const double c = std::tanh(pre[2]), o = sigmoid(pre[3]);
                        sn[ri] = s[ri] * f + i * c;
                        hn[ri] = o * std::tanh(sn[ri]);
                    }
                    h = hn;
                    s = sn;
                    outputs.push_back(h);
                }
                inputs = outputs;
            }
            const DTensor& hw = *named.at("head.w");
            const DTensor& hb = *named.at("head.b");
            for (std::int64_t cls = 0; cls < 3; ++cls) {
                double v = hb.data[static_cast<std::size_t>(cls)];
                for (std::size_t k = 0; k < h.size(); ++k)
                    v += hw.at2(cls, static_cast<std::int64_t>(k)) * h[k];
                max_diff = std::max(max_diff, std::abs(fr.logits->value.at2(b, cls) - v));
            }
        }
        if (max_diff >= 1e-12) r.fail("lstm stepwise diff " + fmt("%.3g", max_diff));
    }

    // scaled dot-product attention against plain double loops
    {
        const std::int64_t n = 3, dh = 2;
        const DTensor q = DTensor::from({1, n, dh}, {0.3, -0.7, 1.1, 0.4, -0.2, 0.9});
        const DTensor k = DTensor::from({1, n, dh}, {0.5, 0.1, -0.6, 0.8, 0.2, -0.3});
        const DTensor v = DTensor::from({1, n, dh}, {1.0, 2.0, -1.0, 0.5, 0.25, -0.75});
        nn::Graph<double> g;
        auto att = nn::softmax_last(
            nn::scale(nn::matmul_nt(g.constant(q), g.constant(k)), 1.0 / std::sqrt(2.0)));
        auto out = nn::matmul(att, g.constant(v));

        double max_diff = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
            double w[3], total = 0.0;
            for (std::int64_t j = 0; j < n; ++j) {
                double score = 0.0;
                for (std::int64_t c = 0; c < dh; ++c) score += q.at3(0, i, c) * k.at3(0, j, c);
                w[j] = std::exp(score / std::sqrt(2.0));
                total += w[j];
            }
            for (std::int64_t c = 0; c < dh; ++c) {
                double expect = 0.0;
                for (std::int64_t j = 0; j < n; ++j) expect += w[j] / total * v.at3(0, j, c);
                max_diff = std::max(max_diff, std::abs(out->value.at3(0, i, c) - expect));
            }
        }
        if (max_diff >= 1e-10) r.fail("attention diff " + fmt("%.3g", max_diff));
    }

    // a centered delta kernel makes the temporal convolution an identity
    {
        DTensor x = DTensor::zeros({2, 3, 6, 4});
        Rng rng(11);
        x.fill_uniform(rng, -2.0, 2.0);
        DTensor kern = DTensor::zeros({3, 3, 5});
        for (std::int64_t c = 0; c < 3; ++c) kern.data[static_cast<std::size_t>((c * 3 + c) * 5 + 2)] = 1.0;
        const DTensor bias = DTensor::zeros({3});
        nn::Graph<double> g;
        auto out = nn::conv_time(g.constant(x), g.constant(kern), g.constant(bias));
        if (out->value.data != x.data) r.fail("delta-kernel convolution is not the identity");
    }

    if (r.ok) r.detail = "lstm < 1e-12, attention < 1e-10, conv identity exact";
    return r;
}

// --- 4: pipeline invariants on a seeded synthetic corpus ---------------

Outcome check_pipeline_properties() {
    Outcome r;
    const auto t0 = std::chrono::steady_clock::now();

    lanecast::SyntheticSpec spec;
    spec.recording_id = 7;
    spec.n_tracks = 220;
    spec.duration_s = 60.0;
    spec.lc_probability = 0.5;
    spec.seed = 99;
    const auto corpus = lanecast::generate_corpus(spec);

    DatasetConfig cfg;
    cfg.obs_window_s = 2.0;
    cfg.max_pred_time_s = 3.0;
    cfg.seed = 11;
    const double f = lanecast::frames_per_second(corpus.recording.meta);

    auto build = [&] {
        auto segments = lanecast::extract_segments(corpus.recording, cfg);
        Rng balance_rng = lanecast::keyed_rng(cfg.seed, {lanecast::rng_tag("balance")});
        return lanecast::balance_classes(segments, balance_rng);
    };
    const auto segments = lanecast::extract_segments(corpus.recording, cfg);

    std::map<std::int64_t, std::vector<lanecast::LCInstant>> instants;
    for (const auto& track : corpus.recording.tracks)
        instants[track.id] = lanecast::detect_lc_instants(track);

    std::size_t contained = 0, misaligned = 0, lc_count = 0;
    for (const Segment& s : segments) {
        for (const auto& lc : instants.at(s.track_id))
            if (lc.frame >= s.start_frame && lc.frame < s.end_frame) ++contained;
        if (s.label == Label::lane_keep) continue;
        ++lc_count;
        const std::int64_t shift = lanecast::window_frames(*s.prediction_time_s, f);
        bool aligned = false;
        for (const auto& lc : instants.at(s.track_id))
            aligned = aligned || lc.frame == s.end_frame + shift;
        if (!aligned) ++misaligned;
    }
    if (contained > 0) r.fail(std::to_string(contained) + " windows contain a lane change");
    if (misaligned > 0) r.fail(std::to_string(misaligned) + " windows misaligned to their horizon");
    if (lc_count == 0) r.fail("corpus produced no lane-change segments");

    const auto balanced = build();
    std::int64_t counts[3] = {0, 0, 0};
    for (const Segment& s : balanced) ++counts[static_cast<int>(s.label)];
    if (counts[0] != counts[1] + counts[2])
        r.fail("balance " + std::to_string(counts[0]) + " vs " + std::to_string(counts[1]) + "+" +
               std::to_string(counts[2]));

    const auto split = lanecast::split_dataset(balanced, cfg.seed);
    const auto n = static_cast<std::int64_t>(balanced.size());
    if (static_cast<std::int64_t>(split.train.size()) != n * 6 / 10 ||
        static_cast<std::int64_t>(split.val.size()) != n * 2 / 10 ||
        split.train.size() + split.val.size() + split.test.size() != balanced.size())
        r.fail("split sizes " + std::to_string(split.train.size()) + "/" +
               std::to_string(split.val.size()) + "/" + std::to_string(split.test.size()) +
               " of " + std::to_string(balanced.size()));

    const fs::path dir = scratch_dir("manifests");
    lanecast::write_manifest((dir / "a.csv").string(), split);
    lanecast::write_manifest((dir / "b.csv").string(),
                             lanecast::split_dataset(build(), cfg.seed));
    if (slurp(dir / "a.csv") != slurp(dir / "b.csv")) r.fail("manifests differ across reruns");

    const double dt = seconds_since(t0);
    if (dt >= 60.0) r.fail("took " + fmt("%.1f", dt) + "s, budget 60s");
    if (r.ok)
        r.detail = std::to_string(segments.size()) + " segments, " + std::to_string(lc_count) +
                   " lane changes, " + fmt("%.1f", dt) + "s";
    return r;
}

// --- 5: balancing reproduces the reference dataset sizes ---------------

Outcome check_balancing_table() {
    Outcome r;
    struct Cell {
        std::uint64_t pred, obs;
        std::int64_t lk, llc, rlc;
    };
    const Cell cells[] = {
        {3, 1, 9517, 4276, 5241}, {3, 2, 8412, 3773, 4639}, {3, 3, 7261, 3293, 3968},
        {4, 1, 8412, 3773, 4639}, {4, 2, 7261, 3293, 3968}, {4, 3, 6099, 2781, 3318},
        {5, 1, 7261, 3293, 3968}, {5, 2, 6099, 2781, 3318}, {5, 3, 4927, 2299, 2628},
        {6, 1, 6099, 2781, 3318}, {6, 2, 4927, 2299, 2628}, {6, 3, 3835, 1820, 2015},
    };
    for (const Cell& cell : cells) {
        std::vector<Segment> segments;
        auto push = [&](Label label, std::int64_t count) {
            for (std::int64_t i = 0; i < count; ++i) {
                Segment s;
                s.track_id = static_cast<std::int64_t>(segments.size()) + 1;
                s.label = label;
                segments.push_back(s);
            }
        };
        push(Label::left_change, cell.llc);
        push(Label::right_change, cell.rlc);
        push(Label::lane_keep, cell.lk + 1234);  // surplus to trim

        Rng rng = lanecast::keyed_rng(cell.obs * 10 + cell.pred, {lanecast::rng_tag("balance")});
        const auto balanced = lanecast::balance_classes(segments, rng);
        std::int64_t counts[3] = {0, 0, 0};
        for (const Segment& s : balanced) ++counts[static_cast<int>(s.label)];
        if (counts[0] != cell.lk || counts[1] != cell.llc || counts[2] != cell.rlc)
            r.fail("cell pred=" + std::to_string(cell.pred) + " obs=" + std::to_string(cell.obs) +
                   " gave " + std::to_string(counts[0]) + "/" + std::to_string(counts[1]) + "/" +
                   std::to_string(counts[2]));
    }
    if (r.ok) r.detail = "all 12 grid cells";
    return r;
}

// --- 6: learning sanity on corpus and toy -------------------------------

Outcome check_learning_sanity() {
    Outcome r;

    lanecast::SyntheticSpec spec;
    spec.recording_id = 1;
    spec.n_tracks = 800;
    spec.duration_s = 60.0;
    spec.lc_probability = 0.55;
    spec.lc_duration_s = 9.0;
    spec.sway_amplitude_m = 0.05;
    spec.seed = 77;
    const auto corpus = lanecast::generate_corpus(spec);

    DatasetConfig cfg;
    cfg.obs_window_s = 2.0;
    cfg.max_pred_time_s = 3.0;
    cfg.seed = 5;
    const auto pd = lanecast::prepare_dataset({corpus.recording}, cfg);

    std::string times;
    for (const char* arch : {"lstm2", "cnn3", "tn2"}) {
        lanecast::TrainConfig tc;
        tc.batch_size = 32;
        tc.max_epochs = 200;
        tc.patience = 15;
        tc.seed = 1;
        const auto t0 = std::chrono::steady_clock::now();
        const auto j = lanecast::train_and_score(arch, pd, tc);
        const double dt = seconds_since(t0);
        const double acc = j.at("test_accuracy_pct").get<double>();
        const auto epochs = j.at("epochs_trained").get<std::int64_t>();
        if (acc < 85.0) r.fail(std::string(arch) + " held-out " + fmt("%.2f", acc) + "% < 85%");
        if (epochs > 200) r.fail(std::string(arch) + " ran " + std::to_string(epochs) + " epochs");
        if (dt >= 600.0) r.fail(std::string(arch) + " took " + fmt("%.0f", dt) + "s, budget 600s");
        if (!times.empty()) times += ", ";
        times += std::string(arch) + " " + fmt("%.1f", acc) + "% in " + fmt("%.0f", dt) + "s";
    }

    const auto toy = lanecast::generate_separable_toy(20, 8, 123);
    for (const std::string arch : {"lstm2", "cnn3", "tn2"}) {
        AnyModel<double> m = lanecast::make_model<double>(arch, 8, kFeatureCount, 9);
        lanecast::TrainConfig tc;
        tc.max_epochs = 50;
        tc.batch_size = 16;
        tc.seed = 11;
        if (arch.rfind("lstm", 0) == 0) tc.lr = 3e-2;
        if (arch.rfind("cnn", 0) == 0) tc.lr = 3e-3;
        lanecast::train(m, toy, toy, tc);
        const double acc = lanecast::accuracy_pct(lanecast::evaluate(m, toy, 16).confusion);
        if (acc < 99.0) r.fail(arch + " toy " + fmt("%.1f", acc) + "% < 99%");
    }

    if (r.ok) r.detail = times + ", toy >= 99%";
    return r;
}

// --- 7: histogram conservation ------------------------------------------

Outcome check_histogram_conservation() {
    Outcome r;

    lanecast::SyntheticSpec spec;
    spec.recording_id = 2;
    spec.n_tracks = 120;
    spec.duration_s = 45.0;
    spec.lc_probability = 0.6;
    spec.seed = 13;
    const auto corpus = lanecast::generate_corpus(spec);
    DatasetConfig cfg;
    cfg.obs_window_s = 1.0;
    cfg.max_pred_time_s = 3.0;
    cfg.seed = 4;
    const auto pd = lanecast::prepare_dataset({corpus.recording}, cfg);
    if (pd.test.empty()) {
        r.fail("empty test split");
        return r;
    }

    for (const char* arch : {"lstm3", "tn1"}) {
        AnyModel<float> m =
            lanecast::make_model<float>(arch, pd.test.front().rows, kFeatureCount, 21);
        const auto out = lanecast::evaluate(m, pd.test);
        const auto outcomes = lanecast::timed_outcomes(out.samples);
        for (const double width : {0.25, 0.5}) {
            const auto h =
                lanecast::prediction_time_histogram(outcomes, cfg.max_pred_time_s, width);
            std::int64_t sum_total = 0, sum_correct = 0;
            for (std::size_t i = 0; i < h.total.size(); ++i) {
                sum_total += h.total[i];
                sum_correct += h.correct[i];
                if (h.correct[i] > h.total[i])
                    r.fail("bin " + std::to_string(i) + " correct exceeds total");
            }
            const std::int64_t diag_lc = out.confusion.counts[1][1] + out.confusion.counts[2][2];
            if (sum_correct != diag_lc)
                r.fail(std::string(arch) + " width " + fmt("%.2f", width) + ": correct " +
                       std::to_string(sum_correct) + " vs confusion diagonal " +
                       std::to_string(diag_lc));
            if (sum_total != static_cast<std::int64_t>(outcomes.size()))
                r.fail("histogram drops samples");
        }
    }
    if (r.ok) r.detail = "2 models x 2 bin widths";
    return r;
}

// --- 8: positional encoding spot values ----------------------------------

Outcome check_positional_encoding() {
    Outcome r;
    const auto pe = lanecast::positional_encoding<double>(4, 16);
    if (pe.at2(0, 0) != 0.0) r.fail("pe[0][0] = " + fmt("%.3g", pe.at2(0, 0)) + ", want 0");
    if (pe.at2(0, 1) != 1.0) r.fail("pe[0][1] = " + fmt("%.3g", pe.at2(0, 1)) + ", want 1");
    if (std::abs(pe.at2(1, 0) - std::sin(1.0)) > 1e-9)
        r.fail("pe[1][0] = " + fmt("%.12f", pe.at2(1, 0)) + ", want sin(1)");
    const double base_1000 = std::sin(1.0 / std::pow(1000.0, 2.0 / 16.0));
    const double base_10000 = std::sin(1.0 / std::pow(10000.0, 2.0 / 16.0));
    if (std::abs(pe.at2(1, 2) - base_1000) > 1e-9)
        r.fail("pe[1][2] = " + fmt("%.12f", pe.at2(1, 2)) + " does not use base 1000");
    if (std::abs(pe.at2(1, 2) - base_10000) < 1e-3)
        r.fail("pe[1][2] matches a base-10000 table");
    if (r.ok) r.detail = "zero/one/sin(1) spots and base-1000 wavelength";
    return r;
}

// --- 9: byte-identical sweep reruns ---------------------------------------

Outcome check_sweep_determinism() {
    Outcome r;

    lanecast::SyntheticSpec spec;
    spec.recording_id = 5;
    spec.n_tracks = 150;
    spec.duration_s = 40.0;
    spec.lc_probability = 0.6;
    spec.seed = 3;
    const auto corpus = lanecast::generate_corpus(spec);

    lanecast::SweepOptions opt;
    opt.archs = {"lstm3", "tn1"};
    opt.obs_windows_s = {1.0};
    opt.pred_times_s = {2.0};
    opt.seed = 4;
    opt.train.batch_size = 16;
    opt.train.max_epochs = 3;

    const fs::path a = scratch_dir("sweep_a");
    const fs::path b = scratch_dir("sweep_b");
    lanecast::run_sweep({corpus.recording}, opt, a.string());
    lanecast::run_sweep({corpus.recording}, opt, b.string());

    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        const std::string name = entry.path().filename().string();
        if (!fs::exists(b / name)) {
            r.fail(name + " missing from rerun");
            continue;
        }
        if (slurp(entry.path()) != slurp(b / name)) r.fail(name + " differs across reruns");
        ++compared;
    }
    if (compared != opt.archs.size()) r.fail("expected 2 result files, saw " + std::to_string(compared));
    if (r.ok) r.detail = std::to_string(compared) + " result files byte-identical";
    return r;
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        Outcome (*run)();
    };
    const Criterion criteria[] = {
        {"reference confusion matrices reproduce accuracy and F1", check_metric_oracle},
        {"analytic gradients match central differences for all nine configurations",
         check_gradients},
        {"forward passes match independent recomputations", check_forward_oracles},
        {"segmentation invariants hold on a 220-track synthetic corpus",
         check_pipeline_properties},
        {"class balancing reproduces the reference dataset sizes", check_balancing_table},
        {"best configurations learn the synthetic corpus and the toy set", check_learning_sanity},
        {"prediction-time histograms conserve their confusion matrix",
         check_histogram_conservation},
        {"positional encoding spot values pin the base-1000 formula", check_positional_encoding},
        {"sweep reruns are byte-identical", check_sweep_determinism},
    };

    int failures = 0;
    for (std::size_t i = 0; i < std::size(criteria); ++i) {
        Outcome outcome;
        try {
            outcome = criteria[i].run();
        } catch (const std::exception& e) {
            outcome.fail(std::string("exception: ") + e.what());
        }
        if (!outcome.ok) ++failures;
        std::printf("%s  %zu/9 %s%s%s\n", outcome.ok ? "PASS" : "FAIL", i + 1, criteria[i].name,
                    outcome.detail.empty() ? "" : ": ", outcome.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
