#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lanecast/core/csv.hpp"
#include "lanecast/core/errors.hpp"
#include "lanecast/core/parallel.hpp"
#include "lanecast/core/rng.hpp"
#include "lanecast/features.hpp"
#include "lanecast/highd.hpp"
#include "lanecast/models/model.hpp"
#include "lanecast/segmentation.hpp"
#include "lanecast/train/metrics.hpp"
#include "lanecast/train/trainer.hpp"

// End-to-end glue: recordings in, normalized tensor-ready splits out, plus
// the grid evaluation that writes one result file per model and window
// combination.

namespace lanecast {

struct PreparedDataset {
    DatasetConfig cfg;
    double frame_rate_hz = 0.0;
    SplitDataset splits;
    Normalizer normalizer;
    std::vector<FeatureMatrix> train;
    std::vector<FeatureMatrix> val;
    std::vector<FeatureMatrix> test;
};

inline PreparedDataset prepare_dataset(const std::vector<Recording>& recordings,
                                       const DatasetConfig& cfg) {
    if (recordings.empty()) throw EmptyInput("no recordings to prepare");
    if (cfg.obs_window_s <= 0.0 || cfg.max_pred_time_s <= 0.0)
        throw BadConfig("observation window and prediction horizon must be positive");
    const double frame_rate = recordings.front().meta.frame_rate_hz;
    for (const auto& rec : recordings)
        if (rec.meta.frame_rate_hz != frame_rate)
            throw BadConfig("recordings mix frame rates; windows would disagree in length");

    std::vector<Segment> segments;
    for (const auto& rec : recordings) {
        auto part = extract_segments(rec, cfg);
        segments.insert(segments.end(), part.begin(), part.end());
    }
    Rng balance_rng = keyed_rng(cfg.seed, {rng_tag("balance")});
    segments = balance_classes(segments, balance_rng);

    PreparedDataset pd;
    pd.cfg = cfg;
    pd.frame_rate_hz = frame_rate;
    pd.splits = split_dataset(std::move(segments), cfg.seed);

    std::map<std::int64_t, const Recording*> by_id;
    for (const auto& rec : recordings) by_id[rec.meta.id] = &rec;

    auto build = [&](const std::vector<Segment>& split) {
        std::vector<FeatureMatrix> out(split.size());
        parallel_for(split.size(), [&](std::size_t i) {
            const Segment& s = split[i];
            auto it = by_id.find(s.recording_id);
            if (it == by_id.end())
                throw MissingTrack("segment references unknown recording " +
                                   std::to_string(s.recording_id));
            FeatureMatrix m =
                assemble_feature_matrix(*it->second, s.track_id, s.start_frame, s.end_frame);
            m.label = s.label;
            m.prediction_time_s = s.prediction_time_s;
            out[i] = std::move(m);
        });
        return out;
    };
    pd.train = build(pd.splits.train);
    pd.val = build(pd.splits.val);
    pd.test = build(pd.splits.test);

    pd.normalizer = Normalizer::fit(pd.train);
    for (auto* split : {&pd.train, &pd.val, &pd.test})
        for (auto& m : *split) pd.normalizer.apply(m);
    return pd;
}

namespace pipeline_detail {

inline std::string sample_base_name(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%06zu", index);
    return buf;
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << '\n';
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

inline nlohmann::json class_counts_json(const std::vector<FeatureMatrix>& split) {
    std::array<std::int64_t, kClassCount> c{};
    for (const auto& m : split) ++c[static_cast<std::size_t>(m.label)];
    nlohmann::json j;
    for (int k = 0; k < kClassCount; ++k) j[to_string(static_cast<Label>(k))] = c[k];
    return j;
}

}  // namespace pipeline_detail

// Layout under dir/: manifest.csv, normalizer.json, dataset.json and one
// train/ val/ test/ directory of numbered .bin/.json sample pairs, stored
// already normalized.
inline void write_prepared(const std::string& dir, const PreparedDataset& pd) {
    namespace fs = std::filesystem;
    using pipeline_detail::sample_base_name;
    fs::create_directories(dir);
    write_manifest(dir + "/manifest.csv", pd.splits);
    pipeline_detail::write_json_file(dir + "/normalizer.json", pd.normalizer.to_json());
    nlohmann::json meta{
        {"obs_window_s", pd.cfg.obs_window_s},
        {"max_pred_time_s", pd.cfg.max_pred_time_s},
        {"seed", pd.cfg.seed},
        {"frame_rate_hz", pd.frame_rate_hz},
        {"counts",
         {{"train", pd.train.size()}, {"val", pd.val.size()}, {"test", pd.test.size()}}},
        {"class_counts",
         {{"train", pipeline_detail::class_counts_json(pd.train)},
          {"val", pipeline_detail::class_counts_json(pd.val)},
          {"test", pipeline_detail::class_counts_json(pd.test)}}},
    };
    pipeline_detail::write_json_file(dir + "/dataset.json", meta);
    const std::pair<const char*, const std::vector<FeatureMatrix>*> splits[] = {
        {"train", &pd.train}, {"val", &pd.val}, {"test", &pd.test}};
    for (const auto& [name, split] : splits) {
        fs::create_directories(dir + "/" + name);
        for (std::size_t i = 0; i < split->size(); ++i)
            write_feature_matrix(dir + "/" + name + "/" + sample_base_name(i), (*split)[i]);
    }
}

inline PreparedDataset read_prepared(const std::string& dir) {
    using pipeline_detail::sample_base_name;
    const nlohmann::json meta = pipeline_detail::read_json_file(dir + "/dataset.json");
    PreparedDataset pd;
    pd.cfg.obs_window_s = meta.at("obs_window_s").get<double>();
    pd.cfg.max_pred_time_s = meta.at("max_pred_time_s").get<double>();
    pd.cfg.seed = meta.at("seed").get<std::uint64_t>();
    pd.frame_rate_hz = meta.at("frame_rate_hz").get<double>();
    pd.normalizer = Normalizer::from_json(pipeline_detail::read_json_file(dir + "/normalizer.json"));
    pd.splits = read_manifest(dir + "/manifest.csv");
    const std::pair<const char*, std::vector<FeatureMatrix>*> splits[] = {
        {"train", &pd.train}, {"val", &pd.val}, {"test", &pd.test}};
    for (const auto& [name, split] : splits) {
        const auto count = meta.at("counts").at(name).get<std::size_t>();
        split->resize(count);
        parallel_for(count, [&](std::size_t i) {
            (*split)[i] = read_feature_matrix(dir + "/" + name + "/" + sample_base_name(i));
        });
    }
    return pd;
}

inline std::vector<TimedOutcome> timed_outcomes(const std::vector<SampleResult>& samples) {
    std::vector<TimedOutcome> out;
    for (const auto& s : samples)
        if (s.prediction_time_s) out.push_back({*s.prediction_time_s, s.truth == s.predicted});
    return out;
}

inline nlohmann::json confusion_json(const ConfusionMatrix& cm) {
    auto rows = nlohmann::json::array();
    for (int r = 0; r < kClassCount; ++r) rows.push_back(cm.counts[static_cast<std::size_t>(r)]);
    return rows;
}

inline nlohmann::json metrics_json(const ConfusionMatrix& train_cm, const ConfusionMatrix& test_cm) {
    const double train_acc = accuracy_pct(train_cm);
    const double test_acc = accuracy_pct(test_cm);
    nlohmann::json per_class;
    for (int c = 0; c < kClassCount; ++c) {
        const ClassMetrics m = per_class_metrics(test_cm, c);
        per_class[to_string(static_cast<Label>(c))] = {{"recall_pct", m.recall_pct},
                                                       {"precision_pct", m.precision_pct},
                                                       {"f1_pct", m.f1_pct},
                                                       {"degenerate", m.degenerate}};
    }
    return {
        {"train_accuracy_pct", train_acc},
        {"test_accuracy_pct", test_acc},
        {"delta_acc_pct", delta_acc_pct(train_acc, test_acc)},
        {"test_confusion", confusion_json(test_cm)},
        {"per_class", per_class},
    };
}

inline nlohmann::json histogram_json(const PredictionTimeHistogram& h) {
    return {{"bin_width_s", h.bin_width_s},
            {"bin_start", h.bin_start},
            {"bin_end", h.bin_end},
            {"total", h.total},
            {"correct", h.correct}};
}

// Trains one architecture on an already prepared dataset and packages every
// number the report needs.
inline nlohmann::json train_and_score(const std::string& arch, const PreparedDataset& pd,
                                      const TrainConfig& tc, double hist_bin_width_s = 0.25) {
    if (pd.train.empty()) throw EmptyInput("prepared dataset has no training samples");
    AnyModel<float> model =
        make_model<float>(arch, pd.train.front().rows, kFeatureCount, tc.seed);
    const TrainResult tr = train(model, pd.train, pd.val, tc);
    EvalOutcome on_train = evaluate(model, pd.train);
    EvalOutcome on_test = evaluate(model, pd.test);
    const auto hist = prediction_time_histogram(timed_outcomes(on_test.samples),
                                                pd.cfg.max_pred_time_s, hist_bin_width_s);
    nlohmann::json j = metrics_json(on_train.confusion, on_test.confusion);
    j["architecture"] = arch;
    j["obs_window_s"] = pd.cfg.obs_window_s;
    j["max_pred_time_s"] = pd.cfg.max_pred_time_s;
    j["seed"] = tc.seed;
    j["counts"] = {{"train", pd.train.size()}, {"val", pd.val.size()}, {"test", pd.test.size()}};
    j["epochs_trained"] = tr.history.size();
    j["best_epoch"] = tr.best_epoch;
    j["best_val_loss"] = tr.best_val_loss;
    j["test_mean_loss"] = on_test.mean_loss;
    j["prediction_time_histogram"] = histogram_json(hist);
    return j;
}

struct SweepOptions {
    std::vector<std::string> archs;
    std::vector<double> obs_windows_s;
    std::vector<double> pred_times_s;
    std::uint64_t seed = 0;
    TrainConfig train;
    double hist_bin_width_s = 0.25;
};

inline std::string result_file_name(const std::string& arch, double obs_s, double pred_s) {
    return "result_" + arch + "_obs" + format_double(obs_s) + "_pred" + format_double(pred_s) +
           ".json";
}

// One dataset per grid cell, shared by all architectures in that cell.
// Cells run concurrently; each writes only its own files, so the output is
// identical no matter how work is scheduled.
inline void run_sweep(const std::vector<Recording>& recordings, const SweepOptions& opt,
                      const std::string& out_dir) {
    if (opt.archs.empty() || opt.obs_windows_s.empty() || opt.pred_times_s.empty())
        throw BadConfig("sweep needs architectures, observation windows and horizons");
    for (const auto& arch : opt.archs) model_config(arch);  // reject unknown names up front
    std::filesystem::create_directories(out_dir);
    struct Cell {
        double obs, pred;
    };
    std::vector<Cell> cells;
    for (double o : opt.obs_windows_s)
        for (double p : opt.pred_times_s) cells.push_back({o, p});
    parallel_for(cells.size(), [&](std::size_t i) {
        DatasetConfig cfg;
        cfg.obs_window_s = cells[i].obs;
        cfg.max_pred_time_s = cells[i].pred;
        cfg.seed = opt.seed;
        const PreparedDataset pd = prepare_dataset(recordings, cfg);
        for (const auto& arch : opt.archs) {
            TrainConfig tc = opt.train;
            tc.seed = opt.seed;
            const nlohmann::json j = train_and_score(arch, pd, tc, opt.hist_bin_width_s);
            pipeline_detail::write_json_file(
                out_dir + "/" + result_file_name(arch, cfg.obs_window_s, cfg.max_pred_time_s), j);
        }
    });
}

}  // namespace lanecast
