#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lanecast/pipeline.hpp"
#include "lanecast/report.hpp"
#include "lanecast/synthetic.hpp"

namespace fs = std::filesystem;
using lanecast::DatasetConfig;
using lanecast::FeatureMatrix;
using lanecast::Label;
using lanecast::PreparedDataset;
using lanecast::Recording;
using lanecast::prepare_dataset;

namespace {

std::vector<Recording> small_corpus() {
    lanecast::SyntheticSpec spec;
    spec.recording_id = 3;
    spec.n_tracks = 60;
    spec.duration_s = 40.0;
    spec.lc_probability = 0.6;
    spec.seed = 31;
    return {lanecast::generate_corpus(spec).recording};
}

DatasetConfig small_cfg() {
    DatasetConfig cfg;
    cfg.obs_window_s = 2.0;
    cfg.max_pred_time_s = 3.0;
    cfg.seed = 5;
    return cfg;
}

std::array<std::int64_t, 3> label_counts(const PreparedDataset& pd) {
    std::array<std::int64_t, 3> c{};
    for (const auto* split : {&pd.train, &pd.val, &pd.test})
        for (const auto& m : *split) ++c[static_cast<std::size_t>(m.label)];
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("prepared datasets are balanced, split and normalized") {
    const auto recordings = small_corpus();
    const PreparedDataset pd = prepare_dataset(recordings, small_cfg());

    const auto counts = label_counts(pd);
    CHECK(counts[0] == counts[1] + counts[2]);  // LK matches LLC plus RLC
    CHECK(counts[1] > 0);
    CHECK(counts[2] > 0);

    const auto n = counts[0] + counts[1] + counts[2];
    CHECK(static_cast<std::int64_t>(pd.train.size()) == n * 6 / 10);
    CHECK(static_cast<std::int64_t>(pd.val.size()) == n * 2 / 10);
    CHECK(pd.test.size() == static_cast<std::size_t>(n) - pd.train.size() - pd.val.size());

    CHECK(pd.frame_rate_hz == 25.0);
    const std::int64_t rows = lanecast::window_frames(2.0, 25.0);
    for (const auto& m : pd.train) {
        CHECK(m.rows == rows);
        CHECK(m.values.size() == static_cast<std::size_t>(rows * lanecast::kFeatureCount));
        if (m.label == Label::lane_keep) {
            CHECK(!m.prediction_time_s);
        } else {
            REQUIRE(m.prediction_time_s.has_value());
            CHECK(*m.prediction_time_s > 0.0);
            CHECK(*m.prediction_time_s <= 3.0);
        }
    }

    // fitting on train and applying everywhere standardizes train exactly
    for (int col = 0; col < lanecast::kFeatureCount; ++col) {
        double sum = 0.0, sq = 0.0;
        std::int64_t cnt = 0;
        for (const auto& m : pd.train)
            for (std::int64_t r = 0; r < m.rows; ++r) {
                const double v = m.values[static_cast<std::size_t>(r * lanecast::kFeatureCount + col)];
                sum += v;
                sq += v * v;
                ++cnt;
            }
        const double mean = sum / static_cast<double>(cnt);
        const double var = sq / static_cast<double>(cnt) - mean * mean;
        INFO("column " << col);
        CHECK(std::abs(mean) < 1e-9);
        // constant columns collapse to zero instead of blowing up
        CHECK((std::abs(var - 1.0) < 1e-6 || std::abs(var) < 1e-12));
    }
}

TEST_CASE("preparing twice with one seed is fully reproducible") {
    const auto recordings = small_corpus();
    const PreparedDataset a = prepare_dataset(recordings, small_cfg());
    const PreparedDataset b = prepare_dataset(recordings, small_cfg());
    REQUIRE(a.train.size() == b.train.size());
    REQUIRE(a.test.size() == b.test.size());
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train[i].values == b.train[i].values);
        CHECK(a.train[i].label == b.train[i].label);
    }

    DatasetConfig other = small_cfg();
    other.seed = 6;
    const PreparedDataset c = prepare_dataset(recordings, other);
    bool same = a.train.size() == c.train.size();
    for (std::size_t i = 0; same && i < a.train.size(); ++i)
        same = a.train[i].values == c.train[i].values;
    CHECK_FALSE(same);
}

TEST_CASE("prepare rejects unusable input") {
    CHECK_THROWS_AS(prepare_dataset({}, small_cfg()), lanecast::EmptyInput);

    auto recordings = small_corpus();
    DatasetConfig bad = small_cfg();
    bad.obs_window_s = 0.0;
    CHECK_THROWS_AS(prepare_dataset(recordings, bad), lanecast::BadConfig);

    Recording other = recordings.front();
    other.meta.id = 4;
    other.meta.frame_rate_hz = 30.0;
    recordings.push_back(std::move(other));
    CHECK_THROWS_AS(prepare_dataset(recordings, small_cfg()), lanecast::BadConfig);
}

TEST_CASE("prepared datasets survive the disk round trip") {
    const auto recordings = small_corpus();
    const PreparedDataset pd = prepare_dataset(recordings, small_cfg());
    const fs::path dir = fs::temp_directory_path() / "lanecast_prepared_test";
    fs::remove_all(dir);
    lanecast::write_prepared(dir.string(), pd);

    const PreparedDataset back = lanecast::read_prepared(dir.string());
    CHECK(back.cfg.obs_window_s == pd.cfg.obs_window_s);
    CHECK(back.cfg.max_pred_time_s == pd.cfg.max_pred_time_s);
    CHECK(back.cfg.seed == pd.cfg.seed);
    CHECK(back.frame_rate_hz == pd.frame_rate_hz);
    REQUIRE(back.train.size() == pd.train.size());
    REQUIRE(back.val.size() == pd.val.size());
    REQUIRE(back.test.size() == pd.test.size());
    CHECK(back.splits.train.size() == pd.splits.train.size());

    // samples are stored as float32
    for (std::size_t i = 0; i < pd.train.size(); ++i) {
        const FeatureMatrix& orig = pd.train[i];
        const FeatureMatrix& re = back.train[i];
        CHECK(re.label == orig.label);
        CHECK(re.rows == orig.rows);
        CHECK(re.prediction_time_s == orig.prediction_time_s);
        REQUIRE(re.values.size() == orig.values.size());
        bool ok = true;
        for (std::size_t k = 0; ok && k < orig.values.size(); ++k)
            ok = re.values[k] == static_cast<double>(static_cast<float>(orig.values[k]));
        CHECK(ok);
    }

    // a second write of the same dataset produces identical bytes
    const fs::path dir2 = fs::temp_directory_path() / "lanecast_prepared_test2";
    fs::remove_all(dir2);
    lanecast::write_prepared(dir2.string(), pd);
    CHECK(slurp(dir / "manifest.csv") == slurp(dir2 / "manifest.csv"));
    CHECK(slurp(dir / "dataset.json") == slurp(dir2 / "dataset.json"));
    CHECK(slurp(dir / "normalizer.json") == slurp(dir2 / "normalizer.json"));
    CHECK(slurp(dir / "train" / "000000.bin") == slurp(dir2 / "train" / "000000.bin"));
}

TEST_CASE("timed outcomes keep only samples with a prediction time") {
    std::vector<lanecast::SampleResult> samples = {
        {Label::lane_keep, Label::lane_keep, std::nullopt},
        {Label::left_change, Label::left_change, 1.5},
        {Label::right_change, Label::left_change, 2.5},
    };
    const auto out = lanecast::timed_outcomes(samples);
    REQUIRE(out.size() == 2);
    CHECK(out[0].prediction_time_s == 1.5);
    CHECK(out[0].correct);
    CHECK(out[1].prediction_time_s == 2.5);
    CHECK_FALSE(out[1].correct);
}

TEST_CASE("result file names embed the grid cell") {
    CHECK(lanecast::result_file_name("lstm1", 2.0, 3.0) == "result_lstm1_obs2_pred3.json");
    CHECK(lanecast::result_file_name("tn2", 2.5, 4.0) == "result_tn2_obs2.5_pred4.json");
}

TEST_CASE("training on a prepared dataset yields a complete result object") {
    const auto recordings = small_corpus();
    const PreparedDataset pd = prepare_dataset(recordings, small_cfg());
    lanecast::TrainConfig tc;
    tc.max_epochs = 2;
    tc.batch_size = 16;
    tc.seed = 1;

    const nlohmann::json j = lanecast::train_and_score("lstm3", pd, tc);
    CHECK(j.at("architecture") == "lstm3");
    CHECK(j.at("obs_window_s") == 2.0);
    CHECK(j.at("max_pred_time_s") == 3.0);
    CHECK(j.at("counts").at("train") == pd.train.size());
    CHECK(j.at("epochs_trained").get<std::int64_t>() <= 2);
    CHECK(j.at("best_epoch").get<std::int64_t>() >= 1);
    CHECK(j.at("train_accuracy_pct").get<double>() >= 0.0);
    CHECK(j.at("test_accuracy_pct").get<double>() <= 100.0);
    CHECK(std::isfinite(j.at("best_val_loss").get<double>()));
    CHECK(std::isfinite(j.at("test_mean_loss").get<double>()));

    const auto& conf = j.at("test_confusion");
    std::int64_t total = 0;
    for (const auto& row : conf)
        for (const auto& v : row) total += v.get<std::int64_t>();
    CHECK(total == static_cast<std::int64_t>(pd.test.size()));

    const auto& hist = j.at("prediction_time_histogram");
    std::int64_t hist_total = 0, lc_in_test = 0;
    for (const auto& v : hist.at("total")) hist_total += v.get<std::int64_t>();
    for (const auto& m : pd.test)
        if (m.label != Label::lane_keep) ++lc_in_test;
    CHECK(hist_total == lc_in_test);

    for (int c = 0; c < 3; ++c) {
        const auto& pc = j.at("per_class").at(lanecast::to_string(static_cast<Label>(c)));
        CHECK(pc.contains("f1_pct"));
        CHECK(pc.contains("degenerate"));
    }
}

TEST_CASE("sweeps write one deterministic result file per cell") {
    const auto recordings = small_corpus();
    lanecast::SweepOptions opt;
    opt.archs = {"lstm3"};
    opt.obs_windows_s = {1.0};
    opt.pred_times_s = {2.0, 3.0};
    opt.seed = 2;
    opt.train.max_epochs = 2;
    opt.train.batch_size = 16;

    const fs::path dir_a = fs::temp_directory_path() / "lanecast_sweep_a";
    const fs::path dir_b = fs::temp_directory_path() / "lanecast_sweep_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    lanecast::run_sweep(recordings, opt, dir_a.string());
    lanecast::run_sweep(recordings, opt, dir_b.string());

    for (const char* name : {"result_lstm3_obs1_pred2.json", "result_lstm3_obs1_pred3.json"}) {
        INFO(name);
        REQUIRE(fs::exists(dir_a / name));
        CHECK(slurp(dir_a / name) == slurp(dir_b / name));
    }

    lanecast::SweepOptions bad = opt;
    bad.archs = {"mlp"};
    CHECK_THROWS_AS(lanecast::run_sweep(recordings, bad, dir_a.string()), lanecast::BadConfig);
    bad.archs.clear();
    CHECK_THROWS_AS(lanecast::run_sweep(recordings, bad, dir_a.string()), lanecast::BadConfig);
}

TEST_CASE("reports render every table and chart from stored results") {
    const auto recordings = small_corpus();
    lanecast::SweepOptions opt;
    opt.archs = {"lstm3", "lstm2"};
    opt.obs_windows_s = {1.0};
    opt.pred_times_s = {2.0, 3.0};
    opt.seed = 2;
    opt.train.max_epochs = 2;
    opt.train.batch_size = 16;

    const fs::path results = fs::temp_directory_path() / "lanecast_report_results";
    const fs::path out = fs::temp_directory_path() / "lanecast_report_out";
    fs::remove_all(results);
    fs::remove_all(out);
    lanecast::run_sweep(recordings, opt, results.string());

    const auto rows = lanecast::load_results(results.string());
    REQUIRE(rows.size() == 4);
    // sorted by architecture, then window, then horizon
    CHECK(rows[0].arch == "lstm2");
    CHECK(rows[0].max_pred_time_s == 2.0);
    CHECK(rows[1].arch == "lstm2");
    CHECK(rows[1].max_pred_time_s == 3.0);
    CHECK(rows[2].arch == "lstm3");
    CHECK(rows[3].arch == "lstm3");

    lanecast::render_reports(results.string(), out.string());

    const std::string table = slurp(out / "results.csv");
    CHECK(table.rfind("arch,obs_window_s,max_pred_time_s,accuracy_pct,delta_acc_pct,"
                      "f1_lk_pct,f1_llc_pct,f1_rlc_pct\n", 0) == 0);
    CHECK(std::count(table.begin(), table.end(), '\n') == 5);  // header plus four rows

    const std::string conf = slurp(out / "confusion_lstm3_obs1_pred2.csv");
    CHECK(conf.rfind("true_class,pred_LK,pred_LLC,pred_RLC\n", 0) == 0);

    const std::string hist = slurp(out / "hist_lstm3_obs1_pred3.csv");
    CHECK(hist.rfind("bin_start,bin_end,total,correct\n", 0) == 0);

    for (const char* name : {"hist_lstm2_obs1_pred2.svg", "accuracy_obs1.svg",
                             "generalization_gap_obs1.svg"}) {
        INFO(name);
        const std::string svg = slurp(out / name);
        CHECK(svg.find("viewBox=\"0 0 800 500\"") != std::string::npos);
        CHECK(svg.rfind("</svg>\n") == svg.size() - 7);
    }

    // rendering is a pure function of the stored results
    const fs::path out2 = fs::temp_directory_path() / "lanecast_report_out2";
    fs::remove_all(out2);
    lanecast::render_reports(results.string(), out2.string());
    CHECK(slurp(out / "results.csv") == slurp(out2 / "results.csv"));
    CHECK(slurp(out / "accuracy_obs1.svg") == slurp(out2 / "accuracy_obs1.svg"));

    CHECK_THROWS_AS(lanecast::load_results((out / "nope").string()), lanecast::IoError);
    const fs::path empty = fs::temp_directory_path() / "lanecast_report_empty";
    fs::create_directories(empty);
    CHECK_THROWS_AS(lanecast::load_results(empty.string()), lanecast::EmptyInput);
}
