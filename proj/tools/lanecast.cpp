#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <lanecast/lanecast.hpp>

namespace {

std::vector<lanecast::Recording> load_recordings(const std::string& dir,
                                                 std::vector<std::int64_t> ids) {
    if (ids.empty()) ids = lanecast::list_recordings(dir);
    std::vector<lanecast::Recording> recs;
    recs.reserve(ids.size());
    for (auto id : ids) recs.push_back(lanecast::parse_recording(dir, id));
    return recs;
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw lanecast::IoError("cannot open " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw lanecast::IoError("cannot write " + path);
    out << j.dump(2) << '\n';
}

void apply_train_config_file(const std::string& path, lanecast::TrainConfig& tc) {
    const nlohmann::json j = read_json(path);
    tc.batch_size = j.value("batch_size", tc.batch_size);
    tc.max_epochs = j.value("max_epochs", tc.max_epochs);
    tc.patience = j.value("patience", tc.patience);
    tc.seed = j.value("seed", tc.seed);
    if (j.contains("lr")) tc.lr = j.at("lr").get<double>();
    if (j.contains("weight_decay")) tc.weight_decay = j.at("weight_decay").get<double>();
}

// "1,2,3x3,4,5,6" means observation windows {1,2,3} s crossed with
// prediction horizons {3,4,5,6} s.
std::pair<std::vector<double>, std::vector<double>> parse_grid(const std::string& grid) {
    const auto cross = grid.find('x');
    if (cross == std::string::npos || cross == 0 || cross + 1 >= grid.size())
        throw lanecast::BadConfig("grid must look like OBS[,OBS..]xPRED[,PRED..], got '" + grid +
                                  "'");
    auto parse_list = [&](const std::string& part) {
        std::vector<double> out;
        std::size_t pos = 0;
        while (pos <= part.size()) {
            const auto comma = std::min(part.find(',', pos), part.size());
            out.push_back(lanecast::parse_double(part.substr(pos, comma - pos), "grid"));
            pos = comma + 1;
        }
        return out;
    };
    return {parse_list(grid.substr(0, cross)), parse_list(grid.substr(cross + 1))};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lane-change intention prediction from vehicle trajectories"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "synthesize a trajectory recording");
    std::string gen_spec_path, gen_out;
    std::uint64_t gen_seed = 0;
    std::int64_t gen_tracks = 0;
    gen->add_option("--spec", gen_spec_path, "JSON file with generator settings")
        ->check(CLI::ExistingFile);
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--seed", gen_seed, "override the spec's seed");
    gen->add_option("--tracks", gen_tracks, "override the spec's track count");
    gen->callback([&] {
        lanecast::SyntheticSpec spec;
        if (!gen_spec_path.empty()) spec = lanecast::synthetic_spec_from_json(read_json(gen_spec_path));
        if (gen->count("--seed")) spec.seed = gen_seed;
        if (gen->count("--tracks")) spec.n_tracks = gen_tracks;
        const lanecast::SyntheticCorpus corpus = lanecast::generate_corpus(spec);
        lanecast::write_recording(gen_out, corpus.recording);
        {
            std::string prefix = std::to_string(corpus.recording.meta.id);
            if (prefix.size() < 2) prefix.insert(prefix.begin(), '0');
            lanecast::CsvWriter w(gen_out + "/" + prefix + "_laneChanges.csv");
            w.row({"trackId", "frame", "maneuver"});
            for (const auto& lc : corpus.truth)
                w.row({std::to_string(lc.track_id), std::to_string(lc.frame),
                       lanecast::to_string(lc.maneuver)});
        }
        std::printf("recording %lld: %zu tracks, %zu lane changes -> %s\n",
                    static_cast<long long>(corpus.recording.meta.id),
                    corpus.recording.tracks.size(), corpus.truth.size(), gen_out.c_str());
    });

    // prepare
    auto* prep = app.add_subcommand("prepare", "segment, balance, split and featurize recordings");
    std::string prep_data, prep_out;
    std::vector<std::int64_t> prep_ids;
    lanecast::DatasetConfig prep_cfg;
    prep->add_option("--data", prep_data, "directory with recording CSV files")->required();
    prep->add_option("--recording", prep_ids, "recording ids to use (default: all found)");
    prep->add_option("--obs-window", prep_cfg.obs_window_s, "observation window length [s]");
    prep->add_option("--max-pred-time", prep_cfg.max_pred_time_s,
                     "upper bound of the prediction horizon [s]");
    prep->add_option("--seed", prep_cfg.seed, "sampling seed");
    prep->add_option("--out", prep_out, "output directory")->required();
    prep->callback([&] {
        const auto recs = load_recordings(prep_data, prep_ids);
        const lanecast::PreparedDataset pd = lanecast::prepare_dataset(recs, prep_cfg);
        lanecast::write_prepared(prep_out, pd);
        std::printf("prepared %zu train / %zu val / %zu test samples -> %s\n", pd.train.size(),
                    pd.val.size(), pd.test.size(), prep_out.c_str());
    });

    // train
    auto* tr = app.add_subcommand("train", "train one architecture on a prepared dataset");
    std::string tr_arch, tr_prepared, tr_out, tr_history, tr_cfg_file;
    lanecast::TrainConfig tr_cfg;
    double tr_lr = 0.0, tr_wd = 0.0;
    tr->add_option("--arch", tr_arch, "architecture name")
        ->required()
        ->check(CLI::IsMember(lanecast::known_architectures()));
    tr->add_option("--prepared", tr_prepared, "prepared dataset directory")->required();
    tr->add_option("--out", tr_out, "checkpoint base path (writes .json and .bin)")->required();
    tr->add_option("--train-config", tr_cfg_file,
                   "JSON file with batch_size/max_epochs/patience/seed/lr/weight_decay")
        ->check(CLI::ExistingFile);
    tr->add_option("--batch-size", tr_cfg.batch_size, "mini-batch size");
    tr->add_option("--max-epochs", tr_cfg.max_epochs, "epoch budget");
    tr->add_option("--patience", tr_cfg.patience, "early-stopping patience in epochs");
    tr->add_option("--seed", tr_cfg.seed, "initialization and shuffling seed");
    tr->add_option("--lr", tr_lr, "override the architecture's learning rate");
    tr->add_option("--weight-decay", tr_wd, "override the architecture's weight decay");
    tr->add_option("--history", tr_history, "write per-epoch losses to this JSON file");
    tr->callback([&] {
        if (!tr_cfg_file.empty()) {
            lanecast::TrainConfig from_file;
            apply_train_config_file(tr_cfg_file, from_file);
            if (!tr->count("--batch-size")) tr_cfg.batch_size = from_file.batch_size;
            if (!tr->count("--max-epochs")) tr_cfg.max_epochs = from_file.max_epochs;
            if (!tr->count("--patience")) tr_cfg.patience = from_file.patience;
            if (!tr->count("--seed")) tr_cfg.seed = from_file.seed;
            tr_cfg.lr = from_file.lr;
            tr_cfg.weight_decay = from_file.weight_decay;
        }
        if (tr->count("--lr")) tr_cfg.lr = tr_lr;
        if (tr->count("--weight-decay")) tr_cfg.weight_decay = tr_wd;
        const lanecast::PreparedDataset pd = lanecast::read_prepared(tr_prepared);
        if (pd.train.empty()) throw lanecast::EmptyInput("prepared dataset has no training split");
        lanecast::AnyModel<float> model = lanecast::make_model<float>(
            tr_arch, pd.train.front().rows, lanecast::kFeatureCount, tr_cfg.seed);
        const lanecast::TrainResult res = lanecast::train(model, pd.train, pd.val, tr_cfg);
        lanecast::save_checkpoint(tr_out, model);
        if (!tr_history.empty()) {
            auto epochs = nlohmann::json::array();
            for (const auto& e : res.history)
                epochs.push_back({{"epoch", e.epoch},
                                  {"train_loss", e.train_loss},
                                  {"val_loss", e.val_loss},
                                  {"val_accuracy_pct", e.val_accuracy_pct}});
            write_json(tr_history, {{"architecture", tr_arch},
                                    {"best_epoch", res.best_epoch},
                                    {"best_val_loss", res.best_val_loss},
                                    {"epochs", epochs}});
        }
        std::printf("%s: %zu epochs, best epoch %lld, best val loss %s -> %s\n", tr_arch.c_str(),
                    res.history.size(), static_cast<long long>(res.best_epoch),
                    lanecast::format_double(res.best_val_loss).c_str(), tr_out.c_str());
    });

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "score a checkpoint on a prepared dataset");
    std::string ev_ckpt, ev_prepared, ev_out, ev_split = "test";
    double ev_bin_width = 0.25;
    ev->add_option("--ckpt", ev_ckpt, "checkpoint base path")->required();
    ev->add_option("--prepared", ev_prepared, "prepared dataset directory")->required();
    ev->add_option("--split", ev_split, "split to score")
        ->check(CLI::IsMember({"train", "val", "test"}));
    ev->add_option("--bin-width", ev_bin_width, "prediction-horizon histogram bin width [s]");
    ev->add_option("--out", ev_out, "write metrics JSON here (default: stdout)");
    ev->callback([&] {
        lanecast::AnyModel<float> model = lanecast::load_checkpoint<float>(ev_ckpt);
        const lanecast::PreparedDataset pd = lanecast::read_prepared(ev_prepared);
        const auto& split = ev_split == "train" ? pd.train : ev_split == "val" ? pd.val : pd.test;
        lanecast::EvalOutcome on_train = lanecast::evaluate(model, pd.train);
        lanecast::EvalOutcome scored =
            ev_split == "train" ? on_train : lanecast::evaluate(model, split);
        nlohmann::json j = lanecast::metrics_json(on_train.confusion, scored.confusion);
        j["architecture"] = lanecast::model_arch(model);
        j["split"] = ev_split;
        j["mean_loss"] = scored.mean_loss;
        j["samples"] = scored.samples.size();
        j["prediction_time_histogram"] = lanecast::histogram_json(lanecast::prediction_time_histogram(
            lanecast::timed_outcomes(scored.samples), pd.cfg.max_pred_time_s, ev_bin_width));
        if (ev_out.empty())
            std::cout << j.dump(2) << '\n';
        else
            write_json(ev_out, j);
    });

    // sweep
    auto* sw = app.add_subcommand("sweep", "train every architecture over a window grid");
    std::string sw_data, sw_out;
    std::vector<std::int64_t> sw_ids;
    lanecast::SweepOptions sw_opt;
    sw_opt.archs = lanecast::known_architectures();
    sw_opt.obs_windows_s = {2.0};
    sw_opt.pred_times_s = {3.0};
    std::string sw_grid;
    sw->add_option("--data", sw_data, "directory with recording CSV files")->required();
    sw->add_option("--recording", sw_ids, "recording ids to use (default: all found)");
    sw->add_option("--archs", sw_opt.archs, "architectures to run")
        ->delimiter(',')
        ->check(CLI::IsMember(lanecast::known_architectures()));
    sw->add_option("--grid", sw_grid,
                   "observation windows x prediction horizons, e.g. 1,2,3x3,4,5,6 (default: 2x3)")
        ->check([](const std::string& s) -> std::string {
            try {
                parse_grid(s);
            } catch (const std::exception& e) {
                return e.what();
            }
            return {};
        });
    sw->add_option("--seed", sw_opt.seed, "seed for sampling, init and shuffling");
    sw->add_option("--batch-size", sw_opt.train.batch_size, "mini-batch size");
    sw->add_option("--max-epochs", sw_opt.train.max_epochs, "epoch budget per model");
    sw->add_option("--patience", sw_opt.train.patience, "early-stopping patience in epochs");
    sw->add_option("--bin-width", sw_opt.hist_bin_width_s, "histogram bin width [s]");
    sw->add_option("--out", sw_out, "directory for result JSON files")->required();
    sw->callback([&] {
        if (!sw_grid.empty())
            std::tie(sw_opt.obs_windows_s, sw_opt.pred_times_s) = parse_grid(sw_grid);
        const auto recs = load_recordings(sw_data, sw_ids);
        lanecast::run_sweep(recs, sw_opt, sw_out);
        std::printf("wrote %zu result files -> %s\n",
                    sw_opt.archs.size() * sw_opt.obs_windows_s.size() * sw_opt.pred_times_s.size(),
                    sw_out.c_str());
    });

    // report
    auto* rep = app.add_subcommand("report", "render sweep results to CSV tables and SVG charts");
    std::string rep_results, rep_out;
    rep->add_option("--results", rep_results, "directory with result JSON files")->required();
    rep->add_option("--out", rep_out, "output directory")->required();
    rep->callback([&] {
        lanecast::render_reports(rep_results, rep_out);
        std::printf("reports -> %s\n", rep_out.c_str());
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const lanecast::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
