#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lanecast/core/csv.hpp"
#include "lanecast/core/errors.hpp"
#include "lanecast/core/labels.hpp"
#include "lanecast/core/parallel.hpp"
#include "lanecast/core/rng.hpp"
#include "lanecast/features.hpp"
#include "lanecast/highd.hpp"

// Cuts observation windows out of the recordings.  A lane-change sample is
// a fixed-length window that ends a random prediction time before the
// vehicle's center crosses the lane marking; lane-keep samples are windows
// that come nowhere near a crossing.

namespace lanecast {

struct LCInstant {
    std::int64_t track_id = 0;
    std::int64_t frame = 0;  // first frame on the new lane
    Label maneuver = Label::left_change;
};

// Half-open frame window [start_frame, end_frame) of one track.
struct Segment {
    std::int64_t recording_id = 0;
    std::int64_t track_id = 0;
    std::int64_t start_frame = 0;
    std::int64_t end_frame = 0;
    Label label = Label::lane_keep;
    std::optional<double> prediction_time_s;  // lane-change samples only
};

struct DatasetConfig {
    double obs_window_s = 2.0;      // window length
    double max_pred_time_s = 3.0;   // upper bound of the sampled horizon
    std::uint64_t seed = 0;
};

inline std::int64_t window_frames(double seconds, double frame_rate) {
    return std::llround(seconds * frame_rate);
}

// A lane change happens at the first frame whose lane id differs from the
// previous frame's.  The maneuver side comes from the lateral motion in the
// canonical frame, where +y is the driver's left.
inline std::vector<LCInstant> detect_lc_instants(const Track& track) {
    std::vector<LCInstant> out;
    for (std::size_t i = 1; i < track.states.size(); ++i) {
        if (track.states[i].lane_id == track.states[i - 1].lane_id) continue;
        const double y_now = transform_ego(track.states[i], track.direction).y;
        const double y_prev = transform_ego(track.states[i - 1], track.direction).y;
        if (y_now == y_prev)
            throw AmbiguousManeuver("track " + std::to_string(track.id) +
                                    ": lane id changes at frame " +
                                    std::to_string(track.states[i].frame) +
                                    " without lateral motion");
        out.push_back({track.id, track.states[i].frame,
                       y_now > y_prev ? Label::left_change : Label::right_change});
    }
    return out;
}

// Observation window for one lane-change instant.  The prediction horizon
// is drawn uniformly from (0, max_pred_time_s]; the caller supplies an rng
// keyed to this instant so the draw is reproducible in isolation.  Returns
// nothing if the track starts too late for the worst-case horizon or the
// window would overlap a different lane change.
inline std::optional<Segment> sample_lc_segment(const Track& track,
                                                const std::vector<LCInstant>& instants,
                                                const LCInstant& lc, const DatasetConfig& cfg,
                                                double frame_rate, Rng& rng) {
    const std::int64_t n = window_frames(cfg.obs_window_s, frame_rate);
    const std::int64_t max_shift = window_frames(cfg.max_pred_time_s, frame_rate);
    if (lc.frame - track.first_frame() < n + max_shift) return std::nullopt;

    const double pred_time = rng.uniform_open_closed(cfg.max_pred_time_s);
    const std::int64_t shift = window_frames(pred_time, frame_rate);
    const std::int64_t end = lc.frame - shift;
    const std::int64_t start = end - n;

    for (const LCInstant& other : instants) {
        if (other.frame == lc.frame) continue;
        if (other.frame >= start && other.frame < end) return std::nullopt;
    }
    return Segment{0, track.id, start, end, lc.maneuver, pred_time};
}

// One lane-keep window per track, chosen uniformly among all placements
// that neither contain a lane-change instant nor end within the horizon
// band before one (those frames belong to lane-change windows).
inline std::optional<Segment> sample_lk_segment(const Track& track,
                                                const std::vector<LCInstant>& instants,
                                                const DatasetConfig& cfg, double frame_rate,
                                                Rng& rng) {
    const std::int64_t n = window_frames(cfg.obs_window_s, frame_rate);
    const std::int64_t max_shift = window_frames(cfg.max_pred_time_s, frame_rate);
    const std::int64_t track_len = static_cast<std::int64_t>(track.states.size());
    if (track_len < n) return std::nullopt;

    std::vector<std::int64_t> eligible;
    for (std::int64_t s = track.first_frame(); s + n - 1 <= track.last_frame(); ++s) {
        bool ok = true;
        for (const LCInstant& lc : instants) {
            if (lc.frame >= s && lc.frame < s + n) { ok = false; break; }
            const std::int64_t gap = lc.frame - (s + n - 1);
            if (gap >= 1 && gap <= max_shift) { ok = false; break; }
        }
        if (ok) eligible.push_back(s);
    }
    if (eligible.empty()) return std::nullopt;
    const std::int64_t start = eligible[rng.below(eligible.size())];
    return Segment{0, track.id, start, start + n, Label::lane_keep, std::nullopt};
}

// All segments of one recording, tracks processed independently (and in
// parallel) with per-track rng streams, then concatenated in track order.
inline std::vector<Segment> extract_segments(const Recording& rec, const DatasetConfig& cfg) {
    const double f = frames_per_second(rec.meta);
    const auto rec_id = static_cast<std::uint64_t>(rec.meta.id);
    std::vector<std::vector<Segment>> per_track(rec.tracks.size());

    parallel_for(rec.tracks.size(), [&](std::size_t i) {
        const Track& track = rec.tracks[i];
        const auto track_id = static_cast<std::uint64_t>(track.id);
        const auto instants = detect_lc_instants(track);
        std::vector<Segment>& out = per_track[i];
        for (const LCInstant& lc : instants) {
            Rng rng = keyed_rng(cfg.seed, {rng_tag("lc"), rec_id, track_id,
                                           static_cast<std::uint64_t>(lc.frame)});
            if (auto seg = sample_lc_segment(track, instants, lc, cfg, f, rng))
                out.push_back(*seg);
        }
        Rng rng = keyed_rng(cfg.seed, {rng_tag("lk"), rec_id, track_id});
        if (auto seg = sample_lk_segment(track, instants, cfg, f, rng)) out.push_back(*seg);
    });

    std::vector<Segment> all;
    for (auto& v : per_track)
        for (Segment& s : v) {
            s.recording_id = rec.meta.id;
            all.push_back(s);
        }
    return all;
}

// Evens out the dominant lane-keep class: keeps a uniformly chosen subset
// of LK segments sized to the combined lane-change count, preserving the
// original relative order of the survivors.
inline std::vector<Segment> balance_classes(const std::vector<Segment>& segments, Rng& rng) {
    std::vector<std::size_t> lk_positions;
    std::size_t n_lc = 0;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (segments[i].label == Label::lane_keep)
            lk_positions.push_back(i);
        else
            ++n_lc;
    }
    if (lk_positions.size() <= n_lc) return segments;

    std::vector<std::size_t> chosen = lk_positions;
    rng.shuffle(chosen.begin(), chosen.end());
    chosen.resize(n_lc);
    std::sort(chosen.begin(), chosen.end());

    std::vector<Segment> out;
    out.reserve(segments.size() - lk_positions.size() + n_lc);
    std::size_t next_chosen = 0;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (segments[i].label == Label::lane_keep) {
            if (next_chosen < chosen.size() && chosen[next_chosen] == i) {
                out.push_back(segments[i]);
                ++next_chosen;
            }
        } else {
            out.push_back(segments[i]);
        }
    }
    return out;
}

struct SplitDataset {
    std::vector<Segment> train;
    std::vector<Segment> val;
    std::vector<Segment> test;
};

// Shuffled 60/20/20 split; both fractions floor and the remainder goes to
// the test split.
inline SplitDataset split_dataset(std::vector<Segment> segments, std::uint64_t seed) {
    Rng rng = keyed_rng(seed, {rng_tag("split")});
    rng.shuffle(segments.begin(), segments.end());
    const auto n = segments.size();
    const auto n_train = static_cast<std::size_t>(std::floor(0.6 * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::floor(0.2 * static_cast<double>(n)));
    SplitDataset out;
    out.train.assign(segments.begin(), segments.begin() + n_train);
    out.val.assign(segments.begin() + n_train, segments.begin() + n_train + n_val);
    out.test.assign(segments.begin() + n_train + n_val, segments.end());
    return out;
}

namespace detail {

inline void manifest_rows(CsvWriter& w, const std::vector<Segment>& segments,
                          const char* split_name) {
    for (const Segment& s : segments) {
        w.row({std::to_string(s.track_id), std::to_string(s.start_frame),
               std::to_string(s.end_frame), to_string(s.label),
               s.prediction_time_s ? format_double(*s.prediction_time_s) : std::string{},
               split_name, std::to_string(s.recording_id)});
    }
}

}  // namespace detail

// The manifest is the durable record of which windows ended up where.  The
// trailing recording_id column disambiguates track ids across recordings.
inline void write_manifest(const std::string& path, const SplitDataset& ds) {
    CsvWriter w(path);
    w.row({"track_id", "start_frame", "end_frame", "label", "prediction_time_s", "split",
           "recording_id"});
    detail::manifest_rows(w, ds.train, "train");
    detail::manifest_rows(w, ds.val, "val");
    detail::manifest_rows(w, ds.test, "test");
}

inline SplitDataset read_manifest(const std::string& path) {
    CsvTable t = CsvTable::read_file(path);
    const auto col_track = t.column("track_id");
    const auto col_start = t.column("start_frame");
    const auto col_end = t.column("end_frame");
    const auto col_label = t.column("label");
    const auto col_pred = t.column("prediction_time_s");
    const auto col_split = t.column("split");
    const auto col_rec = t.column("recording_id");
    SplitDataset ds;
    for (std::size_t r = 0; r < t.row_count(); ++r) {
        Segment s;
        s.track_id = t.integer(r, col_track);
        s.start_frame = t.integer(r, col_start);
        s.end_frame = t.integer(r, col_end);
        s.label = label_from_string(t.cell(r, col_label));
        if (!t.cell(r, col_pred).empty()) s.prediction_time_s = t.real(r, col_pred);
        s.recording_id = t.integer(r, col_rec);
        const std::string& split = t.cell(r, col_split);
        if (split == "train")
            ds.train.push_back(s);
        else if (split == "val")
            ds.val.push_back(s);
        else if (split == "test")
            ds.test.push_back(s);
        else
            throw ParseError(path + ": unknown split '" + split + "'");
    }
    return ds;
}

}  // namespace lanecast
