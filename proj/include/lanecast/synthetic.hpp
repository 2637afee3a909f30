#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lanecast/core/errors.hpp"
#include "lanecast/core/labels.hpp"
#include "lanecast/core/rng.hpp"
#include "lanecast/features.hpp"
#include "lanecast/highd.hpp"
#include "lanecast/segmentation.hpp"

// Desk-scale stand-in for drone recordings: kinematically plausible tracks
// on a two-carriageway highway, with per-frame neighbor relations computed
// from geometry the same way the real data defines them.

namespace lanecast {

struct SyntheticSpec {
    std::int64_t recording_id = 1;
    std::int64_t n_tracks = 200;
    std::int64_t lanes_per_direction = 3;
    double duration_s = 60.0;
    double lc_probability = 0.5;          // chance a track performs one lane change
    double speed_min_mps = 20.0;
    double speed_max_mps = 32.0;
    double lc_duration_s = 4.0;           // 1%-to-99% span of the lateral transition
    double sway_amplitude_m = 0.08;       // in-lane lateral wander
    std::optional<Label> force_maneuver;  // pin every lane change to one side
    std::uint64_t seed = 0;
};

struct SyntheticCorpus {
    Recording recording;
    std::vector<LCInstant> truth;  // one entry per generated lane change
};

namespace synth_detail {

inline constexpr double kFrameRate = 25.0;
inline constexpr double kLaneWidth = 4.0;
inline constexpr double kMedianGap = 6.0;
inline constexpr double kAlongsideMargin = 5.0;  // |dx| within which a car is "alongside"

// Smooth lateral transition: logistic in time, scaled so the middle 98% of
// the lateral offset happens within lc_duration_s.
inline double logistic01(double t, double t_mid, double duration) {
    const double beta = 2.0 * std::log(99.0) / duration;
    return 1.0 / (1.0 + std::exp(-beta * (t - t_mid)));
}

inline double logistic01_rate(double t, double t_mid, double duration) {
    const double beta = 2.0 * std::log(99.0) / duration;
    const double s = logistic01(t, t_mid, duration);
    return beta * s * (1.0 - s);
}

}  // namespace synth_detail

// Generates one recording plus the ground-truth lane-change list.  Identical
// specs produce identical corpora: every draw comes from a stream keyed by
// (seed, track index).
inline SyntheticCorpus generate_corpus(const SyntheticSpec& spec) {
    using namespace synth_detail;
    if (spec.n_tracks < 1 || spec.lanes_per_direction < 1 || spec.duration_s <= 0.0)
        throw BadConfig("synthetic spec needs tracks, lanes and a positive duration");
    if (spec.lc_probability < 0.0 || spec.lc_probability > 1.0)
        throw BadConfig("lane-change probability must lie in [0, 1]");
    if (spec.speed_min_mps <= 0.0 || spec.speed_max_mps < spec.speed_min_mps)
        throw BadConfig("speed range is empty or non-positive");
    if (spec.lc_duration_s <= 0.0) throw BadConfig("lane-change duration must be positive");

    const std::int64_t lanes = spec.lanes_per_direction;
    const auto n_frames = static_cast<std::int64_t>(std::llround(spec.duration_s * kFrameRate));
    if (n_frames < 2) throw BadConfig("recording too short for even one transition");

    RecordingMeta meta;
    meta.id = spec.recording_id;
    meta.frame_rate_hz = kFrameRate;
    for (std::int64_t k = 0; k <= lanes; ++k)
        meta.upper_lane_markings.push_back(2.0 + kLaneWidth * static_cast<double>(k));
    const double lower_base = meta.upper_lane_markings.back() + kMedianGap;
    for (std::int64_t k = 0; k <= lanes; ++k)
        meta.lower_lane_markings.push_back(lower_base + kLaneWidth * static_cast<double>(k));

    auto lane_center = [&](int direction, std::int64_t lane_index) {
        const auto& markings =
            direction == 1 ? meta.upper_lane_markings : meta.lower_lane_markings;
        return 0.5 * (markings[static_cast<std::size_t>(lane_index)] +
                      markings[static_cast<std::size_t>(lane_index) + 1]);
    };
    auto lane_id_for_y = [&](int direction, double y) {
        const auto& markings =
            direction == 1 ? meta.upper_lane_markings : meta.lower_lane_markings;
        for (std::size_t k = 0; k + 1 < markings.size(); ++k)
            if (y >= markings[k] && y < markings[k + 1]) {
                const std::int64_t index = static_cast<std::int64_t>(k);
                return direction == 1
                           ? 2 + index
                           : static_cast<std::int64_t>(meta.upper_lane_markings.size()) + 2 + index;
            }
        throw UnknownLaneId("generated y position " + std::to_string(y) + " is off the road");
    };

    struct Plan {
        int direction;
        std::int64_t lane_from;
        std::int64_t lane_to;  // == lane_from when keeping
        double speed;
        double x0;
        double sway_amp, sway_period, sway_phase;
        double t_mid;  // transition midpoint, lane keepers: unused
        bool changes_lane;
        bool to_left;  // canonical direction of the change
    };

    std::vector<Plan> plans;
    for (std::int64_t i = 0; i < spec.n_tracks; ++i) {
        Rng rng = keyed_rng(spec.seed, {rng_tag("track"), static_cast<std::uint64_t>(i)});
        Plan p{};
        p.direction = 1 + static_cast<int>(i % 2);
        // Larger lane index means larger image y.  On the upper carriageway
        // image y grows to the driver's left, on the lower one to the right.
        const std::int64_t left_step = p.direction == 1 ? 1 : -1;
        std::int64_t forced_step = 0;
        if (spec.force_maneuver) {
            if (*spec.force_maneuver == Label::lane_keep)
                throw BadConfig("force_maneuver must be a lane-change class");
            if (lanes < 2) throw BadConfig("forcing lane changes needs at least two lanes");
            forced_step = *spec.force_maneuver == Label::left_change ? left_step : -left_step;
        }
        if (forced_step != 0)
            p.lane_from = (forced_step > 0 ? 0 : 1) +
                          static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(lanes - 1)));
        else
            p.lane_from = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(lanes)));
        p.speed = rng.uniform(spec.speed_min_mps, spec.speed_max_mps);
        p.x0 = rng.uniform(0.0, 400.0);
        p.sway_amp = spec.sway_amplitude_m * rng.uniform(0.25, 1.0);
        p.sway_period = rng.uniform(8.0, 20.0);
        p.sway_phase = rng.uniform(0.0, 6.283185307179586477);
        p.changes_lane = lanes > 1 && rng.uniform() < spec.lc_probability;
        p.lane_to = p.lane_from;
        if (p.changes_lane) {
            if (forced_step != 0) {
                p.lane_to = p.lane_from + forced_step;
            } else {
                std::vector<std::int64_t> targets;
                if (p.lane_from > 0) targets.push_back(p.lane_from - 1);
                if (p.lane_from + 1 < lanes) targets.push_back(p.lane_from + 1);
                p.lane_to = targets[rng.below(targets.size())];
            }
            p.to_left = p.direction == 1 ? p.lane_to > p.lane_from : p.lane_to < p.lane_from;
            const double t_frac = rng.uniform(0.35, 0.65);
            // park the midpoint between two frames so no sample sits
            // exactly on the lane marking
            const double k_mid = std::floor(t_frac * spec.duration_s * kFrameRate);
            p.t_mid = (k_mid + 0.5) / kFrameRate;
        }
        plans.push_back(p);
    }

    // kinematics per track per frame
    const auto nf = static_cast<std::size_t>(n_frames);
    std::vector<std::vector<TrackState>> states(plans.size());
    for (std::size_t i = 0; i < plans.size(); ++i) {
        const Plan& p = plans[i];
        states[i].resize(nf);
        const double y_from = lane_center(p.direction, p.lane_from);
        const double y_to = lane_center(p.direction, p.lane_to);
        const double omega = 6.283185307179586477 / p.sway_period;
        for (std::int64_t k = 0; k < n_frames; ++k) {
            const double t = static_cast<double>(k) / kFrameRate;
            double y = y_from + p.sway_amp * std::sin(omega * t + p.sway_phase);
            double vy = p.sway_amp * omega * std::cos(omega * t + p.sway_phase);
            if (p.changes_lane) {
                y += (y_to - y_from) * logistic01(t, p.t_mid, spec.lc_duration_s);
                vy += (y_to - y_from) * logistic01_rate(t, p.t_mid, spec.lc_duration_s);
            }
            TrackState& s = states[i][static_cast<std::size_t>(k)];
            s.frame = k;
            s.y = y;
            s.vy = vy;
            if (p.direction == 1) {
                s.x = p.x0 - p.speed * t;
                s.vx = -p.speed;
            } else {
                s.x = p.x0 + p.speed * t;
                s.vx = p.speed;
            }
            s.lane_id = lane_id_for_y(p.direction, y);
        }
    }

    // neighbor relations, frame by frame
    const std::int64_t first_track_id = 1;
    for (std::int64_t k = 0; k < n_frames; ++k) {
        for (std::size_t e = 0; e < plans.size(); ++e) {
            TrackState& ego = states[e][static_cast<std::size_t>(k)];
            const int dir = plans[e].direction;
            const double ego_cx = dir == 1 ? -ego.x : ego.x;
            const std::int64_t lane = ego.lane_id;
            const std::int64_t left_lane = dir == 1 ? lane + 1 : lane - 1;
            const std::int64_t right_lane = dir == 1 ? lane - 1 : lane + 1;

            struct Nearest {
                double best = 0.0;
                std::int64_t id = 0;
            };
            Nearest ahead, behind;
            Nearest side_ahead[2], side_behind[2], side_along[2];  // 0 = left, 1 = right
            for (std::size_t o = 0; o < plans.size(); ++o) {
                if (o == e || plans[o].direction != dir) continue;
                const TrackState& other = states[o][static_cast<std::size_t>(k)];
                const double dx = (dir == 1 ? -other.x : other.x) - ego_cx;
                const std::int64_t oid = first_track_id + static_cast<std::int64_t>(o);
                auto closer = [&](Nearest& slot, double key) {
                    if (slot.id == 0 || key < slot.best) {
                        slot.best = key;
                        slot.id = oid;
                    }
                };
                if (other.lane_id == lane) {
                    if (dx > 0.0) closer(ahead, dx);
                    if (dx < 0.0) closer(behind, -dx);
                } else if (other.lane_id == left_lane || other.lane_id == right_lane) {
                    const int side = other.lane_id == left_lane ? 0 : 1;
                    if (std::abs(dx) <= kAlongsideMargin)
                        closer(side_along[side], std::abs(dx));
                    else if (dx > 0.0)
                        closer(side_ahead[side], dx);
                    else
                        closer(side_behind[side], -dx);
                }
            }
            ego.neighbor_ids[static_cast<int>(NeighborRole::preceding)] = ahead.id;
            ego.neighbor_ids[static_cast<int>(NeighborRole::following)] = behind.id;
            ego.neighbor_ids[static_cast<int>(NeighborRole::left_preceding)] = side_ahead[0].id;
            ego.neighbor_ids[static_cast<int>(NeighborRole::left_alongside)] = side_along[0].id;
            ego.neighbor_ids[static_cast<int>(NeighborRole::left_following)] = side_behind[0].id;
            ego.neighbor_ids[static_cast<int>(NeighborRole::right_preceding)] = side_ahead[1].id;
            ego.neighbor_ids[static_cast<int>(NeighborRole::right_alongside)] = side_along[1].id;
            ego.neighbor_ids[static_cast<int>(NeighborRole::right_following)] = side_behind[1].id;
        }
    }

    SyntheticCorpus corpus;
    corpus.recording.meta = meta;
    for (std::size_t i = 0; i < plans.size(); ++i) {
        Track t;
        t.id = first_track_id + static_cast<std::int64_t>(i);
        t.direction = plans[i].direction;
        t.states = std::move(states[i]);
        // construction guarantees exactly one lane-id transition per
        // changing track; record it as ground truth
        if (plans[i].changes_lane) {
            std::int64_t change_frame = -1;
            for (std::size_t k = 1; k < t.states.size(); ++k)
                if (t.states[k].lane_id != t.states[k - 1].lane_id) {
                    change_frame = t.states[k].frame;
                    break;
                }
            if (change_frame < 0)
                throw Error("generator bug: planned lane change never crossed the marking");
            corpus.truth.push_back(
                {t.id, change_frame, plans[i].to_left ? Label::left_change : Label::right_change});
        }
        corpus.recording.tracks.push_back(std::move(t));
    }
    return corpus;
}

inline nlohmann::json synthetic_spec_to_json(const SyntheticSpec& s) {
    return {
        {"recording_id", s.recording_id},
        {"n_tracks", s.n_tracks},
        {"lanes_per_direction", s.lanes_per_direction},
        {"duration_s", s.duration_s},
        {"lc_probability", s.lc_probability},
        {"speed_min_mps", s.speed_min_mps},
        {"speed_max_mps", s.speed_max_mps},
        {"lc_duration_s", s.lc_duration_s},
        {"sway_amplitude_m", s.sway_amplitude_m},
        {"force_maneuver", s.force_maneuver ? to_string(*s.force_maneuver) : ""},
        {"seed", s.seed},
    };
}

// Missing keys keep their defaults so spec files only need the fields they
// care about.
inline SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
    SyntheticSpec s;
    s.recording_id = j.value("recording_id", s.recording_id);
    s.n_tracks = j.value("n_tracks", s.n_tracks);
    s.lanes_per_direction = j.value("lanes_per_direction", s.lanes_per_direction);
    s.duration_s = j.value("duration_s", s.duration_s);
    s.lc_probability = j.value("lc_probability", s.lc_probability);
    s.speed_min_mps = j.value("speed_min_mps", s.speed_min_mps);
    s.speed_max_mps = j.value("speed_max_mps", s.speed_max_mps);
    s.lc_duration_s = j.value("lc_duration_s", s.lc_duration_s);
    s.sway_amplitude_m = j.value("sway_amplitude_m", s.sway_amplitude_m);
    if (const std::string m = j.value("force_maneuver", std::string{}); !m.empty())
        s.force_maneuver = label_from_string(m);
    s.seed = j.value("seed", s.seed);
    return s;
}

// Trivially separable sequence classification set: class identity is a
// constant shift of the lateral-velocity column, everything else is noise.
// A linear read-out of the mean of that column recovers the labels.
inline std::vector<FeatureMatrix> generate_separable_toy(std::int64_t n_per_class,
                                                         std::int64_t rows, std::uint64_t seed,
                                                         double noise_scale = 0.05) {
    if (n_per_class < 1 || rows < 1) throw BadConfig("toy set needs samples and rows");
    std::vector<FeatureMatrix> out;
    const Label classes[3] = {Label::lane_keep, Label::left_change, Label::right_change};
    for (int c = 0; c < 3; ++c) {
        const double shift = c == 0 ? 0.0 : (c == 1 ? 0.5 : -0.5);
        for (std::int64_t i = 0; i < n_per_class; ++i) {
            Rng rng = keyed_rng(seed, {rng_tag("toy"), static_cast<std::uint64_t>(c),
                                       static_cast<std::uint64_t>(i)});
            FeatureMatrix m;
            m.rows = rows;
            m.label = classes[c];
            m.track_id = static_cast<std::int64_t>(out.size()) + 1;
            m.values.resize(static_cast<std::size_t>(rows) * kFeatureCount);
            for (std::int64_t r = 0; r < rows; ++r)
                for (int col = 0; col < kFeatureCount; ++col)
                    m.at(r, col) = noise_scale * rng.normal() + (col == 2 ? shift : 0.0);
            out.push_back(std::move(m));
        }
    }
    return out;
}

}  // namespace lanecast
