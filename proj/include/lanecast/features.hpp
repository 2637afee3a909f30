#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lanecast/core/errors.hpp"
#include "lanecast/core/labels.hpp"
#include "lanecast/highd.hpp"

// Turns raw trajectory states into the 36-column model input: four ego
// columns plus four columns for each of the eight surrounding vehicles,
// everything expressed in a direction-independent frame so both
// carriageways share one representation.

namespace lanecast {

inline constexpr int kFeatureCount = 36;

// Canonical frame: +x points along the driving direction, +y towards the
// driver's left.  The image frame has y growing from the upper carriageway
// towards the lower one, which yields the two sign patterns below.
struct CanonicalState {
    double x = 0.0;
    double y = 0.0;
    double vx = 0.0;
    double vy = 0.0;
};

inline CanonicalState transform_ego(const TrackState& s, int direction) {
    if (direction == 1) return {-s.x, s.y, -s.vx, s.vy};
    if (direction == 2) return {s.x, -s.y, s.vx, -s.vy};
    throw BadDirection("driving direction must be 1 or 2, got " + std::to_string(direction));
}

// Relative position of a neighbor plus its own (absolute) velocity, all in
// the canonical frame.  Deltas are neighbor minus ego, so a vehicle ahead
// has positive dx and one to the left has positive dy on both carriageways.
struct NeighborFeatures {
    double dx = 0.0;
    double dy = 0.0;
    double vx = 0.0;
    double vy = 0.0;
};

inline NeighborFeatures neighbor_relatives(const TrackState& ego, const TrackState& neighbor,
                                           int direction) {
    const CanonicalState e = transform_ego(ego, direction);
    const CanonicalState n = transform_ego(neighbor, direction);
    return {n.x - e.x, n.y - e.y, n.vx, n.vy};
}

// Stand-in values for an absent neighbor: a phantom vehicle 100 m away in
// the direction the role looks, co-moving with the ego vehicle.
inline NeighborFeatures absent_neighbor(NeighborRole role, const CanonicalState& ego) {
    NeighborFeatures f{0.0, 0.0, ego.vx, ego.vy};
    switch (role) {
        case NeighborRole::preceding:
        case NeighborRole::left_preceding:
        case NeighborRole::right_preceding: f.dx = 100.0; break;
        case NeighborRole::following:
        case NeighborRole::left_following:
        case NeighborRole::right_following: f.dx = -100.0; break;
        case NeighborRole::left_alongside: f.dy = 100.0; break;
        case NeighborRole::right_alongside: f.dy = -100.0; break;
    }
    return f;
}

// Column names in on-disk order.  The preceding/following blocks lead with
// dy, the six side blocks lead with dx; the asymmetry is deliberate and
// pinned by the file format.
inline const std::array<std::string, kFeatureCount>& feature_column_names() {
    static const std::array<std::string, kFeatureCount> names = {
        "y_ego",  "x_ego",  "vy_ego", "vx_ego",  // ego
        "dy_p",   "dx_p",   "vy_p",   "vx_p",    // preceding
        "dy_f",   "dx_f",   "vy_f",   "vx_f",    // following
        "dx_lp",  "dy_lp",  "vy_lp",  "vx_lp",   // left preceding
        "dx_la",  "dy_la",  "vy_la",  "vx_la",   // left alongside
        "dx_lf",  "dy_lf",  "vy_lf",  "vx_lf",   // left following
        "dx_rp",  "dy_rp",  "vy_rp",  "vx_rp",   // right preceding
        "dx_ra",  "dy_ra",  "vy_ra",  "vx_ra",   // right alongside
        "dx_rf",  "dy_rf",  "vy_rf",  "vx_rf",   // right following
    };
    return names;
}

struct FeatureMatrix {
    std::int64_t rows = 0;
    std::vector<double> values;  // rows x kFeatureCount, row-major
    Label label = Label::lane_keep;
    std::optional<double> prediction_time_s;  // absent for lane-keep samples

    // provenance, carried into the sidecar for traceability
    std::int64_t recording_id = 0;
    std::int64_t track_id = 0;
    std::int64_t start_frame = 0;

    double& at(std::int64_t r, int c) { return values[static_cast<std::size_t>(r) * kFeatureCount + c]; }
    double at(std::int64_t r, int c) const {
        return values[static_cast<std::size_t>(r) * kFeatureCount + c];
    }
};

// One 36-column row for a single frame of a track.
inline std::array<double, kFeatureCount> feature_row(const Recording& rec, const Track& track,
                                                     const TrackState& s) {
    const CanonicalState ego = transform_ego(s, track.direction);
    std::array<double, kFeatureCount> row{};
    row[0] = ego.y;
    row[1] = ego.x;
    row[2] = ego.vy;
    row[3] = ego.vx;
    for (int r = 0; r < kNeighborRoleCount; ++r) {
        const auto role = static_cast<NeighborRole>(r);
        NeighborFeatures nf;
        if (auto id = s.neighbor(role)) {
            const Track& nb = rec.track_by_id(*id);
            nf = neighbor_relatives(s, nb.state_at(s.frame), track.direction);
        } else {
            nf = absent_neighbor(role, ego);
        }
        const int base = 4 + 4 * r;
        if (role == NeighborRole::preceding || role == NeighborRole::following) {
            row[base + 0] = nf.dy;
            row[base + 1] = nf.dx;
        } else {
            row[base + 0] = nf.dx;
            row[base + 1] = nf.dy;
        }
        row[base + 2] = nf.vy;
        row[base + 3] = nf.vx;
    }
    return row;
}

// Feature rows for frames [start_frame, end_frame) of one track.  Label and
// prediction time are the caller's business; this only fills values and
// provenance.
inline FeatureMatrix assemble_feature_matrix(const Recording& rec, std::int64_t track_id,
                                             std::int64_t start_frame, std::int64_t end_frame) {
    if (end_frame <= start_frame)
        throw ShapeError("empty frame range [" + std::to_string(start_frame) + ", " +
                         std::to_string(end_frame) + ")");
    const Track& track = rec.track_by_id(track_id);
    FeatureMatrix m;
    m.rows = end_frame - start_frame;
    m.values.resize(static_cast<std::size_t>(m.rows) * kFeatureCount);
    m.recording_id = rec.meta.id;
    m.track_id = track_id;
    m.start_frame = start_frame;
    for (std::int64_t f = start_frame; f < end_frame; ++f) {
        const auto row = feature_row(rec, track, track.state_at(f));
        const auto offset = static_cast<std::size_t>(f - start_frame) * kFeatureCount;
        for (int c = 0; c < kFeatureCount; ++c) m.values[offset + c] = row[c];
    }
    return m;
}

// Per-column standardization fitted on the training split only.  Columns
// that never vary (common for sentinel-filled neighbor slots) keep their
// mean but divide by 1 so they pass through as zeros.
struct Normalizer {
    std::array<double, kFeatureCount> mean{};
    std::array<double, kFeatureCount> std{};

    static Normalizer fit(const std::vector<FeatureMatrix>& matrices) {
        if (matrices.empty()) throw EmptyInput("cannot fit a normalizer on no matrices");
        Normalizer nz;
        std::array<double, kFeatureCount> sum{};
        std::array<double, kFeatureCount> sum_sq{};
        double n = 0.0;
        for (const auto& m : matrices) {
            for (std::int64_t r = 0; r < m.rows; ++r)
                for (int c = 0; c < kFeatureCount; ++c) {
                    const double v = m.at(r, c);
                    sum[c] += v;
                    sum_sq[c] += v * v;
                }
            n += static_cast<double>(m.rows);
        }
        if (n == 0.0) throw EmptyInput("cannot fit a normalizer on zero rows");
        for (int c = 0; c < kFeatureCount; ++c) {
            nz.mean[c] = sum[c] / n;
            const double var = std::max(0.0, sum_sq[c] / n - nz.mean[c] * nz.mean[c]);
            const double sd = std::sqrt(var);
            nz.std[c] = sd > 0.0 ? sd : 1.0;
        }
        return nz;
    }

    void apply(FeatureMatrix& m) const {
        for (std::int64_t r = 0; r < m.rows; ++r)
            for (int c = 0; c < kFeatureCount; ++c) m.at(r, c) = (m.at(r, c) - mean[c]) / std[c];
    }

    nlohmann::json to_json() const {
        return {{"mean", mean}, {"std", std}, {"columns", feature_column_names()}};
    }

    static Normalizer from_json(const nlohmann::json& j) {
        Normalizer nz;
        const auto& jm = j.at("mean");
        const auto& js = j.at("std");
        if (jm.size() != kFeatureCount || js.size() != kFeatureCount)
            throw ParseError("normalizer must have exactly 36 mean/std entries");
        for (int c = 0; c < kFeatureCount; ++c) {
            nz.mean[c] = jm[c].get<double>();
            nz.std[c] = js[c].get<double>();
        }
        return nz;
    }
};

// On-disk sample format: <base>.bin holds little-endian float32 values in
// row-major order, <base>.json describes shape, columns and labeling.
inline void write_feature_matrix(const std::string& base_path, const FeatureMatrix& m) {
    static_assert(sizeof(float) == 4);
    {
        std::ofstream out(base_path + ".bin", std::ios::binary);
        if (!out) throw IoError("cannot write " + base_path + ".bin");
        std::vector<float> f32(m.values.size());
        for (std::size_t i = 0; i < m.values.size(); ++i) f32[i] = static_cast<float>(m.values[i]);
        out.write(reinterpret_cast<const char*>(f32.data()),
                  static_cast<std::streamsize>(f32.size() * sizeof(float)));
    }
    nlohmann::json j{
        {"shape", {m.rows, kFeatureCount}},
        {"dtype", "f32le"},
        {"order", "row-major"},
        {"columns", feature_column_names()},
        {"label", to_string(m.label)},
        {"recording_id", m.recording_id},
        {"track_id", m.track_id},
        {"start_frame", m.start_frame},
    };
    if (m.prediction_time_s)
        j["prediction_time_s"] = *m.prediction_time_s;
    else
        j["prediction_time_s"] = nullptr;
    std::ofstream out(base_path + ".json");
    if (!out) throw IoError("cannot write " + base_path + ".json");
    out << j.dump(2) << '\n';
}

inline FeatureMatrix read_feature_matrix(const std::string& base_path) {
    nlohmann::json j;
    {
        std::ifstream in(base_path + ".json");
        if (!in) throw IoError("cannot open " + base_path + ".json");
        in >> j;
    }
    FeatureMatrix m;
    m.rows = j.at("shape")[0].get<std::int64_t>();
    if (j.at("shape")[1].get<int>() != kFeatureCount)
        throw ShapeError(base_path + ": expected 36 columns");
    m.label = label_from_string(j.at("label").get<std::string>());
    if (!j.at("prediction_time_s").is_null())
        m.prediction_time_s = j.at("prediction_time_s").get<double>();
    m.recording_id = j.value("recording_id", std::int64_t{0});
    m.track_id = j.value("track_id", std::int64_t{0});
    m.start_frame = j.value("start_frame", std::int64_t{0});

    std::ifstream in(base_path + ".bin", std::ios::binary);
    if (!in) throw IoError("cannot open " + base_path + ".bin");
    std::vector<float> f32(static_cast<std::size_t>(m.rows) * kFeatureCount);
    in.read(reinterpret_cast<char*>(f32.data()),
            static_cast<std::streamsize>(f32.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(f32.size() * sizeof(float)))
        throw ParseError(base_path + ".bin is shorter than its declared shape");
    m.values.assign(f32.begin(), f32.end());
    return m;
}

}  // namespace lanecast
