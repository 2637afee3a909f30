#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lanecast/core/csv.hpp"
#include "lanecast/core/errors.hpp"

// Reading and writing drone-recorded highway trajectories in the highD CSV
// layout: per recording a *_recordingMeta.csv, *_tracksMeta.csv and
// *_tracks.csv.  Positions are in the recording's image frame (x along the
// road, y pointing from the upper carriageway towards the lower one).

namespace lanecast {

// The eight surrounding vehicles the tracks file names per frame, in the
// order the feature columns use downstream.
enum class NeighborRole : int {
    preceding = 0,
    following,
    left_preceding,
    left_alongside,
    left_following,
    right_preceding,
    right_alongside,
    right_following,
};

inline constexpr int kNeighborRoleCount = 8;

inline constexpr std::array<const char*, kNeighborRoleCount> kNeighborColumns = {
    "precedingId",     "followingId",       "leftPrecedingId",  "leftAlongsideId",
    "leftFollowingId", "rightPrecedingId",  "rightAlongsideId", "rightFollowingId",
};

inline constexpr std::array<const char*, kNeighborRoleCount> kNeighborShortNames = {
    "p", "f", "lp", "la", "lf", "rp", "ra", "rf",
};

struct RecordingMeta {
    std::int64_t id = 0;
    double frame_rate_hz = 25.0;
    std::vector<double> upper_lane_markings;  // y positions, ascending
    std::vector<double> lower_lane_markings;

    // highD numbers lanes from the top image border: id 1 is above the first
    // upper marking, the upper carriageway occupies 2..len(upper), then after
    // the median the lower carriageway occupies len(upper)+2 .. len(upper)+len(lower).
    std::vector<std::int64_t> upper_lane_ids() const {
        std::vector<std::int64_t> ids;
        for (std::int64_t i = 2; i <= static_cast<std::int64_t>(upper_lane_markings.size()); ++i)
            ids.push_back(i);
        return ids;
    }
    std::vector<std::int64_t> lower_lane_ids() const {
        const auto n_upper = static_cast<std::int64_t>(upper_lane_markings.size());
        std::vector<std::int64_t> ids;
        for (std::int64_t i = n_upper + 2;
             i <= n_upper + static_cast<std::int64_t>(lower_lane_markings.size()); ++i)
            ids.push_back(i);
        return ids;
    }
};

inline double frames_per_second(const RecordingMeta& meta) { return meta.frame_rate_hz; }

struct TrackState {
    std::int64_t frame = 0;
    double x = 0.0;   // raw highD coordinates and velocities
    double y = 0.0;
    double vx = 0.0;
    double vy = 0.0;
    std::int64_t lane_id = 0;
    std::array<std::int64_t, kNeighborRoleCount> neighbor_ids{};  // 0 = absent

    std::optional<std::int64_t> neighbor(NeighborRole role) const {
        const std::int64_t id = neighbor_ids[static_cast<int>(role)];
        if (id == 0) return std::nullopt;
        return id;
    }
};

struct Track {
    std::int64_t id = 0;
    int direction = 1;                // 1 = upper carriageway, 2 = lower
    std::vector<TrackState> states;  // frame-contiguous, ascending

    std::int64_t first_frame() const { return states.front().frame; }
    std::int64_t last_frame() const { return states.back().frame; }

    const TrackState& state_at(std::int64_t frame) const {
        const std::int64_t offset = frame - first_frame();
        if (offset < 0 || offset >= static_cast<std::int64_t>(states.size()))
            throw MissingFrame("track " + std::to_string(id) + " has no frame " +
                               std::to_string(frame));
        return states[static_cast<std::size_t>(offset)];
    }
};

struct Recording {
    RecordingMeta meta;
    std::vector<Track> tracks;  // ascending by id

    const Track& track_by_id(std::int64_t id) const {
        auto it = std::lower_bound(tracks.begin(), tracks.end(), id,
                                   [](const Track& t, std::int64_t v) { return t.id < v; });
        if (it == tracks.end() || it->id != id)
            throw MissingTrack("no track with id " + std::to_string(id));
        return *it;
    }

    bool has_track(std::int64_t id) const {
        auto it = std::lower_bound(tracks.begin(), tracks.end(), id,
                                   [](const Track& t, std::int64_t v) { return t.id < v; });
        return it != tracks.end() && it->id == id;
    }
};

namespace detail {

inline std::vector<double> parse_marking_list(const std::string& field, const std::string& what) {
    std::vector<double> out;
    std::string::size_type start = 0;
    while (start <= field.size()) {
        auto pos = field.find(';', start);
        auto len = (pos == std::string::npos ? field.size() : pos) - start;
        std::string piece = field.substr(start, len);
        if (!piece.empty() && piece.back() == '\r') piece.pop_back();
        if (!piece.empty()) out.push_back(parse_double(piece, what));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string recording_prefix(std::int64_t id) {
    std::string s = std::to_string(id);
    if (s.size() < 2) s.insert(s.begin(), '0');
    return s;
}

}  // namespace detail

inline RecordingMeta parse_recording_meta(const std::string& path) {
    CsvTable t = CsvTable::read_file(path);
    if (t.row_count() != 1) throw ParseError(path + ": expected exactly one meta row");
    RecordingMeta meta;
    meta.id = t.integer(0, t.column("id"));
    meta.frame_rate_hz = t.real(0, t.column("frameRate"));
    meta.upper_lane_markings = detail::parse_marking_list(t.cell(0, t.column("upperLaneMarkings")), path);
    meta.lower_lane_markings = detail::parse_marking_list(t.cell(0, t.column("lowerLaneMarkings")), path);
    if (meta.upper_lane_markings.size() < 2 || meta.lower_lane_markings.size() < 2)
        throw ParseError(path + ": each carriageway needs at least two lane markings");
    return meta;
}

// Reads one recording from its three CSV files.  Unknown columns are
// ignored, so files with the full highD column set parse unchanged.
inline Recording parse_recording(const std::string& meta_path, const std::string& tracks_meta_path,
                                 const std::string& tracks_path) {
    Recording rec;
    rec.meta = parse_recording_meta(meta_path);

    std::unordered_map<std::int64_t, int> directions;
    {
        CsvTable t = CsvTable::read_file(tracks_meta_path);
        const auto col_id = t.column("id");
        const auto col_dir = t.column("drivingDirection");
        for (std::size_t r = 0; r < t.row_count(); ++r) {
            const std::int64_t id = t.integer(r, col_id);
            const std::int64_t dir = t.integer(r, col_dir);
            if (dir != 1 && dir != 2)
                throw BadDirection(tracks_meta_path + ": track " + std::to_string(id) +
                                   " has drivingDirection " + std::to_string(dir));
            directions[id] = static_cast<int>(dir);
        }
    }

    std::vector<std::int64_t> valid_lanes;
    for (auto id : rec.meta.upper_lane_ids()) valid_lanes.push_back(id);
    for (auto id : rec.meta.lower_lane_ids()) valid_lanes.push_back(id);

    std::unordered_map<std::int64_t, std::size_t> track_index;
    {
        CsvTable t = CsvTable::read_file(tracks_path);
        const auto col_frame = t.column("frame");
        const auto col_id = t.column("id");
        const auto col_x = t.column("x");
        const auto col_y = t.column("y");
        const auto col_vx = t.column("xVelocity");
        const auto col_vy = t.column("yVelocity");
        const auto col_lane = t.column("laneId");
        std::array<std::size_t, kNeighborRoleCount> col_nb{};
        for (int i = 0; i < kNeighborRoleCount; ++i) col_nb[i] = t.column(kNeighborColumns[i]);

        for (std::size_t r = 0; r < t.row_count(); ++r) {
            TrackState s;
            s.frame = t.integer(r, col_frame);
            const std::int64_t id = t.integer(r, col_id);
            s.x = t.real(r, col_x);
            s.y = t.real(r, col_y);
            s.vx = t.real(r, col_vx);
            s.vy = t.real(r, col_vy);
            s.lane_id = t.integer(r, col_lane);
            if (std::find(valid_lanes.begin(), valid_lanes.end(), s.lane_id) == valid_lanes.end())
                throw UnknownLaneId(tracks_path + ": lane id " + std::to_string(s.lane_id) +
                                    " not derivable from the lane markings");
            for (int i = 0; i < kNeighborRoleCount; ++i) s.neighbor_ids[i] = t.integer(r, col_nb[i]);

            auto it = track_index.find(id);
            if (it == track_index.end()) {
                auto dir_it = directions.find(id);
                if (dir_it == directions.end())
                    throw MissingTrack(tracks_path + ": track " + std::to_string(id) +
                                       " has no tracksMeta row");
                track_index.emplace(id, rec.tracks.size());
                Track tr;
                tr.id = id;
                tr.direction = dir_it->second;
                tr.states.push_back(s);
                rec.tracks.push_back(std::move(tr));
            } else {
                Track& tr = rec.tracks[it->second];
                if (s.frame != tr.states.back().frame + 1)
                    throw NonContiguousFrames(tracks_path + ": track " + std::to_string(id) +
                                              " jumps from frame " +
                                              std::to_string(tr.states.back().frame) + " to " +
                                              std::to_string(s.frame));
                tr.states.push_back(s);
            }
        }
    }

    std::sort(rec.tracks.begin(), rec.tracks.end(),
              [](const Track& a, const Track& b) { return a.id < b.id; });
    return rec;
}

// Convenience form following the highD naming scheme inside a directory.
inline Recording parse_recording(const std::string& dir, std::int64_t recording_id) {
    const std::string p = dir + "/" + detail::recording_prefix(recording_id);
    return parse_recording(p + "_recordingMeta.csv", p + "_tracksMeta.csv", p + "_tracks.csv");
}

// All recording ids present in a corpus directory, ascending.
inline std::vector<std::int64_t> list_recordings(const std::string& dir) {
    std::vector<std::int64_t> ids;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        const auto pos = name.find("_recordingMeta.csv");
        if (pos == std::string::npos || pos == 0) continue;
        try {
            ids.push_back(parse_int(name.substr(0, pos), name));
        } catch (const ParseError&) {
            continue;
        }
    }
    std::sort(ids.begin(), ids.end());
    if (ids.empty()) throw EmptyInput(dir + " contains no *_recordingMeta.csv files");
    return ids;
}

namespace detail {

inline std::string join_markings(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ';';
        out += format_double(values[i]);
    }
    return out;
}

}  // namespace detail

// Writes the three CSV files for a recording.  Only the columns this
// library consumes are emitted; parse_recording(write_recording(r)) == r.
inline void write_recording(const std::string& dir, const Recording& rec) {
    std::filesystem::create_directories(dir);
    const std::string p = dir + "/" + detail::recording_prefix(rec.meta.id);
    {
        CsvWriter w(p + "_recordingMeta.csv");
        w.row({"id", "frameRate", "upperLaneMarkings", "lowerLaneMarkings"});
        w.row({std::to_string(rec.meta.id), format_double(rec.meta.frame_rate_hz),
               detail::join_markings(rec.meta.upper_lane_markings),
               detail::join_markings(rec.meta.lower_lane_markings)});
    }
    {
        CsvWriter w(p + "_tracksMeta.csv");
        w.row({"id", "initialFrame", "finalFrame", "drivingDirection"});
        for (const Track& t : rec.tracks)
            w.row({std::to_string(t.id), std::to_string(t.first_frame()),
                   std::to_string(t.last_frame()), std::to_string(t.direction)});
    }
    {
        CsvWriter w(p + "_tracks.csv");
        std::vector<std::string> header = {"frame", "id", "x", "y", "xVelocity", "yVelocity"};
        for (const char* c : kNeighborColumns) header.push_back(c);
        header.push_back("laneId");
        w.row(header);
        for (const Track& t : rec.tracks) {
            for (const TrackState& s : t.states) {
                std::vector<std::string> row = {std::to_string(s.frame), std::to_string(t.id),
                                                format_double(s.x),      format_double(s.y),
                                                format_double(s.vx),     format_double(s.vy)};
                for (std::int64_t id : s.neighbor_ids) row.push_back(std::to_string(id));
                row.push_back(std::to_string(s.lane_id));
                w.row(row);
            }
        }
    }
}

}  // namespace lanecast
