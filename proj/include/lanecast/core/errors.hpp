#pragma once

#include <stdexcept>
#include <string>

namespace lanecast {

// Base class for everything this library throws on bad input or bad state.
// The CLI maps these to exit code 1; argument parsing problems map to 2.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define LANECAST_DEFINE_ERROR(name)                                  \
    struct name : Error {                                            \
        explicit name(const std::string& msg) : Error(msg) {}        \
    }

LANECAST_DEFINE_ERROR(IoError);            // unreadable/unwritable file or directory
LANECAST_DEFINE_ERROR(ParseError);         // malformed CSV/JSON payload
LANECAST_DEFINE_ERROR(MissingColumn);      // required CSV header absent
LANECAST_DEFINE_ERROR(NonContiguousFrames);
LANECAST_DEFINE_ERROR(UnknownLaneId);
LANECAST_DEFINE_ERROR(BadDirection);
LANECAST_DEFINE_ERROR(MissingFrame);
LANECAST_DEFINE_ERROR(MissingTrack);
LANECAST_DEFINE_ERROR(AmbiguousManeuver);
LANECAST_DEFINE_ERROR(EmptyInput);
LANECAST_DEFINE_ERROR(ShapeError);         // tensor/feature shape mismatch
LANECAST_DEFINE_ERROR(IndivisibleChannels);
LANECAST_DEFINE_ERROR(BatchTooSmall);
LANECAST_DEFINE_ERROR(TooManyHeads);
LANECAST_DEFINE_ERROR(BadLabel);
LANECAST_DEFINE_ERROR(BadConfig);          // invalid run/model/corpus parameters
LANECAST_DEFINE_ERROR(BadBinWidth);
LANECAST_DEFINE_ERROR(Diverged);           // non-finite loss during training
LANECAST_DEFINE_ERROR(GraphError);         // autodiff misuse (wrong graph, non-scalar loss)

#undef LANECAST_DEFINE_ERROR

}  // namespace lanecast
