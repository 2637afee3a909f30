#pragma once

#include <string>
#include <string_view>

#include "lanecast/core/errors.hpp"

namespace lanecast {

// Class order is fixed: confusion matrices, softmax outputs and report
// tables all index LK, LLC, RLC in this order.
enum class Label : int {
    lane_keep = 0,
    left_change = 1,
    right_change = 2,
};

inline constexpr int kClassCount = 3;

inline const char* to_string(Label label) {
    switch (label) {
        case Label::lane_keep: return "LK";
        case Label::left_change: return "LLC";
        case Label::right_change: return "RLC";
    }
    return "?";
}

inline Label label_from_string(std::string_view s) {
    if (s == "LK") return Label::lane_keep;
    if (s == "LLC") return Label::left_change;
    if (s == "RLC") return Label::right_change;
    throw BadLabel("unknown class label '" + std::string(s) + "'");
}

}  // namespace lanecast
