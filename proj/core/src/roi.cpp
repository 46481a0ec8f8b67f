#include "bovw/roi.hpp"

#include <algorithm>

namespace bovw {

RoiSpec centered_roi(int frame_width, int frame_height, int size) {
    RoiSpec roi;
    roi.width = std::min(size, frame_width);
    roi.height = std::min(size, frame_height);
    roi.x = (frame_width - roi.width) / 2;
    roi.y = (frame_height - roi.height) / 2;
    return roi;
}

RoiSpec clamp_roi(const RoiSpec& roi, int frame_width, int frame_height, int min_side) {
    RoiSpec out = roi;
    const int min_w = std::min(min_side, frame_width);
    const int min_h = std::min(min_side, frame_height);
    out.width = std::clamp(out.width, min_w, frame_width);
    out.height = std::clamp(out.height, min_h, frame_height);
    out.x = std::clamp(out.x, 0, frame_width - out.width);
    out.y = std::clamp(out.y, 0, frame_height - out.height);
    return out;
}

std::string to_string(const RoiSpec& roi) {
    return std::to_string(roi.x) + "," + std::to_string(roi.y) + "," + std::to_string(roi.width) + "," +
           std::to_string(roi.height);
}

} // namespace bovw
