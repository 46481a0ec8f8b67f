#pragma once

#include <string>

namespace bovw {

// Rectangle in frame pixel coordinates; (x, y) is the top-left corner.
struct RoiSpec {
    int x = 0;
    int y = 0;
    int width = 200;
    int height = 200;

    friend bool operator==(const RoiSpec&, const RoiSpec&) = default;
};

inline bool roi_inside(const RoiSpec& roi, int frame_width, int frame_height) noexcept {
    return roi.x >= 0 && roi.y >= 0 && roi.width > 0 && roi.height > 0 && roi.x + roi.width <= frame_width &&
           roi.y + roi.height <= frame_height;
}

// size x size square centred in the frame (shrunk if the frame is smaller).
RoiSpec centered_roi(int frame_width, int frame_height, int size = 200);

// Shrinks then shifts the rectangle until it lies inside the frame. Width and
// height never drop below min_side unless the frame itself is smaller.
RoiSpec clamp_roi(const RoiSpec& roi, int frame_width, int frame_height, int min_side = 1);

std::string to_string(const RoiSpec& roi);

} // namespace bovw
