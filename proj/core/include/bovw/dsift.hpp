#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bovw/ingest.hpp"
#include "bovw/roi.hpp"

namespace bovw {

// Intensity in [0, 1], row-major.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

inline constexpr int kOrientationBins = 8;
inline constexpr int kSpatialBins = 4;
inline constexpr int kDescriptorDim = kSpatialBins * kSpatialBins * kOrientationBins;

struct DsiftParams {
    int grid_step = 5;
    // Spatial bin size in pixels; a patch spans 4 bins per axis.
    std::vector<int> bin_sizes{5, 7};
};

struct GridPosition {
    int x = 0;
    int y = 0;
};

// Descriptor d occupies values[d*128 .. d*128+127]; element index is
// (row_bin * 4 + col_bin) * 8 + orientation_bin.
struct DescriptorSet {
    std::vector<float> values;
    std::vector<GridPosition> positions;
    std::vector<int> scales;

    std::size_t size() const noexcept { return scales.size(); }
    bool empty() const noexcept { return scales.empty(); }
    std::span<const float, kDescriptorDim> descriptor(std::size_t i) const {
        return std::span<const float, kDescriptorDim>(values.data() + i * kDescriptorDim, kDescriptorDim);
    }
};

// Crops the ROI and converts with luma = (0.299 R + 0.587 G + 0.114 B) / 255.
// Throws PreconditionError if the ROI is not fully inside the frame.
GrayImage to_gray(const RgbFrame& frame, const RoiSpec& roi);

// Dense upright SIFT on a regular grid, one pass per bin size, concatenated in
// (bin_size, y, x) order. Gradients are central differences (edge-replicated),
// binned with trilinear weights over 4x4 flat spatial cells and 8 orientations,
// then L2-normalized, clipped at 0.2 and renormalized. Patches whose raw norm
// is below 1e-10 yield the zero descriptor. Bin sizes whose patch does not fit
// contribute nothing.
DescriptorSet extract_dsift(const GrayImage& image, const DsiftParams& params = {});

std::size_t dsift_count(int width, int height, const DsiftParams& params = {});

void validate(const DsiftParams& params);

} // namespace bovw
