#include "bovw/dsift.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "bovw/errors.hpp"

namespace bovw {

namespace {

// Per-pixel gradient split across its two nearest orientation bins.
struct OrientedMagnitude {
    std::uint8_t bin;      // lower bin; the upper one is (bin + 1) % 8
    float lower_weight;    // magnitude * (1 - frac)
    float upper_weight;    // magnitude * frac
};

std::vector<OrientedMagnitude> oriented_gradients(const GrayImage& image) {
    const int w = image.width;
    const int h = image.height;
    std::vector<OrientedMagnitude> out(static_cast<std::size_t>(w) * h);
    constexpr double kBinsPerRadian = kOrientationBins / (2.0 * std::numbers::pi);
    for (int y = 0; y < h; ++y) {
        const int up = std::max(y - 1, 0);
        const int down = std::min(y + 1, h - 1);
        for (int x = 0; x < w; ++x) {
            const int left = std::max(x - 1, 0);
            const int right = std::min(x + 1, w - 1);
            const double gx = 0.5 * (static_cast<double>(image.at(right, y)) - image.at(left, y));
            const double gy = 0.5 * (static_cast<double>(image.at(x, down)) - image.at(x, up));
            const double mag = std::sqrt(gx * gx + gy * gy);
            double theta = std::atan2(gy, gx);
            if (theta < 0) theta += 2.0 * std::numbers::pi;
            const double o = theta * kBinsPerRadian;
            const double lower = std::floor(o);
            const double frac = o - lower;
            auto& cell = out[static_cast<std::size_t>(y) * w + x];
            cell.bin = static_cast<std::uint8_t>(static_cast<int>(lower) % kOrientationBins);
            cell.lower_weight = static_cast<float>(mag * (1.0 - frac));
            cell.upper_weight = static_cast<float>(mag * frac);
        }
    }
    return out;
}

// Linear split of a patch-local pixel offset between two adjacent spatial bins.
struct SpatialSplit {
    int lower;          // may be -1 or 3; out-of-range halves are discarded
    double lower_weight;
    double upper_weight;
};

std::vector<SpatialSplit> spatial_splits(int bin_size) {
    const int extent = kSpatialBins * bin_size;
    std::vector<SpatialSplit> splits(static_cast<std::size_t>(extent));
    for (int i = 0; i < extent; ++i) {
        const double b = (i + 0.5) / bin_size - 0.5;
        const double lower = std::floor(b);
        const double frac = b - lower;
        splits[i] = {static_cast<int>(lower), 1.0 - frac, frac};
    }
    return splits;
}

void normalize_descriptor(std::array<double, kDescriptorDim>& hist, float* out) {
    double norm_sq = 0.0;
    for (double v : hist) norm_sq += v * v;
    const double norm = std::sqrt(norm_sq);
    if (norm < 1e-10) {
        std::fill(out, out + kDescriptorDim, 0.0f);
        return;
    }
    double clipped_sq = 0.0;
    for (double& v : hist) {
        v = std::min(v / norm, 0.2);
        clipped_sq += v * v;
    }
    const double renorm = std::sqrt(clipped_sq);
    for (int k = 0; k < kDescriptorDim; ++k) out[k] = static_cast<float>(hist[k] / renorm);
}

std::size_t positions_along(int length, int extent, int step) {
    if (length < extent) return 0;
    return static_cast<std::size_t>((length - extent) / step + 1);
}

} // namespace

void validate(const DsiftParams& params) {
    if (params.grid_step < 1) throw PreconditionError("dsift grid_step must be >= 1");
    if (params.bin_sizes.empty()) throw PreconditionError("dsift needs at least one bin size");
    for (int s : params.bin_sizes) {
        if (s < 1) throw PreconditionError("dsift bin sizes must be >= 1, got " + std::to_string(s));
    }
}

GrayImage to_gray(const RgbFrame& frame, const RoiSpec& roi) {
    if (!roi_inside(roi, frame.width, frame.height)) {
        throw PreconditionError("ROI " + to_string(roi) + " is not inside the " + std::to_string(frame.width) + "x" +
                                std::to_string(frame.height) + " frame");
    }
    GrayImage gray;
    gray.width = roi.width;
    gray.height = roi.height;
    gray.data.resize(static_cast<std::size_t>(roi.width) * roi.height);
    float* dst = gray.data.data();
    for (int y = 0; y < roi.height; ++y) {
        const std::uint8_t* src = frame.pixel(roi.x, roi.y + y);
        for (int x = 0; x < roi.width; ++x, src += 3) {
            *dst++ = (0.299f * src[0] + 0.587f * src[1] + 0.114f * src[2]) / 255.0f;
        }
    }
    return gray;
}

std::size_t dsift_count(int width, int height, const DsiftParams& params) {
    validate(params);
    std::size_t total = 0;
    for (int s : params.bin_sizes) {
        const int extent = kSpatialBins * s;
        total += positions_along(width, extent, params.grid_step) * positions_along(height, extent, params.grid_step);
    }
    return total;
}

DescriptorSet extract_dsift(const GrayImage& image, const DsiftParams& params) {
    validate(params);
    DescriptorSet out;
    const std::size_t total = dsift_count(image.width, image.height, params);
    if (total == 0) return out;
    out.values.resize(total * kDescriptorDim);
    out.positions.reserve(total);
    out.scales.reserve(total);

    const auto gradients = oriented_gradients(image);
    std::vector<int> sizes = params.bin_sizes;
    std::stable_sort(sizes.begin(), sizes.end());

    std::size_t d = 0;
    std::array<double, kDescriptorDim> hist;
    for (int s : sizes) {
        const int extent = kSpatialBins * s;
        if (image.width < extent || image.height < extent) continue;
        const auto splits = spatial_splits(s);
        for (int y0 = 0; y0 + extent <= image.height; y0 += params.grid_step) {
            for (int x0 = 0; x0 + extent <= image.width; x0 += params.grid_step) {
                hist.fill(0.0);
                for (int j = 0; j < extent; ++j) {
                    const SpatialSplit& sy = splits[j];
                    const OrientedMagnitude* row =
                        gradients.data() + static_cast<std::size_t>(y0 + j) * image.width + x0;
                    for (int i = 0; i < extent; ++i) {
                        const OrientedMagnitude& g = row[i];
                        if (g.lower_weight == 0.0f && g.upper_weight == 0.0f) continue;
                        const SpatialSplit& sx = splits[i];
                        const int o0 = g.bin;
                        const int o1 = (o0 + 1) % kOrientationBins;
                        for (int dy = 0; dy < 2; ++dy) {
                            const int by = sy.lower + dy;
                            if (by < 0 || by >= kSpatialBins) continue;
                            const double wy = dy == 0 ? sy.lower_weight : sy.upper_weight;
                            for (int dx = 0; dx < 2; ++dx) {
                                const int bx = sx.lower + dx;
                                if (bx < 0 || bx >= kSpatialBins) continue;
                                const double w = wy * (dx == 0 ? sx.lower_weight : sx.upper_weight);
                                double* cell = hist.data() + (by * kSpatialBins + bx) * kOrientationBins;
                                cell[o0] += w * g.lower_weight;
                                cell[o1] += w * g.upper_weight;
                            }
                        }
                    }
                }
                normalize_descriptor(hist, out.values.data() + d * kDescriptorDim);
                out.positions.push_back({x0, y0});
                out.scales.push_back(s);
                ++d;
            }
        }
    }
    return out;
}

} // namespace bovw
