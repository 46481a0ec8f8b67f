#include <algorithm>
#include <cmath>
#include <numbers>

#include "bovw/errors.hpp"
#include "bovw/ingest.hpp"
#include "bovw/random.hpp"

namespace bovw {

namespace {

constexpr double kPi = std::numbers::pi;

struct CommonParams {
    double base_y;     // background luma
    double contrast;   // luma swing of the pattern
    double cb, cr;     // tint
    double chroma_gain;
    double noise;      // per-pixel luma noise amplitude
};

struct LatticeParams {
    double spacing, angle, sigma;
};

struct MeshParams {
    double spacing;
    double angle[2];
    double amp, wavelength, phase[2];
    double width;
};

struct BlobParams {
    double cell;       // fine value-noise cell in pixels
    double threshold;  // blob level
    double softness;
};

// Per-frame positional jitter keeps consecutive frames slightly different.
struct Jitter {
    double dx, dy;
};

double unit(SplitMix64& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

CommonParams common_params(SplitMix64& rng) {
    CommonParams p;
    p.base_y = unit(rng, 70, 100);
    p.contrast = unit(rng, 70, 110);
    p.cb = unit(rng, 104, 118);
    p.cr = unit(rng, 142, 158);
    p.chroma_gain = unit(rng, 6, 14);
    p.noise = unit(rng, 2, 5);
    return p;
}

// Value-noise lattice with hashed corner values; evaluated bilinearly.
class ValueNoise {
public:
    ValueNoise(std::uint64_t key, double cell) : key_(key), inv_cell_(1.0 / cell) {}

    double at(double x, double y) const {
        const double gx = x * inv_cell_;
        const double gy = y * inv_cell_;
        const double fx = std::floor(gx);
        const double fy = std::floor(gy);
        const auto ix = static_cast<std::int64_t>(fx);
        const auto iy = static_cast<std::int64_t>(fy);
        const double tx = smooth(gx - fx);
        const double ty = smooth(gy - fy);
        const double v00 = corner(ix, iy), v10 = corner(ix + 1, iy);
        const double v01 = corner(ix, iy + 1), v11 = corner(ix + 1, iy + 1);
        const double top = v00 + (v10 - v00) * tx;
        const double bottom = v01 + (v11 - v01) * tx;
        return top + (bottom - top) * ty;
    }

private:
    static double smooth(double t) { return t * t * (3.0 - 2.0 * t); }
    double corner(std::int64_t ix, std::int64_t iy) const {
        const std::uint64_t h = mix64(key_ ^ mix64(static_cast<std::uint64_t>(ix) * 0x9E3779B97F4A7C15ULL +
                                                   static_cast<std::uint64_t>(iy)));
        return static_cast<double>(h >> 11) * 0x1.0p-53;
    }

    std::uint64_t key_;
    double inv_cell_;
};

} // namespace

std::string to_string(TextureClass c) {
    switch (c) {
    case TextureClass::A: return "A";
    case TextureClass::B: return "B";
    case TextureClass::C3: return "C3";
    }
    return "?";
}

std::optional<TextureClass> parse_texture_class(std::string_view name) {
    if (name == "A") return TextureClass::A;
    if (name == "B") return TextureClass::B;
    if (name == "C3") return TextureClass::C3;
    return std::nullopt;
}

RawFrame synth_texture_frame(std::uint64_t seed, TextureClass cls, std::int64_t frame_index, int width,
                             int height) {
    if (width % 2 != 0) throw PreconditionError("synth_texture_frame: width must be even, got " + std::to_string(width));
    if (width < 64 || height < 64) {
        throw PreconditionError("synth_texture_frame: frame must be at least 64x64, got " + std::to_string(width) +
                                "x" + std::to_string(height));
    }

    const auto class_tag = static_cast<std::uint64_t>(cls) + 1;
    SplitMix64 param_rng(mix64(seed) ^ (class_tag * 0xD1B54A32D192ED03ULL));
    const CommonParams common = common_params(param_rng);

    SplitMix64 frame_rng(mix64(mix64(seed ^ (class_tag << 56)) + static_cast<std::uint64_t>(frame_index)));
    const Jitter jitter{unit(frame_rng, -1.5, 1.5), unit(frame_rng, -1.5, 1.5)};
    const std::uint64_t noise_key = frame_rng.next();

    LatticeParams lattice{};
    MeshParams mesh{};
    BlobParams blobs{};
    std::uint64_t blob_key = 0;
    switch (cls) {
    case TextureClass::A:
        lattice.spacing = unit(param_rng, 9, 14);
        lattice.angle = unit(param_rng, 0, kPi);
        lattice.sigma = lattice.spacing * unit(param_rng, 0.16, 0.22);
        break;
    case TextureClass::B:
        mesh.spacing = unit(param_rng, 13, 20);
        mesh.angle[0] = unit(param_rng, 0, kPi);
        mesh.angle[1] = mesh.angle[0] + unit(param_rng, 0.9, 1.6);
        mesh.amp = unit(param_rng, 1.5, 3.5);
        mesh.wavelength = unit(param_rng, 24, 40);
        mesh.phase[0] = unit(param_rng, 0, 2 * kPi);
        mesh.phase[1] = unit(param_rng, 0, 2 * kPi);
        mesh.width = unit(param_rng, 1.1, 1.8);
        break;
    case TextureClass::C3:
        blobs.cell = unit(param_rng, 2.5, 4.0);
        blobs.threshold = unit(param_rng, 0.45, 0.6);
        blobs.softness = unit(param_rng, 0.08, 0.15);
        blob_key = param_rng.next();
        break;
    }

    const double ca = std::cos(lattice.angle), sa = std::sin(lattice.angle);
    const double inv_two_sigma2 = lattice.sigma > 0 ? 1.0 / (2 * lattice.sigma * lattice.sigma) : 0.0;
    const double mesh_c[2] = {std::cos(mesh.angle[0]), std::cos(mesh.angle[1])};
    const double mesh_s[2] = {std::sin(mesh.angle[0]), std::sin(mesh.angle[1])};
    const double mesh_inv_w2 = mesh.width > 0 ? 1.0 / (2 * mesh.width * mesh.width) : 0.0;
    const ValueNoise fine(blob_key, blobs.cell > 0 ? blobs.cell : 1.0);
    const ValueNoise coarse(mix64(blob_key + 1), blobs.cell > 0 ? 2.3 * blobs.cell : 1.0);

    auto pattern = [&](double x, double y) -> double {
        switch (cls) {
        case TextureClass::A: {
            const double u = (ca * x + sa * y) / lattice.spacing;
            const double v = (-sa * x + ca * y) / lattice.spacing;
            const double du = (u - std::round(u)) * lattice.spacing;
            const double dv = (v - std::round(v)) * lattice.spacing;
            return std::exp(-(du * du + dv * dv) * inv_two_sigma2);
        }
        case TextureClass::B: {
            double t = 0.0;
            for (int k = 0; k < 2; ++k) {
                const double along = -mesh_s[k] * x + mesh_c[k] * y;
                const double across = mesh_c[k] * x + mesh_s[k] * y +
                                      mesh.amp * std::sin(2 * kPi * along / mesh.wavelength + mesh.phase[k]);
                const double r = across - mesh.spacing * std::round(across / mesh.spacing);
                t = std::max(t, std::exp(-r * r * mesh_inv_w2));
            }
            return 1.0 - t;
        }
        case TextureClass::C3: {
            const double n = 0.6 * fine.at(x, y) + 0.4 * coarse.at(x, y);
            const double z = (n - blobs.threshold) / blobs.softness;
            return 1.0 / (1.0 + std::exp(-z));
        }
        }
        return 0.0;
    };

    RawFrame frame;
    frame.frame_index = frame_index;
    frame.width = width;
    frame.height = height;
    frame.data.resize(static_cast<std::size_t>(width) * height * 2);

    std::uint8_t* dst = frame.data.data();
    for (int y = 0; y < height; ++y) {
        const double sy = y + jitter.dy;
        for (int x = 0; x < width; x += 2, dst += 4) {
            const double t0 = pattern(x + jitter.dx, sy);
            const double t1 = pattern(x + 1 + jitter.dx, sy);
            const std::uint64_t h = mix64(noise_key ^ (static_cast<std::uint64_t>(y) << 32 | static_cast<std::uint32_t>(x)));
            const double n0 = (static_cast<double>(h & 0xffff) / 65535.0 - 0.5) * 2 * common.noise;
            const double n1 = (static_cast<double>((h >> 16) & 0xffff) / 65535.0 - 0.5) * 2 * common.noise;
            const double y0 = common.base_y + common.contrast * t0 + n0;
            const double y1 = common.base_y + common.contrast * t1 + n1;
            const double tm = 0.5 * (t0 + t1) - 0.5;
            const double cb = common.cb - common.chroma_gain * tm;
            const double cr = common.cr + common.chroma_gain * tm;
            auto q = [](double v, double lo, double hi) {
                return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), lo, hi));
            };
            dst[0] = q(y0, 16, 235);
            dst[1] = q(cb, 16, 240);
            dst[2] = q(y1, 16, 235);
            dst[3] = q(cr, 16, 240);
        }
    }
    return frame;
}

} // namespace bovw
