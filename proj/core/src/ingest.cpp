#include "bovw/ingest.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>

#include "bovw/errors.hpp"
#include "bovw/png_io.hpp"

namespace bovw {

namespace {

constexpr std::array<char, 4> kRawMagic{'Y', 'U', 'V', '2'};

// floor((num + 500) / 1000) for any sign of num.
inline int round_thousandths(int num) noexcept {
    const int shifted = num + 500;
    int q = shifted / 1000;
    if (shifted % 1000 != 0 && shifted < 0) --q;
    return q;
}

inline std::uint8_t clamp_u8(int v) noexcept {
    return static_cast<std::uint8_t>(std::clamp(v, 0, 255));
}

std::uint32_t read_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u32_le(std::ostream& out, std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                           static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(bytes, 4);
}

} // namespace

Rgb ycbcr_to_rgb(int y, int cb, int cr) noexcept {
    const int luma = 1164 * (y - 16);
    const int u = cb - 128;
    const int v = cr - 128;
    return Rgb{clamp_u8(round_thousandths(luma + 1596 * v)),
               clamp_u8(round_thousandths(luma - 392 * u - 813 * v)),
               clamp_u8(round_thousandths(luma + 2017 * u))};
}

RgbFrame decode_yuv422_to_rgb(const RawFrame& frame) {
    if (frame.width <= 0 || frame.height <= 0 || frame.width % 2 != 0) {
        throw PreconditionError("yuv422 frame needs positive even width, got " + std::to_string(frame.width) +
                                "x" + std::to_string(frame.height));
    }
    const std::size_t expected = static_cast<std::size_t>(frame.width) * frame.height * 2;
    if (frame.data.size() != expected) {
        throw PreconditionError("yuv422 frame length mismatch: expected " + std::to_string(expected) +
                                " bytes, got " + std::to_string(frame.data.size()));
    }

    RgbFrame out;
    out.frame_index = frame.frame_index;
    out.timestamp_us = frame.timestamp_us;
    out.width = frame.width;
    out.height = frame.height;
    out.data.resize(static_cast<std::size_t>(frame.width) * frame.height * 3);

    const std::uint8_t* src = frame.data.data();
    std::uint8_t* dst = out.data.data();
    const std::size_t pairs = expected / 4;
    for (std::size_t i = 0; i < pairs; ++i, src += 4, dst += 6) {
        const int u = src[1] - 128;
        const int v = src[3] - 128;
        const int r_off = 1596 * v;
        const int g_off = -392 * u - 813 * v;
        const int b_off = 2017 * u;
        const int y0 = 1164 * (src[0] - 16);
        const int y1 = 1164 * (src[2] - 16);
        dst[0] = clamp_u8(round_thousandths(y0 + r_off));
        dst[1] = clamp_u8(round_thousandths(y0 + g_off));
        dst[2] = clamp_u8(round_thousandths(y0 + b_off));
        dst[3] = clamp_u8(round_thousandths(y1 + r_off));
        dst[4] = clamp_u8(round_thousandths(y1 + g_off));
        dst[5] = clamp_u8(round_thousandths(y1 + b_off));
    }
    return out;
}

RawFrame encode_rgb_to_yuv422(const RgbFrame& frame) {
    if (frame.width <= 0 || frame.height <= 0 || frame.width % 2 != 0) {
        throw PreconditionError("rgb->yuv422 needs positive even width, got " + std::to_string(frame.width));
    }
    if (frame.data.size() != static_cast<std::size_t>(frame.width) * frame.height * 3) {
        throw PreconditionError("rgb frame length mismatch");
    }
    RawFrame out;
    out.frame_index = frame.frame_index;
    out.timestamp_us = frame.timestamp_us;
    out.width = frame.width;
    out.height = frame.height;
    out.data.resize(static_cast<std::size_t>(frame.width) * frame.height * 2);

    auto luma = [](const std::uint8_t* p) {
        return 16.0 + 0.257 * p[0] + 0.504 * p[1] + 0.098 * p[2];
    };
    auto cb = [](const std::uint8_t* p) { return 128.0 - 0.148 * p[0] - 0.291 * p[1] + 0.439 * p[2]; };
    auto cr = [](const std::uint8_t* p) { return 128.0 + 0.439 * p[0] - 0.368 * p[1] - 0.071 * p[2]; };
    auto to_u8 = [](double v) { return clamp_u8(static_cast<int>(std::floor(v + 0.5))); };

    const std::uint8_t* src = frame.data.data();
    std::uint8_t* dst = out.data.data();
    const std::size_t pairs = out.data.size() / 4;
    for (std::size_t i = 0; i < pairs; ++i, src += 6, dst += 4) {
        dst[0] = to_u8(luma(src));
        dst[1] = to_u8(0.5 * (cb(src) + cb(src + 3)));
        dst[2] = to_u8(luma(src + 3));
        dst[3] = to_u8(0.5 * (cr(src) + cr(src + 3)));
    }
    return out;
}

std::int64_t frame_timestamp_us(std::int64_t frame_index, int fps) {
    if (fps <= 0) return 0;
    return frame_index * 1'000'000 / fps;
}

// ---------------------------------------------------------------------------

RawStreamSource::RawStreamSource(const std::filesystem::path& path, bool loop)
    : path_(path), in_(path, std::ios::binary), loop_(loop) {
    if (!in_) throw IoError(path.string(), "cannot open raw stream");
    unsigned char header[kRawStreamHeaderBytes];
    in_.read(reinterpret_cast<char*>(header), sizeof header);
    if (in_.gcount() != static_cast<std::streamsize>(sizeof header)) {
        throw FormatError("raw stream header truncated: " + path.string());
    }
    if (std::memcmp(header, kRawMagic.data(), 4) != 0) {
        throw FormatError("raw stream has wrong magic (expected YUV2): " + path.string());
    }
    const std::uint32_t w = read_u32_le(header + 4);
    const std::uint32_t h = read_u32_le(header + 8);
    const std::uint32_t fps = read_u32_le(header + 12);
    if (w == 0 || h == 0 || w % 2 != 0 || w > 16384 || h > 16384 || fps == 0 || fps > 1000) {
        throw FormatError("raw stream header has invalid geometry " + std::to_string(w) + "x" +
                          std::to_string(h) + "@" + std::to_string(fps) + ": " + path.string());
    }
    width_ = static_cast<int>(w);
    height_ = static_cast<int>(h);
    fps_ = static_cast<int>(fps);
}

std::optional<RawFrame> RawStreamSource::next_frame() {
    const std::size_t bytes = static_cast<std::size_t>(width_) * height_ * 2;
    RawFrame frame;
    frame.width = width_;
    frame.height = height_;
    frame.data.resize(bytes);

    for (int attempt = 0; attempt < 2; ++attempt) {
        in_.read(reinterpret_cast<char*>(frame.data.data()), static_cast<std::streamsize>(bytes));
        const auto got = in_.gcount();
        if (got == static_cast<std::streamsize>(bytes)) {
            frame.frame_index = next_index_++;
            frame.timestamp_us = frame_timestamp_us(frame.frame_index, fps_);
            return frame;
        }
        if (got != 0) {
            throw FormatError("raw stream ends inside a frame (" + std::to_string(got) + " of " +
                              std::to_string(bytes) + " bytes): " + path_.string());
        }
        if (in_.bad()) throw IoError(path_.string(), "read failed");
        if (!loop_ || next_index_ == 0) return std::nullopt;
        in_.clear();
        in_.seekg(static_cast<std::streamoff>(kRawStreamHeaderBytes));
    }
    return std::nullopt;
}

void write_raw_stream(const std::filesystem::path& path, int width, int height, int fps,
                      std::span<const RawFrame> frames) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string(), "cannot create raw stream");
    out.write(kRawMagic.data(), 4);
    put_u32_le(out, static_cast<std::uint32_t>(width));
    put_u32_le(out, static_cast<std::uint32_t>(height));
    put_u32_le(out, static_cast<std::uint32_t>(fps));
    const std::size_t bytes = static_cast<std::size_t>(width) * height * 2;
    for (const auto& f : frames) {
        if (f.width != width || f.height != height || f.data.size() != bytes) {
            throw PreconditionError("frame geometry does not match stream header");
        }
        out.write(reinterpret_cast<const char*>(f.data.data()), static_cast<std::streamsize>(bytes));
    }
    if (!out) throw IoError(path.string(), "write failed");
}

// ---------------------------------------------------------------------------

ImageDirectorySource::ImageDirectorySource(const std::filesystem::path& dir, int fps, bool loop)
    : fps_(fps), loop_(loop) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) throw IoError(dir.string(), "not a readable directory");
    for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".png") files_.push_back(entry.path());
    }
    if (ec) throw IoError(dir.string(), "cannot list directory");
    std::sort(files_.begin(), files_.end(),
              [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
    if (!files_.empty()) {
        const auto first = read_png(files_.front());
        width_ = first.width;
        height_ = first.height;
    }
}

std::optional<RawFrame> ImageDirectorySource::next_frame() {
    if (files_.empty()) return std::nullopt;
    if (cursor_ == files_.size()) {
        if (!loop_) return std::nullopt;
        cursor_ = 0;
    }
    const auto& path = files_[cursor_++];
    RgbFrame rgb = read_png(path);
    if (rgb.width != width_ || rgb.height != height_) {
        throw FormatError("image size " + std::to_string(rgb.width) + "x" + std::to_string(rgb.height) +
                          " differs from sequence size " + std::to_string(width_) + "x" +
                          std::to_string(height_) + ": " + path.string());
    }
    if (rgb.width % 2 != 0) throw FormatError("image width must be even for yuv422 ingest: " + path.string());
    rgb.frame_index = next_index_++;
    rgb.timestamp_us = frame_timestamp_us(rgb.frame_index, fps_);
    return encode_rgb_to_yuv422(rgb);
}

// ---------------------------------------------------------------------------

SyntheticSource::SyntheticSource(std::uint64_t seed, TextureClass cls, int width, int height, int fps,
                                 std::int64_t frame_limit)
    : seed_(seed), cls_(cls), width_(width), height_(height), fps_(fps), limit_(frame_limit) {
    if (width % 2 != 0 || width < 64 || height < 64) {
        throw PreconditionError("synthetic source needs even width and both sides >= 64");
    }
}

std::optional<RawFrame> SyntheticSource::next_frame() {
    if (limit_ >= 0 && next_index_ >= limit_) return std::nullopt;
    const auto slot = static_cast<std::size_t>(next_index_ % kSyntheticCycle);
    if (cycle_.size() <= slot) cycle_.push_back(synth_texture_frame(seed_, cls_, static_cast<std::int64_t>(slot), width_, height_));
    RawFrame f = cycle_[slot];
    f.frame_index = next_index_;
    f.timestamp_us = frame_timestamp_us(next_index_, fps_);
    ++next_index_;
    return f;
}

std::unique_ptr<FrameSource> open_source(const std::string& descriptor, const SourceOptions& options) {
    constexpr std::string_view prefix = "synthetic:";
    if (descriptor.rfind(prefix, 0) == 0) {
        const auto cls = parse_texture_class(std::string_view(descriptor).substr(prefix.size()));
        if (!cls) throw PreconditionError("unknown synthetic class in source '" + descriptor + "'");
        return std::make_unique<SyntheticSource>(options.seed, *cls, options.synthetic_width,
                                                 options.synthetic_height, options.fps, options.frame_limit);
    }
    std::error_code ec;
    if (std::filesystem::is_directory(descriptor, ec)) {
        return std::make_unique<ImageDirectorySource>(descriptor, options.fps, options.loop);
    }
    return std::make_unique<RawStreamSource>(descriptor, options.loop);
}

} // namespace bovw
