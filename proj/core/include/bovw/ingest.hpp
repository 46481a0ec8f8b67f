#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bovw {

// Packed YUYV 4:2:2: Y0 Cb Y1 Cr per horizontal pixel pair.
struct RawFrame {
    std::int64_t frame_index = 0;
    std::int64_t timestamp_us = 0;
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;
};

// Interleaved 8-bit RGB, row-major.
struct RgbFrame {
    std::int64_t frame_index = 0;
    std::int64_t timestamp_us = 0;
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    std::uint8_t* pixel(int x, int y) { return data.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const std::uint8_t* pixel(int x, int y) const {
        return data.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }
};

struct Rgb {
    std::uint8_t r, g, b;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

// BT.601 studio-range YCbCr -> RGB for a single sample. Fixed-point in
// thousandths, rounded half-up, clamped to [0, 255].
Rgb ycbcr_to_rgb(int y, int cb, int cr) noexcept;

// Converts a whole frame. Throws PreconditionError naming expected and actual
// byte counts when the buffer does not hold width*height*2 bytes or width is odd.
RgbFrame decode_yuv422_to_rgb(const RawFrame& frame);

// Inverse transform used to ingest PNG sequences; chroma is the mean of the
// two pixels of each pair. Width must be even.
RawFrame encode_rgb_to_yuv422(const RgbFrame& frame);

enum class SourceKind { raw_stream_file, image_directory, synthetic };

std::int64_t frame_timestamp_us(std::int64_t frame_index, int fps);

class FrameSource {
public:
    virtual ~FrameSource() = default;

    // Next frame in index order, or std::nullopt at end-of-stream.
    virtual std::optional<RawFrame> next_frame() = 0;

    virtual SourceKind kind() const noexcept = 0;
    virtual int nominal_fps() const noexcept = 0;
    virtual int width() const noexcept = 0;
    virtual int height() const noexcept = 0;
};

// File layout: "YUV2", u32 width, u32 height, u32 fps (little-endian), then
// width*height*2 bytes per frame.
inline constexpr std::size_t kRawStreamHeaderBytes = 16;

class RawStreamSource final : public FrameSource {
public:
    explicit RawStreamSource(const std::filesystem::path& path, bool loop = false);

    std::optional<RawFrame> next_frame() override;
    SourceKind kind() const noexcept override { return SourceKind::raw_stream_file; }
    int nominal_fps() const noexcept override { return fps_; }
    int width() const noexcept override { return width_; }
    int height() const noexcept override { return height_; }

private:
    std::filesystem::path path_;
    std::ifstream in_;
    bool loop_;
    int width_ = 0;
    int height_ = 0;
    int fps_ = 0;
    std::int64_t next_index_ = 0;
};

class ImageDirectorySource final : public FrameSource {
public:
    ImageDirectorySource(const std::filesystem::path& dir, int fps, bool loop = false);

    std::optional<RawFrame> next_frame() override;
    SourceKind kind() const noexcept override { return SourceKind::image_directory; }
    int nominal_fps() const noexcept override { return fps_; }
    int width() const noexcept override { return width_; }
    int height() const noexcept override { return height_; }

    std::size_t image_count() const noexcept { return files_.size(); }

private:
    std::vector<std::filesystem::path> files_;
    int fps_;
    bool loop_;
    int width_ = 0;
    int height_ = 0;
    std::size_t cursor_ = 0;
    std::int64_t next_index_ = 0;
};

enum class TextureClass { A, B, C3 };

std::string to_string(TextureClass c);
std::optional<TextureClass> parse_texture_class(std::string_view name);

// Deterministic procedural texture standing in for a magnified NBI view:
//   A  - regular dot lattice
//   B  - oriented mesh of wavy curves
//   C3 - irregular high-frequency blobs
// (seed, class) fixes the texture parameters; frame_index adds a small jitter.
RawFrame synth_texture_frame(std::uint64_t seed, TextureClass cls, std::int64_t frame_index, int width,
                             int height);

// Renders kSyntheticCycle jittered frames up front and replays them, so the
// source costs a copy per frame rather than a full render.
inline constexpr int kSyntheticCycle = 8;

class SyntheticSource final : public FrameSource {
public:
    // frame_limit < 0 means unbounded. Frame i carries the pixels of
    // synth_texture_frame(seed, cls, i % kSyntheticCycle, ...).
    SyntheticSource(std::uint64_t seed, TextureClass cls, int width, int height, int fps,
                    std::int64_t frame_limit = -1);

    std::optional<RawFrame> next_frame() override;
    SourceKind kind() const noexcept override { return SourceKind::synthetic; }
    int nominal_fps() const noexcept override { return fps_; }
    int width() const noexcept override { return width_; }
    int height() const noexcept override { return height_; }

private:
    std::uint64_t seed_;
    TextureClass cls_;
    int width_;
    int height_;
    int fps_;
    std::int64_t limit_;
    std::int64_t next_index_ = 0;
    std::vector<RawFrame> cycle_;
};

void write_raw_stream(const std::filesystem::path& path, int width, int height, int fps,
                      std::span<const RawFrame> frames);

struct SourceOptions {
    int fps = 30;
    bool loop = false;
    int synthetic_width = 1920;
    int synthetic_height = 1080;
    std::uint64_t seed = 0;
    std::int64_t frame_limit = -1;
};

// "synthetic:B" -> SyntheticSource, directory -> ImageDirectorySource,
// anything else -> RawStreamSource.
std::unique_ptr<FrameSource> open_source(const std::string& descriptor, const SourceOptions& options);

} // namespace bovw
