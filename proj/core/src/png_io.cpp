#include "bovw/png_io.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "bovw/errors.hpp"

namespace bovw {

namespace {

struct ReadCursor {
    std::span<const std::uint8_t> bytes;
    std::size_t offset = 0;
};

void read_callback(png_structp png, png_bytep out, png_size_t length) {
    auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cursor->offset + length > cursor->bytes.size()) png_error(png, "unexpected end of PNG data");
    std::memcpy(out, cursor->bytes.data() + cursor->offset, length);
    cursor->offset += length;
}

void write_callback(png_structp png, png_bytep data, png_size_t length) {
    auto* sink = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    sink->insert(sink->end(), data, data + length);
}

void flush_callback(png_structp) {}

[[noreturn]] void error_callback(png_structp png, png_const_charp message) {
    auto* text = static_cast<std::string*>(png_get_error_ptr(png));
    if (text) *text = message;
    png_longjmp(png, 1);
}

void warning_callback(png_structp, png_const_charp) {}

} // namespace

RgbFrame decode_png(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw FormatError("not a PNG stream");

    std::string error_text;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error_text, error_callback, warning_callback);
    if (!png) throw FormatError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw FormatError("png_create_info_struct failed");
    }

    RgbFrame frame;
    std::vector<png_bytep> rows;
    ReadCursor cursor{bytes, 0};
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("corrupt PNG: " + error_text);
    }
    png_set_read_fn(png, &cursor, read_callback);
    png_read_info(png, info);

    const auto color = png_get_color_type(png, info);
    const auto depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if ((color & PNG_COLOR_MASK_ALPHA) || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    frame.width = static_cast<int>(png_get_image_width(png, info));
    frame.height = static_cast<int>(png_get_image_height(png, info));
    if (png_get_rowbytes(png, info) != static_cast<std::size_t>(frame.width) * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("unsupported PNG pixel layout");
    }
    frame.data.resize(static_cast<std::size_t>(frame.width) * frame.height * 3);
    rows.resize(static_cast<std::size_t>(frame.height));
    for (int y = 0; y < frame.height; ++y) rows[y] = frame.pixel(0, y);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return frame;
}

RgbFrame read_png(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string(), "cannot open PNG");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError(path.string(), "read failed");
    try {
        return decode_png(bytes);
    } catch (const FormatError& e) {
        throw FormatError(std::string(e.what()) + ": " + path.string());
    }
}

std::vector<std::uint8_t> encode_png(const RgbFrame& frame, int compression_level) {
    if (frame.width <= 0 || frame.height <= 0 ||
        frame.data.size() != static_cast<std::size_t>(frame.width) * frame.height * 3) {
        throw PreconditionError("encode_png: inconsistent frame geometry");
    }
    std::string error_text;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error_text, error_callback, warning_callback);
    if (!png) throw std::runtime_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    std::vector<std::uint8_t> out;
    std::vector<png_bytep> rows(static_cast<std::size_t>(frame.height));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("PNG encoding failed: " + error_text);
    }
    png_set_write_fn(png, &out, write_callback, flush_callback);
    png_set_IHDR(png, info, static_cast<png_uint_32>(frame.width), static_cast<png_uint_32>(frame.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, compression_level);
    png_write_info(png, info);
    for (int y = 0; y < frame.height; ++y) rows[y] = const_cast<png_bytep>(frame.pixel(0, y));
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

void write_png(const std::filesystem::path& path, const RgbFrame& frame, int compression_level) {
    const auto bytes = encode_png(frame, compression_level);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string(), "cannot create PNG");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(path.string(), "write failed");
}

} // namespace bovw
