#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bovw/ingest.hpp"

namespace bovw {

// 8-bit RGB PNG codec. Gray, palette and alpha inputs are expanded/stripped to RGB.
RgbFrame read_png(const std::filesystem::path& path);
RgbFrame decode_png(std::span<const std::uint8_t> bytes);

void write_png(const std::filesystem::path& path, const RgbFrame& frame, int compression_level = 6);
std::vector<std::uint8_t> encode_png(const RgbFrame& frame, int compression_level = 6);

} // namespace bovw
