#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "bovw/ingest.hpp"

namespace bovw {

inline constexpr int kGlyphWidth = 5;
inline constexpr int kGlyphHeight = 7;

// 5x7 bitmap; bit 4 of each row is the leftmost column. Lower-case letters
// render as upper-case, unknown characters as '?'.
const std::array<std::uint8_t, kGlyphHeight>& glyph(char c) noexcept;

// Horizontal advance of a string at the given integer scale.
int text_width(std::string_view text, int scale) noexcept;

// Draws text with its top-left corner at (x, y), clipped to the frame.
void draw_text(RgbFrame& frame, int x, int y, std::string_view text, int scale, Rgb color);

} // namespace bovw
