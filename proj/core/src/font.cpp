#include "bovw/font.hpp"

#include <cctype>

namespace bovw {

namespace {

using Glyph = std::array<std::uint8_t, kGlyphHeight>;

constexpr Glyph kDigits[10] = {
    {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}, {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},
    {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}, {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},
    {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}, {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},
    {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}, {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},
    {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}, {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C},
};

constexpr Glyph kLetters[26] = {
    {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}, {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E},
    {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}, {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C},
    {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}, {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10},
    {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}, {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11},
    {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}, {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C},
    {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}, {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F},
    {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}, {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11},
    {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}, {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10},
    {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}, {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11},
    {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}, {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04},
    {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}, {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04},
    {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}, {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11},
    {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}, {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F},
};

constexpr Glyph kSpace{0, 0, 0, 0, 0, 0, 0};
constexpr Glyph kPeriod{0, 0, 0, 0, 0, 0x0C, 0x0C};
constexpr Glyph kPercent{0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03};
constexpr Glyph kColon{0, 0x0C, 0x0C, 0, 0x0C, 0x0C, 0};
constexpr Glyph kMinus{0, 0, 0, 0x1F, 0, 0, 0};
constexpr Glyph kComma{0, 0, 0, 0, 0x0C, 0x04, 0x08};
constexpr Glyph kLParen{0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02};
constexpr Glyph kRParen{0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08};
constexpr Glyph kSlash{0, 0x01, 0x02, 0x04, 0x08, 0x10, 0};
constexpr Glyph kUnknown{0x0E, 0x11, 0x01, 0x02, 0x04, 0, 0x04};

} // namespace

const Glyph& glyph(char c) noexcept {
    if (c >= '0' && c <= '9') return kDigits[c - '0'];
    const char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (upper >= 'A' && upper <= 'Z') return kLetters[upper - 'A'];
    switch (c) {
    case ' ': return kSpace;
    case '.': return kPeriod;
    case '%': return kPercent;
    case ':': return kColon;
    case '-': return kMinus;
    case ',': return kComma;
    case '(': return kLParen;
    case ')': return kRParen;
    case '/': return kSlash;
    default: return kUnknown;
    }
}

int text_width(std::string_view text, int scale) noexcept {
    if (text.empty()) return 0;
    return static_cast<int>(text.size()) * (kGlyphWidth + 1) * scale - scale;
}

void draw_text(RgbFrame& frame, int x, int y, std::string_view text, int scale, Rgb color) {
    int pen = x;
    for (char c : text) {
        const Glyph& g = glyph(c);
        for (int row = 0; row < kGlyphHeight; ++row) {
            for (int col = 0; col < kGlyphWidth; ++col) {
                if (!(g[row] & (0x10 >> col))) continue;
                for (int sy = 0; sy < scale; ++sy) {
                    const int py = y + row * scale + sy;
                    if (py < 0 || py >= frame.height) continue;
                    for (int sx = 0; sx < scale; ++sx) {
                        const int px = pen + col * scale + sx;
                        if (px < 0 || px >= frame.width) continue;
                        std::uint8_t* p = frame.pixel(px, py);
                        p[0] = color.r;
                        p[1] = color.g;
                        p[2] = color.b;
                    }
                }
            }
        }
        pen += (kGlyphWidth + 1) * scale;
    }
}

} // namespace bovw
