#include <algorithm>
#include <cstdio>

#include "bovw/errors.hpp"
#include "bovw/font.hpp"
#include "bovw/pipeline.hpp"

namespace bovw {

namespace {

constexpr int kTextScale = 2;
constexpr int kPad = 4;
constexpr Rgb kWhite{255, 255, 255};

std::vector<std::string> banner_lines(const FrameResult& result) {
    if (!result.ok()) return {"ERROR"};
    const auto& shown = result.smoothed ? *result.smoothed : result.probabilities;
    std::string head = display_label(result.label);
    const auto it = std::find(result.classes.begin(), result.classes.end(), result.label);
    if (it != result.classes.end() && static_cast<std::size_t>(it - result.classes.begin()) < shown.size()) {
        head += " " + format_percent(shown[static_cast<std::size_t>(it - result.classes.begin())]);
    }
    return {head, format_probabilities(result.classes, shown)};
}

void fill(RgbFrame& frame, int x0, int y0, int x1, int y1, Rgb color) {
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    x1 = std::min(x1, frame.width);
    y1 = std::min(y1, frame.height);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            std::uint8_t* p = frame.pixel(x, y);
            p[0] = color.r;
            p[1] = color.g;
            p[2] = color.b;
        }
    }
}

} // namespace

std::string format_percent(double p) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", std::clamp(p, 0.0, 1.0) * 100.0);
    return buf;
}

std::string format_probabilities(std::span<const std::string> classes, std::span<const double> probabilities) {
    if (classes.size() != probabilities.size()) {
        throw PreconditionError("class and probability counts differ");
    }
    std::string out;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (i) out += ' ';
        out += classes[i] + " " + format_percent(probabilities[i]);
    }
    return out;
}

std::string display_label(const std::string& class_name) {
    if (class_name == "notA") return "NOT TYPE A";
    return "TYPE " + class_name;
}

RoiSpec banner_rect(const FrameResult& result, int frame_width, int frame_height) {
    const auto lines = banner_lines(result);
    int text_w = 0;
    for (const auto& l : lines) text_w = std::max(text_w, text_width(l, kTextScale));
    const int line_h = kGlyphHeight * kTextScale;
    RoiSpec r{0, 0, text_w + 2 * kPad, static_cast<int>(lines.size()) * (line_h + kPad) + kPad};
    r.width = std::min(r.width, frame_width);
    r.height = std::min(r.height, frame_height);
    return r;
}

void annotate_in_place(RgbFrame& frame, const FrameResult& result) {
    const RoiSpec& roi = result.roi;
    const int b = kRoiBorderPx;
    fill(frame, roi.x, roi.y, roi.x + roi.width, roi.y + b, kWhite);
    fill(frame, roi.x, roi.y + roi.height - b, roi.x + roi.width, roi.y + roi.height, kWhite);
    fill(frame, roi.x, roi.y, roi.x + b, roi.y + roi.height, kWhite);
    fill(frame, roi.x + roi.width - b, roi.y, roi.x + roi.width, roi.y + roi.height, kWhite);

    const RoiSpec banner = banner_rect(result, frame.width, frame.height);
    // Text is clipped to the banner so nothing outside it changes.
    RgbFrame strip;
    strip.width = banner.width;
    strip.height = banner.height;
    strip.data.assign(static_cast<std::size_t>(strip.width) * strip.height * 3, 0);  // black background
    int y = kPad;
    for (const auto& line : banner_lines(result)) {
        draw_text(strip, kPad, y, line, kTextScale, kWhite);
        y += kGlyphHeight * kTextScale + kPad;
    }
    for (int row = 0; row < strip.height; ++row) {
        std::copy_n(strip.pixel(0, row), static_cast<std::size_t>(strip.width) * 3,
                    frame.pixel(banner.x, banner.y + row));
    }
}

RgbFrame annotate_frame(const RgbFrame& frame, const FrameResult& result) {
    RgbFrame out = frame;
    annotate_in_place(out, result);
    return out;
}

} // namespace bovw
