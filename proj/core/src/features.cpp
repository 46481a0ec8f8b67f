#include "bovw/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "bovw/errors.hpp"

namespace bovw {

BowHistogram build_histogram(std::span<const std::uint32_t> word_ids, std::uint32_t word_count) {
    BowHistogram h;
    h.counts.assign(word_count, 0);
    for (std::uint32_t id : word_ids) {
        if (id >= word_count) {
            throw PreconditionError("word id " + std::to_string(id) + " out of range for " +
                                    std::to_string(word_count) + " words");
        }
        ++h.counts[id];
    }
    h.total = word_ids.size();
    return h;
}

std::string to_string(HistogramNormalization n) {
    return n == HistogramNormalization::l1 ? "l1" : "raw";
}

HistogramNormalization parse_normalization(std::string_view name) {
    if (name == "raw") return HistogramNormalization::raw_counts;
    if (name == "l1") return HistogramNormalization::l1;
    throw FormatError("unknown histogram normalization '" + std::string(name) + "'");
}

std::vector<double> histogram_row(const BowHistogram& h, HistogramNormalization normalization) {
    std::vector<double> row(h.counts.begin(), h.counts.end());
    if (normalization == HistogramNormalization::l1 && h.total > 0) {
        const double inv = 1.0 / static_cast<double>(h.total);
        for (double& v : row) v *= inv;
    }
    return row;
}

ScalerParams fit_scaler(std::span<const std::vector<double>> training_rows) {
    if (training_rows.empty()) throw PreconditionError("fit_scaler needs at least one histogram");
    const std::size_t n = training_rows.front().size();
    ScalerParams s;
    s.min = training_rows.front();
    s.max = training_rows.front();
    for (const auto& row : training_rows) {
        if (row.size() != n) {
            throw PreconditionError("fit_scaler: histogram lengths differ (" + std::to_string(row.size()) + " vs " +
                                    std::to_string(n) + ")");
        }
        for (std::size_t b = 0; b < n; ++b) {
            s.min[b] = std::min(s.min[b], row[b]);
            s.max[b] = std::max(s.max[b], row[b]);
        }
    }
    return s;
}

std::vector<double> apply_scaler(std::span<const double> row, const ScalerParams& scaler) {
    if (row.size() != scaler.word_count()) {
        throw PreconditionError("apply_scaler: histogram has " + std::to_string(row.size()) + " bins, scaler has " +
                                std::to_string(scaler.word_count()));
    }
    std::vector<double> out(row.size());
    for (std::size_t b = 0; b < row.size(); ++b) {
        if (scaler.degenerate(b)) {
            out[b] = 0.0;
        } else {
            out[b] = 2.0 * (row[b] - scaler.min[b]) / (scaler.max[b] - scaler.min[b]) - 1.0;
        }
    }
    return out;
}

std::vector<double> apply_scaler(const BowHistogram& h, const ScalerParams& scaler) {
    return apply_scaler(histogram_row(h, HistogramNormalization::raw_counts), scaler);
}

namespace {

std::string shortest(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

} // namespace

std::string format_scaler(const ScalerParams& scaler) {
    std::string out;
    for (std::size_t b = 0; b < scaler.word_count(); ++b) {
        out += std::to_string(b);
        out += ' ';
        out += shortest(scaler.min[b]);
        out += ' ';
        out += shortest(scaler.max[b]);
        out += '\n';
    }
    return out;
}

ScalerParams parse_scaler(const std::string& text) {
    ScalerParams s;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string idx_s, min_s, max_s, extra;
        if (!(fields >> idx_s >> min_s >> max_s) || (fields >> extra)) {
            throw FormatError("scaler line " + std::to_string(line_no) + ": expected 'index min max'");
        }
        auto parse_num = [&](const std::string& tok, auto& value) {
            const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
            if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
                throw FormatError("scaler line " + std::to_string(line_no) + ": bad number '" + tok + "'");
            }
        };
        std::size_t idx = 0;
        double lo = 0, hi = 0;
        parse_num(idx_s, idx);
        parse_num(min_s, lo);
        parse_num(max_s, hi);
        if (idx != s.min.size()) {
            throw FormatError("scaler line " + std::to_string(line_no) + ": expected bin " +
                              std::to_string(s.min.size()) + ", found " + std::to_string(idx));
        }
        if (!(lo <= hi)) throw FormatError("scaler line " + std::to_string(line_no) + ": min exceeds max");
        s.min.push_back(lo);
        s.max.push_back(hi);
    }
    if (s.min.empty()) throw FormatError("scaler file has no bins");
    return s;
}

void save_scaler(const ScalerParams& scaler, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string(), "cannot create scaler file");
    out << format_scaler(scaler);
    if (!out) throw IoError(path.string(), "write failed");
}

ScalerParams load_scaler(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string(), "cannot open scaler file");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return parse_scaler(text);
    } catch (const FormatError& e) {
        throw FormatError(std::string(e.what()) + ": " + path.string());
    }
}

} // namespace bovw
