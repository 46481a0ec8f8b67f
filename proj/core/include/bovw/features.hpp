#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace bovw {

struct BowHistogram {
    std::vector<std::uint32_t> counts;
    std::uint64_t total = 0;
};

// Throws PreconditionError if any id >= word_count.
BowHistogram build_histogram(std::span<const std::uint32_t> word_ids, std::uint32_t word_count);

enum class HistogramNormalization { raw_counts, l1 };

std::string to_string(HistogramNormalization n);
HistogramNormalization parse_normalization(std::string_view name);

// The real-valued row that the scaler sees.
std::vector<double> histogram_row(const BowHistogram& h, HistogramNormalization normalization);

// Per-bin [min, max] observed on the training rows.
struct ScalerParams {
    std::vector<double> min;
    std::vector<double> max;

    std::size_t word_count() const noexcept { return min.size(); }
    bool degenerate(std::size_t bin) const noexcept { return min[bin] == max[bin]; }
};

ScalerParams fit_scaler(std::span<const std::vector<double>> training_rows);

// value = 2 (x - min) / (max - min) - 1, degenerate bins map to 0, no clipping.
std::vector<double> apply_scaler(std::span<const double> row, const ScalerParams& scaler);
std::vector<double> apply_scaler(const BowHistogram& h, const ScalerParams& scaler);

// Text form: one "index min max" line per bin, values printed round-trip exact.
std::string format_scaler(const ScalerParams& scaler);
ScalerParams parse_scaler(const std::string& text);
void save_scaler(const ScalerParams& scaler, const std::filesystem::path& path);
ScalerParams load_scaler(const std::filesystem::path& path);

} // namespace bovw
