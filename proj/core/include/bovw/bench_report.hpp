#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bovw/pipeline.hpp"

namespace bovw {

struct StageStats {
    std::string name;
    double mean_us = 0.0;
    double p50_us = 0.0;
    double p95_us = 0.0;
    double p99_us = 0.0;
    double max_us = 0.0;
    double fraction = 0.0;  // of the summed stage means
};

struct BenchReport {
    std::size_t frames = 0;
    std::size_t errors = 0;
    std::vector<StageStats> stages;  // kStageNames order
    double mean_total_us = 0.0;
    double p95_total_us = 0.0;
    double mean_stage_sum_us = 0.0;
    double fps = 0.0;  // 1e6 / mean_total_us
    std::size_t over_budget = 0;
};

// Nearest-rank percentile, q in (0, 1].
double percentile(std::vector<double> values, double q);

// Error results are counted but excluded from timing statistics.
BenchReport make_bench_report(std::span<const FrameResult> results);

// Stage names sorted by decreasing mean time.
std::vector<std::string> ranked_stages(const BenchReport& report);

std::string bench_report_json(const BenchReport& report);
std::string bench_report_table(const BenchReport& report);

} // namespace bovw
