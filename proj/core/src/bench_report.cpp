#include "bovw/bench_report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "bovw/errors.hpp"

namespace bovw {

double percentile(std::vector<double> values, double q) {
    if (values.empty()) return 0.0;
    if (!(q > 0.0 && q <= 1.0)) throw PreconditionError("percentile must lie in (0, 1]");
    std::sort(values.begin(), values.end());
    const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
    return values[std::max<std::size_t>(rank, 1) - 1];
}

BenchReport make_bench_report(std::span<const FrameResult> results) {
    BenchReport report;
    std::vector<std::vector<double>> per_stage(kStageCount);
    std::vector<double> totals;
    for (const auto& r : results) {
        if (!r.ok()) {
            ++report.errors;
            continue;
        }
        for (std::size_t s = 0; s < kStageCount; ++s) per_stage[s].push_back(static_cast<double>(r.timings.us[s]));
        totals.push_back(static_cast<double>(r.total_us));
        if (r.over_budget) ++report.over_budget;
    }
    report.frames = totals.size();
    const double n = std::max<double>(1.0, static_cast<double>(totals.size()));
    for (std::size_t s = 0; s < kStageCount; ++s) {
        StageStats st;
        st.name = kStageNames[s];
        for (double v : per_stage[s]) st.mean_us += v;
        st.mean_us /= n;
        st.p50_us = percentile(per_stage[s], 0.50);
        st.p95_us = percentile(per_stage[s], 0.95);
        st.p99_us = percentile(per_stage[s], 0.99);
        st.max_us = per_stage[s].empty() ? 0.0 : *std::max_element(per_stage[s].begin(), per_stage[s].end());
        report.mean_stage_sum_us += st.mean_us;
        report.stages.push_back(st);
    }
    for (auto& st : report.stages) {
        st.fraction = report.mean_stage_sum_us > 0.0 ? st.mean_us / report.mean_stage_sum_us : 0.0;
    }
    for (double v : totals) report.mean_total_us += v;
    report.mean_total_us /= n;
    report.p95_total_us = percentile(totals, 0.95);
    report.fps = report.mean_total_us > 0.0 ? 1e6 / report.mean_total_us : 0.0;
    return report;
}

std::vector<std::string> ranked_stages(const BenchReport& report) {
    auto stages = report.stages;
    std::stable_sort(stages.begin(), stages.end(),
                     [](const StageStats& a, const StageStats& b) { return a.mean_us > b.mean_us; });
    std::vector<std::string> names;
    for (const auto& s : stages) names.push_back(s.name);
    return names;
}

std::string bench_report_json(const BenchReport& report) {
    nlohmann::json j;
    j["frames"] = report.frames;
    j["errors"] = report.errors;
    j["mean_total_us"] = report.mean_total_us;
    j["p95_total_us"] = report.p95_total_us;
    j["mean_stage_sum_us"] = report.mean_stage_sum_us;
    j["fps"] = report.fps;
    j["over_budget"] = report.over_budget;
    auto stages = nlohmann::json::array();
    for (const auto& s : report.stages) {
        stages.push_back({{"name", s.name},
                          {"mean_us", s.mean_us},
                          {"p50_us", s.p50_us},
                          {"p95_us", s.p95_us},
                          {"p99_us", s.p99_us},
                          {"max_us", s.max_us},
                          {"fraction", s.fraction}});
    }
    j["stages"] = stages;
    j["ranking"] = ranked_stages(report);
    return j.dump(2) + "\n";
}

std::string bench_report_table(const BenchReport& report) {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof line, "%-16s %10s %10s %10s %10s %8s\n", "stage", "mean_us", "p50_us", "p95_us",
                  "p99_us", "share");
    out += line;
    for (const auto& s : report.stages) {
        std::snprintf(line, sizeof line, "%-16s %10.1f %10.1f %10.1f %10.1f %7.1f%%\n", s.name.c_str(), s.mean_us,
                      s.p50_us, s.p95_us, s.p99_us, s.fraction * 100.0);
        out += line;
    }
    std::snprintf(line, sizeof line, "frames %zu, mean latency %.2f ms (p95 %.2f ms), %.1f fps, %zu over budget\n",
                  report.frames, report.mean_total_us / 1000.0, report.p95_total_us / 1000.0, report.fps,
                  report.over_budget);
    out += line;
    return out;
}

} // namespace bovw
