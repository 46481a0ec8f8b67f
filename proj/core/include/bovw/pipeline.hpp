#pragma once

#include <array>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bovw/classifier.hpp"
#include "bovw/control.hpp"
#include "bovw/dsift.hpp"
#include "bovw/ingest.hpp"
#include "bovw/roi.hpp"

namespace bovw {

inline constexpr std::size_t kStageCount = 7;
inline constexpr std::array<const char*, kStageCount> kStageNames = {
    "convert", "gray", "dsift", "quantize", "histogram_scale", "svm", "annotate"};

// Wall-clock microseconds per stage, indexed like kStageNames.
struct StageTimings {
    std::array<std::int64_t, kStageCount> us{};

    std::int64_t sum() const noexcept;
};

struct FrameResult {
    std::int64_t frame_index = 0;
    std::int64_t timestamp_us = 0;
    RoiSpec roi{};
    Mode mode = Mode::three;
    std::vector<std::string> classes;
    std::string label;
    std::vector<double> probabilities;
    std::optional<std::vector<double>> smoothed;
    StageTimings timings;
    std::int64_t total_us = 0;
    std::int64_t dropped_frames = 0;  // since the previous emitted result
    bool over_budget = false;
    std::string note;   // non-fatal remarks such as a flat ROI
    std::string error;  // non-empty for per-frame or stream errors

    bool ok() const noexcept { return error.empty(); }
};

std::string frame_result_to_json(const FrameResult& result);
FrameResult frame_result_from_json(const std::string& text);

enum class DropPolicy { skip_to_latest, process_all };

std::string to_string(DropPolicy policy);
DropPolicy parse_drop_policy(std::string_view name);

struct PipelineConfig {
    std::int64_t latency_budget_us = 50000;
    DropPolicy drop_policy = DropPolicy::skip_to_latest;
    double alpha = 0.0;  // smoothing off
    Mode mode = Mode::three;
    std::optional<RoiSpec> roi;  // centred 200x200 when unset
    DsiftParams dsift{};
    bool annotate = true;
    // Extra per-frame cost, for exercising the drop policy.
    std::int64_t debug_frame_delay_us = 0;
};

void validate(const PipelineConfig& config);

// Smallest ROI side the descriptor grid accepts.
int min_roi_side(const DsiftParams& params);

// s = alpha * previous + (1 - alpha) * current, renormalized to sum 1.
std::vector<double> smooth_probabilities(std::span<const double> previous, std::span<const double> current,
                                         double alpha);

// "A 1.1% B 98.9%"
std::string format_percent(double p);
std::string format_probabilities(std::span<const std::string> classes, std::span<const double> probabilities);
// "TYPE B", "NOT TYPE A"
std::string display_label(const std::string& class_name);

// Banner strip geometry for a result; annotate_frame only touches this
// rectangle and the ROI border.
RoiSpec banner_rect(const FrameResult& result, int frame_width, int frame_height);
inline constexpr int kRoiBorderPx = 3;

RgbFrame annotate_frame(const RgbFrame& frame, const FrameResult& result);
void annotate_in_place(RgbFrame& frame, const FrameResult& result);

struct PipelineState {
    std::optional<std::vector<double>> smoothed;
    Mode smoothed_mode = Mode::three;
};

// Runs the full stage chain on one frame. The ROI used is config.roi or the
// centred default; a frame too small for it yields an error result. When
// annotated is non-null it receives the RGB frame with overlay.
FrameResult process_frame(const RawFrame& frame, const PipelineConfig& config, const ModelSet& models,
                          PipelineState& state, RgbFrame* annotated = nullptr);

struct RunSummary {
    std::int64_t produced = 0;
    std::int64_t results = 0;
    std::int64_t dropped = 0;
    bool source_error = false;
};

class Pipeline {
public:
    using Sink = std::function<void(const FrameResult&, const RgbFrame* annotated)>;

    // Throws ConfigError when no model for config.mode is loaded.
    Pipeline(std::shared_ptr<const ModelSet> models, PipelineConfig config);
    ~Pipeline();

    Pipeline(const Pipeline&) = delete;
    Pipeline& operator=(const Pipeline&) = delete;

    // Blocks until end-of-stream, a source error or stop(). Results reach the
    // sink in increasing frame order on the calling thread.
    RunSummary run(FrameSource& source, const Sink& sink);
    void stop();

    // Thread-safe. Validates and clamps the command against the current frame
    // size, queues it for application before the next frame, and returns the
    // command as it will be applied. Throws PreconditionError (unknown mode)
    // or ConfigError (no model for mode).
    ControlCommand submit(const ControlCommand& command);

    std::optional<FrameResult> latest_result() const;
    PipelineConfig config() const;
    const ModelSet& models() const noexcept { return *models_; }

    // Frame size of the running source, for clamping. 0 before run().
    void set_frame_size(int width, int height);

private:
    void drain_commands();
    FrameResult process(const RawFrame& frame, RgbFrame* annotated);

    std::shared_ptr<const ModelSet> models_;
    PipelineState state_;

    mutable std::mutex mutex_;  // guards config_, pending_, latest_, frame size
    PipelineConfig config_;
    std::deque<ControlCommand> pending_;
    std::optional<FrameResult> latest_;
    int frame_width_ = 0;
    int frame_height_ = 0;
    bool paused_ = false;

    std::atomic<bool> stop_{false};
    std::condition_variable wake_;
};

} // namespace bovw
