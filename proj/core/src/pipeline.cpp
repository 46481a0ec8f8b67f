#include "bovw/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "bovw/errors.hpp"

namespace bovw {

namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

std::int64_t micros(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration_cast<std::chrono::microseconds>(b - a).count();
}

std::size_t argmax(std::span<const double> p) {
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

bool all_zero(const DescriptorSet& d) {
    return std::all_of(d.values.begin(), d.values.end(), [](float v) { return v == 0.0f; });
}

} // namespace

std::int64_t StageTimings::sum() const noexcept { return std::accumulate(us.begin(), us.end(), std::int64_t{0}); }

std::string to_string(DropPolicy policy) {
    return policy == DropPolicy::skip_to_latest ? "skip-to-latest" : "process-all";
}

DropPolicy parse_drop_policy(std::string_view name) {
    if (name == "skip-to-latest") return DropPolicy::skip_to_latest;
    if (name == "process-all") return DropPolicy::process_all;
    throw PreconditionError("unknown drop policy '" + std::string(name) + "'");
}

void validate(const PipelineConfig& config) {
    validate(config.dsift);
    if (config.latency_budget_us <= 0) throw PreconditionError("latency budget must be positive");
    if (!(config.alpha >= 0.0 && config.alpha < 1.0)) throw PreconditionError("alpha must lie in [0, 1)");
    if (config.debug_frame_delay_us < 0) throw PreconditionError("debug delay must be non-negative");
    if (config.roi && (config.roi->width < min_roi_side(config.dsift) || config.roi->height < min_roi_side(config.dsift))) {
        throw PreconditionError("ROI " + to_string(*config.roi) + " is smaller than " +
                                std::to_string(min_roi_side(config.dsift)) + " pixels");
    }
}

int min_roi_side(const DsiftParams& params) {
    return kSpatialBins * *std::max_element(params.bin_sizes.begin(), params.bin_sizes.end());
}

std::vector<double> smooth_probabilities(std::span<const double> previous, std::span<const double> current,
                                         double alpha) {
    if (previous.size() != current.size()) {
        throw PreconditionError("smoothing vectors differ in length (" + std::to_string(previous.size()) + " vs " +
                                std::to_string(current.size()) + ")");
    }
    if (!(alpha >= 0.0 && alpha < 1.0)) throw PreconditionError("alpha must lie in [0, 1)");
    std::vector<double> s(current.size());
    double total = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = alpha * previous[i] + (1.0 - alpha) * current[i];
        total += s[i];
    }
    if (total > 0.0) {
        for (double& v : s) v /= total;
    }
    return s;
}

std::string frame_result_to_json(const FrameResult& r) {
    json j;
    j["frame_index"] = r.frame_index;
    j["timestamp_us"] = r.timestamp_us;
    j["roi"] = {{"x", r.roi.x}, {"y", r.roi.y}, {"w", r.roi.width}, {"h", r.roi.height}};
    j["mode"] = to_string(r.mode);
    j["classes"] = r.classes;
    j["label"] = r.label;
    j["display"] = r.ok() && !r.label.empty() ? display_label(r.label) : "";
    j["probabilities"] = r.probabilities;
    j["smoothed"] = r.smoothed ? json(*r.smoothed) : json(nullptr);
    json t = json::object();
    for (std::size_t s = 0; s < kStageCount; ++s) t[kStageNames[s]] = r.timings.us[s];
    j["timings_us"] = t;
    j["total_us"] = r.total_us;
    j["dropped_frames"] = r.dropped_frames;
    j["over_budget"] = r.over_budget;
    j["note"] = r.note.empty() ? json(nullptr) : json(r.note);
    j["error"] = r.error.empty() ? json(nullptr) : json(r.error);
    return j.dump();
}

FrameResult frame_result_from_json(const std::string& text) {
    FrameResult r;
    try {
        const json j = json::parse(text);
        r.frame_index = j.at("frame_index").get<std::int64_t>();
        r.timestamp_us = j.at("timestamp_us").get<std::int64_t>();
        const auto& roi = j.at("roi");
        r.roi = {roi.at("x").get<int>(), roi.at("y").get<int>(), roi.at("w").get<int>(), roi.at("h").get<int>()};
        r.mode = parse_mode(j.at("mode").get<std::string>());
        r.classes = j.at("classes").get<std::vector<std::string>>();
        r.label = j.at("label").get<std::string>();
        r.probabilities = j.at("probabilities").get<std::vector<double>>();
        if (!j.at("smoothed").is_null()) r.smoothed = j.at("smoothed").get<std::vector<double>>();
        for (std::size_t s = 0; s < kStageCount; ++s) r.timings.us[s] = j.at("timings_us").at(kStageNames[s]).get<std::int64_t>();
        r.total_us = j.at("total_us").get<std::int64_t>();
        r.dropped_frames = j.at("dropped_frames").get<std::int64_t>();
        r.over_budget = j.at("over_budget").get<bool>();
        if (!j.at("note").is_null()) r.note = j.at("note").get<std::string>();
        if (!j.at("error").is_null()) r.error = j.at("error").get<std::string>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed frame result: ") + e.what());
    } catch (const PreconditionError& e) {
        throw FormatError(std::string("malformed frame result: ") + e.what());
    }
    return r;
}

FrameResult process_frame(const RawFrame& frame, const PipelineConfig& config, const ModelSet& models,
                          PipelineState& state, RgbFrame* annotated) {
    const SvmModel& model = models.model(config.mode);
    const auto t0 = Clock::now();
    if (annotated) annotated->data.clear();

    FrameResult r;
    r.frame_index = frame.frame_index;
    r.timestamp_us = frame.timestamp_us;
    r.mode = config.mode;
    r.classes = model.classes;

    const int min_side = min_roi_side(config.dsift);
    auto finish = [&] {
        r.total_us = micros(t0, Clock::now());
        r.over_budget = r.total_us > config.latency_budget_us;
        return r;
    };
    if (frame.width < min_side || frame.height < min_side) {
        r.error = "frame " + std::to_string(frame.width) + "x" + std::to_string(frame.height) +
                  " is smaller than the " + std::to_string(min_side) + "-pixel minimum ROI";
        return finish();
    }
    r.roi = config.roi ? clamp_roi(*config.roi, frame.width, frame.height, min_side)
                       : centered_roi(frame.width, frame.height);

    auto& t = r.timings.us;
    auto mark = t0;
    auto lap = [&](std::size_t stage) {
        const auto now = Clock::now();
        t[stage] = micros(mark, now);
        mark = now;
    };

    RgbFrame rgb;
    try {
        rgb = decode_yuv422_to_rgb(frame);
    } catch (const PreconditionError& e) {
        r.error = e.what();
        return finish();
    }
    lap(0);
    const GrayImage gray = to_gray(rgb, r.roi);
    lap(1);
    const DescriptorSet descriptors = extract_dsift(gray, config.dsift);
    if (all_zero(descriptors)) r.note = "flat ROI: every descriptor is zero";
    lap(2);
    const auto words = models.vocab().quantize(descriptors);
    lap(3);
    const auto hist = build_histogram(words, models.vocab().word_count());
    const auto features = apply_scaler(histogram_row(hist, models.normalization()), models.scaler());
    lap(4);
    auto probs = predict_proba(model, features);
    lap(5);

    r.probabilities = std::move(probs.p);
    std::size_t shown = probs.argmax;
    if (config.alpha > 0.0) {
        if (state.smoothed && state.smoothed_mode == config.mode && state.smoothed->size() == r.probabilities.size()) {
            state.smoothed = smooth_probabilities(*state.smoothed, r.probabilities, config.alpha);
        } else {
            state.smoothed = r.probabilities;
        }
        state.smoothed_mode = config.mode;
        r.smoothed = state.smoothed;
        shown = argmax(*r.smoothed);
    } else {
        state.smoothed.reset();
    }
    r.label = r.classes[shown];

    if (config.debug_frame_delay_us > 0) {
        std::this_thread::sleep_for(std::chrono::microseconds(config.debug_frame_delay_us));
        mark = Clock::now();
    }
    if (annotated) {
        if (config.annotate) annotate_in_place(rgb, r);
        *annotated = std::move(rgb);
    }
    lap(6);
    return finish();
}

Pipeline::Pipeline(std::shared_ptr<const ModelSet> models, PipelineConfig config)
    : models_(std::move(models)), config_(std::move(config)) {
    if (!models_) throw PreconditionError("pipeline needs a model set");
    validate(config_);
    models_->model(config_.mode);
}

Pipeline::~Pipeline() { stop(); }

void Pipeline::stop() {
    stop_ = true;
    wake_.notify_all();
}

void Pipeline::set_frame_size(int width, int height) {
    std::lock_guard lk(mutex_);
    frame_width_ = width;
    frame_height_ = height;
}

ControlCommand Pipeline::submit(const ControlCommand& command) {
    ControlCommand cmd = command;
    std::lock_guard lk(mutex_);
    switch (cmd.kind) {
    case ControlKind::set_roi: {
        const int min_side = min_roi_side(config_.dsift);
        if (frame_width_ > 0 && frame_height_ > 0) {
            cmd.roi = clamp_roi(cmd.roi, frame_width_, frame_height_, min_side);
        } else {
            cmd.roi.width = std::max(cmd.roi.width, min_side);
            cmd.roi.height = std::max(cmd.roi.height, min_side);
            cmd.roi.x = std::max(cmd.roi.x, 0);
            cmd.roi.y = std::max(cmd.roi.y, 0);
        }
        break;
    }
    case ControlKind::set_mode:
        if (!models_->has(cmd.mode)) throw ConfigError("no " + to_string(cmd.mode) + "-category model is loaded");
        break;
    case ControlKind::set_smoothing:
        if (!(cmd.alpha >= 0.0 && cmd.alpha < 1.0)) throw PreconditionError("alpha must lie in [0, 1)");
        break;
    case ControlKind::pause:
    case ControlKind::resume: break;
    }
    pending_.push_back(cmd);
    wake_.notify_all();
    return cmd;
}

void Pipeline::drain_commands() {
    std::lock_guard lk(mutex_);
    while (!pending_.empty()) {
        const ControlCommand cmd = pending_.front();
        pending_.pop_front();
        switch (cmd.kind) {
        case ControlKind::set_roi: config_.roi = cmd.roi; break;
        case ControlKind::set_mode: config_.mode = cmd.mode; break;
        case ControlKind::set_smoothing: config_.alpha = cmd.alpha; break;
        case ControlKind::pause: paused_ = true; break;
        case ControlKind::resume: paused_ = false; break;
        }
    }
}

std::optional<FrameResult> Pipeline::latest_result() const {
    std::lock_guard lk(mutex_);
    return latest_;
}

PipelineConfig Pipeline::config() const {
    std::lock_guard lk(mutex_);
    return config_;
}

FrameResult Pipeline::process(const RawFrame& frame, RgbFrame* annotated) {
    const PipelineConfig snapshot = config();
    FrameResult r = process_frame(frame, snapshot, *models_, state_, annotated);
    std::lock_guard lk(mutex_);
    latest_ = r;
    return r;
}

RunSummary Pipeline::run(FrameSource& source, const Sink& sink) {
    set_frame_size(source.width(), source.height());
    RunSummary summary;
    std::int64_t last_index = -1;
    RgbFrame annotated;

    auto emit = [&](FrameResult r, const RgbFrame* image) {
        last_index = r.frame_index;
        summary.dropped += r.dropped_frames;
        ++summary.results;
        if (sink) sink(r, image);
    };
    auto emit_source_error = [&](const std::string& what, std::int64_t index, std::int64_t dropped) {
        FrameResult r;
        r.frame_index = index;
        r.mode = config().mode;
        r.classes = class_names(r.mode);
        r.dropped_frames = dropped;
        r.error = "source failed: " + what;
        summary.source_error = true;
        {
            std::lock_guard lk(mutex_);
            latest_ = r;
        }
        // The error result is not a source frame, so keep it out of the tally.
        summary.dropped += r.dropped_frames;
        if (sink) sink(r, nullptr);
    };
    auto is_paused = [&] {
        std::lock_guard lk(mutex_);
        return paused_;
    };

    if (config().drop_policy == DropPolicy::process_all) {
        while (!stop_) {
            std::optional<RawFrame> frame;
            try {
                frame = source.next_frame();
            } catch (const std::exception& e) {
                emit_source_error(e.what(), last_index + 1, 0);
                break;
            }
            if (!frame) break;
            ++summary.produced;
            for (;;) {
                drain_commands();
                std::unique_lock lk(mutex_);
                if (!paused_ || stop_) break;
                wake_.wait(lk, [&] { return !pending_.empty() || stop_.load(); });
            }
            if (stop_) break;
            FrameResult r = process(*frame, &annotated);
            emit(std::move(r), annotated.data.empty() ? nullptr : &annotated);
        }
        return summary;
    }

    // skip-to-latest: a paced producer keeps only the newest frame.
    std::mutex slot_mutex;
    std::condition_variable slot_cv;
    std::optional<RawFrame> slot;
    std::int64_t overwritten = 0;
    std::int64_t produced = 0;
    std::int64_t last_produced = -1;
    bool eos = false;
    std::optional<std::string> source_error;

    std::thread producer([&] {
        const int fps = std::max(1, source.nominal_fps());
        const auto start = Clock::now();
        std::int64_t n = 0;
        while (!stop_) {
            std::optional<RawFrame> frame;
            try {
                frame = source.next_frame();
            } catch (const std::exception& e) {
                std::lock_guard lk(slot_mutex);
                source_error = e.what();
                break;
            }
            if (!frame) break;
            std::this_thread::sleep_until(start + std::chrono::microseconds(frame_timestamp_us(n++, fps)));
            std::lock_guard lk(slot_mutex);
            if (slot) ++overwritten;
            last_produced = frame->frame_index;
            slot = std::move(frame);
            ++produced;
            slot_cv.notify_one();
        }
        std::lock_guard lk(slot_mutex);
        eos = true;
        slot_cv.notify_one();
    });

    std::int64_t carried = 0;  // frames skipped while paused
    for (;;) {
        std::optional<RawFrame> frame;
        std::int64_t dropped = 0;
        {
            std::unique_lock lk(slot_mutex);
            slot_cv.wait_for(lk, std::chrono::milliseconds(50), [&] { return slot.has_value() || eos; });
            if (stop_) break;
            if (!slot) {
                if (eos) break;
                continue;
            }
            frame = std::move(slot);
            slot.reset();
            dropped = overwritten;
            overwritten = 0;
        }
        drain_commands();
        if (is_paused()) {
            carried += dropped + 1;
            continue;
        }
        FrameResult r = process(*frame, &annotated);
        r.dropped_frames = carried + dropped;
        carried = 0;
        {
            std::lock_guard lk(mutex_);
            latest_ = r;
        }
        emit(std::move(r), annotated.data.empty() ? nullptr : &annotated);
    }
    producer.join();

    std::lock_guard lk(slot_mutex);
    summary.produced = produced;
    // Anything still pending was never classified.
    carried += overwritten + (slot ? 1 : 0);
    if (source_error) {
        emit_source_error(*source_error, std::max(last_index, last_produced) + 1, carried);
    } else {
        summary.dropped += carried;
    }
    return summary;
}

} // namespace bovw
