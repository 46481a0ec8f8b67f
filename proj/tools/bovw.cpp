// bovw: dataset synthesis, training, offline classification, live serving and benchmarking.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "bovw/bench_report.hpp"
#include "bovw/classifier.hpp"
#include "bovw/dataset.hpp"
#include "bovw/errors.hpp"
#include "bovw/pipeline.hpp"
#include "bovw/png_io.hpp"
#include "bovw/service.hpp"
#include "bovw/training.hpp"

namespace fs = std::filesystem;
using namespace bovw;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kDataError = 2, kRuntimeError = 3 };

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

struct Options {
    std::string mode = "three";
    std::string roi;
    std::string artifacts;
    std::string vocab;
    std::string scaler;
    std::vector<std::string> models;
    std::string source = "synthetic:B";
    int fps = 30;
    std::uint64_t seed = 1;
    double alpha = 0.0;
    std::string bind = "127.0.0.1:8080";
    std::int64_t frames = 300;
    std::string policy;
    bool loop = false;
    int width = 1920;
    int height = 1080;
};

RoiSpec parse_roi(const std::string& text) {
    RoiSpec roi;
    char tail = 0;
    if (std::sscanf(text.c_str(), "%d,%d,%d,%d%c", &roi.x, &roi.y, &roi.width, &roi.height, &tail) != 4) {
        throw PreconditionError("--roi expects X,Y,W,H, got '" + text + "'");
    }
    return roi;
}

std::vector<Mode> parse_modes(const std::string& text) {
    if (text == "both") return {Mode::three, Mode::two};
    return {parse_mode(text)};
}

// Explicit --vocab/--scaler/--model win; otherwise look inside --artifacts.
ModelSet load_models(const Options& opt) {
    const fs::path dir = opt.artifacts.empty() ? fs::path(".") : fs::path(opt.artifacts);
    const fs::path vocab = opt.vocab.empty() ? dir / "vocab.bvwt" : fs::path(opt.vocab);
    const fs::path scaler = opt.scaler.empty() ? dir / "scaler.txt" : fs::path(opt.scaler);
    std::vector<fs::path> models(opt.models.begin(), opt.models.end());
    if (models.empty()) {
        for (const char* name : {"model_three.json", "model_two.json"}) {
            if (fs::exists(dir / name)) models.push_back(dir / name);
        }
        if (models.empty()) throw ConfigError("no model files given and none found in " + dir.string());
    }
    return load_model_set(vocab, scaler, models);
}

std::vector<LabeledImage> load_dataset(const fs::path& dir) {
    std::vector<LabeledImage> out;
    for (const auto& entry : read_manifest(dir)) {
        const RgbFrame rgb = read_png(dir / entry.filename);
        out.push_back({to_gray(rgb, RoiSpec{0, 0, rgb.width, rgb.height}), entry.label, entry.filename});
    }
    return out;
}

int cmd_synth_dataset(const std::string& out, int per_class, std::uint64_t seed, int size) {
    const auto entries = synth_dataset(out, per_class, seed, size);
    std::cout << "wrote " << entries.size() << " patches and " << kManifestName << " to " << out << "\n";
    return kOk;
}

int cmd_train(const Options& opt, const std::string& dataset, const std::string& out, const std::string& modes,
              int branching, int depth, const std::string& normalization) {
    TrainConfig cfg;
    cfg.modes = parse_modes(modes);
    cfg.seed = opt.seed;
    cfg.vocab.branching = branching;
    cfg.vocab.depth = depth;
    cfg.vocab.seed = opt.seed;
    cfg.normalization = parse_normalization(normalization);

    const auto images = load_dataset(dataset);
    std::cerr << "training on " << images.size() << " images from " << dataset << "\n";
    const auto artifacts = train_artifacts(images, cfg);

    fs::create_directories(out);
    save_tree(artifacts.vocab, fs::path(out) / "vocab.bvwt");
    save_scaler(artifacts.scaler, fs::path(out) / "scaler.txt");
    std::cout << "vocabulary: " << artifacts.vocab.word_count() << " words\n";
    for (const auto& [mode, model] : artifacts.models) {
        const auto path = fs::path(out) / ("model_" + to_string(mode) + ".json");
        save_model(model, path);
        std::cout << to_string(mode) << "-category cross-validation:\n";
        for (const auto& e : model.meta.cv_table) {
            std::printf("  C = %-9g accuracy %.4f%s\n", e.penalty, e.accuracy, e.penalty == model.meta.penalty ? "  *" : "");
        }
        std::cout << "  wrote " << path.string() << "\n";
    }
    std::fflush(stdout);
    return kOk;
}

int cmd_classify_image(const Options& opt, const std::vector<std::string>& images, const std::string& dataset) {
    const Mode mode = parse_mode(opt.mode);
    const ModelSet models = load_models(opt);
    const auto& classes = models.model(mode).classes;

    auto classify = [&](const fs::path& path) {
        const RgbFrame rgb = read_png(path);
        RoiSpec roi{0, 0, rgb.width, rgb.height};
        if (!opt.roi.empty()) roi = parse_roi(opt.roi);
        if (!roi_inside(roi, rgb.width, rgb.height)) {
            throw PreconditionError("ROI " + to_string(roi) + " lies outside " + path.string());
        }
        const auto probs = classify_image(to_gray(rgb, roi), models, mode);
        std::cout << path.string() << "\t" << classes[probs.argmax] << "\t"
                  << format_probabilities(classes, probs.p) << "\n";
        return probs.argmax;
    };

    for (const auto& image : images) classify(image);
    if (!dataset.empty()) {
        std::size_t correct = 0;
        const auto entries = read_manifest(dataset);
        for (const auto& entry : entries) {
            if (classify(fs::path(dataset) / entry.filename) ==
                static_cast<std::size_t>(label_index(entry.label, mode))) {
                ++correct;
            }
        }
        std::printf("accuracy %.4f (%zu/%zu)\n", static_cast<double>(correct) / static_cast<double>(entries.size()),
                    correct, entries.size());
    }
    return kOk;
}

PipelineConfig pipeline_config(const Options& opt, DropPolicy default_policy) {
    PipelineConfig cfg;
    cfg.mode = parse_mode(opt.mode);
    cfg.alpha = opt.alpha;
    cfg.drop_policy = opt.policy.empty() ? default_policy : parse_drop_policy(opt.policy);
    if (!opt.roi.empty()) cfg.roi = parse_roi(opt.roi);
    return cfg;
}

std::unique_ptr<FrameSource> make_source(const Options& opt, std::int64_t frame_limit) {
    SourceOptions so;
    so.fps = opt.fps;
    so.loop = opt.loop;
    so.seed = opt.seed;
    so.synthetic_width = opt.width;
    so.synthetic_height = opt.height;
    so.frame_limit = frame_limit;
    return open_source(opt.source, so);
}

int cmd_run(const Options& opt, bool quiet) {
    const PipelineConfig cfg = pipeline_config(opt, DropPolicy::skip_to_latest);
    auto models = std::make_shared<const ModelSet>(load_models(opt));
    Pipeline pipeline(models, cfg);
    auto source = make_source(opt, -1);

    ServiceOptions so;
    parse_bind(opt.bind, so);
    std::optional<Service> service;
    try {
        service.emplace(pipeline, so);
    } catch (const IoError& e) {
        throw std::runtime_error(e.what());
    }
    service->start();
    std::cerr << "serving on http://" << so.address << ":" << service->port() << " (stream at /stream)\n";

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::atomic<bool> finished{false};
    std::thread watcher([&] {
        while (!finished && !g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(50));
        pipeline.stop();
    });

    const auto summary = pipeline.run(*source, [&](const FrameResult& r, const RgbFrame* frame) {
        service->publish(r, frame);
        if (!quiet) std::cout << frame_result_to_json(r) << "\n";
    });
    finished = true;
    watcher.join();
    service->stop();
    std::cerr << "frames produced " << summary.produced << ", results " << summary.results << ", dropped "
              << summary.dropped << "\n";
    return summary.source_error ? kRuntimeError : kOk;
}

int cmd_bench(const Options& opt, const std::string& report_path, int warmup) {
    const PipelineConfig cfg = pipeline_config(opt, DropPolicy::process_all);
    auto models = std::make_shared<const ModelSet>(load_models(opt));
    std::vector<FrameResult> results;
    {
        Options w = opt;
        auto source = make_source(w, warmup);
        Pipeline pipeline(models, cfg);
        pipeline.run(*source, {});
    }
    auto source = make_source(opt, opt.frames);
    Pipeline pipeline(models, cfg);
    pipeline.run(*source, [&](const FrameResult& r, const RgbFrame*) { results.push_back(r); });

    const auto report = make_bench_report(results);
    std::cout << bench_report_table(report);
    if (!report_path.empty()) {
        std::FILE* f = std::fopen(report_path.c_str(), "wb");
        if (!f) throw IoError(report_path, "cannot write bench report");
        const auto json = bench_report_json(report);
        std::fwrite(json.data(), 1, json.size(), f);
        std::fclose(f);
    }
    return report.errors ? kRuntimeError : kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bag-of-visual-words texture classifier for live video"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "key=value file; command-line flags override it");

    Options opt;
    app.add_option("--mode", opt.mode, "two | three (train also accepts both)");
    app.add_option("--roi", opt.roi, "X,Y,W,H");
    app.add_option("--artifacts", opt.artifacts, "directory holding vocab.bvwt, scaler.txt, model_*.json");
    app.add_option("--vocab", opt.vocab, "vocabulary tree file");
    app.add_option("--scaler", opt.scaler, "scaler file");
    app.add_option("--model", opt.models, "SVM model file (repeatable)");
    app.add_option("--source", opt.source, "raw stream file, PNG directory or synthetic:CLASS");
    app.add_option("--fps", opt.fps, "nominal frame rate for PNG and synthetic sources")->check(CLI::PositiveNumber);
    app.add_option("--seed", opt.seed, "random seed");
    app.add_option("--alpha", opt.alpha, "probability smoothing factor in [0, 1)");
    app.add_option("--bind", opt.bind, "ADDR:PORT");
    app.add_option("--frames", opt.frames, "frames to benchmark")->check(CLI::PositiveNumber);
    app.add_option("--policy", opt.policy, "skip-to-latest | process-all");
    app.add_flag("--loop", opt.loop, "restart file sources at end-of-stream");
    app.add_option("--width", opt.width, "synthetic frame width");
    app.add_option("--height", opt.height, "synthetic frame height");

    auto* synth = app.add_subcommand("synth-dataset", "write synthetic labelled patches and a manifest");
    std::string synth_out;
    int per_class = 100;
    int patch_size = 200;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--per-class", per_class, "patches per class");
    synth->add_option("--size", patch_size, "patch side in pixels");

    auto* train = app.add_subcommand("train", "train vocabulary, scaler and SVM models from a dataset");
    std::string train_dataset, train_out = "artifacts", normalization = "raw";
    int branching = 10, depth = 3;
    train->add_option("--dataset", train_dataset, "dataset directory with manifest.csv")->required();
    train->add_option("--out", train_out, "artifact directory");
    train->add_option("--branching", branching, "vocabulary tree branching factor");
    train->add_option("--depth", depth, "vocabulary tree depth");
    train->add_option("--normalization", normalization, "raw | l1 histogram rows");

    auto* classify = app.add_subcommand("classify-image", "classify PNG patches");
    std::vector<std::string> images;
    std::string classify_dataset;
    classify->add_option("images", images, "PNG files");
    classify->add_option("--dataset", classify_dataset, "classify every manifest entry and report accuracy");

    auto* run = app.add_subcommand("run", "run the live pipeline and HTTP/WebSocket service");
    bool quiet = false;
    run->add_flag("--quiet", quiet, "do not print results to stdout");

    auto* bench = app.add_subcommand("bench", "time the stage chain on N frames");
    std::string report_path;
    int warmup = 10;
    bench->add_option("--report", report_path, "write the JSON report here");
    bench->add_option("--warmup", warmup, "untimed frames first");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*synth) return cmd_synth_dataset(synth_out, per_class, opt.seed, patch_size);
        if (*train) {
            // Without an explicit --mode both models share one vocabulary.
            const std::string modes = app.get_option("--mode")->count() ? opt.mode : "both";
            return cmd_train(opt, train_dataset, train_out, modes, branching, depth, normalization);
        }
        if (*classify) {
            if (images.empty() && classify_dataset.empty()) {
                std::cerr << "classify-image: give PNG files or --dataset\n";
                return kUsage;
            }
            return cmd_classify_image(opt, images, classify_dataset);
        }
        if (*run) return cmd_run(opt, quiet);
        if (*bench) return cmd_bench(opt, report_path, warmup);
    } catch (const PreconditionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDataError;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDataError;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kDataError;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDataError;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kUsage;
}
