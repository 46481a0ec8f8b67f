// One PASS/FAIL line per primary acceptance criterion. Exit status is the
// number of failures (capped at 1 so ctest reports it).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "bovw/bench_report.hpp"
#include "bovw/classifier.hpp"
#include "bovw/dataset.hpp"
#include "bovw/dsift.hpp"
#include "bovw/ingest.hpp"
#include "bovw/pipeline.hpp"
#include "bovw/svm.hpp"
#include "bovw/training.hpp"
#include "bovw/vocab.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace bovw;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("%s  %-22s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// --- shared trained system ---------------------------------------------------

struct Trained {
    TrainedArtifacts artifacts;
    std::shared_ptr<const ModelSet> models;
    double seconds = 0;
};

const Trained& trained() {
    static const Trained t = [] {
        Trained out;
        const auto t0 = Clock::now();
        TrainConfig cfg;
        cfg.modes = {Mode::three, Mode::two};
        cfg.seed = 3;
        const auto images = fixture::patches(11, 100);
        out.artifacts = train_artifacts(images, cfg);
        out.models = std::make_shared<const ModelSet>(out.artifacts.model_set());
        out.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        return out;
    }();
    return t;
}

// --- criteria ------------------------------------------------------------------

Outcome descriptor_count() {
    Outcome o;
    GrayImage g{200, 200, std::vector<float>(200 * 200)};
    std::mt19937 rng(1);
    for (float& v : g.data) v = static_cast<float>(rng() % 256) / 255.0f;
    const auto n = extract_dsift(g).size();
    o.detail = std::to_string(n) + " descriptors";
    o.require(n == 2594 && dsift_count(200, 200) == 2594, "expected 2594");
    return o;
}

Outcome dsift_oracle() {
    Outcome o;
    double worst = 0;
    for (std::uint32_t seed = 0; seed < 100; ++seed) {
        std::mt19937 rng(7000 + seed);
        std::uniform_real_distribution<float> u(0.0f, 1.0f);
        GrayImage g{28, 28, std::vector<float>(28 * 28)};
        for (float& v : g.data) v = u(rng);
        const auto d = extract_dsift(g);
        const auto ref = oracle::dsift({28, 28, std::vector<double>(g.data.begin(), g.data.end())}, 5, {5, 7});
        if (ref.size() != d.size()) {
            o.require(false, "descriptor count differs on image " + std::to_string(seed));
            continue;
        }
        for (std::size_t i = 0; i < d.size(); ++i) {
            for (int k = 0; k < kDescriptorDim; ++k) {
                worst = std::max(worst, std::abs(d.values[i * kDescriptorDim + k] - ref[i][static_cast<std::size_t>(k)]));
            }
        }
    }
    o.detail = "100 images, max |diff| " + fmt("%.2e", worst);
    o.require(worst <= 1e-6, "tolerance 1e-6 exceeded");
    return o;
}

Outcome yuv_sweep() {
    Outcome o;
    // One frame per Y value: every (Cb, Cr) grid pair, both pixels of the pair at that Y.
    int mismatches = 0, checked = 0;
    for (int y = 16; y <= 235; ++y) {
        RawFrame f;
        f.width = 2 * 15 * 15;
        f.height = 1;
        for (int cb = 16; cb <= 240; cb += 16) {
            for (int cr = 16; cr <= 240; cr += 16) {
                f.data.insert(f.data.end(), {static_cast<std::uint8_t>(y), static_cast<std::uint8_t>(cb),
                                             static_cast<std::uint8_t>(y), static_cast<std::uint8_t>(cr)});
            }
        }
        const auto rgb = decode_yuv422_to_rgb(f);
        int px = 0;
        for (int cb = 16; cb <= 240; cb += 16) {
            for (int cr = 16; cr <= 240; cr += 16) {
                const auto want = oracle::yuv_to_rgb(y, cb, cr);
                for (int half = 0; half < 2; ++half, ++px) {
                    const auto* p = rgb.pixel(px, 0);
                    mismatches += p[0] != want.r || p[1] != want.g || p[2] != want.b;
                }
                ++checked;
            }
        }
    }
    o.detail = std::to_string(checked) + " triples, " + std::to_string(mismatches) + " mismatched pixels";
    o.require(checked == 220 * 15 * 15 && mismatches == 0, "not bit-exact");
    return o;
}

std::vector<float> uniform_points(std::size_t n, std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::vector<float> v(n * kDescriptorDim);
    for (float& x : v) x = u(rng);
    return v;
}

Outcome kmeans_suite() {
    Outcome o;
    int increases = 0;
    for (std::uint32_t seed = 0; seed < 20; ++seed) {
        const auto pts = uniform_points(200 + 10 * seed, seed);
        const PointSet ps{pts};
        std::vector<std::uint32_t> all(ps.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::uint32_t>(i);
        const auto r = kmeans(ps, all, 8, 100, 0.0, seed);
        for (std::size_t i = 1; i < r.objective_trace.size(); ++i) {
            increases += r.objective_trace[i] > r.objective_trace[i - 1];
        }
    }
    o.require(increases == 0, std::to_string(increases) + " objective increases");

    // Four tight clouds, one level of four children.
    std::mt19937 rng(11);
    std::uniform_real_distribution<float> u(0.0f, 1.0f), jitter(-0.01f, 0.01f);
    std::vector<float> pts;
    std::vector<std::array<double, kDescriptorDim>> means(4);
    for (int c = 0; c < 4; ++c) {
        std::array<float, kDescriptorDim> centre;
        for (float& v : centre) v = u(rng);
        for (int i = 0; i < 25; ++i) {
            for (int d = 0; d < kDescriptorDim; ++d) {
                const float v = centre[static_cast<std::size_t>(d)] + jitter(rng);
                pts.push_back(v);
                means[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)] += v / 25.0;
            }
        }
    }
    VocabTrainConfig cfg;
    cfg.branching = 4;
    cfg.depth = 1;
    const auto tree = train_tree(PointSet{pts}, cfg);
    double worst = 0;
    for (int c = 0; c < 4; ++c) {
        const auto word = tree.quantize(std::span<const float, kDescriptorDim>(pts.data() + c * 25 * kDescriptorDim, kDescriptorDim));
        const auto& centroid = tree.nodes()[tree.leaves()[word]].centroid;
        for (int d = 0; d < kDescriptorDim; ++d) {
            worst = std::max(worst, std::abs(centroid[static_cast<std::size_t>(d)] - means[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)]));
        }
    }
    o.require(tree.word_count() == 4 && worst <= 1e-6, "cloud recovery error " + fmt("%.2e", worst));

    const auto corpus = uniform_points(800, 5);
    VocabTrainConfig big;
    big.branching = 5;
    big.depth = 2;
    big.seed = 9;
    const bool identical = train_tree(PointSet{corpus}, big).serialize() == train_tree(PointSet{corpus}, big).serialize();
    o.require(identical, "re-train not byte-identical");
    o.detail = "20 corpora monotone, cloud error " + fmt("%.1e", worst) + ", re-train identical";
    return o;
}

struct Binary {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
};

Binary blobs(int n, int dim, double offset, std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Binary d;
    for (int i = 0; i < n; ++i) {
        const int y = i % 2 == 0 ? 1 : -1;
        std::vector<double> x(static_cast<std::size_t>(dim));
        for (double& v : x) v = y * offset + g(rng);
        d.x.push_back(std::move(x));
        d.y.push_back(y);
    }
    return d;
}

Outcome svm_suite() {
    Outcome o;
    std::ostringstream detail;

    // Probability simplex on random inputs.
    const auto& model = trained().artifacts.models.at(Mode::three);
    std::mt19937 rng(6);
    std::uniform_real_distribution<double> u(-3, 3);
    double worst_sum = 0;
    bool negative = false;
    for (int k = 0; k < 10000; ++k) {
        std::vector<double> x(model.feature_length);
        for (double& v : x) v = u(rng);
        const auto p = predict_proba(model, x).p;
        double s = 0;
        for (double v : p) {
            negative |= v < 0;
            s += v;
        }
        worst_sum = std::max(worst_sum, std::abs(s - 1));
    }
    o.require(worst_sum <= 1e-6 && !negative, "simplex violated");
    detail << "simplex err " << fmt("%.1e", worst_sum);

    // Small-instance dual QP oracle on a 10x10 probe grid.
    int disagree = 0;
    for (std::uint32_t seed = 0; seed < 10; ++seed) {
        const auto d = blobs(12 + static_cast<int>(seed), 2, 0.8, seed);
        for (double c : {0.1, 1.0}) {
            const auto m = train_binary(d.x, d.y, c);
            const auto ref = oracle::svm_dual(d.x, d.y, c);
            for (int i = 0; i < 10; ++i) {
                for (int j = 0; j < 10; ++j) {
                    const std::vector<double> p{-3.0 + 6.0 * i / 9.0, -3.0 + 6.0 * j / 9.0};
                    disagree += (m.decision(p) > 0) != (ref.decision(p) > 0);
                }
            }
        }
    }
    o.require(disagree == 0, std::to_string(disagree) + " QP probe disagreements");
    detail << ", QP disagreements " << disagree;

    // Platt against a 200x200 grid over [-10, 10]^2.
    double platt_gap = -1e300;
    std::normal_distribution<double> g(0, 1);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> f;
        std::vector<int> y;
        for (int i = 0; i < 20; ++i) {
            const int label = i % 3 == 0 ? -1 : 1;
            y.push_back(label);
            f.push_back(0.8 * label + g(rng));
        }
        const auto fit = fit_platt(f, y);
        const double at_fit = oracle::platt_nll(f, y, fit.a, fit.b);
        double best = 1e300;
        for (int i = 0; i < 200; ++i) {
            for (int j = 0; j < 200; ++j) {
                best = std::min(best, oracle::platt_nll(f, y, -10 + 20.0 * i / 199, -10 + 20.0 * j / 199));
            }
        }
        platt_gap = std::max(platt_gap, at_fit - best);
    }
    o.require(platt_gap <= 0.0, "Platt loss above grid minimum by " + fmt("%.2e", platt_gap));
    detail << ", Platt loss - grid min " << fmt("%.2e", platt_gap);

    // Pairwise coupling against a simplex grid (step 0.001).
    double coupling_err = 0;
    std::uniform_real_distribution<double> ur(0.02, 0.98);
    for (int trial = 0; trial < 20; ++trial) {
        std::array<std::array<double, 3>, 3> ra{};
        std::vector<std::vector<double>> r(3, std::vector<double>(3, 0.0));
        for (int i = 0; i < 3; ++i) {
            for (int j = i + 1; j < 3; ++j) {
                ra[i][j] = r[i][j] = ur(rng);
                ra[j][i] = r[j][i] = 1 - r[i][j];
            }
        }
        const auto p = couple_pairwise(r);
        const auto ref = oracle::coupling_grid(ra);
        for (int k = 0; k < 3; ++k) coupling_err = std::max(coupling_err, std::abs(p[k] - ref[static_cast<std::size_t>(k)]));
    }
    o.require(coupling_err <= 5e-3, "coupling error " + fmt("%.2e", coupling_err));
    detail << ", coupling err " << fmt("%.1e", coupling_err);

    // CV tie-break on separable data and fold stratification.
    std::vector<Sample> samples;
    for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < 10; ++i) {
            Sample s;
            s.label = c;
            s.features.assign(6, 0.0);
            for (int d = 0; d < 6; ++d) s.features[static_cast<std::size_t>(d)] = (d % 3 == c ? 2.0 : 0.0) + 0.05 * g(rng);
            samples.push_back(std::move(s));
        }
    }
    const auto cv = cross_validate(samples, 3, default_penalty_grid());
    o.require(cv.best_penalty == 1.0 / 32 && cv.best_accuracy == 1.0, "tie-break did not pick 2^-5");
    bool stratified = true;
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<int> labels;
        const int n = 15 + static_cast<int>(rng() % 60);
        for (int i = 0; i < n; ++i) labels.push_back(static_cast<int>(rng() % 3));
        const auto folds = stratified_folds(labels, 3, 5, trial);
        for (int c = 0; c < 3; ++c) {
            int lo = 1 << 30, hi = 0;
            for (const auto& f : folds) {
                int k = 0;
                for (auto idx : f) k += labels[idx] == c;
                lo = std::min(lo, k);
                hi = std::max(hi, k);
            }
            stratified &= hi - lo <= 1;
        }
    }
    o.require(stratified, "fold sizes differ by more than one");
    detail << ", CV C=2^-5, folds stratified";
    o.detail = detail.str();
    return o;
}

Outcome end_to_end() {
    Outcome o;
    const auto& t = trained();
    const auto test = fixture::patches(12, 50);
    std::ostringstream detail;
    for (auto [mode, target] : {std::pair{Mode::three, 0.90}, std::pair{Mode::two, 0.95}}) {
        int correct = 0;
        for (const auto& img : test) {
            const auto p = classify_image(img.image, *t.models, mode);
            correct += static_cast<int>(p.argmax) == label_index(img.label, mode);
        }
        const double acc = static_cast<double>(correct) / static_cast<double>(test.size());
        detail << to_string(mode) << " " << fmt("%.3f", acc) << " (>= " << target << ") ";
        o.require(acc >= target, to_string(mode) + "-category accuracy below target");
    }
    detail << "train " << fmt("%.0f s", t.seconds) << ", " << t.artifacts.vocab.word_count() << " words";
    o.require(t.seconds <= 300, "training slower than 5 minutes");
    o.detail = detail.str();
    return o;
}

BenchReport bench_report() {
    static const BenchReport rep = [] {
        const auto& t = trained();
        SyntheticSource src(1, TextureClass::B, 1920, 1080, 30, 310);
        PipelineConfig cfg;
        cfg.drop_policy = DropPolicy::process_all;
        Pipeline p(t.models, cfg);
        std::vector<FrameResult> results;
        p.run(src, [&](const FrameResult& r, const RgbFrame*) {
            if (r.frame_index >= 10) results.push_back(r);
        });
        return make_bench_report(results);
    }();
    return rep;
}

Outcome throughput() {
    Outcome o;
    const auto t0 = Clock::now();
    const auto rep = bench_report();
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    o.detail = "mean " + fmt("%.2f ms", rep.mean_total_us / 1000) + ", " + fmt("%.1f fps", rep.fps) + " over " +
               std::to_string(rep.frames) + " 1080p frames, " + std::to_string(trained().artifacts.vocab.word_count()) +
               " words";
    o.require(rep.frames == 300 && rep.errors == 0, "missing or failed frames");
    o.require(trained().artifacts.vocab.word_count() <= 1000, "vocabulary exceeds 1000 words");
    o.require(rep.mean_total_us <= 50000, "mean latency above 50 ms");
    o.require(secs <= 60, "bench took longer than a minute");
    return o;
}

Outcome cost_ranking() {
    Outcome o;
    const auto rep = bench_report();
    const auto rank = ranked_stages(rep);
    double fraction = 0;
    for (const auto& s : rep.stages) {
        if (s.name == rank[0] || s.name == rank[1]) fraction += s.fraction;
    }
    o.detail = "top two: " + rank[0] + ", " + rank[1] + " (" + fmt("%.0f%%", fraction * 100) + " of stage time)";
    const std::set<std::string> top{rank[0], rank[1]};
    o.require(top == std::set<std::string>{"dsift", "convert"}, "dsift and convert are not the top two");
    return o;
}

Outcome stream_accounting() {
    Outcome o;
    oracle::TempDir dir;
    SyntheticSource synth(4, TextureClass::B, 320, 240, 30, 100);
    std::vector<RawFrame> frames;
    while (auto f = synth.next_frame()) frames.push_back(std::move(*f));
    const auto path = dir.path() / "stream.yuv";
    write_raw_stream(path, 320, 240, 30, frames);

    auto src = open_source(path.string(), {});
    PipelineConfig cfg;
    cfg.debug_frame_delay_us = 80000;
    Pipeline p(fixture::small_model_set(), cfg);
    std::vector<FrameResult> got;
    const auto summary = p.run(*src, [&](const FrameResult& r, const RgbFrame*) { got.push_back(r); });
    std::int64_t dropped = 0;
    bool increasing = true, any_drop = false, additive = true;
    for (std::size_t i = 0; i < got.size(); ++i) {
        if (i) increasing &= got[i].frame_index > got[i - 1].frame_index;
        dropped += got[i].dropped_frames;
        any_drop |= got[i].dropped_frames >= 1;
        for (auto v : got[i].timings.us) additive &= v >= 0;
        additive &= got[i].timings.sum() <= got[i].total_us;
    }
    o.require(increasing, "frame_index not strictly increasing");
    o.require(any_drop, "no drops under forced-slow skip-to-latest");
    o.require(static_cast<std::int64_t>(got.size()) + dropped == summary.produced && summary.produced == 100,
              "results + dropped != produced");
    o.require(additive, "stage sum exceeds total");

    auto again = open_source(path.string(), {});
    PipelineConfig all;
    all.drop_policy = DropPolicy::process_all;
    Pipeline q(fixture::small_model_set(), all);
    std::size_t n = 0;
    q.run(*again, [&](const FrameResult&, const RgbFrame*) { ++n; });
    o.require(n == 100, "process-all emitted " + std::to_string(n));
    o.detail = std::to_string(got.size()) + " results + " + std::to_string(dropped) + " dropped = " +
               std::to_string(summary.produced) + " produced; process-all " + std::to_string(n);
    return o;
}

Outcome formatting() {
    Outcome o;
    const std::vector<std::string> classes{"A", "B"};
    const auto text = format_probabilities(classes, std::vector<double>{0.011, 0.989});
    o.detail = "\"" + text + "\"";
    o.require(format_percent(0.011) == "1.1%" && format_percent(0.989) == "98.9%", "percent formatting");
    o.require(text == "A 1.1% B 98.9%", "probability line");
    o.require(format_percent(0.988) == "98.8%" && format_percent(0.012) == "1.2%", "two-class complement");
    return o;
}

} // namespace

int main() {
    report("descriptor-count", descriptor_count);
    report("dsift-oracle", dsift_oracle);
    report("yuv-conversion", yuv_sweep);
    report("k-means", kmeans_suite);
    report("end-to-end-learning", end_to_end);
    report("svm-suite", svm_suite);
    report("throughput", throughput);
    report("cost-breakdown", cost_ranking);
    report("stream-accounting", stream_accounting);
    report("display-formatting", formatting);
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
