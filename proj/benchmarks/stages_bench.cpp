#include <benchmark/benchmark.h>

#include <vector>

#include "bovw/dsift.hpp"
#include "bovw/ingest.hpp"
#include "bovw/random.hpp"
#include "bovw/vocab.hpp"

namespace {

using namespace bovw;

void BM_ConvertFullHd(benchmark::State& state) {
    const RawFrame raw = synth_texture_frame(7, TextureClass::B, 0, 1920, 1080);
    for (auto _ : state) {
        RgbFrame rgb = decode_yuv422_to_rgb(raw);
        benchmark::DoNotOptimize(rgb.data.data());
    }
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(raw.data.size()));
}
BENCHMARK(BM_ConvertFullHd)->Unit(benchmark::kMillisecond);

void BM_Dsift(benchmark::State& state) {
    const int side = static_cast<int>(state.range(0));
    const RgbFrame rgb = decode_yuv422_to_rgb(synth_texture_frame(7, TextureClass::C3, 0, 320, 320));
    const GrayImage gray = to_gray(rgb, RoiSpec{0, 0, side, side});
    for (auto _ : state) {
        DescriptorSet d = extract_dsift(gray);
        benchmark::DoNotOptimize(d.values.data());
    }
    state.counters["descriptors"] = static_cast<double>(dsift_count(side, side));
}
BENCHMARK(BM_Dsift)->Arg(100)->Arg(200)->Arg(300)->Unit(benchmark::kMillisecond);

void BM_Quantize(benchmark::State& state) {
    SplitMix64 rng(3);
    std::vector<float> corpus(20000 * kDescriptorDim);
    for (float& v : corpus) v = static_cast<float>(rng.uniform());
    VocabTrainConfig cfg;
    cfg.max_iterations = 10;
    const VocabularyTree tree = train_tree(PointSet{corpus}, cfg);
    const RgbFrame rgb = decode_yuv422_to_rgb(synth_texture_frame(7, TextureClass::A, 0, 200, 200));
    const DescriptorSet d = extract_dsift(to_gray(rgb, RoiSpec{0, 0, 200, 200}));
    for (auto _ : state) {
        auto words = tree.quantize(d);
        benchmark::DoNotOptimize(words.data());
    }
    state.counters["words"] = tree.word_count();
}
BENCHMARK(BM_Quantize)->Unit(benchmark::kMillisecond);

} // namespace
BENCHMARK_MAIN();
