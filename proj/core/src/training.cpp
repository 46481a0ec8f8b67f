#include "bovw/training.hpp"

#include <algorithm>
#include <numeric>

#include "bovw/errors.hpp"
#include "bovw/fingerprint.hpp"
#include "bovw/random.hpp"

namespace bovw {

int label_index(TextureClass label, Mode mode) {
    if (mode == Mode::two) return label == TextureClass::A ? 0 : 1;
    switch (label) {
    case TextureClass::A: return 0;
    case TextureClass::B: return 1;
    case TextureClass::C3: return 2;
    }
    return 0;
}

ModelSet TrainedArtifacts::model_set() const {
    ModelSet set(vocab, scaler);
    for (const auto& [mode, model] : models) set.add_model(model);
    return set;
}

std::vector<float> sample_descriptors(std::span<const DescriptorSet> sets, std::size_t limit, std::uint64_t seed) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> refs;
    for (std::size_t s = 0; s < sets.size(); ++s) {
        for (std::size_t d = 0; d < sets[s].size(); ++d) {
            refs.emplace_back(static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(d));
        }
    }
    if (refs.size() > limit) {
        SplitMix64 rng(mix64(seed ^ 0x766F636162ULL));
        rng.shuffle(refs);
        refs.resize(limit);
        std::sort(refs.begin(), refs.end());
    }
    std::vector<float> out;
    out.reserve(refs.size() * kDescriptorDim);
    for (const auto& [s, d] : refs) {
        const auto desc = sets[s].descriptor(d);
        out.insert(out.end(), desc.begin(), desc.end());
    }
    return out;
}

TrainedArtifacts train_artifacts(std::span<const LabeledImage> images, const TrainConfig& config) {
    if (images.empty()) throw PreconditionError("train_artifacts: no training images");
    if (config.modes.empty()) throw PreconditionError("train_artifacts: no modes requested");

    std::vector<DescriptorSet> descriptors;
    descriptors.reserve(images.size());
    for (const auto& img : images) descriptors.push_back(extract_dsift(img.image, config.dsift));

    const auto pool = sample_descriptors(descriptors, config.max_vocab_descriptors, config.seed);
    VocabTrainConfig vocab_cfg = config.vocab;
    vocab_cfg.seed = mix64(config.seed ^ vocab_cfg.seed);

    TrainedArtifacts out{train_tree(PointSet{pool}, vocab_cfg), {}, {}};

    std::vector<std::vector<double>> rows;
    rows.reserve(images.size());
    for (const auto& d : descriptors) {
        const auto hist = build_histogram(out.vocab.quantize(d), out.vocab.word_count());
        rows.push_back(histogram_row(hist, config.normalization));
    }
    out.scaler = fit_scaler(rows);

    ModelFingerprints fps{fingerprint(out.vocab), fingerprint(out.scaler)};
    std::vector<std::vector<double>> scaled;
    scaled.reserve(rows.size());
    for (const auto& r : rows) scaled.push_back(apply_scaler(r, out.scaler));

    for (Mode mode : config.modes) {
        std::vector<Sample> samples;
        samples.reserve(images.size());
        for (std::size_t i = 0; i < images.size(); ++i) {
            samples.push_back({scaled[i], label_index(images[i].label, mode)});
        }
        const auto names = class_names(mode);
        std::vector<int> counts(names.size(), 0);
        for (const auto& s : samples) ++counts[static_cast<std::size_t>(s.label)];
        for (std::size_t c = 0; c < names.size(); ++c) {
            if (counts[c] < 5) {
                throw PreconditionError("class " + names[c] + " has " + std::to_string(counts[c]) +
                                        " training images, at least 5 are needed");
            }
        }
        ModelTrainOptions svm = config.svm;
        svm.seed = mix64(config.seed ^ (static_cast<std::uint64_t>(mode) + 0x73766DULL) ^ svm.seed);
        SvmModel model = train_model(samples, mode, svm);
        model.meta.fingerprints = fps;
        model.meta.normalization = config.normalization;
        out.models.emplace(mode, std::move(model));
    }
    return out;
}

} // namespace bovw
