#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bovw/classifier.hpp"
#include "bovw/dsift.hpp"
#include "bovw/features.hpp"
#include "bovw/ingest.hpp"
#include "bovw/svm.hpp"
#include "bovw/vocab.hpp"

namespace bovw {

struct LabeledImage {
    GrayImage image;
    TextureClass label = TextureClass::A;
    std::string name;
};

// Class index of a texture label under the given mode; B and C3 both map to
// "notA" in two-category mode.
int label_index(TextureClass label, Mode mode);

struct TrainConfig {
    std::vector<Mode> modes{Mode::three};
    DsiftParams dsift{};
    VocabTrainConfig vocab{};
    // Random subsample of the pooled descriptors used for k-means.
    std::size_t max_vocab_descriptors = 60000;
    HistogramNormalization normalization = HistogramNormalization::raw_counts;
    ModelTrainOptions svm{};
    std::uint64_t seed = 0;
};

struct TrainedArtifacts {
    VocabularyTree vocab;
    ScalerParams scaler;
    std::map<Mode, SvmModel> models;

    ModelSet model_set() const;
};

// dsift -> vocabulary -> histograms -> scaler -> CV + SVM + Platt, for each
// requested mode on shared vocabulary and scaler.
TrainedArtifacts train_artifacts(std::span<const LabeledImage> images, const TrainConfig& config);

// Pools descriptors and keeps at most `limit` of them, chosen with a seeded
// shuffle (all of them if the pool is smaller).
std::vector<float> sample_descriptors(std::span<const DescriptorSet> sets, std::size_t limit, std::uint64_t seed);

} // namespace bovw
