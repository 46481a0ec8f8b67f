#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "bovw/dsift.hpp"
#include "bovw/features.hpp"
#include "bovw/svm.hpp"
#include "bovw/vocab.hpp"

namespace bovw {

// A vocabulary, its scaler and the SVM models trained on top of them (at most
// one per mode). Immutable once built; share it across threads freely.
class ModelSet {
public:
    ModelSet(VocabularyTree vocab, ScalerParams scaler);

    // Throws ConfigError if the model's fingerprints or feature length do not
    // match this vocabulary and scaler.
    void add_model(SvmModel model);

    bool has(Mode mode) const { return models_.count(mode) != 0; }
    const SvmModel& model(Mode mode) const;
    std::vector<Mode> modes() const;

    const VocabularyTree& vocab() const noexcept { return vocab_; }
    const ScalerParams& scaler() const noexcept { return scaler_; }
    const ModelFingerprints& fingerprints() const noexcept { return fingerprints_; }
    HistogramNormalization normalization() const noexcept { return normalization_; }

private:
    VocabularyTree vocab_;
    ScalerParams scaler_;
    ModelFingerprints fingerprints_;
    HistogramNormalization normalization_ = HistogramNormalization::raw_counts;
    std::map<Mode, SvmModel> models_;
};

ModelSet load_model_set(const std::filesystem::path& vocab_path, const std::filesystem::path& scaler_path,
                        std::span<const std::filesystem::path> model_paths);

// dsift -> quantize -> histogram -> scale.
std::vector<double> image_features(const GrayImage& image, const ModelSet& models,
                                   const DsiftParams& dsift = {});

ClassProbabilities classify_image(const GrayImage& image, const ModelSet& models, Mode mode,
                                  const DsiftParams& dsift = {});

} // namespace bovw
