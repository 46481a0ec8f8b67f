#include "bovw/classifier.hpp"

#include "bovw/errors.hpp"
#include "bovw/fingerprint.hpp"

namespace bovw {

ModelSet::ModelSet(VocabularyTree vocab, ScalerParams scaler) : vocab_(std::move(vocab)), scaler_(std::move(scaler)) {
    if (scaler_.word_count() != vocab_.word_count()) {
        throw ConfigError("scaler has " + std::to_string(scaler_.word_count()) + " bins but the vocabulary has " +
                          std::to_string(vocab_.word_count()) + " words");
    }
    fingerprints_.vocab = fingerprint(vocab_);
    fingerprints_.scaler = fingerprint(scaler_);
}

void ModelSet::add_model(SvmModel model) {
    if (model.meta.fingerprints.vocab != fingerprints_.vocab) {
        throw ConfigError("model was trained with vocabulary " + model.meta.fingerprints.vocab.substr(0, 12) +
                          ", loaded vocabulary is " + fingerprints_.vocab.substr(0, 12));
    }
    if (model.meta.fingerprints.scaler != fingerprints_.scaler) {
        throw ConfigError("model was trained with scaler " + model.meta.fingerprints.scaler.substr(0, 12) +
                          ", loaded scaler is " + fingerprints_.scaler.substr(0, 12));
    }
    if (model.feature_length != vocab_.word_count()) {
        throw ConfigError("model feature length " + std::to_string(model.feature_length) + " differs from " +
                          std::to_string(vocab_.word_count()) + " vocabulary words");
    }
    if (!models_.empty() && model.meta.normalization != normalization_) {
        throw ConfigError("models disagree on histogram normalization");
    }
    normalization_ = model.meta.normalization;
    const Mode mode = model.mode;
    models_.insert_or_assign(mode, std::move(model));
}

const SvmModel& ModelSet::model(Mode mode) const {
    const auto it = models_.find(mode);
    if (it == models_.end()) throw ConfigError("no " + to_string(mode) + "-category model is loaded");
    return it->second;
}

std::vector<Mode> ModelSet::modes() const {
    std::vector<Mode> out;
    for (const auto& [mode, _] : models_) out.push_back(mode);
    return out;
}

ModelSet load_model_set(const std::filesystem::path& vocab_path, const std::filesystem::path& scaler_path,
                        std::span<const std::filesystem::path> model_paths) {
    ModelSet set(load_tree(vocab_path), load_scaler(scaler_path));
    for (const auto& p : model_paths) {
        auto model = load_model(p);
        if (set.has(model.mode)) throw ConfigError("two " + to_string(model.mode) + "-category models given");
        set.add_model(std::move(model));
    }
    return set;
}

std::vector<double> image_features(const GrayImage& image, const ModelSet& models, const DsiftParams& dsift) {
    const auto descriptors = extract_dsift(image, dsift);
    const auto words = models.vocab().quantize(descriptors);
    const auto hist = build_histogram(words, models.vocab().word_count());
    return apply_scaler(histogram_row(hist, models.normalization()), models.scaler());
}

ClassProbabilities classify_image(const GrayImage& image, const ModelSet& models, Mode mode,
                                  const DsiftParams& dsift) {
    return predict_proba(models.model(mode), image_features(image, models, dsift));
}

} // namespace bovw
