#include "fixtures.hpp"

#include "bovw/dataset.hpp"

namespace fixture {

std::vector<bovw::LabeledImage> patches(std::uint64_t seed, int per_class, int size) {
    std::vector<bovw::LabeledImage> out;
    for (auto cls : {bovw::TextureClass::A, bovw::TextureClass::B, bovw::TextureClass::C3}) {
        for (int i = 0; i < per_class; ++i) {
            const auto rgb = bovw::synth_patch(seed, cls, i, size);
            out.push_back({bovw::to_gray(rgb, {0, 0, size, size}), cls, bovw::to_string(cls) + std::to_string(i)});
        }
    }
    return out;
}

const bovw::TrainedArtifacts& small_artifacts() {
    static const bovw::TrainedArtifacts artifacts = [] {
        bovw::TrainConfig cfg;
        cfg.modes = {bovw::Mode::three, bovw::Mode::two};
        cfg.vocab.branching = 4;
        cfg.vocab.depth = 2;
        cfg.seed = 5;
        const auto images = patches(99, 12);
        return bovw::train_artifacts(images, cfg);
    }();
    return artifacts;
}

std::shared_ptr<const bovw::ModelSet> small_model_set() {
    static const auto set = std::make_shared<const bovw::ModelSet>(small_artifacts().model_set());
    return set;
}

} // namespace fixture
