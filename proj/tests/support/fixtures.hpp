#pragma once

#include <memory>
#include <vector>

#include "bovw/classifier.hpp"
#include "bovw/training.hpp"

namespace fixture {

// Small synthetic patches (per_class of each texture class, size x size).
std::vector<bovw::LabeledImage> patches(std::uint64_t seed, int per_class, int size = 200);

// Vocabulary K=4, L=2 and both models, trained once per process on 12
// patches per class. Good enough for plumbing tests, not for accuracy claims.
const bovw::TrainedArtifacts& small_artifacts();
std::shared_ptr<const bovw::ModelSet> small_model_set();

} // namespace fixture
