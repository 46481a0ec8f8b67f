#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bovw/dsift.hpp"

namespace bovw {

using Centroid = std::array<float, kDescriptorDim>;

struct VocabTrainConfig {
    int branching = 10;
    int depth = 3;
    int max_iterations = 50;
    // Lloyd stops once the objective improves by less than this fraction.
    double tolerance = 1e-6;
    std::uint64_t seed = 0;
};

void validate(const VocabTrainConfig& config);

// Row-major view of n points of dimension kDescriptorDim.
struct PointSet {
    std::span<const float> values;

    std::size_t size() const noexcept { return values.size() / kDescriptorDim; }
    const float* row(std::size_t i) const noexcept { return values.data() + i * kDescriptorDim; }
};

struct KMeansResult {
    // Non-empty clusters only; centroids are the means of their members.
    std::vector<std::array<double, kDescriptorDim>> centroids;
    std::vector<std::uint32_t> assignment;   // per input point, into centroids
    std::vector<double> objective_trace;     // sum of squared distances after each assignment step
    int iterations = 0;
};

// k-means++ seeding followed by Lloyd iterations over the selected subset of
// points. Clusters that empty out are dropped, so fewer than k may remain.
KMeansResult kmeans(const PointSet& points, std::span<const std::uint32_t> subset, int k, int max_iterations,
                    double tolerance, std::uint64_t seed);

class VocabularyTree {
public:
    struct Node {
        std::int32_t parent = -1;
        std::uint32_t first_child = 0;
        std::uint32_t child_count = 0;
        Centroid centroid{};
    };

    static constexpr std::uint16_t kFormatVersion = 1;

    VocabularyTree() = default;
    // Nodes must be in breadth-first layout with contiguous child spans.
    VocabularyTree(int branching, int depth, std::vector<Node> nodes);

    int branching() const noexcept { return branching_; }
    int depth() const noexcept { return depth_; }
    std::uint32_t word_count() const noexcept { return word_count_; }
    const std::vector<Node>& nodes() const noexcept { return nodes_; }

    // Node index of each word id.
    const std::vector<std::uint32_t>& leaves() const noexcept { return leaves_; }

    // Greedy descent; ties go to the lower child index.
    std::uint32_t quantize(std::span<const float, kDescriptorDim> descriptor) const;
    std::vector<std::uint32_t> quantize(const DescriptorSet& descriptors) const;

    // Nearest leaf by exhaustive search, for measuring greedy-descent error.
    std::uint32_t nearest_leaf(std::span<const float, kDescriptorDim> descriptor) const;

    std::vector<std::uint8_t> serialize() const;
    static VocabularyTree deserialize(std::span<const std::uint8_t> bytes);

private:
    int branching_ = 0;
    int depth_ = 0;
    std::uint32_t word_count_ = 0;
    std::vector<Node> nodes_;
    std::vector<std::uint32_t> leaves_;
    std::vector<std::int32_t> word_of_node_;
};

// Recursive k-means to config.depth levels. A node with at most `branching`
// descriptors (or whose split collapses to one cluster) becomes a leaf.
// Throws PreconditionError on an empty corpus.
VocabularyTree train_tree(const PointSet& corpus, const VocabTrainConfig& config);

void save_tree(const VocabularyTree& tree, const std::filesystem::path& path);
VocabularyTree load_tree(const std::filesystem::path& path);

float squared_distance(const float* a, const float* b) noexcept;

} // namespace bovw
