#include "bovw/vocab.hpp"

#include <algorithm>
#include <cassert>
#include <cstring>
#include <deque>
#include <fstream>
#include <iterator>
#include <limits>
#include <memory>

#include "bovw/errors.hpp"
#include "bovw/random.hpp"

namespace bovw {

namespace {

using DCentroid = std::array<double, kDescriptorDim>;

double squared_distance_d(const float* x, const double* c) noexcept {
    double acc[4] = {0, 0, 0, 0};
    for (int k = 0; k < kDescriptorDim; k += 4) {
        for (int l = 0; l < 4; ++l) {
            const double d = static_cast<double>(x[k + l]) - c[k + l];
            acc[l] += d * d;
        }
    }
    return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

std::vector<DCentroid> seed_plus_plus(const PointSet& points, std::span<const std::uint32_t> subset, int k,
                                      SplitMix64& rng) {
    std::vector<DCentroid> centers;
    centers.reserve(static_cast<std::size_t>(k));
    auto as_centroid = [&](std::uint32_t idx) {
        DCentroid c;
        const float* r = points.row(idx);
        for (int d = 0; d < kDescriptorDim; ++d) c[d] = r[d];
        return c;
    };
    centers.push_back(as_centroid(subset[rng.below(subset.size())]));

    std::vector<double> nearest(subset.size());
    for (std::size_t i = 0; i < subset.size(); ++i) {
        nearest[i] = squared_distance_d(points.row(subset[i]), centers.back().data());
    }
    while (static_cast<int>(centers.size()) < k) {
        double total = 0.0;
        for (double v : nearest) total += v;
        if (total <= 0.0) break;  // every remaining point coincides with a center
        const double target = rng.uniform() * total;
        double running = 0.0;
        std::size_t pick = subset.size() - 1;
        for (std::size_t i = 0; i < subset.size(); ++i) {
            running += nearest[i];
            if (running > target && nearest[i] > 0.0) {
                pick = i;
                break;
            }
        }
        while (nearest[pick] == 0.0 && pick > 0) --pick;
        centers.push_back(as_centroid(subset[pick]));
        for (std::size_t i = 0; i < subset.size(); ++i) {
            nearest[i] = std::min(nearest[i], squared_distance_d(points.row(subset[i]), centers.back().data()));
        }
    }
    return centers;
}

// Assigns every point to its nearest centroid (lowest index on ties) and
// returns the objective.
double assign(const PointSet& points, std::span<const std::uint32_t> subset, const std::vector<DCentroid>& centers,
              std::vector<std::uint32_t>& assignment) {
    double objective = 0.0;
    for (std::size_t i = 0; i < subset.size(); ++i) {
        const float* x = points.row(subset[i]);
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t best_c = 0;
        for (std::size_t c = 0; c < centers.size(); ++c) {
            const double d = squared_distance_d(x, centers[c].data());
            if (d < best) {
                best = d;
                best_c = static_cast<std::uint32_t>(c);
            }
        }
        assignment[i] = best_c;
        objective += best;
    }
    return objective;
}

// Replaces centers with member means and drops empty clusters, remapping the
// assignment to the surviving indices.
void update(const PointSet& points, std::span<const std::uint32_t> subset, std::vector<DCentroid>& centers,
            std::vector<std::uint32_t>& assignment) {
    std::vector<DCentroid> sums(centers.size(), DCentroid{});
    std::vector<std::size_t> counts(centers.size(), 0);
    for (std::size_t i = 0; i < subset.size(); ++i) {
        const float* x = points.row(subset[i]);
        auto& s = sums[assignment[i]];
        for (int d = 0; d < kDescriptorDim; ++d) s[d] += x[d];
        ++counts[assignment[i]];
    }
    std::vector<std::uint32_t> remap(centers.size(), 0);
    std::vector<DCentroid> next;
    next.reserve(centers.size());
    for (std::size_t c = 0; c < centers.size(); ++c) {
        if (counts[c] == 0) continue;
        remap[c] = static_cast<std::uint32_t>(next.size());
        DCentroid mean;
        const double inv = 1.0 / static_cast<double>(counts[c]);
        for (int d = 0; d < kDescriptorDim; ++d) mean[d] = sums[c][d] * inv;
        next.push_back(mean);
    }
    if (next.size() != centers.size()) {
        for (auto& a : assignment) a = remap[a];
    }
    centers = std::move(next);
}

struct BuildNode {
    Centroid centroid{};
    std::vector<std::unique_ptr<BuildNode>> children;
};

Centroid to_float(const DCentroid& c) {
    Centroid out;
    for (int d = 0; d < kDescriptorDim; ++d) out[d] = static_cast<float>(c[d]);
    return out;
}

void build(BuildNode& node, const PointSet& corpus, std::vector<std::uint32_t> members, int level,
           std::uint64_t path_key, const VocabTrainConfig& config) {
    if (level >= config.depth || members.size() <= static_cast<std::size_t>(config.branching)) return;
    const auto km = kmeans(corpus, members, config.branching, config.max_iterations, config.tolerance,
                           mix64(config.seed ^ path_key));
    if (km.centroids.size() <= 1) return;

    std::vector<std::vector<std::uint32_t>> groups(km.centroids.size());
    for (std::size_t i = 0; i < members.size(); ++i) groups[km.assignment[i]].push_back(members[i]);
    members.clear();
    members.shrink_to_fit();

    for (std::size_t c = 0; c < km.centroids.size(); ++c) {
        auto child = std::make_unique<BuildNode>();
        child->centroid = to_float(km.centroids[c]);
        build(*child, corpus, std::move(groups[c]), level + 1,
              mix64(path_key * static_cast<std::uint64_t>(config.branching + 1) + c + 1), config);
        node.children.push_back(std::move(child));
    }
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>((v >> s) & 0xff));
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    void need(std::size_t n, const char* what) const {
        if (offset_ + n > bytes_.size()) {
            throw FormatError(std::string("vocabulary file truncated while reading ") + what + " (offset " +
                              std::to_string(offset_) + ", size " + std::to_string(bytes_.size()) + ")");
        }
    }
    std::uint16_t u16(const char* what) {
        need(2, what);
        const std::uint16_t v = static_cast<std::uint16_t>(bytes_[offset_] | (bytes_[offset_ + 1] << 8));
        offset_ += 2;
        return v;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int s = 0; s < 4; ++s) v |= static_cast<std::uint32_t>(bytes_[offset_ + s]) << (8 * s);
        offset_ += 4;
        return v;
    }
    float f32(const char* what) {
        const std::uint32_t bits = u32(what);
        float f;
        std::memcpy(&f, &bits, sizeof f);
        return f;
    }
    std::size_t remaining() const { return bytes_.size() - offset_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t offset_ = 0;
};

constexpr char kTreeMagic[4] = {'B', 'V', 'W', 'T'};

} // namespace

float squared_distance(const float* a, const float* b) noexcept {
    float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    for (int k = 0; k < kDescriptorDim; k += 8) {
        for (int l = 0; l < 8; ++l) {
            const float d = a[k + l] - b[k + l];
            acc[l] += d * d;
        }
    }
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

void validate(const VocabTrainConfig& config) {
    if (config.branching < 2) throw PreconditionError("vocabulary branching must be >= 2");
    if (config.depth < 1) throw PreconditionError("vocabulary depth must be >= 1");
    if (config.max_iterations < 1) throw PreconditionError("k-means needs at least one iteration");
}

KMeansResult kmeans(const PointSet& points, std::span<const std::uint32_t> subset, int k, int max_iterations,
                    double tolerance, std::uint64_t seed) {
    if (subset.empty()) throw PreconditionError("k-means on an empty point set");
    if (k < 1) throw PreconditionError("k-means needs k >= 1");
    SplitMix64 rng(seed);
    KMeansResult result;
    std::vector<DCentroid> centers = seed_plus_plus(points, subset, k, rng);
    result.assignment.resize(subset.size());

    for (int iter = 0;; ++iter) {
        const double objective = assign(points, subset, centers, result.assignment);
#ifndef NDEBUG
        if (!result.objective_trace.empty()) {
            const double prev = result.objective_trace.back();
            assert(objective <= prev + 1e-12 * std::max(1.0, prev));
        }
#endif
        result.objective_trace.push_back(objective);
        result.iterations = iter + 1;
        bool converged = objective == 0.0;
        if (result.objective_trace.size() >= 2) {
            const double prev = result.objective_trace[result.objective_trace.size() - 2];
            converged = converged || prev - objective <= tolerance * prev;
        }
        // Final update makes every surviving centroid the mean of its members.
        update(points, subset, centers, result.assignment);
        if (converged || iter + 1 >= max_iterations) break;
    }
    result.centroids = std::move(centers);
    return result;
}

VocabularyTree::VocabularyTree(int branching, int depth, std::vector<Node> nodes)
    : branching_(branching), depth_(depth), nodes_(std::move(nodes)) {
    if (nodes_.empty()) throw FormatError("vocabulary tree has no nodes");
    if (nodes_[0].parent != -1) throw FormatError("vocabulary root must not have a parent");
    word_of_node_.assign(nodes_.size(), -1);
    std::uint32_t expected_next = 1;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        if (n.child_count == 0) {
            word_of_node_[i] = static_cast<std::int32_t>(leaves_.size());
            leaves_.push_back(static_cast<std::uint32_t>(i));
            continue;
        }
        if (n.child_count > static_cast<std::uint32_t>(branching_)) {
            throw FormatError("vocabulary node " + std::to_string(i) + " has " + std::to_string(n.child_count) +
                              " children, branching is " + std::to_string(branching_));
        }
        if (n.first_child != expected_next ||
            static_cast<std::size_t>(n.first_child) + n.child_count > nodes_.size()) {
            throw FormatError("vocabulary node " + std::to_string(i) + " has a child span outside breadth-first layout");
        }
        for (std::uint32_t c = n.first_child; c < n.first_child + n.child_count; ++c) {
            if (nodes_[c].parent != static_cast<std::int32_t>(i)) {
                throw FormatError("vocabulary node " + std::to_string(c) + " has inconsistent parent index");
            }
        }
        expected_next += n.child_count;
    }
    if (expected_next != nodes_.size()) throw FormatError("vocabulary node table has unreachable nodes");
    word_count_ = static_cast<std::uint32_t>(leaves_.size());
}

std::uint32_t VocabularyTree::quantize(std::span<const float, kDescriptorDim> descriptor) const {
    std::uint32_t node = 0;
    while (nodes_[node].child_count != 0) {
        const Node& n = nodes_[node];
        std::uint32_t best = n.first_child;
        float best_d = squared_distance(descriptor.data(), nodes_[best].centroid.data());
        for (std::uint32_t c = n.first_child + 1; c < n.first_child + n.child_count; ++c) {
            const float d = squared_distance(descriptor.data(), nodes_[c].centroid.data());
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        node = best;
    }
    return static_cast<std::uint32_t>(word_of_node_[node]);
}

std::vector<std::uint32_t> VocabularyTree::quantize(const DescriptorSet& descriptors) const {
    std::vector<std::uint32_t> words(descriptors.size());
    for (std::size_t i = 0; i < descriptors.size(); ++i) words[i] = quantize(descriptors.descriptor(i));
    return words;
}

std::uint32_t VocabularyTree::nearest_leaf(std::span<const float, kDescriptorDim> descriptor) const {
    std::uint32_t best = 0;
    float best_d = std::numeric_limits<float>::infinity();
    for (std::uint32_t w = 0; w < word_count_; ++w) {
        const float d = squared_distance(descriptor.data(), nodes_[leaves_[w]].centroid.data());
        if (d < best_d) {
            best_d = d;
            best = w;
        }
    }
    return best;
}

std::vector<std::uint8_t> VocabularyTree::serialize() const {
    std::vector<std::uint8_t> out;
    out.reserve(22 + nodes_.size() * (12 + 4 * kDescriptorDim));
    out.insert(out.end(), std::begin(kTreeMagic), std::end(kTreeMagic));
    put_u16(out, kFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(branching_));
    put_u32(out, static_cast<std::uint32_t>(depth_));
    put_u32(out, word_count_);
    put_u32(out, static_cast<std::uint32_t>(nodes_.size()));
    for (const Node& n : nodes_) {
        put_u32(out, static_cast<std::uint32_t>(n.parent));
        put_u32(out, n.first_child);
        put_u32(out, n.child_count);
        for (float v : n.centroid) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, sizeof bits);
            put_u32(out, bits);
        }
    }
    return out;
}

VocabularyTree VocabularyTree::deserialize(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) throw FormatError("vocabulary file is empty");
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kTreeMagic, 4) != 0) {
        throw FormatError("vocabulary file has wrong magic (expected BVWT)");
    }
    Reader r(bytes.subspan(4));
    const std::uint16_t version = r.u16("version");
    if (version != kFormatVersion) {
        throw FormatError("vocabulary format version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kFormatVersion) + ")");
    }
    const std::uint32_t k = r.u32("branching");
    const std::uint32_t l = r.u32("depth");
    const std::uint32_t words = r.u32("word count");
    const std::uint32_t count = r.u32("node count");
    if (k < 2 || l < 1 || k > 1'000'000 || l > 64) throw FormatError("vocabulary header has invalid branching/depth");
    const std::size_t node_bytes = 12 + 4 * kDescriptorDim;
    if (r.remaining() != static_cast<std::size_t>(count) * node_bytes) {
        if (r.remaining() < static_cast<std::size_t>(count) * node_bytes) {
            throw FormatError("vocabulary file truncated: node table needs " +
                              std::to_string(static_cast<std::size_t>(count) * node_bytes) + " bytes, " +
                              std::to_string(r.remaining()) + " present");
        }
        throw FormatError("vocabulary file has trailing bytes after the node table");
    }
    std::vector<Node> nodes(count);
    for (auto& n : nodes) {
        n.parent = static_cast<std::int32_t>(r.u32("parent"));
        n.first_child = r.u32("child span");
        n.child_count = r.u32("child span");
        for (float& v : n.centroid) v = r.f32("centroid");
    }
    VocabularyTree tree(static_cast<int>(k), static_cast<int>(l), std::move(nodes));
    if (tree.word_count() != words) {
        throw FormatError("vocabulary header claims " + std::to_string(words) + " words, node table has " +
                          std::to_string(tree.word_count()));
    }
    return tree;
}

VocabularyTree train_tree(const PointSet& corpus, const VocabTrainConfig& config) {
    validate(config);
    if (corpus.size() == 0) throw PreconditionError("train_tree: descriptor corpus is empty");

    BuildNode root;
    {
        DCentroid mean{};
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            const float* x = corpus.row(i);
            for (int d = 0; d < kDescriptorDim; ++d) mean[d] += x[d];
        }
        for (double& v : mean) v /= static_cast<double>(corpus.size());
        root.centroid = to_float(mean);
    }
    std::vector<std::uint32_t> all(corpus.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::uint32_t>(i);
    build(root, corpus, std::move(all), 0, 0, config);

    // Breadth-first flattening with contiguous child spans.
    using Node = VocabularyTree::Node;
    std::vector<Node> nodes;
    std::deque<std::pair<const BuildNode*, std::int32_t>> queue{{&root, -1}};
    while (!queue.empty()) {
        auto [bn, parent] = queue.front();
        queue.pop_front();
        const auto index = static_cast<std::int32_t>(nodes.size());
        Node n;
        n.parent = parent;
        n.centroid = bn->centroid;
        n.child_count = static_cast<std::uint32_t>(bn->children.size());
        nodes.push_back(n);
        for (const auto& child : bn->children) queue.emplace_back(child.get(), index);
    }
    // Children were enqueued in parent order, so each span starts where the
    // previous parent's span ended.
    std::uint32_t next = 1;
    for (auto& n : nodes) {
        if (n.child_count == 0) continue;
        n.first_child = next;
        next += n.child_count;
    }
    return VocabularyTree(config.branching, config.depth, std::move(nodes));
}

void save_tree(const VocabularyTree& tree, const std::filesystem::path& path) {
    const auto bytes = tree.serialize();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string(), "cannot create vocabulary file");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(path.string(), "write failed");
}

VocabularyTree load_tree(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string(), "cannot open vocabulary file");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return VocabularyTree::deserialize(bytes);
    } catch (const FormatError& e) {
        throw FormatError(std::string(e.what()) + ": " + path.string());
    }
}

} // namespace bovw
