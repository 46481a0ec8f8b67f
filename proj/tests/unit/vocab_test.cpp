#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "bovw/errors.hpp"
#include "bovw/vocab.hpp"
#include "oracles.hpp"

using namespace bovw;

namespace {

struct Clouds {
    std::vector<float> points;
    std::vector<int> label;
    std::vector<std::array<double, kDescriptorDim>> means;
};

// n_clouds tight clusters around random centres in [0,1]^128.
Clouds separated_clouds(int n_clouds, int per_cloud, std::uint32_t seed, float spread = 0.01f) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::uniform_real_distribution<float> jitter(-spread, spread);
    Clouds c;
    c.means.assign(static_cast<std::size_t>(n_clouds), {});
    for (int k = 0; k < n_clouds; ++k) {
        std::array<float, kDescriptorDim> centre;
        for (float& v : centre) v = u(rng);
        for (int i = 0; i < per_cloud; ++i) {
            for (int d = 0; d < kDescriptorDim; ++d) {
                const float v = centre[static_cast<std::size_t>(d)] + jitter(rng);
                c.points.push_back(v);
                c.means[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)] += v;
            }
            c.label.push_back(k);
        }
    }
    for (auto& m : c.means) {
        for (double& v : m) v /= per_cloud;
    }
    return c;
}

std::vector<float> random_points(std::size_t n, std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::vector<float> v(n * kDescriptorDim);
    for (float& x : v) x = u(rng);
    return v;
}

std::span<const float, kDescriptorDim> row(const std::vector<float>& v, std::size_t i) {
    return std::span<const float, kDescriptorDim>(v.data() + i * kDescriptorDim, kDescriptorDim);
}

} // namespace

TEST(KMeans, ObjectiveNonIncreasingOnRandomCorpora) {
    for (std::uint32_t seed = 0; seed < 20; ++seed) {
        const auto pts = random_points(150 + seed * 7, seed);
        const PointSet ps{pts};
        std::vector<std::uint32_t> all(ps.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::uint32_t>(i);
        const auto r = kmeans(ps, all, 6, 100, 0.0, seed);
        ASSERT_FALSE(r.objective_trace.empty());
        for (std::size_t i = 1; i < r.objective_trace.size(); ++i) {
            EXPECT_LE(r.objective_trace[i], r.objective_trace[i - 1] * (1 + 1e-12)) << "seed " << seed << " iter " << i;
        }
    }
}

TEST(KMeans, CentroidsAreMemberMeans) {
    const auto pts = random_points(80, 3);
    const PointSet ps{pts};
    std::vector<std::uint32_t> all(ps.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::uint32_t>(i);
    const auto r = kmeans(ps, all, 5, 50, 1e-6, 9);
    std::vector<std::array<double, kDescriptorDim>> sums(r.centroids.size());
    std::vector<int> counts(r.centroids.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
        const auto c = r.assignment[i];
        ++counts[c];
        for (int d = 0; d < kDescriptorDim; ++d) sums[c][static_cast<std::size_t>(d)] += pts[i * kDescriptorDim + static_cast<std::size_t>(d)];
    }
    for (std::size_t c = 0; c < sums.size(); ++c) {
        ASSERT_GT(counts[c], 0);
        for (int d = 0; d < kDescriptorDim; ++d) {
            EXPECT_NEAR(r.centroids[c][static_cast<std::size_t>(d)], sums[c][static_cast<std::size_t>(d)] / counts[c], 1e-9);
        }
    }
}

TEST(VocabTree, SeparatedCloudsRecovered) {
    const auto clouds = separated_clouds(4, 25, 11);
    VocabTrainConfig cfg;
    cfg.branching = 4;
    cfg.depth = 1;
    cfg.seed = 2;
    const auto tree = train_tree(PointSet{clouds.points}, cfg);
    ASSERT_EQ(tree.word_count(), 4u);
    // Match each leaf to the cloud whose points quantize to it.
    for (int k = 0; k < 4; ++k) {
        const std::uint32_t word = tree.quantize(row(clouds.points, static_cast<std::size_t>(k * 25)));
        const auto& centroid = tree.nodes()[tree.leaves()[word]].centroid;
        for (int d = 0; d < kDescriptorDim; ++d) {
            EXPECT_NEAR(centroid[static_cast<std::size_t>(d)], clouds.means[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)], 1e-6);
        }
        for (int i = 0; i < 25; ++i) EXPECT_EQ(tree.quantize(row(clouds.points, static_cast<std::size_t>(k * 25 + i))), word);
    }
    for (std::uint32_t w = 0; w < tree.word_count(); ++w) {
        const auto& c = tree.nodes()[tree.leaves()[w]].centroid;
        EXPECT_EQ(tree.quantize(std::span<const float, kDescriptorDim>(c.data(), kDescriptorDim)), w);
    }
}

TEST(VocabTree, IdenticalDescriptorsGiveSingleLeaf) {
    std::vector<float> pts;
    for (int i = 0; i < 30; ++i) {
        for (int d = 0; d < kDescriptorDim; ++d) pts.push_back(0.25f + 0.001f * static_cast<float>(d));
    }
    const auto tree = train_tree(PointSet{pts}, {});
    ASSERT_EQ(tree.word_count(), 1u);
    const auto& c = tree.nodes()[tree.leaves()[0]].centroid;
    for (int d = 0; d < kDescriptorDim; ++d) EXPECT_FLOAT_EQ(c[static_cast<std::size_t>(d)], pts[static_cast<std::size_t>(d)]);
    const auto probes = random_points(20, 4);
    for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(tree.quantize(row(probes, i)), 0u);
}

TEST(VocabTree, DeterministicRetrainIsByteIdentical) {
    const auto pts = random_points(600, 5);
    VocabTrainConfig cfg;
    cfg.branching = 5;
    cfg.depth = 2;
    cfg.seed = 77;
    EXPECT_EQ(train_tree(PointSet{pts}, cfg).serialize(), train_tree(PointSet{pts}, cfg).serialize());
}

TEST(VocabTree, StructuralInvariants) {
    const auto pts = random_points(900, 6);
    VocabTrainConfig cfg;
    cfg.branching = 4;
    cfg.depth = 3;
    const auto tree = train_tree(PointSet{pts}, cfg);
    EXPECT_LE(tree.word_count(), 64u);
    std::vector<int> depth(tree.nodes().size(), 0);
    for (std::size_t i = 1; i < tree.nodes().size(); ++i) depth[i] = depth[static_cast<std::size_t>(tree.nodes()[i].parent)] + 1;
    for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
        const auto& n = tree.nodes()[i];
        EXPECT_LE(n.child_count, 4u);
        EXPECT_LE(depth[i], 3);
    }
    std::vector<int> seen(tree.word_count(), 0);
    const auto probes = random_points(500, 7);
    for (std::size_t i = 0; i < 500; ++i) {
        const auto w = tree.quantize(row(probes, i));
        ASSERT_LT(w, tree.word_count());
        seen[w] = 1;
    }
}

TEST(VocabTree, TieGoesToLowerChild) {
    std::vector<VocabularyTree::Node> nodes(3);
    nodes[0].first_child = 1;
    nodes[0].child_count = 2;
    nodes[1].parent = 0;
    nodes[2].parent = 0;
    nodes[1].centroid.fill(0.0f);
    nodes[2].centroid.fill(0.0f);
    nodes[1].centroid[0] = 1.0f;
    nodes[2].centroid[0] = -1.0f;
    const VocabularyTree tree(2, 1, nodes);
    std::array<float, kDescriptorDim> probe{};
    EXPECT_EQ(tree.quantize(probe), 0u);
    probe[0] = -0.1f;
    EXPECT_EQ(tree.quantize(probe), 1u);
}

TEST(VocabTree, GreedyAgreesWithExhaustiveOnClouds) {
    const auto clouds = separated_clouds(12, 20, 8, 0.02f);
    VocabTrainConfig cfg;
    cfg.branching = 4;
    cfg.depth = 2;
    const auto tree = train_tree(PointSet{clouds.points}, cfg);
    const std::size_t n = clouds.points.size() / kDescriptorDim;
    std::size_t agree = 0;
    for (std::size_t i = 0; i < n; ++i) agree += tree.quantize(row(clouds.points, i)) == tree.nearest_leaf(row(clouds.points, i));
    if (agree != n) std::cout << "greedy/exhaustive disagreements: " << n - agree << " of " << n << "\n";
    EXPECT_GE(static_cast<double>(agree) / static_cast<double>(n), 0.99);
}

TEST(VocabTree, SaveLoadRoundTrip) {
    const auto pts = random_points(500, 9);
    VocabTrainConfig cfg;
    cfg.branching = 6;
    cfg.depth = 2;
    const auto tree = train_tree(PointSet{pts}, cfg);
    oracle::TempDir dir;
    save_tree(tree, dir.path() / "v.bvwt");
    const auto back = load_tree(dir.path() / "v.bvwt");
    EXPECT_EQ(back.word_count(), tree.word_count());
    const auto probes = random_points(1000, 10);
    for (std::size_t i = 0; i < 1000; ++i) ASSERT_EQ(back.quantize(row(probes, i)), tree.quantize(row(probes, i)));
}

TEST(VocabTree, CorruptFilesRejected) {
    const auto pts = random_points(100, 12);
    const auto bytes = train_tree(PointSet{pts}, {}).serialize();
    EXPECT_THROW(VocabularyTree::deserialize({}), FormatError);

    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(VocabularyTree::deserialize(bad_magic), FormatError);

    auto bad_version = bytes;
    bad_version[4] = 9;
    try {
        VocabularyTree::deserialize(bad_version);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
    }

    const std::vector<std::uint8_t> truncated(bytes.begin(), bytes.end() - 10);
    try {
        VocabularyTree::deserialize(truncated);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
    }

    oracle::TempDir dir;
    std::ofstream(dir.path() / "empty.bvwt").close();
    EXPECT_THROW(load_tree(dir.path() / "empty.bvwt"), FormatError);
    EXPECT_THROW(load_tree(dir.path() / "absent.bvwt"), IoError);
}

TEST(VocabTree, Preconditions) {
    EXPECT_THROW(train_tree(PointSet{}, {}), PreconditionError);
    const auto pts = random_points(10, 1);
    VocabTrainConfig cfg;
    cfg.branching = 1;
    EXPECT_THROW(train_tree(PointSet{pts}, cfg), PreconditionError);
    cfg.branching = 3;
    cfg.depth = 0;
    EXPECT_THROW(train_tree(PointSet{pts}, cfg), PreconditionError);
}
