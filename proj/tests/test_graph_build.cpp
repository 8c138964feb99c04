#include <gtest/gtest.h>

#include <set>

#include "effgnn/error.hpp"
#include "effgnn/graph_build.hpp"
#include "support.hpp"

using namespace effgnn;
using effgnn::testing::TempDir;

namespace {

const WordEmbeddings& small_embeddings() {
    static const WordEmbeddings emb =
        train_word2vec(generate_synthetic_corpus(3, 20, 2), Word2VecConfig{.dim = 6, .epochs = 1});
    return emb;
}

DocumentAnnotation doc_with_boxes(const std::vector<BBox>& boxes) {
    DocumentAnnotation d;
    d.doc_id = "boxes";
    d.page_width = 1000;
    d.page_height = 1000;
    std::uint32_t id = 0;
    for (const auto& b : boxes) d.regions.push_back({id++, Category::Text, b, "", std::nullopt});
    return d;
}

std::set<Edge> knn_oracle(const std::vector<BBox>& boxes, std::size_t k) {
    std::set<Edge> edges;
    const std::size_t n = boxes.size();
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> others;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) others.push_back(j);
        auto d2 = [&](std::size_t j) {
            const double dx = boxes[i].cx() - boxes[j].cx(), dy = boxes[i].cy() - boxes[j].cy();
            return dx * dx + dy * dy;
        };
        // Selection by repeated minimum, lower index first on ties.
        for (std::size_t t = 0; t < std::min(k, others.size()); ++t) {
            std::size_t best = t;
            for (std::size_t u = t + 1; u < others.size(); ++u)
                if (d2(others[u]) < d2(others[best])) best = u;
            std::swap(others[t], others[best]);
            std::sort(others.begin() + std::ptrdiff_t(t) + 1, others.end());
            const auto j = others[t];
            edges.emplace(std::uint32_t(std::min(i, j)), std::uint32_t(std::max(i, j)));
        }
    }
    return edges;
}

BBox box_at(double cx, double cy) { return {cx - 5, cy - 5, cx + 5, cy + 5}; }

}  // namespace

TEST(Edges, SingleRegionHasNoEdges) {
    for (auto policy : {EdgePolicy::fully_connected(), EdgePolicy::spatial_knn(3), EdgePolicy::reading_order_chain()}) {
        const auto g = document_to_graph(doc_with_boxes({box_at(50, 50)}), small_embeddings(), {policy});
        EXPECT_EQ(g.n_nodes, 1u);
        EXPECT_TRUE(g.edges.empty());
    }
}

TEST(Edges, ChainFollowsReadingOrder) {
    const std::vector<BBox> col{box_at(100, 400), box_at(100, 100), box_at(100, 300), box_at(100, 200)};
    const auto edges = build_edges(col, EdgePolicy::reading_order_chain());
    EXPECT_EQ(edges, (std::vector<Edge>{{0, 2}, {1, 3}, {2, 3}}));

    const std::vector<BBox> sorted{box_at(100, 100), box_at(100, 200), box_at(100, 300), box_at(100, 400)};
    EXPECT_EQ(build_edges(sorted, EdgePolicy::reading_order_chain()), (std::vector<Edge>{{0, 1}, {1, 2}, {2, 3}}));
}

TEST(Edges, FullyConnectedCount) {
    std::vector<BBox> boxes;
    for (int i = 0; i < 7; ++i) boxes.push_back(box_at(20.0 * i + 10, 30));
    EXPECT_EQ(build_edges(boxes, EdgePolicy::fully_connected()).size(), 21u);
}

TEST(Edges, KnnSixKnownCentroids) {
    const std::vector<BBox> boxes{box_at(10, 10), box_at(20, 10), box_at(100, 100),
                                  box_at(110, 100), box_at(300, 50), box_at(15, 40)};
    const auto edges = build_edges(boxes, EdgePolicy::spatial_knn(2));
    EXPECT_EQ(std::set<Edge>(edges.begin(), edges.end()), knn_oracle(boxes, 2));
}

TEST(Edges, KnnMatchesOracleOnRandomLayoutsIncludingTies) {
    Rng rng(99);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + rng.below(15);
        std::vector<BBox> boxes;
        for (std::size_t i = 0; i < n; ++i) {
            // Coarse grid makes equal distances common.
            boxes.push_back(box_at(10.0 * double(1 + rng.below(6)), 10.0 * double(1 + rng.below(6))));
        }
        const std::uint32_t k = 1 + std::uint32_t(rng.below(5));
        const auto edges = build_edges(boxes, EdgePolicy::spatial_knn(k));
        ASSERT_EQ(std::set<Edge>(edges.begin(), edges.end()), knn_oracle(boxes, k)) << "trial " << trial;
    }
}

TEST(Edges, InvariantsHoldOnSyntheticCorpus) {
    const auto corpus = generate_synthetic_corpus(4, 20, 6);
    for (auto policy : {EdgePolicy::fully_connected(), EdgePolicy::spatial_knn(3), EdgePolicy::reading_order_chain()})
        for (const auto& d : corpus.documents) {
            const auto g = document_to_graph(d, small_embeddings(), {policy});
            EXPECT_NO_THROW(validate_graph(g));
            if (policy.kind == EdgePolicy::Kind::SpatialKnn) {
                // Every node keeps at least min(k, n-1) neighbours.
                std::vector<std::size_t> degree(g.n_nodes, 0);
                for (auto [a, b] : g.edges) ++degree[a], ++degree[b];
                for (auto deg : degree) EXPECT_GE(deg, std::min<std::size_t>(3, g.n_nodes - 1));
            }
        }
    EXPECT_THROW(build_edges(std::vector<BBox>{box_at(1, 1), box_at(2, 2)}, EdgePolicy::spatial_knn(0)),
                 ValidationError);
}

TEST(ReduceImage, Examples) {
    EXPECT_EQ(reduce_image_embedding(std::vector<double>{2, 4, 6, 8}, 2), (std::vector<float>{3, 7}));
    EXPECT_EQ(reduce_image_embedding(std::vector<double>{5}, 3), (std::vector<float>{5, 0, 0}));
    EXPECT_EQ(reduce_image_embedding(std::vector<double>(4096, 1.0), 16), std::vector<float>(16, 1.0f));
    // 7 into 3: chunk sizes 3, 2, 2
    EXPECT_EQ(reduce_image_embedding(std::vector<double>{1, 2, 3, 4, 6, 10, 20}, 3), (std::vector<float>{2, 5, 15}));
    EXPECT_THROW(reduce_image_embedding(std::vector<double>{}, 3), ValidationError);
}

TEST(NodeFeatures, LayoutAndDimensions) {
    DocumentAnnotation d;
    d.doc_id = "x";
    d.page_width = 200;
    d.page_height = 400;
    d.regions.push_back({0, Category::Table, {20, 40, 120, 240}, "zzzunknown", std::vector<double>{1, 3, 5, 7}});
    d.regions.push_back({1, Category::Title, {0, 0, 200, 40}, "", std::nullopt});
    const auto& emb = small_embeddings();

    GraphBuildConfig cfg;
    cfg.image_dim = 2;
    const auto g = document_to_graph(d, emb, cfg);
    ASSERT_EQ(g.feature_dim(), emb.dim + 9 + 2);
    const auto r0 = g.node_features.row(0);
    for (std::size_t i = 0; i < emb.dim; ++i) EXPECT_EQ(r0[i], 0.0f);
    const std::size_t o = emb.dim;
    for (std::size_t c = 0; c < kNumCategories; ++c) EXPECT_EQ(r0[o + c], c == 3 ? 1.0f : 0.0f);
    EXPECT_FLOAT_EQ(r0[o + 5], 70.0f / 200);
    EXPECT_FLOAT_EQ(r0[o + 6], 140.0f / 400);
    EXPECT_FLOAT_EQ(r0[o + 7], 100.0f / 200);
    EXPECT_FLOAT_EQ(r0[o + 8], 200.0f / 400);
    EXPECT_EQ(r0[o + 9], 2.0f);
    EXPECT_EQ(r0[o + 10], 6.0f);
    EXPECT_EQ(g.node_features(1, o + 9), 0.0f);

    cfg.layout_features = false;
    EXPECT_EQ(document_to_graph(d, emb, cfg).feature_dim(), emb.dim + 2);
    cfg.image_dim.reset();
    EXPECT_EQ(document_to_graph(d, emb, cfg).feature_dim(), emb.dim);
}

TEST(NodeFeatures, FormulaAndGeometryRangeOnSyntheticCorpus) {
    SyntheticOptions opts;
    opts.image_embedding_dim = 40;
    const auto corpus = generate_synthetic_corpus(5, 20, 3, opts);
    const auto& emb = small_embeddings();
    for (std::optional<std::uint32_t> r : {std::optional<std::uint32_t>{}, std::optional<std::uint32_t>{16}}) {
        GraphBuildConfig cfg;
        cfg.image_dim = r;
        for (const auto& d : corpus.documents) {
            const auto g = document_to_graph(d, emb, cfg);
            ASSERT_EQ(g.feature_dim(), emb.dim + 9 + r.value_or(0));
            for (std::size_t i = 0; i < g.n_nodes; ++i)
                for (std::size_t c = emb.dim + 5; c < emb.dim + 9; ++c) {
                    EXPECT_GE(g.node_features(i, c), 0.0f);
                    EXPECT_LE(g.node_features(i, c), 1.0f);
                }
        }
    }
}

TEST(Dataset, CountsMediansAndDeterminism) {
    const auto corpus = generate_synthetic_corpus(5, 40, 1);
    const auto split = split_dataset(corpus, {0.8, 0, 0.2}, 7);
    const auto a = build_dataset(corpus, split, small_embeddings(), {});
    EXPECT_EQ(a.train.graphs.size(), 160u);
    EXPECT_EQ(a.validation.graphs.size(), 0u);
    EXPECT_EQ(a.test.graphs.size(), 40u);
    EXPECT_EQ(a.train.feature_dim, a.test.feature_dim);
    EXPECT_EQ(a.validation.feature_dim, a.test.feature_dim);
    const auto b = build_dataset(corpus, split, small_embeddings(), {});
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.test, b.test);

    std::vector<std::vector<std::size_t>> nodes(5);
    for (const auto* ds : {&a.train, &a.test})
        for (const auto& g : ds->graphs) nodes[g.label].push_back(g.n_nodes);
    for (auto& v : nodes) {
        std::sort(v.begin(), v.end());
        const double median = v.size() % 2 ? double(v[v.size() / 2]) : 0.5 * double(v[v.size() / 2 - 1] + v[v.size() / 2]);
        EXPECT_GE(median, 2.0);
        EXPECT_LE(median, 18.0);
    }
}

TEST(GraphFile, RoundTripAndErrors) {
    TempDir tmp;
    const auto corpus = generate_synthetic_corpus(3, 10, 4);
    const auto split = split_dataset(corpus, {0.8, 0, 0.2}, 1);
    GraphBuildConfig cfg;
    cfg.policy = EdgePolicy::reading_order_chain();
    const auto data = build_dataset(corpus, split, small_embeddings(), cfg);
    save_graph_dataset(data.train, tmp / "t.graphs");
    const auto back = load_graph_dataset(tmp / "t.graphs");
    EXPECT_EQ(back, data.train);
    EXPECT_EQ(serialize_graph_dataset(back), serialize_graph_dataset(data.train));

    auto bytes = serialize_graph_dataset(data.train);
    EXPECT_THROW(deserialize_graph_dataset(bytes.substr(0, bytes.size() - 3)), CorruptFileError);
    bytes[4] = 42;
    EXPECT_THROW(deserialize_graph_dataset(bytes), VersionError);
    EXPECT_THROW(load_graph_dataset(tmp / "missing.graphs"), IoError);
}
