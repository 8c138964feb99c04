#include "effgnn/graph_build.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "binary_io.hpp"
#include "effgnn/error.hpp"
#include "graph_io.hpp"

namespace effgnn {

namespace {

constexpr std::string_view kGraphMagic = "EGGD";
constexpr std::uint32_t kGraphVersion = 1;

void add_edge(std::vector<Edge>& edges, std::size_t a, std::size_t b) {
    const auto lo = static_cast<std::uint32_t>(std::min(a, b));
    const auto hi = static_cast<std::uint32_t>(std::max(a, b));
    edges.emplace_back(lo, hi);
}

void canonicalize(std::vector<Edge>& edges) {
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

}  // namespace

std::string to_string(const EdgePolicy& policy) {
    switch (policy.kind) {
        case EdgePolicy::Kind::FullyConnected: return "full";
        case EdgePolicy::Kind::SpatialKnn: return "knn(" + std::to_string(policy.k) + ")";
        case EdgePolicy::Kind::ReadingOrderChain: return "chain";
    }
    return "unknown";
}

void validate_graph(const DocGraph& g) {
    const std::string where = "graph '" + g.doc_id + "': ";
    if (g.n_nodes == 0) throw ValidationError(where + "graph has no nodes");
    if (g.node_features.rows != g.n_nodes) throw ValidationError(where + "feature rows != n_nodes");
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        const auto [a, b] = g.edges[i];
        if (a == b) throw ValidationError(where + "self-edge " + std::to_string(a));
        if (a > b) throw ValidationError(where + "edge endpoints must satisfy i < j");
        if (b >= g.n_nodes) throw ValidationError(where + "edge endpoint out of range");
        if (i > 0 && !(g.edges[i - 1] < g.edges[i])) throw ValidationError(where + "edges must be sorted and unique");
    }
    for (float v : g.node_features.data)
        if (!std::isfinite(v)) throw ValidationError(where + "non-finite node feature");
}

std::vector<Edge> build_edges(std::span<const BBox> boxes, const EdgePolicy& policy) {
    const std::size_t n = boxes.size();
    std::vector<Edge> edges;
    if (n < 2) return edges;
    switch (policy.kind) {
        case EdgePolicy::Kind::FullyConnected:
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j) add_edge(edges, i, j);
            break;
        case EdgePolicy::Kind::ReadingOrderChain: {
            std::vector<std::size_t> order(n);
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                if (boxes[a].y0 != boxes[b].y0) return boxes[a].y0 < boxes[b].y0;
                if (boxes[a].x0 != boxes[b].x0) return boxes[a].x0 < boxes[b].x0;
                return a < b;
            });
            for (std::size_t i = 0; i + 1 < n; ++i) add_edge(edges, order[i], order[i + 1]);
            break;
        }
        case EdgePolicy::Kind::SpatialKnn: {
            if (policy.k < 1) throw ValidationError("SpatialKnn requires k >= 1");
            const std::size_t k = std::min<std::size_t>(policy.k, n - 1);
            std::vector<std::pair<double, std::size_t>> dist;
            for (std::size_t i = 0; i < n; ++i) {
                dist.clear();
                for (std::size_t j = 0; j < n; ++j) {
                    if (j == i) continue;
                    const double dx = boxes[i].cx() - boxes[j].cx();
                    const double dy = boxes[i].cy() - boxes[j].cy();
                    dist.emplace_back(dx * dx + dy * dy, j);
                }
                // Pair ordering breaks distance ties by lower index.
                std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
                for (std::size_t t = 0; t < k; ++t) add_edge(edges, i, dist[t].second);
            }
            break;
        }
    }
    canonicalize(edges);
    return edges;
}

std::vector<float> reduce_image_embedding(std::span<const double> vec, std::size_t target_dim) {
    if (vec.empty()) throw ValidationError("image embedding must be non-empty");
    if (target_dim < 1) throw ValidationError("image target dimension must be >= 1");
    std::vector<float> out(target_dim, 0.0f);
    const std::size_t len = vec.size();
    if (len <= target_dim) {
        for (std::size_t i = 0; i < len; ++i) out[i] = static_cast<float>(vec[i]);
        return out;
    }
    const std::size_t base = len / target_dim;
    const std::size_t extra = len % target_dim;
    std::size_t pos = 0;
    for (std::size_t c = 0; c < target_dim; ++c) {
        const std::size_t size = base + (c < extra ? 1 : 0);
        double sum = 0;
        for (std::size_t i = 0; i < size; ++i) sum += vec[pos + i];
        out[c] = static_cast<float>(sum / static_cast<double>(size));
        pos += size;
    }
    return out;
}

DocGraph document_to_graph(const DocumentAnnotation& doc, const WordEmbeddings& embeddings,
                           const GraphBuildConfig& config) {
    if (config.image_dim && *config.image_dim < 1) throw ValidationError("image_dim must be >= 1");
    GraphBuildConfig cfg = config;
    cfg.text_dim = static_cast<std::uint32_t>(embeddings.dim);
    const std::size_t f = cfg.feature_dim();
    const std::size_t n = doc.regions.size();

    DocGraph g;
    g.doc_id = doc.doc_id;
    g.label = doc.label;
    g.n_nodes = n;
    g.node_features = Matrix<float>(n, f, 0.0f);

    std::vector<BBox> boxes;
    boxes.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = doc.regions[i];
        boxes.push_back(r.bbox);
        auto row = g.node_features.row(i);
        std::size_t col = 0;

        const auto text = embed_region_text(r.text, embeddings);
        std::copy(text.begin(), text.end(), row.begin());
        col += text.size();

        if (cfg.layout_features) {
            row[col + static_cast<std::size_t>(r.category)] = 1.0f;
            col += kNumCategories;
            row[col++] = static_cast<float>(r.bbox.cx() / doc.page_width);
            row[col++] = static_cast<float>(r.bbox.cy() / doc.page_height);
            row[col++] = static_cast<float>(r.bbox.width() / doc.page_width);
            row[col++] = static_cast<float>(r.bbox.height() / doc.page_height);
        }
        if (cfg.image_dim && r.image_embedding) {
            const auto img = reduce_image_embedding(*r.image_embedding, *cfg.image_dim);
            std::copy(img.begin(), img.end(), row.begin() + static_cast<std::ptrdiff_t>(col));
        }
    }
    g.edges = build_edges(boxes, cfg.policy);
    return g;
}

GraphDataset build_graphs(const Corpus& corpus, std::span<const std::size_t> indices,
                          const WordEmbeddings& embeddings, GraphBuildConfig config) {
    config.text_dim = static_cast<std::uint32_t>(embeddings.dim);
    GraphDataset ds;
    ds.class_names = corpus.class_names;
    ds.build = config;
    ds.feature_dim = config.feature_dim();
    ds.graphs.reserve(indices.size());
    for (auto idx : indices) {
        if (idx >= corpus.documents.size()) throw ValidationError("split index out of range");
        ds.graphs.push_back(document_to_graph(corpus.documents[idx], embeddings, config));
    }
    return ds;
}

SplitDatasets build_dataset(const Corpus& corpus, const DatasetSplit& split, const WordEmbeddings& embeddings,
                            GraphBuildConfig config) {
    return {build_graphs(corpus, split.train, embeddings, config),
            build_graphs(corpus, split.validation, embeddings, config),
            build_graphs(corpus, split.test, embeddings, config)};
}

namespace detail {

void write_build_config(BinaryWriter& w, const GraphBuildConfig& c) {
    w.u8(static_cast<std::uint8_t>(c.policy.kind));
    w.u32(c.policy.k);
    w.u8(c.layout_features ? 1 : 0);
    w.u32(c.image_dim.value_or(0));
    w.u32(c.text_dim);
}

GraphBuildConfig read_build_config(BinaryReader& r) {
    GraphBuildConfig c;
    const auto kind = r.u8();
    if (kind > 2) r.fail("unknown edge policy " + std::to_string(kind));
    c.policy.kind = static_cast<EdgePolicy::Kind>(kind);
    c.policy.k = r.u32();
    const auto layout = r.u8();
    if (layout > 1) r.fail("bad layout flag");
    c.layout_features = layout == 1;
    if (const auto img = r.u32(); img > 0) c.image_dim = img;
    c.text_dim = r.u32();
    return c;
}

}  // namespace detail

std::string serialize_graph_dataset(const GraphDataset& ds) {
    detail::BinaryWriter w;
    w.bytes(kGraphMagic);
    w.u32(kGraphVersion);
    w.u32(static_cast<std::uint32_t>(ds.n_classes()));
    w.u32(static_cast<std::uint32_t>(ds.feature_dim));
    w.u32(static_cast<std::uint32_t>(ds.graphs.size()));
    for (const auto& name : ds.class_names) w.str(name);
    detail::write_build_config(w, ds.build);
    for (const auto& g : ds.graphs) {
        if (g.feature_dim() != ds.feature_dim) throw ShapeError("graph '" + g.doc_id + "' feature_dim mismatch");
        w.str(g.doc_id);
        w.u32(g.label);
        w.u32(static_cast<std::uint32_t>(g.n_nodes));
        w.u32(static_cast<std::uint32_t>(g.edges.size()));
        for (const auto& [a, b] : g.edges) {
            w.u32(a);
            w.u32(b);
        }
        w.f32s(g.node_features.data);
    }
    return w.buffer();
}

GraphDataset deserialize_graph_dataset(std::string bytes, std::string what) {
    detail::BinaryReader r(std::move(bytes), std::move(what));
    r.expect_magic(kGraphMagic);
    const auto version = r.u32();
    if (version != kGraphVersion)
        throw VersionError("graph dataset version " + std::to_string(version) + " is not supported (expected " +
                           std::to_string(kGraphVersion) + ")");
    GraphDataset ds;
    const auto n_classes = r.u32();
    ds.feature_dim = r.u32();
    const auto n_graphs = r.u32();
    for (std::uint32_t c = 0; c < n_classes; ++c) ds.class_names.push_back(r.str());
    ds.build = detail::read_build_config(r);
    if (ds.build.feature_dim() != ds.feature_dim) r.fail("feature_dim disagrees with build config");
    for (std::uint32_t i = 0; i < n_graphs; ++i) {
        DocGraph g;
        g.doc_id = r.str();
        g.label = r.u32();
        if (g.label >= n_classes) r.fail("graph label out of range");
        g.n_nodes = r.u32();
        const auto n_edges = r.u32();
        for (std::uint32_t e = 0; e < n_edges; ++e) {
            const auto a = r.u32();
            const auto b = r.u32();
            g.edges.emplace_back(a, b);
        }
        if (g.n_nodes > (1u << 24)) r.fail("implausible node count");
        g.node_features = Matrix<float>(g.n_nodes, ds.feature_dim);
        r.f32s(g.node_features.data);
        try {
            validate_graph(g);
        } catch (const ValidationError& e) {
            r.fail(e.what());
        }
        ds.graphs.push_back(std::move(g));
    }
    r.expect_end();
    return ds;
}

void save_graph_dataset(const GraphDataset& dataset, const std::filesystem::path& path) {
    detail::BinaryWriter w;
    w.bytes(serialize_graph_dataset(dataset));
    w.write_file(path);
}

GraphDataset load_graph_dataset(const std::filesystem::path& path) {
    return deserialize_graph_dataset(detail::read_file(path), path.string());
}

}  // namespace effgnn
