#pragma once

// Document -> graph conversion. One node per layout region; node features are
//   [ text mean-embedding (d) | category one-hot (5) | cx/W, cy/H, w/W, h/H (4) | reduced image (r) ]
// with the layout block optional and the image block present only when an
// image dimension is configured.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "effgnn/ingest.hpp"
#include "effgnn/matrix.hpp"
#include "effgnn/text_embed.hpp"

namespace effgnn {

struct EdgePolicy {
    enum class Kind : std::uint8_t { FullyConnected = 0, SpatialKnn = 1, ReadingOrderChain = 2 };

    Kind kind = Kind::SpatialKnn;
    std::uint32_t k = 3;  // SpatialKnn only

    static EdgePolicy fully_connected() { return {Kind::FullyConnected, 0}; }
    static EdgePolicy spatial_knn(std::uint32_t k) { return {Kind::SpatialKnn, k}; }
    static EdgePolicy reading_order_chain() { return {Kind::ReadingOrderChain, 0}; }

    bool operator==(const EdgePolicy&) const = default;
};

std::string to_string(const EdgePolicy& policy);

struct GraphBuildConfig {
    EdgePolicy policy;
    bool layout_features = true;
    std::optional<std::uint32_t> image_dim;  // reduced image width r, or no image block
    std::uint32_t text_dim = 0;              // set from the embeddings at build time

    std::size_t feature_dim() const noexcept {
        return text_dim + (layout_features ? kNumCategories + 4 : 0) + image_dim.value_or(0);
    }

    bool operator==(const GraphBuildConfig&) const = default;
};

using Edge = std::pair<std::uint32_t, std::uint32_t>;

struct DocGraph {
    std::string doc_id;
    std::uint32_t label = 0;
    std::size_t n_nodes = 0;
    Matrix<float> node_features;  // n_nodes x feature_dim
    std::vector<Edge> edges;      // undirected, first < second, sorted, unique

    std::size_t feature_dim() const noexcept { return node_features.cols; }

    bool operator==(const DocGraph&) const = default;
};

struct GraphDataset {
    std::vector<std::string> class_names;
    GraphBuildConfig build;
    std::size_t feature_dim = 0;
    std::vector<DocGraph> graphs;

    std::size_t n_classes() const noexcept { return class_names.size(); }

    bool operator==(const GraphDataset&) const = default;
};

struct SplitDatasets {
    GraphDataset train;
    GraphDataset validation;
    GraphDataset test;
};

/// Throws ValidationError on duplicate/self/out-of-range edges, non-finite
/// features, or a row count that disagrees with n_nodes.
void validate_graph(const DocGraph& graph);

/// Edges for nodes at the given centroids. Reading order sorts by (y0, x0)
/// then index, so it needs the boxes rather than centroids.
std::vector<Edge> build_edges(std::span<const BBox> boxes, const EdgePolicy& policy);

/// Chunked mean-pooling to target_dim values; shorter inputs are copied and
/// zero-padded.
std::vector<float> reduce_image_embedding(std::span<const double> vec, std::size_t target_dim);

DocGraph document_to_graph(const DocumentAnnotation& doc, const WordEmbeddings& embeddings,
                           const GraphBuildConfig& config);

/// Builds train/validation/test datasets. config.text_dim is overwritten with
/// the embedding dimension.
SplitDatasets build_dataset(const Corpus& corpus, const DatasetSplit& split, const WordEmbeddings& embeddings,
                            GraphBuildConfig config);

/// Graphs for the listed corpus documents, in list order.
GraphDataset build_graphs(const Corpus& corpus, std::span<const std::size_t> indices,
                          const WordEmbeddings& embeddings, GraphBuildConfig config);

std::string serialize_graph_dataset(const GraphDataset& dataset);
GraphDataset deserialize_graph_dataset(std::string bytes, std::string what = "graph dataset");
void save_graph_dataset(const GraphDataset& dataset, const std::filesystem::path& path);
GraphDataset load_graph_dataset(const std::filesystem::path& path);

}  // namespace effgnn
