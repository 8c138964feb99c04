#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "effgnn/bench.hpp"
#include "effgnn/gnn.hpp"
#include "effgnn/graph_build.hpp"
#include "effgnn/ingest.hpp"
#include "effgnn/serve.hpp"
#include "effgnn/text_embed.hpp"

namespace effgnn::cli {

namespace fs = std::filesystem;

// Flag-level view of the graph-build settings.
struct GraphFlags {
    std::string edge_policy = "knn";
    std::uint32_t knn_k = 3;
    bool use_image_features = false;
    std::uint32_t image_dim = 16;
    bool no_layout_features = false;

    GraphBuildConfig to_config() const;
};

struct SynthOptions {
    fs::path out;
    std::size_t classes = 5;
    std::size_t docs_per_class = 200;
    std::size_t image_embedding_dim = 0;
    std::uint64_t seed = 42;
};

struct EmbedOptions {
    fs::path corpus;
    fs::path out;
    Word2VecConfig word2vec;
    std::uint64_t seed = 42;
    bool lenient = false;
};

struct GraphsOptions {
    fs::path corpus;
    fs::path embeddings;
    fs::path out;  // directory receiving train/val/test graph files
    GraphFlags graph;
    SplitRatios ratios;
    std::uint64_t seed = 42;
    bool lenient = false;
};

struct TrainOptions {
    fs::path graphs;
    fs::path out;
    fs::path history;
    GnnConfig model;
    TrainConfig train;
    std::uint64_t seed = 42;
    bool quiet = false;
};

struct EvalOptions {
    fs::path model;
    fs::path graphs;
    fs::path embeddings;
    fs::path out;
    std::string split = "test";
    std::string model_name = "Eff-GNN + Word2Vec";
};

struct BenchOptions {
    fs::path corpus;
    fs::path out;
    fs::path cost_model;
    std::size_t classes = 5;
    std::size_t docs_per_class = 200;
    SplitRatios ratios;
    GraphFlags graph;
    BenchmarkConfig config;
    std::uint64_t seed = 42;
    bool lenient = false;
};

struct PredictOptions {
    fs::path model;
    fs::path embeddings;
    fs::path document;
    bool lenient = false;
};

struct ServeOptions {
    fs::path model;
    fs::path embeddings;
    ServeConfig serve;
    bool lenient = false;
};

inline constexpr const char* kTrainGraphs = "train.graphs";
inline constexpr const char* kValGraphs = "val.graphs";
inline constexpr const char* kTestGraphs = "test.graphs";

int cmd_synth(const SynthOptions& o);
int cmd_embed(const EmbedOptions& o);
int cmd_graphs(const GraphsOptions& o);
int cmd_train(const TrainOptions& o);
int cmd_eval(const EvalOptions& o);
int cmd_bench(const BenchOptions& o);
int cmd_predict(const PredictOptions& o);
int cmd_serve(const ServeOptions& o);

}  // namespace effgnn::cli
