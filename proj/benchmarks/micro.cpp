#include <benchmark/benchmark.h>

#include "effgnn/gnn.hpp"
#include "effgnn/graph_build.hpp"
#include "effgnn/ingest.hpp"
#include "effgnn/text_embed.hpp"

using namespace effgnn;

namespace {

const Corpus& corpus() {
    static const Corpus c = generate_synthetic_corpus(5, 40, 42);
    return c;
}

const WordEmbeddings& embeddings() {
    static const WordEmbeddings e = train_word2vec(corpus(), Word2VecConfig{.epochs = 1});
    return e;
}

const GraphDataset& dataset() {
    static const GraphDataset d = [] {
        std::vector<std::size_t> all(corpus().documents.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        return build_graphs(corpus(), all, embeddings(), {});
    }();
    return d;
}

void BM_Word2VecEpoch(benchmark::State& state) {
    Word2VecConfig cfg;
    cfg.dim = static_cast<std::size_t>(state.range(0));
    cfg.epochs = 1;
    for (auto _ : state) benchmark::DoNotOptimize(train_word2vec(corpus(), cfg));
    state.SetItemsProcessed(state.iterations() * std::int64_t(corpus().documents.size()));
}
BENCHMARK(BM_Word2VecEpoch)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_DocumentToGraph(benchmark::State& state) {
    GraphBuildConfig cfg;
    cfg.text_dim = embeddings().dim;
    cfg.policy = state.range(0) == 0 ? EdgePolicy::spatial_knn(3) : EdgePolicy::fully_connected();
    std::size_t i = 0;
    for (auto _ : state) {
        const auto& doc = corpus().documents[i++ % corpus().documents.size()];
        benchmark::DoNotOptimize(document_to_graph(doc, embeddings(), cfg));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_DocumentToGraph)->Arg(0)->Arg(1);

void BM_Forward(benchmark::State& state) {
    const auto& g = dataset().graphs;
    const auto model = make_model<float>(GnnConfig{}, dataset().feature_dim, 5, 1);
    std::size_t i = 0;
    for (auto _ : state) benchmark::DoNotOptimize(forward<float>(g[i++ % g.size()], model));
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Forward);

void BM_TrainStep(benchmark::State& state) {
    const auto& g = dataset().graphs;
    const auto model = make_model<float>(GnnConfig{}, dataset().feature_dim, 5, 1);
    const std::span<const DocGraph> batch(g.data(), 32);
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradients<float>(batch, model, ++seed));
    state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
