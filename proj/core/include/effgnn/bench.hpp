#pragma once

// End-to-end resource benchmark: times each pipeline phase, counts
// parameters, and converts wall time into instance cost.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "effgnn/gnn.hpp"
#include "effgnn/graph_build.hpp"
#include "effgnn/ingest.hpp"
#include "effgnn/text_embed.hpp"

namespace effgnn {

struct BenchmarkConfig {
    Word2VecConfig word2vec;
    GraphBuildConfig graph;
    GnnConfig model;
    TrainConfig train;
};

struct BenchmarkReport {
    // Timed separately; train_wall_time covers the graph classifier only.
    double word2vec_time_excluded = 0;
    double graph_build_time = 0;
    double train_wall_time = 0;
    double inference_wall_time = 0;  // whole test set, single-threaded
    double total_wall_time = 0;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    double throughput = 0;  // test graphs per second
    std::size_t gnn_param_count = 0;
    std::size_t embedding_param_count = 0;
    std::optional<std::uint64_t> peak_resident_memory_bytes;  // process RSS high-water mark, not GPU memory
    std::size_t epochs = 0;
    std::size_t batch_size = 0;
    double test_accuracy = 0;
    double test_macro_auc = 0;
};

struct InstanceRate {
    std::string instance_name;
    double usd_per_hour = 0;
};

struct CostModel {
    std::vector<InstanceRate> instances;
};

struct CostEstimate {
    std::string instance_name;
    double usd = 0;
};

/// Peak resident set size of this process, when the platform reports it.
std::optional<std::uint64_t> peak_resident_memory();

/// Runs embed -> build -> train -> inference on an in-memory corpus.
BenchmarkReport run_benchmark(const Corpus& corpus, const DatasetSplit& split, const BenchmarkConfig& config);

/// (train + inference seconds) / 3600 * rate, per instance.
std::vector<CostEstimate> estimate_cost(const BenchmarkReport& report, const CostModel& cost_model);

/// {"instances": [{"instance_name": "...", "usd_per_hour": 0.0116}, ...]}
CostModel parse_cost_model(const std::string& json_text);
CostModel load_cost_model(const std::filesystem::path& path);

std::string benchmark_report_to_json(const BenchmarkReport& report, const std::vector<CostEstimate>& costs);
std::string format_benchmark_table(const BenchmarkReport& report, const std::vector<CostEstimate>& costs);

}  // namespace effgnn
