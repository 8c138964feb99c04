#include "effgnn/bench.hpp"

#include <chrono>
#include <iomanip>
#include <sstream>

#include <sys/resource.h>

#include "binary_io.hpp"
#include "effgnn/error.hpp"
#include "effgnn/eval.hpp"
#include "json.hpp"

namespace effgnn {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

}  // namespace

std::optional<std::uint64_t> peak_resident_memory() {
    rusage usage{};
    if (getrusage(RUSAGE_SELF, &usage) != 0 || usage.ru_maxrss <= 0) return std::nullopt;
#if defined(__APPLE__)
    return static_cast<std::uint64_t>(usage.ru_maxrss);
#else
    return static_cast<std::uint64_t>(usage.ru_maxrss) * 1024u;
#endif
}

BenchmarkReport run_benchmark(const Corpus& corpus, const DatasetSplit& split, const BenchmarkConfig& config) {
    BenchmarkReport rep;
    const auto t_total = Clock::now();

    auto t0 = Clock::now();
    const auto embeddings = train_word2vec(corpus, config.word2vec);
    rep.word2vec_time_excluded = seconds_since(t0);

    t0 = Clock::now();
    const auto data = build_dataset(corpus, split, embeddings, config.graph);
    rep.graph_build_time = seconds_since(t0);

    t0 = Clock::now();
    const auto trained = train(data.train, data.validation, config.model, config.train);
    rep.train_wall_time = seconds_since(t0);

    Matrix<double> scores(data.test.graphs.size(), trained.model.n_classes);
    std::vector<std::uint32_t> labels;
    t0 = Clock::now();
    for (std::size_t i = 0; i < data.test.graphs.size(); ++i) {
        const auto probs = forward<float>(data.test.graphs[i], trained.model, false);
        for (std::size_t c = 0; c < probs.size(); ++c) scores(i, c) = probs[c];
    }
    rep.inference_wall_time = seconds_since(t0);
    rep.total_wall_time = seconds_since(t_total);

    for (const auto& g : data.test.graphs) labels.push_back(g.label);
    const auto eval = evaluate_scores(scores, labels);
    rep.test_accuracy = eval.accuracy;
    rep.test_macro_auc = eval.macro_auc;

    rep.train_size = data.train.graphs.size();
    rep.test_size = data.test.graphs.size();
    rep.throughput = rep.inference_wall_time > 0 ? static_cast<double>(rep.test_size) / rep.inference_wall_time : 0.0;
    rep.gnn_param_count = count_parameters(trained.model);
    rep.embedding_param_count = embeddings.parameter_count();
    rep.peak_resident_memory_bytes = peak_resident_memory();
    rep.epochs = trained.history.epochs.size();
    rep.batch_size = config.train.batch_size;
    return rep;
}

std::vector<CostEstimate> estimate_cost(const BenchmarkReport& report, const CostModel& cost_model) {
    std::vector<CostEstimate> out;
    const double hours = (report.train_wall_time + report.inference_wall_time) / 3600.0;
    for (const auto& inst : cost_model.instances) out.push_back({inst.instance_name, hours * inst.usd_per_hour});
    return out;
}

CostModel parse_cost_model(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("cost model: malformed JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("instances") || !j["instances"].is_array())
        throw ParseError("cost model: expected an object with an 'instances' array");
    CostModel model;
    for (const auto& item : j["instances"]) {
        if (!item.is_object() || !item.contains("instance_name") || !item.contains("usd_per_hour") ||
            !item["instance_name"].is_string() || !item["usd_per_hour"].is_number())
            throw ParseError("cost model: each instance needs 'instance_name' and 'usd_per_hour'");
        InstanceRate rate{item["instance_name"].get<std::string>(), item["usd_per_hour"].get<double>()};
        if (!(rate.usd_per_hour > 0))
            throw ValidationError("cost model: rate for '" + rate.instance_name + "' must be > 0");
        model.instances.push_back(std::move(rate));
    }
    return model;
}

CostModel load_cost_model(const std::filesystem::path& path) { return parse_cost_model(detail::read_file(path)); }

std::string benchmark_report_to_json(const BenchmarkReport& r, const std::vector<CostEstimate>& costs) {
    nlohmann::ordered_json j;
    j["batch_size"] = r.batch_size;
    j["epochs"] = r.epochs;
    j["train_size"] = r.train_size;
    j["test_size"] = r.test_size;
    j["train_wall_time_s"] = r.train_wall_time;
    j["inference_wall_time_s"] = r.inference_wall_time;
    j["throughput_graphs_per_s"] = r.throughput;
    j["graph_build_time_s"] = r.graph_build_time;
    j["word2vec_time_s_excluded"] = r.word2vec_time_excluded;
    j["total_wall_time_s"] = r.total_wall_time;
    j["gnn_param_count"] = r.gnn_param_count;
    j["embedding_param_count"] = r.embedding_param_count;
    if (r.peak_resident_memory_bytes) j["peak_resident_memory_bytes"] = *r.peak_resident_memory_bytes;
    else j["peak_resident_memory_bytes"] = nullptr;
    j["test_accuracy"] = r.test_accuracy;
    j["test_macro_auc"] = r.test_macro_auc;
    auto c = nlohmann::ordered_json::array();
    for (const auto& e : costs) c.push_back({{"instance_name", e.instance_name}, {"usd", e.usd}});
    j["cost_estimates"] = c;
    return j.dump(2);
}

std::string format_benchmark_table(const BenchmarkReport& r, const std::vector<CostEstimate>& costs) {
    std::ostringstream out;
    out << std::left << std::setw(12) << "Batch Size" << std::setw(8) << "Epochs" << std::setw(16) << "Training Time"
        << std::setw(18) << "Peak RSS (CPU)" << "Inference Time\n";
    std::ostringstream train_time, rss, infer;
    train_time << std::fixed << std::setprecision(2) << r.train_wall_time / 60.0 << " mins.";
    if (r.peak_resident_memory_bytes)
        rss << std::fixed << std::setprecision(0) << static_cast<double>(*r.peak_resident_memory_bytes) / (1 << 20) << "MB";
    else
        rss << "NA";
    infer << std::fixed << std::setprecision(3) << r.inference_wall_time << " seconds";
    out << std::setw(12) << r.batch_size << std::setw(8) << r.epochs << std::setw(16) << train_time.str()
        << std::setw(18) << rss.str() << infer.str() << "\n\n";
    out << std::fixed << std::setprecision(1);
    out << "train graphs " << r.train_size << ", test graphs " << r.test_size << ", throughput " << r.throughput
        << " graphs/s\n";
    out << std::setprecision(3) << "graph build " << r.graph_build_time << " s, word2vec " << r.word2vec_time_excluded
        << " s (excluded from training time), total " << r.total_wall_time << " s\n";
    out << "parameters: gnn " << r.gnn_param_count << " + word2vec " << r.embedding_param_count << "\n";
    out << std::setprecision(4) << "test accuracy " << r.test_accuracy << ", macro AUC " << r.test_macro_auc << "\n";
    if (!costs.empty()) {
        out << "\n" << std::setw(24) << "Instance Type" << "Training Cost\n";
        for (const auto& c : costs) out << std::setw(24) << c.instance_name << std::setprecision(6) << c.usd << " $\n";
    }
    return out.str();
}

}  // namespace effgnn
