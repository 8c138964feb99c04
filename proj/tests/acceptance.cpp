// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "effgnn/bench.hpp"
#include "effgnn/serve.hpp"
#include "httplib.h"
#include "json.hpp"
#include "support.hpp"

using namespace effgnn;
using namespace effgnn::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << v;
    return s.str();
}

const BenchmarkReport& reference_run() {
    static const BenchmarkReport report = [] {
        const auto corpus = generate_synthetic_corpus(5, 200, 42);
        const auto split = split_dataset(corpus, {0.8, 0.0, 0.2}, 42);
        BenchmarkConfig cfg;
        cfg.word2vec.seed = 42;
        cfg.train.seed = 42;
        return run_benchmark(corpus, split, cfg);
    }();
    return report;
}

Outcome end_to_end_accuracy() {
    const auto& r = reference_run();
    return {r.test_accuracy >= 0.90 && r.test_macro_auc >= 0.95,
            "test accuracy " + fmt(r.test_accuracy) + " (>= 0.90), macro AUC " + fmt(r.test_macro_auc) +
                " (>= 0.95), " + std::to_string(r.test_size) + " test documents"};
}

Outcome training_time() {
    const auto& r = reference_run();
    return {r.train_wall_time <= 300.0 && r.epochs == 50 && r.batch_size == 32,
            fmt(r.train_wall_time, 1) + " s for " + std::to_string(r.epochs) + " epochs at batch " +
                std::to_string(r.batch_size) + " (<= 300 s)"};
}

Outcome inference_throughput() {
    const auto& r = reference_run();
    return {r.throughput >= 1000.0, fmt(r.throughput, 0) + " graphs/s single-threaded over " +
                                        std::to_string(r.test_size) + " test graphs (>= 1000)"};
}

Outcome model_size() {
    const auto n = count_parameters(GnnConfig{}, 73, 5);
    return {n < 150000, std::to_string(n) + " parameters at feature_dim 73 (< 150000)"};
}

Outcome gradient_oracle() {
    const auto t0 = Clock::now();
    double worst = 0;
    std::size_t checked = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(derive_seed(seed, 77));
        const auto model = make_model<double>(tiny_config(), 6, 2, seed);
        const auto r = finite_difference_check(model, tiny_batch(rng, 3), seed);
        worst = std::max(worst, r.max_rel_error);
        checked += r.checked;
    }
    const double elapsed = seconds_since(t0);
    std::ostringstream s;
    s << "max relative error " << std::scientific << std::setprecision(2) << worst << " over " << checked
      << " parameters, 10 seeds, " << fmt(elapsed, 1) << " s";
    return {worst < 1e-4 && elapsed < 30.0, s.str()};
}

Outcome permutation_invariance() {
    const auto t0 = Clock::now();
    Rng rng(2024);
    const auto model = make_model<float>(GnnConfig{}, 73, 5, 7);
    std::size_t mismatches = 0;
    for (int t = 0; t < 100; ++t) {
        auto g = random_graph(rng, 1 + rng.below(20), 73, 5);
        if (t % 4 == 0 && g.n_nodes > 2) {
            // Duplicate rows force the tie-breaking path.
            const auto src = g.node_features.row(0);
            std::copy(src.begin(), src.end(), g.node_features.row(g.n_nodes - 1).begin());
        }
        const auto pg = permute_graph(g, random_permutation(rng, g.n_nodes));
        if (forward<float>(g, model) != forward<float>(pg, model)) ++mismatches;
    }
    const double elapsed = seconds_since(t0);
    return {mismatches == 0 && elapsed < 10.0,
            std::to_string(mismatches) + " of 100 permuted graphs differ, " + fmt(elapsed, 2) + " s"};
}

Outcome sortpool_oracle() {
    Rng rng(99);
    std::size_t mismatches = 0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 1 + rng.below(30), k = 1 + rng.below(20), c = 1 + rng.below(8);
        Matrix<float> z(n, c);
        const bool coarse = t % 2 == 0;
        for (auto& v : z.data)
            v = coarse ? static_cast<float>(rng.below(3)) : static_cast<float>(rng.uniform(-1, 1));
        if (sort_pooling(z, k).pooled != sort_pool_oracle(z, k)) ++mismatches;
    }
    return {mismatches == 0, std::to_string(mismatches) + " of 1000 instances differ from full sort"};
}

Outcome auc_oracle_equivalence() {
    Rng rng(7);
    double worst = 0;
    int tables = 0;
    while (tables < 200) {
        const std::size_t n = 2 + rng.below(60), k = 2 + rng.below(5);
        Matrix<double> s(n, k);
        const bool ties = tables % 2 == 0;
        for (auto& v : s.data) v = ties ? double(rng.below(5)) / 4.0 : rng.uniform();
        std::vector<std::uint32_t> labels(n);
        for (auto& l : labels) l = std::uint32_t(rng.below(k));
        const auto want = auc_oracle(s, labels);
        if (std::none_of(want.per_class.begin(), want.per_class.end(), [](auto& v) { return v.has_value(); }))
            continue;
        const auto got = roc_auc_ovr(s, labels);
        for (std::size_t c = 0; c < k; ++c) {
            if (got.per_class[c].has_value() != want.per_class[c].has_value()) return {false, "defined classes differ"};
            if (got.per_class[c]) worst = std::max(worst, std::abs(*got.per_class[c] - *want.per_class[c]));
        }
        worst = std::max(worst, std::abs(got.macro - want.macro));
        ++tables;
    }
    std::ostringstream s;
    s << "max deviation " << std::scientific << std::setprecision(2) << worst << " over 200 tables";
    return {worst <= 1e-12, s.str()};
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

bool run_pipeline(const fs::path& dir, std::string& error) {
    const std::string cli = EFFGNN_CLI_PATH;
    const std::vector<std::string> steps{
        "synth --out " + q(dir / "corpus.jsonl") + " --classes 5 --docs-per-class 200 --seed 42",
        "embed --corpus " + q(dir / "corpus.jsonl") + " --out " + q(dir / "emb.bin") + " --seed 42",
        "graphs --corpus " + q(dir / "corpus.jsonl") + " --embeddings " + q(dir / "emb.bin") + " --out " +
            q(dir / "graphs") + " --seed 42",
        "train --graphs " + q(dir / "graphs") + " --out " + q(dir / "model.bin") + " --seed 42 --quiet",
    };
    for (const auto& step : steps) {
        const auto r = run_command(cli + " " + step);
        if (r.code != 0) {
            error = step.substr(0, step.find(' ')) + " exited " + std::to_string(r.code) + ": " + r.err;
            return false;
        }
    }
    return true;
}

struct PipelineDirs {
    TempDir a, b;
    bool ok = false;
    std::string error;
};

PipelineDirs& pipelines() {
    static PipelineDirs d;
    static const bool ran = [] {
        d.ok = run_pipeline(d.a.path(), d.error) && run_pipeline(d.b.path(), d.error);
        return true;
    }();
    (void)ran;
    return d;
}

Outcome determinism() {
    auto& p = pipelines();
    if (!p.ok) return {false, p.error};
    std::vector<std::string> differing;
    const std::vector<std::string> files{"corpus.jsonl",        "emb.bin",          "graphs/train.graphs",
                                         "graphs/val.graphs",   "graphs/test.graphs", "graphs/split.json",
                                         "model.bin"};
    for (const auto& f : files)
        if (read_bytes(p.a / f) != read_bytes(p.b / f) || !fs::exists(p.a / f)) differing.push_back(f);
    std::string detail = "embeddings, graphs and model from two seeded runs: ";
    if (differing.empty()) return {true, detail + "byte-identical"};
    for (const auto& f : differing) detail += f + " ";
    return {false, detail + "differ"};
}

Outcome serve_cli_equivalence() {
    auto& p = pipelines();
    if (!p.ok) return {false, p.error};
    const auto corpus = load_corpus(p.a / "corpus.jsonl");
    const auto split = nlohmann::json::parse(read_bytes(p.a / "graphs/split.json"));
    const auto test_idx = split.at("test").get<std::vector<std::size_t>>();

    auto classifier = std::make_shared<const Classifier>(Classifier::load(p.a / "model.bin", p.a / "emb.bin"));
    ServeConfig cfg;
    cfg.port = 0;
    InferenceServer server(classifier, cfg);
    const int port = server.bind();
    server.start();
    httplib::Client http("127.0.0.1", port);

    std::size_t equal = 0;
    std::string first_problem;
    for (std::size_t i = 0; i < 20; ++i) {
        const auto& doc = corpus.documents[test_idx[i * test_idx.size() / 20]];
        const auto body = document_to_json(doc);
        const auto doc_path = p.a / ("doc" + std::to_string(i) + ".json");
        write_bytes(doc_path, body);
        const auto cli = run_command(std::string(EFFGNN_CLI_PATH) + " predict --model " + q(p.a / "model.bin") +
                                     " --embeddings " + q(p.a / "emb.bin") + " --document " + q(doc_path));
        const auto res = http.Post("/classify", body, "application/json");
        if (cli.code != 0 || !res || res->status != 200) {
            if (first_problem.empty()) first_problem = "request failed for " + doc.doc_id;
            continue;
        }
        const auto from_cli = nlohmann::json::parse(cli.out);
        const auto from_http = nlohmann::json::parse(res->body);
        if (from_cli.at("probabilities") == from_http.at("probabilities") &&
            from_cli.at("predicted_class") == from_http.at("predicted_class"))
            ++equal;
        else if (first_problem.empty())
            first_problem = "probabilities differ for " + doc.doc_id;
    }
    server.stop();
    std::string detail = std::to_string(equal) + " of 20 documents give identical probabilities";
    if (!first_problem.empty()) detail += "; " + first_problem;
    return {equal == 20, detail};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"end-to-end synthetic accuracy", end_to_end_accuracy},
        {"training efficiency", training_time},
        {"inference throughput", inference_throughput},
        {"model size", model_size},
        {"gradient oracle", gradient_oracle},
        {"permutation invariance", permutation_invariance},
        {"sort pooling oracle equivalence", sortpool_oracle},
        {"AUC oracle equivalence", auc_oracle_equivalence},
        {"determinism", determinism},
        {"serve/CLI equivalence", serve_cli_equivalence},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << ": " << o.detail << std::endl;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
