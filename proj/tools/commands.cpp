#include "commands.hpp"

#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "effgnn/error.hpp"
#include "effgnn/eval.hpp"
#include "json.hpp"

namespace effgnn::cli {

namespace {

void require_file(const fs::path& path, const char* what) {
    if (path.empty()) throw ValidationError(std::string(what) + " path is required");
    if (!fs::exists(path)) throw IoError(std::string(what) + " not found: " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

LoadOptions load_options(bool lenient) {
    LoadOptions opts;
    opts.strict = !lenient;
    opts.on_warning = [](std::string_view msg) { std::cerr << "effgnn: warning: " << msg << "\n"; };
    return opts;
}

Corpus read_corpus_file(const fs::path& path, bool lenient) {
    require_file(path, "corpus");
    return load_corpus(path, load_options(lenient));
}

void make_parent_dirs(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

}  // namespace

GraphBuildConfig GraphFlags::to_config() const {
    GraphBuildConfig c;
    if (edge_policy == "knn") c.policy = EdgePolicy::spatial_knn(knn_k);
    else if (edge_policy == "full") c.policy = EdgePolicy::fully_connected();
    else if (edge_policy == "chain") c.policy = EdgePolicy::reading_order_chain();
    else throw ValidationError("unknown edge policy '" + edge_policy + "'");
    if (c.policy.kind == EdgePolicy::Kind::SpatialKnn && knn_k < 1) throw ValidationError("--knn-k must be >= 1");
    if (use_image_features) {
        if (image_dim < 1) throw ValidationError("--image-dim must be >= 1");
        c.image_dim = image_dim;
    }
    c.layout_features = !no_layout_features;
    return c;
}

int cmd_synth(const SynthOptions& o) {
    SyntheticOptions opts;
    opts.image_embedding_dim = o.image_embedding_dim;
    const auto corpus = generate_synthetic_corpus(o.classes, o.docs_per_class, o.seed, opts);
    make_parent_dirs(o.out);
    save_corpus(corpus, o.out);
    std::cout << "wrote " << corpus.documents.size() << " documents across " << corpus.n_classes()
              << " classes to " << o.out.string() << "\n";
    return 0;
}

int cmd_embed(const EmbedOptions& o) {
    const auto corpus = read_corpus_file(o.corpus, o.lenient);
    auto cfg = o.word2vec;
    cfg.seed = o.seed;
    Word2VecStats stats;
    const auto emb = train_word2vec(corpus, cfg, &stats);
    make_parent_dirs(o.out);
    save_embeddings(emb, o.out);
    std::cout << "vocabulary " << emb.vocabulary.size() << " tokens, dim " << emb.dim << ", "
              << emb.parameter_count() << " parameters, final loss " << std::setprecision(5)
              << (stats.epoch_loss.empty() ? 0.0 : stats.epoch_loss.back()) << "\n";
    return 0;
}

int cmd_graphs(const GraphsOptions& o) {
    const auto corpus = read_corpus_file(o.corpus, o.lenient);
    require_file(o.embeddings, "embeddings");
    const auto emb = load_embeddings(o.embeddings);
    const auto split = split_dataset(corpus, o.ratios, o.seed);
    const auto data = build_dataset(corpus, split, emb, o.graph.to_config());

    fs::create_directories(o.out);
    save_graph_dataset(data.train, o.out / kTrainGraphs);
    save_graph_dataset(data.validation, o.out / kValGraphs);
    save_graph_dataset(data.test, o.out / kTestGraphs);

    nlohmann::ordered_json j;
    j["seed"] = o.seed;
    j["ratios"] = {o.ratios.train, o.ratios.validation, o.ratios.test};
    j["train"] = split.train;
    j["validation"] = split.validation;
    j["test"] = split.test;
    write_text(o.out / "split.json", j.dump());

    std::cout << "graphs: " << data.train.graphs.size() << " train, " << data.validation.graphs.size()
              << " validation, " << data.test.graphs.size() << " test; feature_dim " << data.train.feature_dim
              << ", edges " << to_string(data.train.build.policy) << "\n";
    return 0;
}

int cmd_train(const TrainOptions& o) {
    const auto train_path = o.graphs / kTrainGraphs;
    require_file(train_path, "training graphs");
    const auto train_set = load_graph_dataset(train_path);
    GraphDataset val_set;
    if (const auto val_path = o.graphs / kValGraphs; fs::exists(val_path)) val_set = load_graph_dataset(val_path);

    auto tc = o.train;
    tc.seed = o.seed;
    EpochCallback progress;
    if (!o.quiet) {
        progress = [&](std::size_t epoch, const EpochStats& s) {
            std::cout << "epoch " << std::setw(3) << epoch + 1 << "  loss " << std::fixed << std::setprecision(4)
                      << s.train_loss << "  train_acc " << s.train_accuracy;
            if (s.val_accuracy) std::cout << "  val_acc " << *s.val_accuracy;
            std::cout << "  " << std::setprecision(2) << s.wall_time << "s\n" << std::defaultfloat;
        };
    }
    const auto result = train(train_set, val_set, o.model, tc, progress);
    make_parent_dirs(o.out);
    save_model(result.model, o.out);

    if (!o.history.empty()) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& e : result.history.epochs) {
            nlohmann::ordered_json row;
            row["train_loss"] = e.train_loss;
            row["train_accuracy"] = e.train_accuracy;
            row["val_accuracy"] = e.val_accuracy ? nlohmann::ordered_json(*e.val_accuracy) : nullptr;
            row["wall_time_s"] = e.wall_time;
            arr.push_back(row);
        }
        write_text(o.history, arr.dump(2));
    }
    std::cout << "model: " << count_parameters(result.model) << " parameters, final train accuracy "
              << std::setprecision(4) << result.history.epochs.back().train_accuracy << ", written to "
              << o.out.string() << "\n";
    return 0;
}

int cmd_eval(const EvalOptions& o) {
    require_file(o.model, "model");
    const char* file = o.split == "train" ? kTrainGraphs : o.split == "val" ? kValGraphs
                       : o.split == "test"                    ? kTestGraphs
                                                              : nullptr;
    if (!file) throw ValidationError("--split must be one of train, val, test");
    require_file(o.graphs / file, "graphs");
    const auto model = load_model(o.model);
    const auto data = load_graph_dataset(o.graphs / file);
    const auto report = evaluate(model, data);

    std::size_t emb_params = 0;
    if (!o.embeddings.empty()) {
        require_file(o.embeddings, "embeddings");
        emb_params = load_embeddings(o.embeddings).parameter_count();
    }
    std::cout << format_eval_table(report, model.info.class_names, o.model_name, count_parameters(model), emb_params);
    if (!o.out.empty()) {
        make_parent_dirs(o.out);
        write_text(o.out, eval_report_to_json(report, model.info.class_names));
    }
    return 0;
}

int cmd_bench(const BenchOptions& o) {
    Corpus corpus = o.corpus.empty() ? generate_synthetic_corpus(o.classes, o.docs_per_class, o.seed)
                                     : read_corpus_file(o.corpus, o.lenient);
    auto cfg = o.config;
    cfg.graph = o.graph.to_config();
    cfg.word2vec.seed = o.seed;
    cfg.train.seed = o.seed;
    const auto split = split_dataset(corpus, o.ratios, o.seed);
    const auto report = run_benchmark(corpus, split, cfg);

    std::vector<CostEstimate> costs;
    if (!o.cost_model.empty()) {
        require_file(o.cost_model, "cost model");
        costs = estimate_cost(report, load_cost_model(o.cost_model));
    }
    std::cout << format_benchmark_table(report, costs);
    if (!o.out.empty()) {
        make_parent_dirs(o.out);
        write_text(o.out, benchmark_report_to_json(report, costs));
    }
    return 0;
}

int cmd_predict(const PredictOptions& o) {
    require_file(o.model, "model");
    require_file(o.embeddings, "embeddings");
    require_file(o.document, "document");
    const auto classifier = Classifier::load(o.model, o.embeddings);
    std::ifstream in(o.document);
    std::stringstream ss;
    ss << in.rdbuf();
    std::cout << prediction_to_json(classifier.classify_json(ss.str(), !o.lenient)) << "\n";
    return 0;
}

namespace {
InferenceServer* g_server = nullptr;
extern "C" void handle_stop_signal(int) {
    if (g_server) g_server->stop();
}
}  // namespace

int cmd_serve(const ServeOptions& o) {
    require_file(o.model, "model");
    require_file(o.embeddings, "embeddings");
    auto classifier = std::make_shared<const Classifier>(Classifier::load(o.model, o.embeddings));
    auto cfg = o.serve;
    cfg.strict = !o.lenient;
    InferenceServer server(classifier, cfg);
    const int port = server.bind();
    std::cout << "listening on " << cfg.host << ":" << port << std::endl;
    g_server = &server;
    std::signal(SIGINT, handle_stop_signal);
    std::signal(SIGTERM, handle_stop_signal);
    server.run();
    g_server = nullptr;
    return 0;
}

}  // namespace effgnn::cli
