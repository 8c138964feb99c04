// effgnn: staged document-graph classification pipeline.
//
//   synth -> embed -> graphs -> train -> eval, plus bench, predict and serve.
//
// Every subcommand accepts --config FILE, a flat JSON object keyed by long
// flag names ({"epochs": 20, "batch-size": 16}). Explicit flags win over the
// file, which wins over built-in defaults.

#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "effgnn/error.hpp"
#include "json.hpp"

namespace {

using namespace effgnn;
using namespace effgnn::cli;

// Fills options that were not given on the command line from a flat JSON
// object keyed by long flag names.
void apply_config_file(CLI::App* sub, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CLI::FileError::Missing(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must contain a JSON object");
    auto scalar = [](const nlohmann::json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return std::string(v.get<bool>() ? "true" : "false");
        return v.dump();
    };
    for (const auto& [key, value] : j.items()) {
        CLI::Option* opt = sub->get_option_no_throw("--" + key);
        if (!opt || key == "config") throw CLI::ConversionError("unknown config key '" + key + "'");
        if (opt->count() > 0) continue;
        if (value.is_array()) {
            std::vector<std::string> parts;
            for (const auto& v : value) parts.push_back(scalar(v));
            opt->add_result(parts);
        } else {
            opt->add_result(scalar(value));
        }
        opt->run_callback();
    }
}

CLI::App* add_command(CLI::App& app, const char* name, const char* description) {
    auto* sub = app.add_subcommand(name, description);
    sub->add_option("--config", "JSON file of flag values; explicit flags take precedence")
        ->check(CLI::ExistingFile);
    return sub;
}

void add_seed(CLI::App* sub, std::uint64_t& seed) {
    sub->add_option("--seed", seed, "Seed propagated to every randomized stage")->capture_default_str();
}

void add_graph_flags(CLI::App* sub, GraphFlags& g) {
    sub->add_option("--edge-policy", g.edge_policy, "Edge construction between regions")
        ->check(CLI::IsMember({"knn", "full", "chain"}))
        ->capture_default_str();
    sub->add_option("--knn-k", g.knn_k, "Neighbours per region for the knn policy")->capture_default_str();
    sub->add_flag("--use-image-features", g.use_image_features, "Append reduced region image embeddings");
    sub->add_option("--image-dim", g.image_dim, "Reduced image embedding width")->capture_default_str();
    sub->add_flag("--no-layout-features", g.no_layout_features, "Drop category one-hot and geometry features");
}

void add_ratio_flags(CLI::App* sub, SplitRatios& r) {
    sub->add_option("--train-ratio", r.train, "Fraction of each class used for training")->capture_default_str();
    sub->add_option("--val-ratio", r.validation, "Fraction of each class used for validation")->capture_default_str();
    sub->add_option("--test-ratio", r.test, "Fraction of each class used for testing")->capture_default_str();
}

void add_word2vec_flags(CLI::App* sub, Word2VecConfig& w, const std::string& prefix) {
    sub->add_option("--" + prefix + "dim", w.dim, "Word vector dimension")->capture_default_str();
    sub->add_option("--" + prefix + "window", w.window, "Skip-gram context window")->capture_default_str();
    sub->add_option("--" + prefix + "negatives", w.negatives, "Negative samples per pair")->capture_default_str();
    sub->add_option("--" + prefix + "epochs", w.epochs, "Passes over the corpus")->capture_default_str();
    sub->add_option("--" + prefix + "min-count", w.min_count, "Minimum token frequency")->capture_default_str();
    sub->add_option("--" + prefix + "lr", w.learning_rate, "Initial learning rate (linear decay)")
        ->capture_default_str();
}

void add_model_flags(CLI::App* sub, GnnConfig& m, TrainConfig& t) {
    sub->add_option("--epochs", t.epochs, "Training epochs")->capture_default_str();
    sub->add_option("--batch-size", t.batch_size, "Graphs per mini-batch")->capture_default_str();
    sub->add_option("--lr", t.adam.learning_rate, "Adam learning rate")->capture_default_str();
    sub->add_option("--beta1", t.adam.beta1, "Adam beta1")->capture_default_str();
    sub->add_option("--beta2", t.adam.beta2, "Adam beta2")->capture_default_str();
    sub->add_option("--adam-eps", t.adam.epsilon, "Adam epsilon")->capture_default_str();
    sub->add_option("--early-stopping-patience", t.early_stopping_patience,
                    "Stop after this many epochs without validation gain (0 = off)")
        ->capture_default_str();
    sub->add_option("--conv-channels", m.conv_channels, "Graph conv layer widths")
        ->delimiter(',')
        ->capture_default_str();
    sub->add_option("--sortpool-k", m.sortpool_k, "Rows kept by sort pooling")->capture_default_str();
    sub->add_flag("!--no-conv1d", m.conv1d_enabled, "Disable the 1D convolution head");
    sub->add_option("--conv1d-channels-1", m.conv1d_channels_1, "First 1D conv output channels")
        ->capture_default_str();
    sub->add_option("--conv1d-channels-2", m.conv1d_channels_2, "Second 1D conv output channels")
        ->capture_default_str();
    sub->add_option("--conv1d-kernel-2", m.conv1d_kernel_2, "Second 1D conv kernel")->capture_default_str();
    sub->add_option("--conv1d-stride-2", m.conv1d_stride_2, "Second 1D conv stride")->capture_default_str();
    sub->add_option("--pool-size", m.pool_size, "Max-pool window between 1D convs")->capture_default_str();
    sub->add_option("--dense-hidden", m.dense_hidden, "Hidden dense width (0 = none)")->capture_default_str();
    sub->add_option("--dropout", m.dropout_rate, "Dropout rate at the dense layer")->capture_default_str();
}

std::string one_line(std::string s) {
    for (auto& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Document image classification with sort-pooling graph networks"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    SynthOptions synth;
    auto* s = add_command(app, "synth", "Generate a synthetic annotation corpus");
    s->add_option("--out", synth.out, "Corpus file to write")->required();
    s->add_option("--classes", synth.classes, "Number of classes")->capture_default_str();
    s->add_option("--docs-per-class", synth.docs_per_class, "Documents per class")->capture_default_str();
    s->add_option("--image-embedding-dim", synth.image_embedding_dim, "Per-region image vector length (0 = none)")
        ->capture_default_str();
    add_seed(s, synth.seed);

    EmbedOptions embed;
    auto* e = add_command(app, "embed", "Train skip-gram word embeddings on region texts");
    e->add_option("--corpus", embed.corpus, "Corpus file")->required();
    e->add_option("--out", embed.out, "Embedding file to write")->required();
    add_word2vec_flags(e, embed.word2vec, "");
    e->add_flag("--lenient", embed.lenient, "Warn on unknown corpus keys instead of failing");
    add_seed(e, embed.seed);

    GraphsOptions graphs;
    auto* g = add_command(app, "graphs", "Split the corpus and convert documents to graphs");
    g->add_option("--corpus", graphs.corpus, "Corpus file")->required();
    g->add_option("--embeddings", graphs.embeddings, "Embedding file")->required();
    g->add_option("--out", graphs.out, "Output directory for train/val/test graph files")->required();
    add_graph_flags(g, graphs.graph);
    add_ratio_flags(g, graphs.ratios);
    g->add_flag("--lenient", graphs.lenient, "Warn on unknown corpus keys instead of failing");
    add_seed(g, graphs.seed);

    TrainOptions tr;
    auto* t = add_command(app, "train", "Train the graph classifier");
    t->add_option("--graphs", tr.graphs, "Directory written by 'graphs'")->required();
    t->add_option("--out", tr.out, "Model file to write")->required();
    t->add_option("--history", tr.history, "Optional JSON file for per-epoch statistics");
    add_model_flags(t, tr.model, tr.train);
    t->add_flag("--quiet", tr.quiet, "Suppress per-epoch progress");
    add_seed(t, tr.seed);

    EvalOptions ev;
    auto* v = add_command(app, "eval", "Accuracy, macro AUC and confusion matrix of a trained model");
    v->add_option("--model", ev.model, "Model file")->required();
    v->add_option("--graphs", ev.graphs, "Directory written by 'graphs'")->required();
    v->add_option("--split", ev.split, "Which split to evaluate")
        ->check(CLI::IsMember({"train", "val", "test"}))
        ->capture_default_str();
    v->add_option("--embeddings", ev.embeddings, "Embedding file, for the parameter count");
    v->add_option("--out", ev.out, "JSON report to write");
    v->add_option("--model-name", ev.model_name, "Name shown in the table")->capture_default_str();

    BenchOptions bench;
    auto* b = add_command(app, "bench", "Time the full pipeline and estimate cost");
    b->add_option("--corpus", bench.corpus, "Corpus file (default: synthesize one)");
    b->add_option("--classes", bench.classes, "Synthetic classes when no corpus is given")->capture_default_str();
    b->add_option("--docs-per-class", bench.docs_per_class, "Synthetic documents per class")->capture_default_str();
    b->add_option("--cost-model", bench.cost_model, "JSON file of instance hourly rates");
    b->add_option("--out", bench.out, "JSON report to write");
    add_ratio_flags(b, bench.ratios);
    add_graph_flags(b, bench.graph);
    add_word2vec_flags(b, bench.config.word2vec, "w2v-");
    b->add_option("--dim", bench.config.word2vec.dim, "Word vector dimension")->capture_default_str();
    add_model_flags(b, bench.config.model, bench.config.train);
    b->add_flag("--lenient", bench.lenient, "Warn on unknown corpus keys instead of failing");
    add_seed(b, bench.seed);

    PredictOptions pred;
    auto* p = add_command(app, "predict", "Classify one document annotation file");
    p->add_option("--model", pred.model, "Model file")->required();
    p->add_option("--embeddings", pred.embeddings, "Embedding file")->required();
    p->add_option("--document", pred.document, "File holding one document JSON object")->required();
    p->add_flag("--lenient", pred.lenient, "Warn on unknown keys instead of failing");

    ServeOptions serve;
    auto* sv = add_command(app, "serve", "HTTP inference service (POST /classify, GET /health)");
    sv->add_option("--model", serve.model, "Model file")->required();
    sv->add_option("--embeddings", serve.embeddings, "Embedding file")->required();
    sv->add_option("--host", serve.serve.host, "Bind address")->capture_default_str();
    sv->add_option("--port", serve.serve.port, "Port (0 picks a free one)")->capture_default_str();
    sv->add_option("--max-body-bytes", serve.serve.max_body_bytes, "Request body limit")->capture_default_str();
    sv->add_flag("--lenient", serve.lenient, "Warn on unknown keys instead of failing");

    try {
        app.parse(argc, argv);
        for (CLI::App* sub : app.get_subcommands())
            if (auto* cfg = sub->get_option("--config"); cfg->count() > 0)
                apply_config_file(sub, cfg->as<std::string>());
    } catch (const CLI::CallForHelp& err) {
        return app.exit(err);
    } catch (const CLI::CallForAllHelp& err) {
        return app.exit(err);
    } catch (const CLI::ParseError& err) {
        app.exit(err);
        return 2;
    }

    try {
        if (*s) return cmd_synth(synth);
        if (*e) return cmd_embed(embed);
        if (*g) return cmd_graphs(graphs);
        if (*t) return cmd_train(tr);
        if (*v) return cmd_eval(ev);
        if (*b) return cmd_bench(bench);
        if (*p) return cmd_predict(pred);
        if (*sv) return cmd_serve(serve);
    } catch (const effgnn::Error& err) {
        std::cerr << "effgnn: error: " << err.kind() << ": " << one_line(err.what()) << "\n";
        return 1;
    } catch (const std::exception& err) {
        std::cerr << "effgnn: error: internal: " << one_line(err.what()) << "\n";
        return 1;
    }
    return 2;
}
