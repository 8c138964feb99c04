#pragma once

// Inference on raw document annotations and the HTTP service around it.
// Model and embeddings are loaded once; a Classifier is immutable and safe to
// share between request threads.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "effgnn/gnn.hpp"
#include "effgnn/ingest.hpp"
#include "effgnn/text_embed.hpp"

namespace effgnn {

struct Prediction {
    std::string doc_id;
    std::size_t predicted_class = 0;
    std::vector<std::string> class_names;
    std::vector<float> probabilities;
};

/// {"doc_id", "predicted_class", "class_names", "probabilities"}; compact and
/// deterministic, shared by the CLI and the service.
std::string prediction_to_json(const Prediction& prediction);

class Classifier {
public:
    /// Throws ValidationError when the embeddings do not match the text
    /// dimension recorded in the model.
    Classifier(GnnModel model, WordEmbeddings embeddings);

    static Classifier load(const std::filesystem::path& model_path, const std::filesystem::path& embeddings_path);

    Prediction classify(const DocumentAnnotation& doc) const;

    /// Parses and validates one document (label optional), then classifies it.
    Prediction classify_json(std::string_view body, bool strict = true) const;

    const GnnModel& model() const noexcept { return model_; }
    const WordEmbeddings& embeddings() const noexcept { return embeddings_; }

private:
    GnnModel model_;
    WordEmbeddings embeddings_;
};

struct HttpReply {
    int status = 200;
    std::string body;
};

/// Request handling without the socket layer.
HttpReply handle_classify(const Classifier& classifier, std::string_view content_type, std::string_view body,
                          bool strict = true);
HttpReply handle_health(const Classifier& classifier);

struct ServeConfig {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 binds an ephemeral port
    std::size_t max_body_bytes = 4u << 20;
    bool strict = true;
};

class InferenceServer {
public:
    InferenceServer(std::shared_ptr<const Classifier> classifier, ServeConfig config);
    ~InferenceServer();

    InferenceServer(const InferenceServer&) = delete;
    InferenceServer& operator=(const InferenceServer&) = delete;

    /// Binds the listening socket and returns the port. Throws IoError.
    int bind();
    /// Blocks serving requests until stop(). Binds first if needed.
    void run();
    /// bind() then run() on a background thread.
    void start();
    void stop();

    int port() const noexcept { return port_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    ServeConfig config_;
    int port_ = -1;
    std::thread thread_;
};

}  // namespace effgnn
