#include "effgnn/serve.hpp"

#include "effgnn/error.hpp"
#include "effgnn/graph_build.hpp"
#include "httplib.h"
#include "json.hpp"

namespace effgnn {

namespace {

std::string error_body(std::string_view kind, std::string_view message) {
    nlohmann::ordered_json j;
    j["error"] = std::string(message);
    j["kind"] = std::string(kind);
    return j.dump();
}

}  // namespace

std::string prediction_to_json(const Prediction& p) {
    nlohmann::ordered_json j;
    j["doc_id"] = p.doc_id;
    j["predicted_class"] = p.predicted_class < p.class_names.size() ? p.class_names[p.predicted_class]
                                                                     : std::to_string(p.predicted_class);
    j["predicted_index"] = p.predicted_class;
    j["class_names"] = p.class_names;
    j["probabilities"] = p.probabilities;
    return j.dump();
}

Classifier::Classifier(GnnModel model, WordEmbeddings embeddings)
    : model_(std::move(model)), embeddings_(std::move(embeddings)) {
    if (model_.info.build.text_dim != embeddings_.dim)
        throw ValidationError("embeddings dimension " + std::to_string(embeddings_.dim) +
                              " does not match the model's text dimension " +
                              std::to_string(model_.info.build.text_dim));
    if (model_.info.build.feature_dim() != model_.feature_dim)
        throw ValidationError("model graph-build configuration disagrees with its feature_dim");
}

Classifier Classifier::load(const std::filesystem::path& model_path, const std::filesystem::path& embeddings_path) {
    return Classifier(load_model(model_path), load_embeddings(embeddings_path));
}

Prediction Classifier::classify(const DocumentAnnotation& doc) const {
    validate_document(doc);
    const auto graph = document_to_graph(doc, embeddings_, model_.info.build);
    Prediction p;
    p.doc_id = doc.doc_id;
    p.probabilities = forward<float>(graph, model_, false);
    p.predicted_class = argmax<float>(p.probabilities);
    p.class_names = model_.info.class_names;
    return p;
}

Prediction Classifier::classify_json(std::string_view body, bool strict) const {
    LoadOptions options;
    options.strict = strict;
    return classify(parse_document(body, options, false));
}

HttpReply handle_classify(const Classifier& classifier, std::string_view content_type, std::string_view body,
                          bool strict) {
    if (content_type.substr(0, content_type.find(';')) != "application/json")
        return {415, error_body("usage", "content-type must be application/json")};
    try {
        return {200, prediction_to_json(classifier.classify_json(body, strict))};
    } catch (const ParseError& e) {
        return {400, error_body(e.kind(), e.what())};
    } catch (const ValidationError& e) {
        return {400, error_body(e.kind(), e.what())};
    }
}

HttpReply handle_health(const Classifier& classifier) {
    nlohmann::ordered_json j;
    j["status"] = "ok";
    j["model_version"] = kModelFormatVersion;
    j["n_classes"] = classifier.model().n_classes;
    j["feature_dim"] = classifier.model().feature_dim;
    return {200, j.dump()};
}

struct InferenceServer::Impl {
    std::shared_ptr<const Classifier> classifier;
    httplib::Server server;
    bool bound = false;
};

InferenceServer::InferenceServer(std::shared_ptr<const Classifier> classifier, ServeConfig config)
    : impl_(std::make_unique<Impl>()), config_(std::move(config)) {
    if (!classifier) throw ValidationError("server needs a classifier");
    impl_->classifier = std::move(classifier);
    auto& srv = impl_->server;
    srv.set_payload_max_length(config_.max_body_bytes);

    const auto* clf = impl_->classifier.get();
    const bool strict = config_.strict;
    srv.Post("/classify", [clf, strict](const httplib::Request& req, httplib::Response& res) {
        const auto reply = handle_classify(*clf, req.get_header_value("Content-Type"), req.body, strict);
        res.status = reply.status;
        res.set_content(reply.body, "application/json");
    });
    srv.Get("/health", [clf](const httplib::Request&, httplib::Response& res) {
        const auto reply = handle_health(*clf);
        res.status = reply.status;
        res.set_content(reply.body, "application/json");
    });
    srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (!res.body.empty()) return;
        std::string msg = res.status == 413 ? "request body too large" : "request failed";
        if (res.status == 404) msg = "not found";
        res.set_content(error_body("http", msg), "application/json");
    });
}

InferenceServer::~InferenceServer() { stop(); }

int InferenceServer::bind() {
    if (impl_->bound) return port_;
    if (config_.port == 0) {
        port_ = impl_->server.bind_to_any_port(config_.host);
    } else {
        port_ = impl_->server.bind_to_port(config_.host, config_.port) ? config_.port : -1;
    }
    if (port_ < 0) throw IoError("cannot bind " + config_.host + ":" + std::to_string(config_.port));
    impl_->bound = true;
    return port_;
}

void InferenceServer::run() {
    bind();
    impl_->server.listen_after_bind();
}

void InferenceServer::start() {
    bind();
    thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void InferenceServer::stop() {
    if (impl_) impl_->server.stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace effgnn
