#include "effgnn/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "effgnn/error.hpp"
#include "json.hpp"

namespace effgnn {

namespace {

// Mann-Whitney U for one class: average ranks over tie groups.
std::optional<double> class_auc(const Matrix<double>& scores, std::span<const std::uint32_t> labels,
                                std::size_t cls) {
    const std::size_t n = labels.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores(a, cls) < scores(b, cls); });

    double pos_rank_sum = 0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores(order[j], cls) == scores(order[i], cls)) ++j;
        const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t t = i; t < j; ++t)
            if (labels[order[t]] == cls) {
                pos_rank_sum += mid_rank;
                ++n_pos;
            }
        i = j;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;
    const double np = static_cast<double>(n_pos);
    const double u = pos_rank_sum - np * (np + 1.0) / 2.0;
    return u / (np * static_cast<double>(n_neg));
}

}  // namespace

AucResult roc_auc_ovr(const Matrix<double>& scores, std::span<const std::uint32_t> labels) {
    if (scores.rows != labels.size()) throw ShapeError("score rows must match label count");
    AucResult r;
    r.per_class.resize(scores.cols);
    double sum = 0;
    std::size_t defined = 0;
    for (std::size_t c = 0; c < scores.cols; ++c) {
        r.per_class[c] = class_auc(scores, labels, c);
        if (r.per_class[c]) {
            sum += *r.per_class[c];
            ++defined;
        }
    }
    if (defined == 0) throw ValidationError("AUC undefined: no class has both positive and negative examples");
    r.macro = sum / static_cast<double>(defined);
    return r;
}

EvalReport evaluate_scores(const Matrix<double>& scores, std::span<const std::uint32_t> labels) {
    if (labels.empty()) throw ValidationError("cannot evaluate an empty dataset");
    if (scores.rows != labels.size()) throw ShapeError("score rows must match label count");
    const std::size_t k = scores.cols;
    EvalReport rep;
    rep.n_examples = labels.size();
    rep.confusion = Matrix<std::uint64_t>(k, k, 0);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= k) throw ShapeError("label out of range");
        const auto pred = argmax<double>(scores.row(i));
        ++rep.confusion(labels[i], pred);
        if (pred == labels[i]) ++hits;
    }
    rep.accuracy = static_cast<double>(hits) / static_cast<double>(labels.size());
    const auto auc = roc_auc_ovr(scores, labels);
    rep.macro_auc = auc.macro;
    rep.per_class_auc = auc.per_class;
    return rep;
}

EvalReport evaluate(const GnnModel& model, const GraphDataset& dataset) {
    if (dataset.graphs.empty()) throw ValidationError("cannot evaluate an empty dataset");
    if (dataset.feature_dim != model.feature_dim)
        throw ShapeError("dataset feature_dim " + std::to_string(dataset.feature_dim) + " != model feature_dim " +
                         std::to_string(model.feature_dim));
    Matrix<double> scores(dataset.graphs.size(), model.n_classes);
    std::vector<std::uint32_t> labels;
    labels.reserve(dataset.graphs.size());
    for (std::size_t i = 0; i < dataset.graphs.size(); ++i) {
        const auto probs = forward<float>(dataset.graphs[i], model, false);
        for (std::size_t c = 0; c < probs.size(); ++c) scores(i, c) = probs[c];
        labels.push_back(dataset.graphs[i].label);
    }
    return evaluate_scores(scores, labels);
}

std::string eval_report_to_json(const EvalReport& report, std::span<const std::string> class_names) {
    nlohmann::ordered_json j;
    j["n_examples"] = report.n_examples;
    j["accuracy"] = report.accuracy;
    j["macro_auc"] = report.macro_auc;
    auto per = nlohmann::ordered_json::array();
    for (const auto& a : report.per_class_auc) per.push_back(a ? nlohmann::ordered_json(*a) : nullptr);
    j["per_class_auc"] = per;
    j["class_names"] = std::vector<std::string>(class_names.begin(), class_names.end());
    auto cm = nlohmann::ordered_json::array();
    for (std::size_t r = 0; r < report.confusion.rows; ++r) {
        const auto row = report.confusion.row(r);
        cm.push_back(std::vector<std::uint64_t>(row.begin(), row.end()));
    }
    j["confusion_matrix"] = cm;
    return j.dump(2);
}

std::string format_eval_table(const EvalReport& report, std::span<const std::string> class_names,
                              const std::string& model_name, std::size_t gnn_params,
                              std::size_t embedding_params) {
    auto human = [](std::size_t n) {
        std::ostringstream s;
        if (n >= 1'000'000) s << std::fixed << std::setprecision(1) << static_cast<double>(n) / 1e6 << "M";
        else if (n >= 1000) s << (n + 500) / 1000 << "k";
        else s << n;
        return s.str();
    };
    std::ostringstream out;
    out << std::left << std::setw(32) << "Model" << std::setw(10) << "AUC" << std::setw(10) << "Accuracy"
        << "# Parameters\n";
    std::string params = human(gnn_params);
    if (embedding_params > 0) params += " + " + human(embedding_params);
    out << std::setw(32) << model_name << std::setw(10) << std::fixed << std::setprecision(4) << report.macro_auc
        << std::setw(10) << report.accuracy << params << "\n\n";

    out << "per-class AUC\n";
    for (std::size_t c = 0; c < report.per_class_auc.size(); ++c) {
        out << "  " << std::setw(20) << (c < class_names.size() ? class_names[c] : std::to_string(c));
        if (report.per_class_auc[c]) out << std::setprecision(4) << *report.per_class_auc[c] << "\n";
        else out << "undefined\n";
    }
    out << "\nconfusion matrix (rows = true, cols = predicted)\n";
    for (std::size_t r = 0; r < report.confusion.rows; ++r) {
        out << "  ";
        for (std::size_t c = 0; c < report.confusion.cols; ++c) out << std::right << std::setw(6) << report.confusion(r, c);
        out << "\n";
    }
    return out.str();
}

}  // namespace effgnn
