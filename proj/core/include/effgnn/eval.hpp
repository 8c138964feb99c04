#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "effgnn/gnn.hpp"
#include "effgnn/graph_build.hpp"
#include "effgnn/matrix.hpp"

namespace effgnn {

struct AucResult {
    std::vector<std::optional<double>> per_class;  // nullopt when a class has no positives or no negatives
    double macro = 0;                              // mean over defined classes
};

/// One-vs-rest ROC AUC via the Mann-Whitney rank statistic with mid-ranks,
/// so a tied positive/negative pair counts one half. scores is
/// n_examples x n_classes. Throws ValidationError when no class is defined.
AucResult roc_auc_ovr(const Matrix<double>& scores, std::span<const std::uint32_t> labels);

struct EvalReport {
    double accuracy = 0;
    double macro_auc = 0;
    std::vector<std::optional<double>> per_class_auc;
    Matrix<std::uint64_t> confusion;  // rows = true class, cols = predicted
    std::size_t n_examples = 0;
};

/// Metrics from a score table; predictions are row argmax (lowest index on ties).
EvalReport evaluate_scores(const Matrix<double>& scores, std::span<const std::uint32_t> labels);

EvalReport evaluate(const GnnModel& model, const GraphDataset& dataset);

std::string eval_report_to_json(const EvalReport& report, std::span<const std::string> class_names);

/// Human-readable summary: model name, AUC, parameter count, then per-class
/// AUC and the confusion matrix.
std::string format_eval_table(const EvalReport& report, std::span<const std::string> class_names,
                              const std::string& model_name, std::size_t gnn_params,
                              std::size_t embedding_params);

}  // namespace effgnn
