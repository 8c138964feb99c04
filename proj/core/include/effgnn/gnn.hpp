#pragma once

// SortPooling graph convolutional classifier.
//
//   graph conv stack  Z_{t+1} = tanh(D^-1 (A + I) Z_t W_t + b_t)
//   concat layers     n x C, C = sum(conv_channels)
//   sort pooling      k x C, rows ordered by the last channel
//   conv1d            kernel = stride = C, then max-pool, then a second conv1d
//   dense + tanh      dropout while training
//   linear + softmax
//
// Training runs in float; double instantiations exist for gradient checks.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "effgnn/graph_build.hpp"
#include "effgnn/matrix.hpp"

namespace effgnn {

enum class Activation : std::uint8_t { Tanh = 0 };

struct GnnConfig {
    std::vector<std::uint32_t> conv_channels{32, 32, 32, 1};
    std::uint32_t sortpool_k = 8;

    // 1D convolution head. Stage 1 kernel and stride equal the total conv
    // channel count, so each pooled node row maps to one position.
    bool conv1d_enabled = true;
    std::uint32_t conv1d_channels_1 = 16;
    std::uint32_t conv1d_channels_2 = 32;
    std::uint32_t conv1d_kernel_2 = 5;
    std::uint32_t conv1d_stride_2 = 1;
    std::uint32_t pool_size = 2;

    std::uint32_t dense_hidden = 128;  // 0 removes the hidden layer
    double dropout_rate = 0.5;
    Activation activation = Activation::Tanh;

    /// Throws ValidationError when an invariant is violated.
    void validate() const;
    std::size_t total_conv_channels() const noexcept;

    bool operator==(const GnnConfig&) const = default;
};

/// Tensor shapes implied by a config, feature width and class count.
struct GnnShapes {
    std::size_t feature_dim = 0;
    std::size_t n_classes = 0;
    std::size_t total_channels = 0;  // C
    std::size_t k = 0;
    std::size_t conv1_len = 0;   // positions after stage 1 (= k)
    std::size_t pooled_len = 0;  // ceil(conv1_len / pool_size)
    std::size_t kernel_2 = 0;    // stage 2 kernel, clamped to pooled_len
    std::size_t conv2_len = 0;
    std::size_t dense_in = 0;
    std::size_t dense_out = 0;  // width feeding the output layer
};

GnnShapes compute_shapes(const GnnConfig& config, std::size_t feature_dim, std::size_t n_classes);

template <class T>
struct GnnParameters {
    std::vector<Matrix<T>> conv_weight;  // in x out per layer
    std::vector<Matrix<T>> conv_bias;    // 1 x out per layer
    Matrix<T> conv1_weight;              // ch1 x C
    Matrix<T> conv1_bias;                // 1 x ch1
    Matrix<T> conv2_weight;              // ch2 x (kernel_2 * ch1), kernel-major
    Matrix<T> conv2_bias;                // 1 x ch2
    Matrix<T> dense_weight;              // dense_in x hidden
    Matrix<T> dense_bias;                // 1 x hidden
    Matrix<T> out_weight;                // dense_out x n_classes
    Matrix<T> out_bias;                  // 1 x n_classes

    /// Visits every tensor in declaration order (the serialization order).
    template <class F>
    void for_each(F&& f) {
        for (std::size_t i = 0; i < conv_weight.size(); ++i) {
            f(conv_weight[i]);
            f(conv_bias[i]);
        }
        f(conv1_weight);
        f(conv1_bias);
        f(conv2_weight);
        f(conv2_bias);
        f(dense_weight);
        f(dense_bias);
        f(out_weight);
        f(out_bias);
    }
    template <class F>
    void for_each(F&& f) const {
        const_cast<GnnParameters*>(this)->for_each([&](Matrix<T>& m) { f(static_cast<const Matrix<T>&>(m)); });
    }

    /// Same shapes, all zeros.
    GnnParameters zeros_like() const {
        GnnParameters z = *this;
        z.for_each([](Matrix<T>& m) { m.fill(T(0)); });
        return z;
    }

    bool operator==(const GnnParameters&) const = default;
};

struct ModelInfo {
    std::vector<std::string> class_names;
    GraphBuildConfig build;

    bool operator==(const ModelInfo&) const = default;
};

template <class T>
struct BasicGnnModel {
    GnnConfig config;
    std::size_t feature_dim = 0;
    std::size_t n_classes = 0;
    GnnParameters<T> params;
    ModelInfo info;

    bool operator==(const BasicGnnModel&) const = default;
};

using GnnModel = BasicGnnModel<float>;

template <class To, class From>
BasicGnnModel<To> model_cast(const BasicGnnModel<From>& m) {
    BasicGnnModel<To> out;
    out.config = m.config;
    out.feature_dim = m.feature_dim;
    out.n_classes = m.n_classes;
    out.info = m.info;
    auto& p = out.params;
    const auto& q = m.params;
    for (std::size_t i = 0; i < q.conv_weight.size(); ++i) {
        p.conv_weight.push_back(matrix_cast<To>(q.conv_weight[i]));
        p.conv_bias.push_back(matrix_cast<To>(q.conv_bias[i]));
    }
    p.conv1_weight = matrix_cast<To>(q.conv1_weight);
    p.conv1_bias = matrix_cast<To>(q.conv1_bias);
    p.conv2_weight = matrix_cast<To>(q.conv2_weight);
    p.conv2_bias = matrix_cast<To>(q.conv2_bias);
    p.dense_weight = matrix_cast<To>(q.dense_weight);
    p.dense_bias = matrix_cast<To>(q.dense_bias);
    p.out_weight = matrix_cast<To>(q.out_weight);
    p.out_bias = matrix_cast<To>(q.out_bias);
    return out;
}

/// Glorot-uniform weights, zero biases.
template <class T>
BasicGnnModel<T> make_model(const GnnConfig& config, std::size_t feature_dim, std::size_t n_classes,
                            std::uint64_t seed);

/// Dense D^-1 (A + I); rows sum to one.
Matrix<double> propagation_matrix(std::size_t n_nodes, std::span<const Edge> edges);

/// tanh(D^-1 (A + I) Z W + b). Neighbour contributions are summed in sorted
/// order per channel, which makes the result independent of node numbering.
template <class T>
Matrix<T> graph_conv_forward(const Matrix<T>& z, std::span<const Edge> edges, const Matrix<T>& weight,
                             std::span<const T> bias = {});

template <class T>
struct SortPoolResult {
    Matrix<T> pooled;                 // k x C
    std::vector<std::int64_t> source;  // original row per output row, -1 for padding
};

/// Rows sorted descending by the last column, ties broken by earlier columns
/// (right to left) and finally by ascending row index; top k kept, zero rows
/// appended when fewer than k.
template <class T>
SortPoolResult<T> sort_pooling(const Matrix<T>& z_cat, std::size_t k);

/// Class probabilities. dropout_seed only matters when training is true.
template <class T>
std::vector<T> forward(const DocGraph& graph, const BasicGnnModel<T>& model, bool training = false,
                       std::uint64_t dropout_seed = 0);

template <class T>
struct LossAndGradients {
    T loss = 0;
    GnnParameters<T> gradients;
    std::size_t correct = 0;  // argmax hits in this (training-mode) pass
};

/// Mean negative log-likelihood over the batch and its gradient. Dropout is
/// active; graph i of the batch draws its mask from derive_seed(dropout_seed, i).
template <class T>
LossAndGradients<T> loss_and_gradients(std::span<const DocGraph> batch, const BasicGnnModel<T>& model,
                                       std::uint64_t dropout_seed);

/// Index of the largest probability, lowest index on ties.
template <class T>
std::size_t argmax(std::span<const T> values);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    bool operator==(const AdamConfig&) const = default;
};

struct TrainConfig {
    std::size_t batch_size = 32;
    std::size_t epochs = 50;
    AdamConfig adam;
    std::uint64_t seed = 1;
    std::size_t early_stopping_patience = 0;  // 0 = off

    void validate() const;
};

struct EpochStats {
    double train_loss = 0;
    double train_accuracy = 0;
    std::optional<double> val_accuracy;
    double wall_time = 0;  // seconds
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
};

using EpochCallback = std::function<void(std::size_t epoch, const EpochStats&)>;

struct TrainResult {
    GnnModel model;
    TrainHistory history;
};

/// Single-threaded mini-batch Adam. Identical inputs and seed give
/// bit-identical parameters.
TrainResult train(const GraphDataset& train_set, const GraphDataset& val_set, const GnnConfig& model_config,
                  const TrainConfig& train_config, const EpochCallback& on_epoch = {});

/// Accuracy of argmax predictions in inference mode.
double accuracy(const GnnModel& model, const GraphDataset& dataset);

std::size_t count_parameters(const GnnConfig& config, std::size_t feature_dim, std::size_t n_classes);

template <class T>
std::size_t count_parameters(const BasicGnnModel<T>& model) {
    std::size_t total = 0;
    model.params.for_each([&](const Matrix<T>& m) { total += m.size(); });
    return total;
}

inline constexpr std::uint32_t kModelFormatVersion = 1;

std::string serialize_model(const GnnModel& model);
GnnModel deserialize_model(std::string bytes, std::string what = "model");
void save_model(const GnnModel& model, const std::filesystem::path& path);
GnnModel load_model(const std::filesystem::path& path);

}  // namespace effgnn
