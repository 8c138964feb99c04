#pragma once

// Skip-gram word2vec with negative sampling, trained on region texts, and the
// per-region mean embedding used as the text part of node features.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "effgnn/ingest.hpp"
#include "effgnn/matrix.hpp"

namespace effgnn {

inline constexpr std::string_view kNumberToken = "<num>";

/// Lowercases ASCII, splits on runs of ASCII non-alphanumerics, and maps
/// all-digit tokens to "<num>". Bytes >= 0x80 are kept inside tokens so UTF-8
/// words survive intact.
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
public:
    Vocabulary() = default;

    /// Tokens must be unique; order defines the indices.
    Vocabulary(std::vector<std::string> tokens, std::vector<std::uint64_t> counts);

    std::size_t size() const noexcept { return tokens_.size(); }
    bool empty() const noexcept { return tokens_.empty(); }

    /// Index of token, or -1 when out of vocabulary.
    std::int64_t index_of(std::string_view token) const;
    const std::string& token(std::size_t index) const { return tokens_.at(index); }
    std::uint64_t count(std::size_t index) const { return counts_.at(index); }

    const std::vector<std::string>& tokens() const noexcept { return tokens_; }
    const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

    bool operator==(const Vocabulary& other) const {
        return tokens_ == other.tokens_ && counts_ == other.counts_;
    }

private:
    struct Hash {
        using is_transparent = void;
        std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
    };
    std::vector<std::string> tokens_;
    std::vector<std::uint64_t> counts_;
    std::unordered_map<std::string, std::size_t, Hash, std::equal_to<>> index_;
};

/// Tokens occurring at least min_count times over all region texts, indexed
/// by descending frequency with lexicographic tie-break.
Vocabulary build_vocabulary(const Corpus& corpus, std::uint64_t min_count);

struct Word2VecConfig {
    std::size_t dim = 64;
    std::size_t window = 5;
    std::size_t negatives = 5;
    std::size_t epochs = 5;
    double learning_rate = 0.025;
    std::uint64_t min_count = 2;
    std::uint64_t seed = 1;
};

struct WordEmbeddings {
    Vocabulary vocabulary;
    std::size_t dim = 0;
    Matrix<float> input;   // |V| x dim, the word vectors
    Matrix<float> output;  // |V| x dim, the context vectors

    /// Trainable scalars: both matrices.
    std::size_t parameter_count() const noexcept { return input.size() + output.size(); }

    bool operator==(const WordEmbeddings&) const = default;
};

struct Word2VecStats {
    std::vector<double> epoch_loss;  // mean per-pair loss of each epoch
    std::uint64_t pairs_trained = 0;
};

/// Skip-gram negative-sampling loss for one (center, context) pair:
///   -log s(u_o . v_c) - sum_k log s(-u_k . v_c)
/// Gradients are written into grad_center (size dim) and grad_context /
/// grad_negatives (one row per output vector, same order as the inputs).
template <class T>
T skipgram_pair_loss(std::span<const T> center, std::span<const T> context,
                     std::span<const std::span<const T>> negatives, std::span<T> grad_center,
                     std::span<T> grad_context, std::span<const std::span<T>> grad_negatives) {
    const std::size_t d = center.size();
    auto dot = [d](std::span<const T> a, std::span<const T> b) {
        T s = 0;
        for (std::size_t i = 0; i < d; ++i) s += a[i] * b[i];
        return s;
    };
    // log s(x) computed stably.
    auto log_sigmoid = [](T x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); };
    auto sigmoid = [](T x) { return x >= 0 ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x)); };

    for (std::size_t i = 0; i < d; ++i) grad_center[i] = 0;

    const T pos = dot(context, center);
    T loss = -log_sigmoid(pos);
    const T gp = sigmoid(pos) - T(1);
    for (std::size_t i = 0; i < d; ++i) {
        grad_center[i] += gp * context[i];
        grad_context[i] = gp * center[i];
    }
    for (std::size_t k = 0; k < negatives.size(); ++k) {
        const T neg = dot(negatives[k], center);
        loss -= log_sigmoid(-neg);
        const T gn = sigmoid(neg);
        for (std::size_t i = 0; i < d; ++i) {
            grad_center[i] += gn * negatives[k][i];
            grad_negatives[k][i] = gn * center[i];
        }
    }
    return loss;
}

/// Single-threaded; a fixed seed gives bit-identical matrices.
WordEmbeddings train_word2vec(const Corpus& corpus, const Word2VecConfig& config,
                              Word2VecStats* stats = nullptr);

/// Same training loop on pre-tokenized sentences (one per region).
WordEmbeddings train_word2vec(const std::vector<std::vector<std::string>>& sentences,
                              const Word2VecConfig& config, Word2VecStats* stats = nullptr);

/// Mean of input rows over in-vocabulary tokens; zeros when there are none.
std::vector<float> embed_region_text(std::string_view text, const WordEmbeddings& embeddings);

void save_embeddings(const WordEmbeddings& embeddings, const std::filesystem::path& path);
WordEmbeddings load_embeddings(const std::filesystem::path& path);

std::string serialize_embeddings(const WordEmbeddings& embeddings);
WordEmbeddings deserialize_embeddings(std::string bytes, std::string what = "embeddings");

}  // namespace effgnn
