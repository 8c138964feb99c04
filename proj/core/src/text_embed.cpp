#include "effgnn/text_embed.hpp"

#include <algorithm>
#include <map>

#include "binary_io.hpp"
#include "effgnn/error.hpp"
#include "effgnn/rng.hpp"

namespace effgnn {

namespace {

constexpr std::string_view kEmbeddingMagic = "EGWE";
constexpr std::uint32_t kEmbeddingVersion = 1;

bool is_token_byte(unsigned char c) noexcept {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

Vocabulary vocabulary_from_sentences(const std::vector<std::vector<std::string>>& sentences,
                                     std::uint64_t min_count) {
    if (min_count < 1) throw ValidationError("min_count must be >= 1");
    std::map<std::string, std::uint64_t, std::less<>> counts;
    for (const auto& s : sentences)
        for (const auto& tok : s) ++counts[tok];

    std::vector<std::pair<std::string, std::uint64_t>> kept;
    for (auto& [tok, n] : counts)
        if (n >= min_count) kept.emplace_back(tok, n);
    if (kept.empty())
        throw ValidationError("empty vocabulary: no token occurs at least " + std::to_string(min_count) + " times");
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

    std::vector<std::string> tokens;
    std::vector<std::uint64_t> freq;
    tokens.reserve(kept.size());
    freq.reserve(kept.size());
    for (auto& [tok, n] : kept) {
        tokens.push_back(std::move(tok));
        freq.push_back(n);
    }
    return Vocabulary(std::move(tokens), std::move(freq));
}

std::vector<std::vector<std::string>> corpus_sentences(const Corpus& corpus) {
    std::vector<std::vector<std::string>> sentences;
    for (const auto& doc : corpus.documents)
        for (const auto& r : doc.regions) sentences.push_back(tokenize(r.text));
    return sentences;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) return;
        const bool digits = std::all_of(cur.begin(), cur.end(), [](char c) { return c >= '0' && c <= '9'; });
        out.push_back(digits ? std::string(kNumberToken) : std::move(cur));
        cur.clear();
    };
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (is_token_byte(c)) {
            cur.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : ch);
        } else {
            flush();
        }
    }
    flush();
    return out;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::vector<std::uint64_t> counts)
    : tokens_(std::move(tokens)), counts_(std::move(counts)) {
    if (tokens_.size() != counts_.size()) throw ShapeError("vocabulary tokens/counts size mismatch");
    index_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i)
        if (!index_.emplace(tokens_[i], i).second)
            throw ValidationError("duplicate vocabulary token '" + tokens_[i] + "'");
}

std::int64_t Vocabulary::index_of(std::string_view token) const {
    auto it = index_.find(token);
    return it == index_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

Vocabulary build_vocabulary(const Corpus& corpus, std::uint64_t min_count) {
    return vocabulary_from_sentences(corpus_sentences(corpus), min_count);
}

WordEmbeddings train_word2vec(const Corpus& corpus, const Word2VecConfig& config, Word2VecStats* stats) {
    return train_word2vec(corpus_sentences(corpus), config, stats);
}

WordEmbeddings train_word2vec(const std::vector<std::vector<std::string>>& sentences,
                              const Word2VecConfig& config, Word2VecStats* stats) {
    if (config.dim < 2) throw ValidationError("word2vec dim must be >= 2");
    if (config.window < 1) throw ValidationError("word2vec window must be >= 1");
    if (config.negatives < 1) throw ValidationError("word2vec negatives must be >= 1");
    if (config.epochs < 1) throw ValidationError("word2vec epochs must be >= 1");
    if (!(config.learning_rate > 0)) throw ValidationError("word2vec learning_rate must be > 0");

    WordEmbeddings emb;
    emb.vocabulary = vocabulary_from_sentences(sentences, config.min_count);
    emb.dim = config.dim;
    const std::size_t V = emb.vocabulary.size();
    const std::size_t d = config.dim;

    Rng rng(config.seed);
    emb.input = Matrix<float>(V, d);
    const double half = 0.5 / static_cast<double>(d);
    for (auto& w : emb.input.data) w = static_cast<float>(rng.uniform(-half, half));
    emb.output = Matrix<float>(V, d, 0.0f);

    std::vector<std::vector<std::uint32_t>> ids;
    std::uint64_t total_tokens = 0;
    ids.reserve(sentences.size());
    for (const auto& s : sentences) {
        std::vector<std::uint32_t> row;
        for (const auto& tok : s) {
            const auto idx = emb.vocabulary.index_of(tok);
            if (idx >= 0) row.push_back(static_cast<std::uint32_t>(idx));
        }
        if (row.size() < 2) continue;
        total_tokens += row.size();
        ids.push_back(std::move(row));
    }

    // Cumulative unigram^0.75 distribution for negative sampling.
    std::vector<double> cdf(V);
    double acc = 0;
    for (std::size_t i = 0; i < V; ++i) {
        acc += std::pow(static_cast<double>(emb.vocabulary.count(i)), 0.75);
        cdf[i] = acc;
    }
    auto sample_negative = [&] {
        const double u = rng.uniform() * acc;
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        return static_cast<std::uint32_t>(std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), V - 1));
    };

    std::vector<float> grad_center(d), grad_context(d);
    std::vector<std::uint32_t> neg_ids;
    std::vector<std::span<const float>> neg_rows;
    std::vector<std::vector<float>> neg_grad_store(config.negatives, std::vector<float>(d));
    std::vector<std::span<float>> neg_grads;

    const double schedule_total = static_cast<double>(std::max<std::uint64_t>(1, total_tokens * config.epochs));
    std::uint64_t processed = 0;
    std::uint64_t pairs = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        double epoch_loss = 0;
        std::uint64_t epoch_pairs = 0;
        for (const auto& sent : ids) {
            for (std::size_t i = 0; i < sent.size(); ++i, ++processed) {
                const double frac = static_cast<double>(processed) / schedule_total;
                const float lr = static_cast<float>(config.learning_rate * std::max(1e-4, 1.0 - frac));
                const std::size_t lo = i >= config.window ? i - config.window : 0;
                const std::size_t hi = std::min(sent.size() - 1, i + config.window);
                auto center = emb.input.row(sent[i]);
                for (std::size_t j = lo; j <= hi; ++j) {
                    if (j == i) continue;
                    const std::uint32_t ctx = sent[j];
                    neg_ids.clear();
                    neg_rows.clear();
                    neg_grads.clear();
                    for (std::size_t k = 0; k < config.negatives; ++k) {
                        const auto n = sample_negative();
                        if (n == ctx) continue;
                        neg_ids.push_back(n);
                        neg_rows.push_back(emb.output.row(n));
                        neg_grads.push_back(neg_grad_store[neg_grads.size()]);
                    }
                    const float loss = skipgram_pair_loss<float>(
                        center, std::span<const float>(emb.output.row(ctx)), neg_rows, grad_center,
                        grad_context, neg_grads);
                    epoch_loss += loss;
                    ++epoch_pairs;

                    auto ctx_row = emb.output.row(ctx);
                    for (std::size_t t = 0; t < d; ++t) ctx_row[t] -= lr * grad_context[t];
                    for (std::size_t k = 0; k < neg_ids.size(); ++k) {
                        auto row = emb.output.row(neg_ids[k]);
                        for (std::size_t t = 0; t < d; ++t) row[t] -= lr * neg_grads[k][t];
                    }
                    for (std::size_t t = 0; t < d; ++t) center[t] -= lr * grad_center[t];
                }
            }
        }
        pairs += epoch_pairs;
        if (stats) stats->epoch_loss.push_back(epoch_pairs ? epoch_loss / static_cast<double>(epoch_pairs) : 0.0);
    }
    if (stats) stats->pairs_trained = pairs;
    return emb;
}

std::vector<float> embed_region_text(std::string_view text, const WordEmbeddings& embeddings) {
    std::vector<float> out(embeddings.dim, 0.0f);
    std::size_t hits = 0;
    for (const auto& tok : tokenize(text)) {
        const auto idx = embeddings.vocabulary.index_of(tok);
        if (idx < 0) continue;
        const auto row = embeddings.input.row(static_cast<std::size_t>(idx));
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += row[i];
        ++hits;
    }
    if (hits > 1) {
        const float inv = 1.0f / static_cast<float>(hits);
        for (auto& v : out) v *= inv;
    }
    return out;
}

std::string serialize_embeddings(const WordEmbeddings& emb) {
    detail::BinaryWriter w;
    w.bytes(kEmbeddingMagic);
    w.u32(kEmbeddingVersion);
    w.u32(static_cast<std::uint32_t>(emb.dim));
    w.u32(static_cast<std::uint32_t>(emb.vocabulary.size()));
    for (std::size_t i = 0; i < emb.vocabulary.size(); ++i) {
        w.str(emb.vocabulary.token(i));
        w.u64(emb.vocabulary.count(i));
    }
    w.f32s(emb.input.data);
    w.f32s(emb.output.data);
    return w.buffer();
}

WordEmbeddings deserialize_embeddings(std::string bytes, std::string what) {
    detail::BinaryReader r(std::move(bytes), std::move(what));
    r.expect_magic(kEmbeddingMagic);
    const auto version = r.u32();
    if (version != kEmbeddingVersion)
        throw VersionError("embedding file version " + std::to_string(version) + " is not supported (expected " +
                           std::to_string(kEmbeddingVersion) + ")");
    WordEmbeddings emb;
    emb.dim = r.u32();
    const auto V = r.u32();
    if (emb.dim == 0) r.fail("zero embedding dimension");
    std::vector<std::string> tokens;
    std::vector<std::uint64_t> counts;
    for (std::uint32_t i = 0; i < V; ++i) {
        tokens.push_back(r.str());
        counts.push_back(r.u64());
    }
    try {
        emb.vocabulary = Vocabulary(std::move(tokens), std::move(counts));
    } catch (const Error& e) {
        r.fail(e.what());
    }
    emb.input = Matrix<float>(V, emb.dim);
    emb.output = Matrix<float>(V, emb.dim);
    r.f32s(emb.input.data);
    r.f32s(emb.output.data);
    r.expect_end();
    return emb;
}

void save_embeddings(const WordEmbeddings& embeddings, const std::filesystem::path& path) {
    detail::BinaryWriter w;
    w.bytes(serialize_embeddings(embeddings));
    w.write_file(path);
}

WordEmbeddings load_embeddings(const std::filesystem::path& path) {
    return deserialize_embeddings(detail::read_file(path), path.string());
}

}  // namespace effgnn
