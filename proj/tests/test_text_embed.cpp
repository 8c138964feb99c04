#include <gtest/gtest.h>

#include <cmath>

#include "effgnn/error.hpp"
#include "effgnn/text_embed.hpp"
#include "support.hpp"

using namespace effgnn;
using effgnn::testing::TempDir;
namespace fs = std::filesystem;

namespace {

using Tokens = std::vector<std::string>;

Corpus corpus_from_texts(const std::vector<std::string>& texts) {
    Corpus c;
    c.class_names = {"a", "b"};
    DocumentAnnotation d;
    d.doc_id = "d";
    d.page_width = d.page_height = 100;
    std::uint32_t id = 0;
    for (const auto& t : texts) d.regions.push_back({id++, Category::Text, {0, 0, 10, 10}, t, std::nullopt});
    c.documents.push_back(d);
    return c;
}

double cosine(std::span<const float> a, std::span<const float> b) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += double(a[i]) * b[i];
        aa += double(a[i]) * a[i];
        bb += double(b[i]) * b[i];
    }
    return ab / std::sqrt(aa * bb);
}

}  // namespace

TEST(Tokenize, Rules) {
    EXPECT_EQ(tokenize("Claim #4521 APPROVED"), (Tokens{"claim", "<num>", "approved"}));
    EXPECT_EQ(tokenize(""), Tokens{});
    EXPECT_EQ(tokenize("re-admission on 2020-01-02"), (Tokens{"re", "admission", "on", "<num>", "<num>", "<num>"}));
    EXPECT_EQ(tokenize("  ,,;  "), Tokens{});
    EXPECT_EQ(tokenize("A1b2 99x"), (Tokens{"a1b2", "99x"}));
}

TEST(Vocabulary, Threshold) {
    const auto v = build_vocabulary(corpus_from_texts({"invoice invoice zzz", "invoice"}), 2);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v.token(0), "invoice");
    EXPECT_EQ(v.count(0), 3u);
    EXPECT_EQ(v.index_of("zzz"), -1);
    EXPECT_THROW(build_vocabulary(corpus_from_texts({"a b c"}), 2), ValidationError);
}

TEST(Vocabulary, MatchesBruteForceRanking) {
    const auto corpus = generate_synthetic_corpus(3, 20, 5);
    for (std::uint64_t min_count : {1u, 2u, 5u}) {
        std::vector<std::pair<std::string, std::uint64_t>> counts;
        for (const auto& d : corpus.documents)
            for (const auto& r : d.regions)
                for (const auto& tok : tokenize(r.text)) {
                    auto it = std::find_if(counts.begin(), counts.end(), [&](auto& p) { return p.first == tok; });
                    if (it == counts.end()) counts.emplace_back(tok, 1);
                    else ++it->second;
                }
        std::erase_if(counts, [&](auto& p) { return p.second < min_count; });
        std::sort(counts.begin(), counts.end(), [](auto& a, auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });

        const auto v = build_vocabulary(corpus, min_count);
        ASSERT_EQ(v.size(), counts.size());
        for (std::size_t i = 0; i < counts.size(); ++i) {
            EXPECT_EQ(v.token(i), counts[i].first);
            EXPECT_EQ(v.count(i), counts[i].second);
            EXPECT_EQ(v.index_of(counts[i].first), std::int64_t(i));
        }
    }
}

TEST(Word2Vec, SkipGramGradientMatchesFiniteDifferences) {
    Rng rng(17);
    const std::size_t d = 6;
    Matrix<double> table(5, d);
    for (auto& v : table.data) v = rng.uniform(-0.8, 0.8);

    auto loss_at = [&](const Matrix<double>& t) {
        std::vector<std::span<const double>> negs{t.row(2), t.row(3), t.row(4)};
        std::vector<double> gc(d), gx(d), g2(d), g3(d), g4(d);
        std::vector<std::span<double>> gn{g2, g3, g4};
        return skipgram_pair_loss<double>(t.row(0), t.row(1), negs, gc, gx, gn);
    };

    std::vector<std::span<const double>> negs{table.row(2), table.row(3), table.row(4)};
    Matrix<double> grad(5, d);
    std::vector<std::span<double>> gn{grad.row(2), grad.row(3), grad.row(4)};
    skipgram_pair_loss<double>(table.row(0), table.row(1), negs, grad.row(0), grad.row(1), gn);

    const double eps = 1e-6;
    for (std::size_t i = 0; i < table.size(); ++i) {
        Matrix<double> up = table, down = table;
        up.data[i] += eps;
        down.data[i] -= eps;
        const double numeric = (loss_at(up) - loss_at(down)) / (2 * eps);
        const double denom = std::max({std::abs(numeric), std::abs(grad.data[i]), 1e-6});
        EXPECT_LT(std::abs(numeric - grad.data[i]) / denom, 1e-4) << "entry " << i;
    }
}

TEST(Word2Vec, SharedContextsDriveSimilarity) {
    std::vector<Tokens> sentences;
    for (int i = 0; i < 300; ++i) {
        sentences.push_back({"c1", "c2", "alpha", "c3", "c4"});
        sentences.push_back({"c1", "c2", "beta", "c3", "c4"});
        sentences.push_back({"d1", "d2", "gamma", "d3", "d4"});
    }
    Word2VecConfig cfg;
    cfg.dim = 16;
    cfg.min_count = 1;
    cfg.seed = 3;
    Word2VecStats stats;
    const auto emb = train_word2vec(sentences, cfg, &stats);
    const auto row = [&](const char* w) { return emb.input.row(std::size_t(emb.vocabulary.index_of(w))); };
    EXPECT_GT(cosine(row("alpha"), row("beta")), cosine(row("alpha"), row("gamma")));
    ASSERT_EQ(stats.epoch_loss.size(), cfg.epochs);
    for (double l : stats.epoch_loss) EXPECT_TRUE(std::isfinite(l));
    EXPECT_LT(stats.epoch_loss.back(), stats.epoch_loss.front());
}

TEST(Word2Vec, OneEpochMovesWeights) {
    Word2VecConfig cfg;
    cfg.dim = 2;
    cfg.epochs = 1;
    cfg.min_count = 1;
    const auto emb = train_word2vec(std::vector<Tokens>{{"one", "two", "three"}}, cfg);
    bool moved = false;
    for (float v : emb.output.data) moved |= v != 0.0f;
    EXPECT_TRUE(moved);
    cfg.epochs = 0;
    EXPECT_THROW(train_word2vec(std::vector<Tokens>{{"one", "two"}}, cfg), ValidationError);
}

TEST(Word2Vec, DeterministicAndSeedSensitive) {
    const auto corpus = generate_synthetic_corpus(3, 15, 9);
    Word2VecConfig cfg;
    cfg.dim = 8;
    cfg.epochs = 2;
    const auto a = train_word2vec(corpus, cfg);
    const auto b = train_word2vec(corpus, cfg);
    EXPECT_EQ(a, b);
    cfg.seed = 2;
    EXPECT_NE(a.input, train_word2vec(corpus, cfg).input);
    for (float v : a.input.data) EXPECT_TRUE(std::isfinite(v));
}

TEST(Word2Vec, TokenIndicesArePermutation) {
    const auto emb = train_word2vec(generate_synthetic_corpus(2, 10, 4), Word2VecConfig{.dim = 4, .epochs = 1});
    std::vector<bool> hit(emb.vocabulary.size(), false);
    for (const auto& t : emb.vocabulary.tokens()) {
        const auto i = emb.vocabulary.index_of(t);
        ASSERT_GE(i, 0);
        ASSERT_FALSE(hit[std::size_t(i)]);
        hit[std::size_t(i)] = true;
    }
    EXPECT_EQ(emb.input.rows, emb.vocabulary.size());
}

TEST(EmbedRegion, MeanRules) {
    const auto emb = train_word2vec(std::vector<Tokens>{{"red", "green", "blue"}, {"red", "green"}},
                                    Word2VecConfig{.dim = 4, .epochs = 1, .min_count = 1});
    const auto zero = embed_region_text("unknown words only", emb);
    EXPECT_EQ(zero, std::vector<float>(4, 0.0f));
    EXPECT_EQ(embed_region_text("", emb), std::vector<float>(4, 0.0f));

    const auto red = emb.input.row(std::size_t(emb.vocabulary.index_of("red")));
    const auto green = emb.input.row(std::size_t(emb.vocabulary.index_of("green")));
    EXPECT_EQ(embed_region_text("RED", emb), std::vector<float>(red.begin(), red.end()));
    const auto both = embed_region_text("red, green; purple", emb);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_FLOAT_EQ(both[i], (red[i] + green[i]) / 2);
}

TEST(EmbedRegion, NormBoundedByLargestRow) {
    const auto corpus = generate_synthetic_corpus(3, 10, 8);
    const auto emb = train_word2vec(corpus, Word2VecConfig{.dim = 8, .epochs = 1});
    double max_row = 0;
    for (std::size_t r = 0; r < emb.input.rows; ++r) {
        double s = 0;
        for (float v : emb.input.row(r)) s += double(v) * v;
        max_row = std::max(max_row, std::sqrt(s));
    }
    for (const auto& d : corpus.documents)
        for (const auto& reg : d.regions) {
            double s = 0;
            for (float v : embed_region_text(reg.text, emb)) s += double(v) * v;
            EXPECT_LE(std::sqrt(s), max_row + 1e-6);
        }
}

TEST(EmbeddingFile, RoundTripBitExact) {
    TempDir tmp;
    const auto emb = train_word2vec(generate_synthetic_corpus(2, 10, 1), Word2VecConfig{.dim = 5, .epochs = 1});
    save_embeddings(emb, tmp / "e.bin");
    const auto back = load_embeddings(tmp / "e.bin");
    EXPECT_EQ(back, emb);
    EXPECT_EQ(serialize_embeddings(back), serialize_embeddings(emb));
}

TEST(EmbeddingFile, CorruptAndVersionErrors) {
    const auto emb = train_word2vec(generate_synthetic_corpus(2, 10, 1), Word2VecConfig{.dim = 5, .epochs = 1});
    auto bytes = serialize_embeddings(emb);
    EXPECT_THROW(deserialize_embeddings(bytes.substr(0, bytes.size() / 2)), CorruptFileError);
    EXPECT_THROW(deserialize_embeddings("XXXX" + bytes.substr(4)), CorruptFileError);
    bytes[4] = 99;
    EXPECT_THROW(deserialize_embeddings(bytes), VersionError);
}
