#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "effgnn/error.hpp"
#include "effgnn/ingest.hpp"
#include "effgnn/rng.hpp"

namespace effgnn {

namespace {

constexpr std::array<std::string_view, 20> kOnsets = {"b", "c", "d", "f", "g", "h", "j", "k", "l", "m",
                                                      "n", "p", "r", "s", "t", "v", "w", "z", "st", "tr"};
constexpr std::array<std::string_view, 6> kVowels = {"a", "e", "i", "o", "u", "y"};

constexpr std::size_t kClassVocab = 30;
constexpr std::size_t kBackgroundVocab = 60;

std::string make_word(Rng& rng) {
    std::string w;
    const auto syllables = rng.between(2, 3);
    for (std::int64_t s = 0; s < syllables; ++s) {
        w += kOnsets[rng.below(kOnsets.size())];
        w += kVowels[rng.below(kVowels.size())];
    }
    return w;
}

std::vector<std::string> make_vocabulary(Rng& rng, std::size_t n, std::vector<std::string>& taken) {
    std::vector<std::string> words;
    while (words.size() < n) {
        auto w = make_word(rng);
        if (std::find(taken.begin(), taken.end(), w) != taken.end()) continue;
        taken.push_back(w);
        words.push_back(std::move(w));
    }
    return words;
}

struct ClassTemplate {
    std::int64_t median_regions = 0;
    std::array<double, kNumCategories> category_weights{};
    int layout_style = 0;
    double margin = 0;
    double shrink = 0;
    double class_token_rate = 0;
    std::vector<std::string> words;
    std::vector<double> image_center;
};

Category sample_category(Rng& rng, const std::array<double, kNumCategories>& w) {
    double total = 0;
    for (double x : w) total += x;
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (u < w[i]) return static_cast<Category>(i);
        u -= w[i];
    }
    return static_cast<Category>(w.size() - 1);
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

// Grid cells in reading order; style selects the column structure.
std::vector<BBox> layout_boxes(Rng& rng, const ClassTemplate& t, std::size_t n, double W, double H) {
    const double m = t.margin;
    std::vector<BBox> cells;
    double top = m;
    std::size_t remaining = n;
    if (t.layout_style == 3 && n > 1) {
        cells.push_back({m, m, W - m, m + 0.08 * H});
        top = m + 0.1 * H;
        --remaining;
    }
    std::size_t cols = 1;
    switch (t.layout_style) {
        case 0: cols = 1; break;
        case 1: cols = 2; break;
        case 2: cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(remaining)))); break;
        default: cols = 3; break;
    }
    cols = std::max<std::size_t>(1, std::min(cols, remaining));
    const std::size_t rows = (remaining + cols - 1) / cols;
    const double cw = (W - 2 * m) / static_cast<double>(cols);
    const double ch = (H - m - top) / static_cast<double>(rows);
    for (std::size_t i = 0; i < remaining; ++i) {
        const double x = m + static_cast<double>(i % cols) * cw;
        const double y = top + static_cast<double>(i / cols) * ch;
        cells.push_back({x, y, x + cw, y + ch});
    }

    std::vector<BBox> boxes;
    boxes.reserve(cells.size());
    for (const auto& c : cells) {
        const double sx = t.shrink * rng.uniform(0.5, 1.5) * c.width();
        const double sy = t.shrink * rng.uniform(0.5, 1.5) * c.height();
        const double jx = rng.uniform(-0.3, 0.3) * sx;
        const double jy = rng.uniform(-0.3, 0.3) * sy;
        BBox b{round2(c.x0 + sx + jx), round2(c.y0 + sy + jy), round2(c.x1 - sx + jx), round2(c.y1 - sy + jy)};
        b.x0 = std::clamp(b.x0, 0.0, W - 1);
        b.y0 = std::clamp(b.y0, 0.0, H - 1);
        b.x1 = std::clamp(b.x1, b.x0 + 1, W);
        b.y1 = std::clamp(b.y1, b.y0 + 1, H);
        boxes.push_back(b);
    }
    return boxes;
}

std::string region_text(Rng& rng, const ClassTemplate& t, const std::vector<std::string>& background,
                        Category category) {
    if (rng.uniform() < 0.03) return {};  // simulated OCR failure
    std::int64_t lo = 3, hi = 12;
    switch (category) {
        case Category::Title: lo = 1; hi = 4; break;
        case Category::Figure: lo = 0; hi = 2; break;
        case Category::Table: lo = 6; hi = 16; break;
        default: break;
    }
    const auto n = rng.between(lo, hi);
    std::string text;
    for (std::int64_t i = 0; i < n; ++i) {
        if (!text.empty()) text += ' ';
        const double u = rng.uniform();
        if (u < t.class_token_rate) {
            text += t.words[rng.below(t.words.size())];
        } else if (u < t.class_token_rate + 0.1) {
            text += std::to_string(rng.below(10000));
        } else {
            text += background[rng.below(background.size())];
        }
    }
    // Capitalized titles exercise tokenizer lowercasing.
    if (category == Category::Title && !text.empty()) text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
    return text;
}

}  // namespace

Corpus generate_synthetic_corpus(std::size_t n_classes, std::size_t docs_per_class, std::uint64_t seed,
                                 const SyntheticOptions& options) {
    if (n_classes < 2) throw ValidationError("synthetic corpus needs n_classes >= 2");
    if (docs_per_class < 1) throw ValidationError("synthetic corpus needs docs_per_class >= 1");
    const double W = options.page_width;
    const double H = options.page_height;

    Rng vocab_rng(derive_seed(seed, 0xC0FFEE));
    std::vector<std::string> taken;
    const auto background = make_vocabulary(vocab_rng, kBackgroundVocab, taken);

    // Medians spread evenly over [4, 16]; per-document jitter of +-2 keeps the
    // observed medians inside [2, 18].
    std::vector<std::int64_t> medians(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c)
        medians[c] = 4 + static_cast<std::int64_t>(std::llround(12.0 * static_cast<double>(c) /
                                                                static_cast<double>(n_classes - 1)));
    Rng assign_rng(derive_seed(seed, 0xA55160));
    assign_rng.shuffle(std::span<std::int64_t>(medians));

    std::vector<ClassTemplate> templates(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) {
        Rng rng(derive_seed(seed, 0x7E3D1A7E, c));
        auto& t = templates[c];
        t.median_regions = medians[c];
        for (auto& w : t.category_weights) w = rng.uniform(0.1, 1.0);
        t.category_weights[c % kNumCategories] += 2.0;
        t.layout_style = static_cast<int>(c % 4);
        t.margin = rng.uniform(0.03, 0.08) * W;
        t.shrink = rng.uniform(0.04, 0.12);
        t.class_token_rate = rng.uniform(0.3, 0.45);
        t.words = make_vocabulary(vocab_rng, kClassVocab, taken);
        if (options.image_embedding_dim > 0) {
            t.image_center.resize(options.image_embedding_dim);
            for (auto& v : t.image_center) v = rng.uniform(-1.0, 1.0);
        }
    }

    Corpus corpus;
    for (std::size_t c = 0; c < n_classes; ++c) corpus.class_names.push_back("class_" + std::to_string(c));

    for (std::size_t c = 0; c < n_classes; ++c) {
        const auto& t = templates[c];
        for (std::size_t d = 0; d < docs_per_class; ++d) {
            Rng rng(derive_seed(seed, c + 1, d + 1));
            DocumentAnnotation doc;
            doc.doc_id = "synth-" + std::to_string(c) + "-" + std::to_string(d);
            doc.page_width = W;
            doc.page_height = H;
            doc.label = static_cast<std::uint32_t>(c);

            const auto n = static_cast<std::size_t>(std::max<std::int64_t>(1, t.median_regions + rng.between(-2, 2)));
            const auto boxes = layout_boxes(rng, t, n, W, H);
            for (std::size_t i = 0; i < boxes.size(); ++i) {
                RegionAnnotation r;
                r.region_id = static_cast<std::uint32_t>(i);
                r.category = (t.layout_style == 3 && i == 0 && boxes.size() > 1) ? Category::Title
                                                                                 : sample_category(rng, t.category_weights);
                r.bbox = boxes[i];
                r.text = region_text(rng, t, background, r.category);
                if (options.image_embedding_dim > 0) {
                    std::vector<double> v(options.image_embedding_dim);
                    const double cat_shift = 0.2 * static_cast<double>(r.category);
                    for (std::size_t k = 0; k < v.size(); ++k)
                        v[k] = round2(0.5 * t.image_center[k] + cat_shift + rng.uniform(-0.5, 0.5));
                    r.image_embedding = std::move(v);
                }
                doc.regions.push_back(std::move(r));
            }
            corpus.documents.push_back(std::move(doc));
        }
    }
    validate_corpus(corpus);
    return corpus;
}

}  // namespace effgnn
