#pragma once

// Document annotation corpus: the contract between layout/OCR tooling and the
// classifier. A corpus file is line-delimited JSON, a header line carrying the
// class names followed by one document per line.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace effgnn {

enum class Category : std::uint8_t { Title = 0, Text = 1, List = 2, Table = 3, Figure = 4 };

inline constexpr std::size_t kNumCategories = 5;

std::string_view to_string(Category c) noexcept;
std::optional<Category> category_from_string(std::string_view name) noexcept;

struct BBox {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    double width() const noexcept { return x1 - x0; }
    double height() const noexcept { return y1 - y0; }
    double cx() const noexcept { return 0.5 * (x0 + x1); }
    double cy() const noexcept { return 0.5 * (y0 + y1); }

    bool operator==(const BBox&) const = default;
};

struct RegionAnnotation {
    std::uint32_t region_id = 0;
    Category category = Category::Text;
    BBox bbox;
    std::string text;
    std::optional<std::vector<double>> image_embedding;

    bool operator==(const RegionAnnotation&) const = default;
};

struct DocumentAnnotation {
    std::string doc_id;
    double page_width = 0;
    double page_height = 0;
    std::vector<RegionAnnotation> regions;
    std::uint32_t label = 0;

    bool operator==(const DocumentAnnotation&) const = default;
};

struct Corpus {
    std::vector<std::string> class_names;
    std::vector<DocumentAnnotation> documents;

    std::size_t n_classes() const noexcept { return class_names.size(); }

    bool operator==(const Corpus&) const = default;
};

struct DatasetSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;

    bool operator==(const DatasetSplit&) const = default;
};

using WarningSink = std::function<void(std::string_view)>;

struct LoadOptions {
    // Reject unknown keys. When false they are reported through on_warning.
    bool strict = true;
    WarningSink on_warning;
};

inline constexpr int kCorpusFormatVersion = 1;

/// Throws ValidationError naming the first violated invariant and the doc_id.
/// n_classes == 0 skips the label range check (single-document requests).
void validate_document(const DocumentAnnotation& doc, std::size_t n_classes = 0);
void validate_corpus(const Corpus& corpus);

Corpus load_corpus(const std::filesystem::path& path, const LoadOptions& options = {});
Corpus read_corpus(std::istream& in, const LoadOptions& options = {});
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
void write_corpus(const Corpus& corpus, std::ostream& out);

/// Parses one DocumentAnnotation JSON object. When label_required is false a
/// missing label defaults to 0. The result is validated (without class range).
DocumentAnnotation parse_document(std::string_view json_text, const LoadOptions& options = {},
                                  bool label_required = true);
std::string document_to_json(const DocumentAnnotation& doc);

struct SplitRatios {
    double train = 0.8;
    double validation = 0.0;
    double test = 0.2;
};

/// Stratified, seed-deterministic split. Each index list is sorted ascending.
DatasetSplit split_dataset(const Corpus& corpus, const SplitRatios& ratios, std::uint64_t seed);

struct SyntheticOptions {
    // When > 0 every region carries an image embedding of this length.
    std::size_t image_embedding_dim = 0;
    double page_width = 1000.0;
    double page_height = 1400.0;
};

/// Class-conditional synthetic corpus. Each class has its own region-count
/// distribution, category mix, spatial arrangement and token vocabulary, mixed
/// with background tokens shared by all classes.
Corpus generate_synthetic_corpus(std::size_t n_classes, std::size_t docs_per_class,
                                 std::uint64_t seed, const SyntheticOptions& options = {});

}  // namespace effgnn
