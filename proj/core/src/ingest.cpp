#include "effgnn/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "effgnn/error.hpp"
#include "effgnn/rng.hpp"
#include "json.hpp"

namespace effgnn {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::array<std::string_view, kNumCategories> kCategoryNames = {"Title", "Text", "List",
                                                                        "Table", "Figure"};

[[noreturn]] void invariant_failed(const DocumentAnnotation& doc, const std::string& what) {
    throw ValidationError("document '" + doc.doc_id + "': invariant violated: " + what);
}

void check_keys(const ordered_json& obj, std::initializer_list<std::string_view> allowed,
                std::string_view where, const LoadOptions& options) {
    for (const auto& [key, value] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) != allowed.end()) continue;
        const std::string msg = "unknown key '" + key + "' in " + std::string(where);
        if (options.strict) throw ParseError(msg);
        if (options.on_warning) options.on_warning(msg);
    }
}

const ordered_json& require(const ordered_json& obj, const char* key, std::string_view where) {
    auto it = obj.find(key);
    if (it == obj.end())
        throw ParseError("missing key '" + std::string(key) + "' in " + std::string(where));
    return *it;
}

double as_number(const ordered_json& v, std::string_view what) {
    if (!v.is_number()) throw ParseError(std::string(what) + " must be a number");
    return v.get<double>();
}

std::uint32_t as_index(const ordered_json& v, std::string_view what) {
    if (v.is_number_unsigned() && v.get<std::uint64_t>() <= UINT32_MAX)
        return static_cast<std::uint32_t>(v.get<std::uint64_t>());
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0 && v.get<std::int64_t>() <= UINT32_MAX)
        return static_cast<std::uint32_t>(v.get<std::int64_t>());
    throw ParseError(std::string(what) + " must be a non-negative integer");
}

RegionAnnotation region_from_json(const ordered_json& j, const LoadOptions& options) {
    if (!j.is_object()) throw ParseError("region must be an object");
    check_keys(j, {"region_id", "category", "bbox", "text", "image_embedding"}, "region", options);

    RegionAnnotation r;
    r.region_id = as_index(require(j, "region_id", "region"), "region_id");

    const auto& cat = require(j, "category", "region");
    if (!cat.is_string()) throw ParseError("category must be a string");
    const auto parsed = category_from_string(cat.get<std::string>());
    if (!parsed) throw ParseError("unknown category '" + cat.get<std::string>() + "'");
    r.category = *parsed;

    const auto& box = require(j, "bbox", "region");
    if (!box.is_array() || box.size() != 4) throw ParseError("bbox must be an array of 4 numbers");
    r.bbox = {as_number(box[0], "bbox[0]"), as_number(box[1], "bbox[1]"),
              as_number(box[2], "bbox[2]"), as_number(box[3], "bbox[3]")};

    const auto& text = require(j, "text", "region");
    if (!text.is_string()) throw ParseError("text must be a string");
    r.text = text.get<std::string>();

    if (auto it = j.find("image_embedding"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) throw ParseError("image_embedding must be an array");
        std::vector<double> vec;
        vec.reserve(it->size());
        for (const auto& v : *it) vec.push_back(as_number(v, "image_embedding entry"));
        r.image_embedding = std::move(vec);
    }
    return r;
}

DocumentAnnotation document_from_json(const ordered_json& j, const LoadOptions& options,
                                      bool label_required) {
    if (!j.is_object()) throw ParseError("document must be a JSON object");
    check_keys(j, {"doc_id", "page_width", "page_height", "label", "regions"}, "document", options);

    DocumentAnnotation doc;
    const auto& id = require(j, "doc_id", "document");
    if (!id.is_string()) throw ParseError("doc_id must be a string");
    doc.doc_id = id.get<std::string>();
    doc.page_width = as_number(require(j, "page_width", "document"), "page_width");
    doc.page_height = as_number(require(j, "page_height", "document"), "page_height");
    if (auto it = j.find("label"); it != j.end() && !it->is_null()) {
        doc.label = as_index(*it, "label");
    } else if (label_required) {
        throw ParseError("missing key 'label' in document '" + doc.doc_id + "'");
    }
    const auto& regions = require(j, "regions", "document");
    if (!regions.is_array()) throw ParseError("regions must be an array");
    doc.regions.reserve(regions.size());
    for (const auto& r : regions) doc.regions.push_back(region_from_json(r, options));
    return doc;
}

ordered_json document_to_ordered_json(const DocumentAnnotation& doc) {
    ordered_json j;
    j["doc_id"] = doc.doc_id;
    j["page_width"] = doc.page_width;
    j["page_height"] = doc.page_height;
    j["label"] = doc.label;
    ordered_json regions = ordered_json::array();
    for (const auto& r : doc.regions) {
        ordered_json rj;
        rj["region_id"] = r.region_id;
        rj["category"] = std::string(to_string(r.category));
        rj["bbox"] = {r.bbox.x0, r.bbox.y0, r.bbox.x1, r.bbox.y1};
        rj["text"] = r.text;
        if (r.image_embedding) rj["image_embedding"] = *r.image_embedding;
        regions.push_back(std::move(rj));
    }
    j["regions"] = std::move(regions);
    return j;
}

ordered_json parse_json(std::string_view text, std::string_view where) {
    try {
        return ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string(where) + ": malformed JSON: " + e.what());
    }
}

}  // namespace

std::string_view to_string(Category c) noexcept { return kCategoryNames[static_cast<std::size_t>(c)]; }

std::optional<Category> category_from_string(std::string_view name) noexcept {
    for (std::size_t i = 0; i < kCategoryNames.size(); ++i)
        if (kCategoryNames[i] == name) return static_cast<Category>(i);
    return std::nullopt;
}

void validate_document(const DocumentAnnotation& doc, std::size_t n_classes) {
    if (doc.doc_id.empty()) invariant_failed(doc, "doc_id non-empty");
    if (!(doc.page_width > 0) || !std::isfinite(doc.page_width))
        invariant_failed(doc, "page_width > 0");
    if (!(doc.page_height > 0) || !std::isfinite(doc.page_height))
        invariant_failed(doc, "page_height > 0");
    if (doc.regions.empty()) invariant_failed(doc, "regions non-empty");

    std::unordered_set<std::uint32_t> ids;
    for (const auto& r : doc.regions) {
        const std::string where = " (region " + std::to_string(r.region_id) + ")";
        if (!ids.insert(r.region_id).second) invariant_failed(doc, "region_ids unique" + where);
        const auto& b = r.bbox;
        if (!std::isfinite(b.x0) || !std::isfinite(b.y0) || !std::isfinite(b.x1) || !std::isfinite(b.y1))
            invariant_failed(doc, "bbox finite" + where);
        if (!(b.x0 < b.x1)) invariant_failed(doc, "x0 < x1" + where);
        if (!(b.y0 < b.y1)) invariant_failed(doc, "y0 < y1" + where);
        if (b.x0 < 0 || b.y0 < 0 || b.x1 > doc.page_width || b.y1 > doc.page_height)
            invariant_failed(doc, "bbox within page bounds" + where);
        if (r.image_embedding) {
            if (r.image_embedding->empty()) invariant_failed(doc, "image_embedding non-empty" + where);
            for (double v : *r.image_embedding)
                if (!std::isfinite(v)) invariant_failed(doc, "image_embedding finite" + where);
        }
    }
    if (n_classes > 0 && doc.label >= n_classes)
        invariant_failed(doc, "label < number of classes (" + std::to_string(doc.label) +
                                  " >= " + std::to_string(n_classes) + ")");
}

void validate_corpus(const Corpus& corpus) {
    if (corpus.class_names.size() < 2)
        throw ValidationError("corpus: invariant violated: at least 2 classes");
    std::vector<std::size_t> per_class(corpus.class_names.size(), 0);
    for (const auto& doc : corpus.documents) {
        validate_document(doc, corpus.class_names.size());
        ++per_class[doc.label];
    }
    for (std::size_t c = 0; c < per_class.size(); ++c)
        if (per_class[c] == 0)
            throw ValidationError("corpus: invariant violated: at least 1 document per class (class '" +
                                  corpus.class_names[c] + "' has none)");
}

Corpus read_corpus(std::istream& in, const LoadOptions& options) {
    Corpus corpus;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const std::string where = "line " + std::to_string(line_no);
        auto j = parse_json(line, where);
        try {
            if (!have_header) {
                if (!j.is_object()) throw ParseError("header must be a JSON object");
                check_keys(j, {"class_names", "version"}, "header", options);
                const auto& version = require(j, "version", "header");
                if (!version.is_number_integer() || version.get<std::int64_t>() != kCorpusFormatVersion)
                    throw ParseError("unsupported corpus version " + version.dump());
                const auto& names = require(j, "class_names", "header");
                if (!names.is_array()) throw ParseError("class_names must be an array");
                for (const auto& n : names) {
                    if (!n.is_string()) throw ParseError("class_names entries must be strings");
                    corpus.class_names.push_back(n.get<std::string>());
                }
                have_header = true;
            } else {
                corpus.documents.push_back(document_from_json(j, options, true));
            }
        } catch (const ParseError& e) {
            throw ParseError(where + ": " + e.what());
        }
    }
    if (!have_header) throw ParseError("corpus file is empty (missing header line)");
    validate_corpus(corpus);
    return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus: " + path.string());
    return read_corpus(in, options);
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
    ordered_json header;
    header["class_names"] = corpus.class_names;
    header["version"] = kCorpusFormatVersion;
    out << header.dump() << '\n';
    for (const auto& doc : corpus.documents) out << document_to_ordered_json(doc).dump() << '\n';
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    write_corpus(corpus, out);
    if (!out) throw IoError("write failed: " + path.string());
}

DocumentAnnotation parse_document(std::string_view json_text, const LoadOptions& options,
                                  bool label_required) {
    auto j = parse_json(json_text, "document");
    auto doc = document_from_json(j, options, label_required);
    validate_document(doc);
    return doc;
}

std::string document_to_json(const DocumentAnnotation& doc) {
    return document_to_ordered_json(doc).dump();
}

DatasetSplit split_dataset(const Corpus& corpus, const SplitRatios& ratios, std::uint64_t seed) {
    const std::array<double, 3> r = {ratios.train, ratios.validation, ratios.test};
    for (double x : r)
        if (!(x >= 0) || !std::isfinite(x)) throw ValidationError("split ratios must be non-negative");
    if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) throw ValidationError("split ratios must sum to 1");
    if (!(r[0] > 0) || !(r[2] > 0)) throw ValidationError("train and test ratios must be > 0");

    const std::size_t required = static_cast<std::size_t>(std::count_if(r.begin(), r.end(), [](double x) { return x > 0; }));

    std::vector<std::vector<std::size_t>> by_class(corpus.n_classes());
    for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
        const auto label = corpus.documents[i].label;
        if (label >= by_class.size()) throw ValidationError("document label out of range");
        by_class[label].push_back(i);
    }

    DatasetSplit split;
    std::array<std::vector<std::size_t>*, 3> out = {&split.train, &split.validation, &split.test};
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& members = by_class[c];
        const std::size_t n = members.size();
        if (n == 0) continue;
        if (n < required)
            throw ValidationError("class '" + corpus.class_names[c] + "' has " + std::to_string(n) +
                                  " documents, fewer than the " + std::to_string(required) +
                                  " non-empty splits requested");

        // Largest-remainder apportionment, then guarantee one member per
        // positive-ratio split by borrowing from the largest bucket.
        std::array<std::size_t, 3> count{};
        std::array<double, 3> rem{};
        std::size_t assigned = 0;
        for (int s = 0; s < 3; ++s) {
            const double exact = r[s] * static_cast<double>(n);
            count[s] = static_cast<std::size_t>(std::floor(exact));
            rem[s] = exact - static_cast<double>(count[s]);
            assigned += count[s];
        }
        std::array<int, 3> order = {0, 1, 2};
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
        for (int k = 0; assigned < n; k = (k + 1) % 3) {
            if (r[order[k]] > 0) {
                ++count[order[k]];
                ++assigned;
            }
        }
        for (int s = 0; s < 3; ++s) {
            if (r[s] > 0 && count[s] == 0) {
                const auto donor = static_cast<std::size_t>(std::max_element(count.begin(), count.end()) - count.begin());
                --count[donor];
                ++count[s];
            }
        }

        Rng rng(derive_seed(seed, c));
        rng.shuffle(std::span<std::size_t>(members));
        std::size_t pos = 0;
        for (int s = 0; s < 3; ++s) {
            out[s]->insert(out[s]->end(), members.begin() + static_cast<std::ptrdiff_t>(pos),
                           members.begin() + static_cast<std::ptrdiff_t>(pos + count[s]));
            pos += count[s];
        }
    }
    for (auto* list : out) std::sort(list->begin(), list->end());
    if (split.train.empty() || split.test.empty())
        throw ValidationError("split produced an empty train or test set");
    return split;
}

}  // namespace effgnn
