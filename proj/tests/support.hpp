#pragma once

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "effgnn/eval.hpp"
#include "effgnn/gnn.hpp"
#include "effgnn/graph_build.hpp"
#include "effgnn/ingest.hpp"
#include "effgnn/rng.hpp"

namespace effgnn::testing {

namespace fs = std::filesystem;

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("effgnn-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_bytes(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << s;
}

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

// Runs a shell command, capturing stdout and stderr through temp files.
inline RunResult run_command(const std::string& cmd) {
    TempDir tmp;
    const auto out = tmp / "stdout";
    const auto err = tmp / "stderr";
    const std::string full = cmd + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(full.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_bytes(out);
    r.err = read_bytes(err);
    return r;
}

inline std::vector<Edge> random_edges(Rng& rng, std::size_t n, double density) {
    std::vector<Edge> edges;
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = i + 1; j < n; ++j)
            if (rng.uniform() < density) edges.emplace_back(i, j);
    return edges;
}

inline DocGraph random_graph(Rng& rng, std::size_t n, std::size_t f, std::uint32_t n_classes = 2) {
    DocGraph g;
    g.doc_id = "g" + std::to_string(rng.below(1000000));
    g.label = static_cast<std::uint32_t>(rng.below(n_classes));
    g.n_nodes = n;
    g.node_features = Matrix<float>(n, f);
    for (auto& v : g.node_features.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    g.edges = random_edges(rng, n, 0.35);
    return g;
}

// Node i of g becomes node perm[i].
inline DocGraph permute_graph(const DocGraph& g, const std::vector<std::uint32_t>& perm) {
    DocGraph p = g;
    for (std::size_t i = 0; i < g.n_nodes; ++i) {
        const auto src = g.node_features.row(i);
        std::copy(src.begin(), src.end(), p.node_features.row(perm[i]).begin());
    }
    p.edges.clear();
    for (const auto& [a, b] : g.edges) p.edges.emplace_back(std::min(perm[a], perm[b]), std::max(perm[a], perm[b]));
    std::sort(p.edges.begin(), p.edges.end());
    return p;
}

inline std::vector<std::uint32_t> random_permutation(Rng& rng, std::size_t n) {
    std::vector<std::uint32_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0u);
    rng.shuffle(std::span<std::uint32_t>(perm));
    return perm;
}

// Full comparison sort: reverse each row, order lexicographically descending,
// break complete ties by ascending index, truncate or zero-pad to k.
template <class T>
Matrix<T> sort_pool_oracle(const Matrix<T>& z, std::size_t k) {
    std::vector<std::pair<std::vector<T>, std::size_t>> keyed;
    for (std::size_t i = 0; i < z.rows; ++i) {
        std::vector<T> key(z.row(i).rbegin(), z.row(i).rend());
        keyed.emplace_back(std::move(key), i);
    }
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    Matrix<T> out(k, z.cols, T(0));
    for (std::size_t r = 0; r < std::min(k, keyed.size()); ++r)
        for (std::size_t c = 0; c < z.cols; ++c) out(r, c) = z(keyed[r].second, c);
    return out;
}

// Pairwise Mann-Whitney count per class, ties worth one half.
inline AucResult auc_oracle(const Matrix<double>& scores, const std::vector<std::uint32_t>& labels) {
    AucResult r;
    double sum = 0;
    std::size_t defined = 0;
    for (std::size_t c = 0; c < scores.cols; ++c) {
        double wins = 0;
        std::size_t pairs = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] != c) continue;
            for (std::size_t j = 0; j < labels.size(); ++j) {
                if (labels[j] == c) continue;
                ++pairs;
                if (scores(i, c) > scores(j, c)) wins += 1;
                else if (scores(i, c) == scores(j, c)) wins += 0.5;
            }
        }
        if (pairs == 0) {
            r.per_class.push_back(std::nullopt);
        } else {
            r.per_class.push_back(wins / static_cast<double>(pairs));
            sum += *r.per_class.back();
            ++defined;
        }
    }
    r.macro = defined ? sum / static_cast<double>(defined) : 0.0;
    return r;
}

struct GradCheck {
    double max_rel_error = 0;
    std::size_t checked = 0;
};

// Central differences on every scalar parameter against loss_and_gradients.
// Relative error denominator: max(|analytic|, |numeric|, floor).
inline GradCheck finite_difference_check(const BasicGnnModel<double>& model, const std::vector<DocGraph>& batch,
                                         std::uint64_t dropout_seed, double eps = 1e-5, double floor = 1e-6) {
    const auto analytic = loss_and_gradients<double>(batch, model, dropout_seed).gradients;
    std::vector<const Matrix<double>*> grads;
    analytic.for_each([&](const Matrix<double>& m) { grads.push_back(&m); });

    BasicGnnModel<double> probe = model;
    std::vector<Matrix<double>*> params;
    probe.params.for_each([&](Matrix<double>& m) { params.push_back(&m); });

    GradCheck out;
    for (std::size_t t = 0; t < params.size(); ++t) {
        for (std::size_t i = 0; i < params[t]->data.size(); ++i) {
            double& w = params[t]->data[i];
            const double saved = w;
            w = saved + eps;
            const double up = loss_and_gradients<double>(batch, probe, dropout_seed).loss;
            w = saved - eps;
            const double down = loss_and_gradients<double>(batch, probe, dropout_seed).loss;
            w = saved;
            const double numeric = (up - down) / (2 * eps);
            const double a = grads[t]->data[i];
            const double denom = std::max({std::abs(a), std::abs(numeric), floor});
            out.max_rel_error = std::max(out.max_rel_error, std::abs(a - numeric) / denom);
            ++out.checked;
        }
    }
    return out;
}

inline GnnConfig tiny_config() {
    GnnConfig c;
    c.conv_channels = {4, 1};
    c.sortpool_k = 2;
    return c;
}

inline std::vector<DocGraph> tiny_batch(Rng& rng, std::size_t count) {
    std::vector<DocGraph> batch;
    for (std::size_t i = 0; i < count; ++i) batch.push_back(random_graph(rng, 1 + rng.below(5), 6));
    return batch;
}

}  // namespace effgnn::testing
