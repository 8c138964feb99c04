#include "effgnn/gnn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "effgnn/error.hpp"
#include "effgnn/rng.hpp"

namespace effgnn {

namespace {

struct Neighborhoods {
    // Each list holds the node itself plus its neighbours.
    std::vector<std::vector<std::uint32_t>> members;
};

Neighborhoods build_neighborhoods(std::size_t n, std::span<const Edge> edges) {
    Neighborhoods nb;
    nb.members.resize(n);
    for (std::size_t i = 0; i < n; ++i) nb.members[i].push_back(static_cast<std::uint32_t>(i));
    for (const auto& [a, b] : edges) {
        if (a >= n || b >= n) throw ShapeError("edge endpoint out of range");
        if (a == b) continue;  // the self-loop is already present
        nb.members[a].push_back(b);
        nb.members[b].push_back(a);
    }
    return nb;
}

// out = tanh(D^-1 (A+I) (z W) + b), with each neighbourhood sum taken over
// sorted values so the result depends only on the multiset of neighbours.
template <class T>
Matrix<T> conv_layer(const Matrix<T>& z, const Neighborhoods& nb, const Matrix<T>& w, std::span<const T> bias) {
    const std::size_t n = z.rows;
    const std::size_t c_in = w.rows;
    const std::size_t c_out = w.cols;
    if (z.cols != c_in) throw ShapeError("graph conv: input width does not match weight rows");
    if (!bias.empty() && bias.size() != c_out) throw ShapeError("graph conv: bias width mismatch");

    Matrix<T> y(n, c_out, T(0));
    for (std::size_t i = 0; i < n; ++i) {
        auto yr = y.row(i);
        const auto zr = z.row(i);
        for (std::size_t c = 0; c < c_in; ++c) {
            const T v = zr[c];
            const auto wr = w.row(c);
            for (std::size_t o = 0; o < c_out; ++o) yr[o] += v * wr[o];
        }
    }

    Matrix<T> out(n, c_out);
    std::vector<T> scratch;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& members = nb.members[i];
        const T deg = static_cast<T>(members.size());
        for (std::size_t o = 0; o < c_out; ++o) {
            scratch.clear();
            for (auto j : members) scratch.push_back(y(j, o));
            std::sort(scratch.begin(), scratch.end());
            T s = 0;
            for (T v : scratch) s += v;
            T h = s / deg;
            if (!bias.empty()) h += bias[o];
            out(i, o) = std::tanh(h);
        }
    }
    return out;
}

template <class T>
bool row_before(const Matrix<T>& z, std::size_t a, std::size_t b) {
    for (std::size_t c = z.cols; c-- > 0;) {
        const T va = z(a, c);
        const T vb = z(b, c);
        if (va != vb) return va > vb;
    }
    return a < b;
}

template <class T>
struct ForwardCache {
    Neighborhoods nb;
    std::vector<Matrix<T>> z;  // z[0] = input, z[l + 1] = output of conv layer l
    Matrix<T> z_cat;
    std::vector<std::int64_t> source;
    std::vector<T> flat;
    Matrix<T> a1;
    Matrix<T> pooled;
    std::vector<std::size_t> pool_arg;  // P x ch1, position in a1
    Matrix<T> a2;
    std::vector<T> h_in;
    std::vector<T> h;
    std::vector<T> mask;
    std::vector<T> h_drop;
    std::vector<T> logits;
    std::vector<T> probs;
};

template <class T>
void forward_impl(const DocGraph& graph, const BasicGnnModel<T>& model, const GnnShapes& s, bool training,
                  std::uint64_t dropout_seed, ForwardCache<T>& cache) {
    if (graph.feature_dim() != model.feature_dim)
        throw ShapeError("graph '" + graph.doc_id + "' has feature_dim " + std::to_string(graph.feature_dim()) +
                         ", model expects " + std::to_string(model.feature_dim));
    if (graph.n_nodes == 0 || graph.node_features.rows != graph.n_nodes)
        throw ShapeError("graph '" + graph.doc_id + "' has inconsistent node count");
    const auto& p = model.params;
    const auto& cfg = model.config;
    const std::size_t n = graph.n_nodes;

    cache.nb = build_neighborhoods(n, graph.edges);
    cache.z.assign(1, matrix_cast<T>(graph.node_features));
    for (std::size_t l = 0; l < p.conv_weight.size(); ++l)
        cache.z.push_back(conv_layer<T>(cache.z[l], cache.nb, p.conv_weight[l], p.conv_bias[l].data));

    cache.z_cat = Matrix<T>(n, s.total_channels);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t col = 0;
        for (std::size_t l = 1; l < cache.z.size(); ++l)
            for (T v : cache.z[l].row(i)) cache.z_cat(i, col++) = v;
    }

    auto sp = sort_pooling(cache.z_cat, s.k);
    cache.source = std::move(sp.source);
    cache.flat = std::move(sp.pooled.data);

    const std::size_t C = s.total_channels;
    if (cfg.conv1d_enabled) {
        const std::size_t ch1 = cfg.conv1d_channels_1;
        const std::size_t ch2 = cfg.conv1d_channels_2;
        cache.a1 = Matrix<T>(s.conv1_len, ch1);
        for (std::size_t pos = 0; pos < s.conv1_len; ++pos) {
            const T* x = cache.flat.data() + pos * C;
            for (std::size_t o = 0; o < ch1; ++o) {
                T acc = p.conv1_bias.data[o];
                const auto wr = p.conv1_weight.row(o);
                for (std::size_t m = 0; m < C; ++m) acc += wr[m] * x[m];
                cache.a1(pos, o) = std::tanh(acc);
            }
        }
        cache.pooled = Matrix<T>(s.pooled_len, ch1);
        cache.pool_arg.assign(s.pooled_len * ch1, 0);
        for (std::size_t q = 0; q < s.pooled_len; ++q) {
            const std::size_t lo = q * cfg.pool_size;
            const std::size_t hi = std::min(s.conv1_len, lo + cfg.pool_size);
            for (std::size_t o = 0; o < ch1; ++o) {
                std::size_t best = lo;
                for (std::size_t pos = lo + 1; pos < hi; ++pos)
                    if (cache.a1(pos, o) > cache.a1(best, o)) best = pos;
                cache.pooled(q, o) = cache.a1(best, o);
                cache.pool_arg[q * ch1 + o] = best;
            }
        }
        cache.a2 = Matrix<T>(s.conv2_len, ch2);
        for (std::size_t t = 0; t < s.conv2_len; ++t) {
            const std::size_t start = t * cfg.conv1d_stride_2;
            for (std::size_t o = 0; o < ch2; ++o) {
                T acc = p.conv2_bias.data[o];
                const auto wr = p.conv2_weight.row(o);
                for (std::size_t kk = 0; kk < s.kernel_2; ++kk) {
                    const auto in = cache.pooled.row(start + kk);
                    for (std::size_t i = 0; i < ch1; ++i) acc += wr[kk * ch1 + i] * in[i];
                }
                cache.a2(t, o) = std::tanh(acc);
            }
        }
        cache.h_in = cache.a2.data;
    } else {
        cache.h_in = cache.flat;
    }

    if (cfg.dense_hidden > 0) {
        const std::size_t H = cfg.dense_hidden;
        std::vector<T> acc(p.dense_bias.data.begin(), p.dense_bias.data.end());
        for (std::size_t i = 0; i < cache.h_in.size(); ++i) {
            const T v = cache.h_in[i];
            const auto wr = p.dense_weight.row(i);
            for (std::size_t j = 0; j < H; ++j) acc[j] += v * wr[j];
        }
        cache.h.resize(H);
        for (std::size_t j = 0; j < H; ++j) cache.h[j] = std::tanh(acc[j]);
        cache.mask.clear();
        if (training && cfg.dropout_rate > 0) {
            Rng rng(dropout_seed);
            const T keep_scale = T(1) / static_cast<T>(1.0 - cfg.dropout_rate);
            cache.mask.resize(H);
            for (auto& m : cache.mask) m = rng.uniform() < cfg.dropout_rate ? T(0) : keep_scale;
            cache.h_drop.resize(H);
            for (std::size_t j = 0; j < H; ++j) cache.h_drop[j] = cache.h[j] * cache.mask[j];
        } else {
            cache.h_drop = cache.h;
        }
    } else {
        cache.h.clear();
        cache.mask.clear();
        cache.h_drop = cache.h_in;
    }

    cache.logits.assign(p.out_bias.data.begin(), p.out_bias.data.end());
    for (std::size_t j = 0; j < cache.h_drop.size(); ++j) {
        const T v = cache.h_drop[j];
        const auto wr = p.out_weight.row(j);
        for (std::size_t c = 0; c < s.n_classes; ++c) cache.logits[c] += v * wr[c];
    }
    const T mx = *std::max_element(cache.logits.begin(), cache.logits.end());
    cache.probs.resize(s.n_classes);
    T total = 0;
    for (std::size_t c = 0; c < s.n_classes; ++c) {
        cache.probs[c] = std::exp(cache.logits[c] - mx);
        total += cache.probs[c];
    }
    for (auto& v : cache.probs) v /= total;
}

template <class T>
T log_prob(const ForwardCache<T>& cache, std::size_t label) {
    const T mx = *std::max_element(cache.logits.begin(), cache.logits.end());
    T total = 0;
    for (T l : cache.logits) total += std::exp(l - mx);
    return cache.logits[label] - mx - std::log(total);
}

template <class T>
void backward_impl(const ForwardCache<T>& cache, const BasicGnnModel<T>& model, const GnnShapes& s,
                   std::size_t label, T scale, GnnParameters<T>& g) {
    const auto& p = model.params;
    const auto& cfg = model.config;

    std::vector<T> dlogits(s.n_classes);
    for (std::size_t c = 0; c < s.n_classes; ++c)
        dlogits[c] = (cache.probs[c] - (c == label ? T(1) : T(0))) * scale;

    std::vector<T> dh_drop(cache.h_drop.size(), T(0));
    for (std::size_t c = 0; c < s.n_classes; ++c) g.out_bias.data[c] += dlogits[c];
    for (std::size_t j = 0; j < cache.h_drop.size(); ++j) {
        const auto wr = p.out_weight.row(j);
        auto gr = g.out_weight.row(j);
        T acc = 0;
        for (std::size_t c = 0; c < s.n_classes; ++c) {
            gr[c] += cache.h_drop[j] * dlogits[c];
            acc += wr[c] * dlogits[c];
        }
        dh_drop[j] = acc;
    }

    std::vector<T> dh_in;
    if (cfg.dense_hidden > 0) {
        const std::size_t H = cfg.dense_hidden;
        std::vector<T> dpre(H);
        for (std::size_t j = 0; j < H; ++j) {
            T d = dh_drop[j];
            if (!cache.mask.empty()) d *= cache.mask[j];
            dpre[j] = d * (T(1) - cache.h[j] * cache.h[j]);
            g.dense_bias.data[j] += dpre[j];
        }
        dh_in.assign(cache.h_in.size(), T(0));
        for (std::size_t i = 0; i < cache.h_in.size(); ++i) {
            const auto wr = p.dense_weight.row(i);
            auto gr = g.dense_weight.row(i);
            T acc = 0;
            for (std::size_t j = 0; j < H; ++j) {
                gr[j] += cache.h_in[i] * dpre[j];
                acc += wr[j] * dpre[j];
            }
            dh_in[i] = acc;
        }
    } else {
        dh_in = std::move(dh_drop);
    }

    const std::size_t C = s.total_channels;
    std::vector<T> dflat;
    if (cfg.conv1d_enabled) {
        const std::size_t ch1 = cfg.conv1d_channels_1;
        const std::size_t ch2 = cfg.conv1d_channels_2;
        Matrix<T> dpooled(s.pooled_len, ch1, T(0));
        for (std::size_t t = 0; t < s.conv2_len; ++t) {
            const std::size_t start = t * cfg.conv1d_stride_2;
            for (std::size_t o = 0; o < ch2; ++o) {
                const T a = cache.a2(t, o);
                const T d = dh_in[t * ch2 + o] * (T(1) - a * a);
                g.conv2_bias.data[o] += d;
                const auto wr = p.conv2_weight.row(o);
                auto gr = g.conv2_weight.row(o);
                for (std::size_t kk = 0; kk < s.kernel_2; ++kk) {
                    const auto in = cache.pooled.row(start + kk);
                    auto din = dpooled.row(start + kk);
                    for (std::size_t i = 0; i < ch1; ++i) {
                        gr[kk * ch1 + i] += d * in[i];
                        din[i] += d * wr[kk * ch1 + i];
                    }
                }
            }
        }
        Matrix<T> da1(s.conv1_len, ch1, T(0));
        for (std::size_t q = 0; q < s.pooled_len; ++q)
            for (std::size_t o = 0; o < ch1; ++o) da1(cache.pool_arg[q * ch1 + o], o) += dpooled(q, o);

        dflat.assign(s.k * C, T(0));
        for (std::size_t pos = 0; pos < s.conv1_len; ++pos) {
            const T* x = cache.flat.data() + pos * C;
            T* dx = dflat.data() + pos * C;
            for (std::size_t o = 0; o < ch1; ++o) {
                const T a = cache.a1(pos, o);
                const T d = da1(pos, o) * (T(1) - a * a);
                if (d == T(0)) continue;
                g.conv1_bias.data[o] += d;
                const auto wr = p.conv1_weight.row(o);
                auto gr = g.conv1_weight.row(o);
                for (std::size_t m = 0; m < C; ++m) {
                    gr[m] += d * x[m];
                    dx[m] += d * wr[m];
                }
            }
        }
    } else {
        dflat = std::move(dh_in);
    }

    const std::size_t n = cache.z_cat.rows;
    Matrix<T> dz_cat(n, C, T(0));
    for (std::size_t r = 0; r < s.k; ++r) {
        if (cache.source[r] < 0) continue;
        auto dst = dz_cat.row(static_cast<std::size_t>(cache.source[r]));
        for (std::size_t c = 0; c < C; ++c) dst[c] += dflat[r * C + c];
    }

    const std::size_t L = p.conv_weight.size();
    std::vector<std::size_t> offset(L + 1, 0);
    for (std::size_t l = 0; l < L; ++l) offset[l + 1] = offset[l] + p.conv_weight[l].cols;

    Matrix<T> carry;  // gradient flowing into the output of layer l from layer l + 1
    for (std::size_t l = L; l-- > 0;) {
        const auto& w = p.conv_weight[l];
        const std::size_t c_in = w.rows;
        const std::size_t c_out = w.cols;
        const auto& out = cache.z[l + 1];
        const auto& in = cache.z[l];

        Matrix<T> dpre(n, c_out);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t o = 0; o < c_out; ++o) {
                T d = dz_cat(i, offset[l] + o);
                if (!carry.empty()) d += carry(i, o);
                const T z = out(i, o);
                dpre(i, o) = d * (T(1) - z * z);
                g.conv_bias[l].data[o] += dpre(i, o);
            }

        Matrix<T> dy(n, c_out, T(0));
        for (std::size_t i = 0; i < n; ++i) {
            const auto& members = cache.nb.members[i];
            const T inv_deg = T(1) / static_cast<T>(members.size());
            for (auto j : members)
                for (std::size_t o = 0; o < c_out; ++o) dy(j, o) += dpre(i, o) * inv_deg;
        }

        auto& gw = g.conv_weight[l];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < c_in; ++c) {
                const T v = in(i, c);
                auto gr = gw.row(c);
                for (std::size_t o = 0; o < c_out; ++o) gr[o] += v * dy(i, o);
            }

        if (l > 0) {
            carry = Matrix<T>(n, c_in, T(0));
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t c = 0; c < c_in; ++c) {
                    const auto wr = w.row(c);
                    T acc = 0;
                    for (std::size_t o = 0; o < c_out; ++o) acc += dy(i, o) * wr[o];
                    carry(i, c) = acc;
                }
        }
    }
}

template <class T>
Matrix<T> glorot(Rng& rng, std::size_t rows, std::size_t cols, double fan_in, double fan_out) {
    Matrix<T> m(rows, cols);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& v : m.data) v = static_cast<T>(rng.uniform(-limit, limit));
    return m;
}

}  // namespace

void GnnConfig::validate() const {
    if (conv_channels.empty()) throw ValidationError("conv_channels must not be empty");
    for (auto c : conv_channels)
        if (c < 1) throw ValidationError("conv_channels entries must be >= 1");
    if (sortpool_k < 1) throw ValidationError("sortpool_k must be >= 1");
    if (!(dropout_rate >= 0 && dropout_rate < 1)) throw ValidationError("dropout_rate must be in [0, 1)");
    if (conv1d_enabled) {
        if (conv1d_channels_1 < 1 || conv1d_channels_2 < 1) throw ValidationError("conv1d channels must be >= 1");
        if (conv1d_kernel_2 < 1 || conv1d_stride_2 < 1) throw ValidationError("conv1d kernel/stride must be >= 1");
        if (pool_size < 1) throw ValidationError("pool_size must be >= 1");
    }
    if (activation != Activation::Tanh) throw ValidationError("unsupported activation");
}

std::size_t GnnConfig::total_conv_channels() const noexcept {
    return std::accumulate(conv_channels.begin(), conv_channels.end(), std::size_t{0});
}

GnnShapes compute_shapes(const GnnConfig& config, std::size_t feature_dim, std::size_t n_classes) {
    config.validate();
    if (feature_dim < 1) throw ValidationError("feature_dim must be >= 1");
    if (n_classes < 2) throw ValidationError("n_classes must be >= 2");
    GnnShapes s;
    s.feature_dim = feature_dim;
    s.n_classes = n_classes;
    s.total_channels = config.total_conv_channels();
    s.k = config.sortpool_k;
    if (config.conv1d_enabled) {
        s.conv1_len = s.k;
        s.pooled_len = (s.conv1_len + config.pool_size - 1) / config.pool_size;
        s.kernel_2 = std::min<std::size_t>(config.conv1d_kernel_2, s.pooled_len);
        s.conv2_len = (s.pooled_len - s.kernel_2) / config.conv1d_stride_2 + 1;
        s.dense_in = s.conv2_len * config.conv1d_channels_2;
    } else {
        s.dense_in = s.k * s.total_channels;
    }
    s.dense_out = config.dense_hidden > 0 ? config.dense_hidden : s.dense_in;
    return s;
}

std::size_t count_parameters(const GnnConfig& config, std::size_t feature_dim, std::size_t n_classes) {
    const auto s = compute_shapes(config, feature_dim, n_classes);
    std::size_t total = 0;
    std::size_t in = feature_dim;
    for (auto c : config.conv_channels) {
        total += in * c + c;
        in = c;
    }
    if (config.conv1d_enabled) {
        total += s.total_channels * config.conv1d_channels_1 + config.conv1d_channels_1;
        total += s.kernel_2 * config.conv1d_channels_1 * config.conv1d_channels_2 + config.conv1d_channels_2;
    }
    if (config.dense_hidden > 0) total += s.dense_in * config.dense_hidden + config.dense_hidden;
    total += s.dense_out * n_classes + n_classes;
    return total;
}

template <class T>
BasicGnnModel<T> make_model(const GnnConfig& config, std::size_t feature_dim, std::size_t n_classes,
                            std::uint64_t seed) {
    const auto s = compute_shapes(config, feature_dim, n_classes);
    BasicGnnModel<T> m;
    m.config = config;
    m.feature_dim = feature_dim;
    m.n_classes = n_classes;
    Rng rng(seed);
    auto& p = m.params;
    std::size_t in = feature_dim;
    for (auto c : config.conv_channels) {
        p.conv_weight.push_back(glorot<T>(rng, in, c, static_cast<double>(in), static_cast<double>(c)));
        p.conv_bias.emplace_back(1, c, T(0));
        in = c;
    }
    if (config.conv1d_enabled) {
        const double C = static_cast<double>(s.total_channels);
        const double ch1 = config.conv1d_channels_1;
        const double ch2 = config.conv1d_channels_2;
        const double k2 = static_cast<double>(s.kernel_2);
        p.conv1_weight = glorot<T>(rng, config.conv1d_channels_1, s.total_channels, C, ch1 * C);
        p.conv1_bias = Matrix<T>(1, config.conv1d_channels_1, T(0));
        p.conv2_weight = glorot<T>(rng, config.conv1d_channels_2, s.kernel_2 * config.conv1d_channels_1, ch1 * k2,
                                   ch2 * k2);
        p.conv2_bias = Matrix<T>(1, config.conv1d_channels_2, T(0));
    }
    if (config.dense_hidden > 0) {
        p.dense_weight = glorot<T>(rng, s.dense_in, config.dense_hidden, static_cast<double>(s.dense_in),
                                   config.dense_hidden);
        p.dense_bias = Matrix<T>(1, config.dense_hidden, T(0));
    }
    p.out_weight = glorot<T>(rng, s.dense_out, n_classes, static_cast<double>(s.dense_out),
                             static_cast<double>(n_classes));
    p.out_bias = Matrix<T>(1, n_classes, T(0));
    return m;
}

Matrix<double> propagation_matrix(std::size_t n_nodes, std::span<const Edge> edges) {
    const auto nb = build_neighborhoods(n_nodes, edges);
    Matrix<double> p(n_nodes, n_nodes, 0.0);
    for (std::size_t i = 0; i < n_nodes; ++i) {
        const double w = 1.0 / static_cast<double>(nb.members[i].size());
        for (auto j : nb.members[i]) p(i, j) += w;
    }
    return p;
}

template <class T>
Matrix<T> graph_conv_forward(const Matrix<T>& z, std::span<const Edge> edges, const Matrix<T>& weight,
                             std::span<const T> bias) {
    if (z.rows < 1) throw ShapeError("graph conv needs at least one node");
    return conv_layer<T>(z, build_neighborhoods(z.rows, edges), weight, bias);
}

template <class T>
SortPoolResult<T> sort_pooling(const Matrix<T>& z_cat, std::size_t k) {
    if (k < 1) throw ValidationError("sort pooling k must be >= 1");
    std::vector<std::size_t> order(z_cat.rows);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t keep = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](std::size_t a, std::size_t b) { return row_before(z_cat, a, b); });
    SortPoolResult<T> r;
    r.pooled = Matrix<T>(k, z_cat.cols, T(0));
    r.source.assign(k, -1);
    for (std::size_t i = 0; i < keep; ++i) {
        const auto src = z_cat.row(order[i]);
        std::copy(src.begin(), src.end(), r.pooled.row(i).begin());
        r.source[i] = static_cast<std::int64_t>(order[i]);
    }
    return r;
}

template <class T>
std::vector<T> forward(const DocGraph& graph, const BasicGnnModel<T>& model, bool training,
                       std::uint64_t dropout_seed) {
    const auto s = compute_shapes(model.config, model.feature_dim, model.n_classes);
    ForwardCache<T> cache;
    forward_impl(graph, model, s, training, dropout_seed, cache);
    return std::move(cache.probs);
}

template <class T>
LossAndGradients<T> loss_and_gradients(std::span<const DocGraph> batch, const BasicGnnModel<T>& model,
                                       std::uint64_t dropout_seed) {
    if (batch.empty()) throw ValidationError("batch must be non-empty");
    const auto s = compute_shapes(model.config, model.feature_dim, model.n_classes);
    LossAndGradients<T> out;
    out.gradients = model.params.zeros_like();
    const T scale = T(1) / static_cast<T>(batch.size());
    ForwardCache<T> cache;
    T total = 0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& g = batch[b];
        if (g.label >= model.n_classes) throw ShapeError("graph '" + g.doc_id + "' label out of range");
        forward_impl(g, model, s, true, derive_seed(dropout_seed, b), cache);
        total -= log_prob(cache, g.label);
        if (argmax<T>(cache.probs) == g.label) ++out.correct;
        backward_impl(cache, model, s, g.label, scale, out.gradients);
    }
    out.loss = total * scale;
    return out;
}

template <class T>
std::size_t argmax(std::span<const T> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (epochs < 1) throw ValidationError("epochs must be >= 1");
    if (!(adam.learning_rate > 0)) throw ValidationError("learning rate must be > 0");
    if (!(adam.beta1 >= 0 && adam.beta1 < 1) || !(adam.beta2 >= 0 && adam.beta2 < 1))
        throw ValidationError("Adam betas must be in [0, 1)");
    if (!(adam.epsilon > 0)) throw ValidationError("Adam epsilon must be > 0");
}

double accuracy(const GnnModel& model, const GraphDataset& dataset) {
    if (dataset.graphs.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& g : dataset.graphs) {
        const auto probs = forward<float>(g, model, false);
        if (argmax<float>(probs) == g.label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(dataset.graphs.size());
}

TrainResult train(const GraphDataset& train_set, const GraphDataset& val_set, const GnnConfig& model_config,
                  const TrainConfig& train_config, const EpochCallback& on_epoch) {
    train_config.validate();
    if (train_set.graphs.empty()) throw ValidationError("training set is empty");
    if (train_set.feature_dim < 1) throw ValidationError("training set has zero feature_dim");
    if (!val_set.graphs.empty() && val_set.feature_dim != train_set.feature_dim)
        throw ShapeError("validation feature_dim differs from training feature_dim");
    for (const auto& g : train_set.graphs) validate_graph(g);

    TrainResult result;
    auto& model = result.model;
    model = make_model<float>(model_config, train_set.feature_dim, train_set.n_classes(),
                              derive_seed(train_config.seed, 0x1417));
    model.info.class_names = train_set.class_names;
    model.info.build = train_set.build;

    auto m1 = model.params.zeros_like();
    auto m2 = model.params.zeros_like();
    const auto& adam = train_config.adam;
    std::uint64_t step = 0;

    std::vector<std::size_t> order(train_set.graphs.size());
    std::vector<DocGraph> batch;
    std::optional<double> best_val;
    std::size_t since_best = 0;
    GnnParameters<float> best_params;

    for (std::size_t epoch = 0; epoch < train_config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng(derive_seed(train_config.seed, 0x5A0F, epoch));
        shuffle_rng.shuffle(std::span<std::size_t>(order));

        double loss_sum = 0;
        for (std::size_t start = 0, b = 0; start < order.size(); start += train_config.batch_size, ++b) {
            const std::size_t end = std::min(order.size(), start + train_config.batch_size);
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(train_set.graphs[order[i]]);
            auto lg = loss_and_gradients<float>(batch, model, derive_seed(train_config.seed, epoch + 1, b + 1));
            loss_sum += static_cast<double>(lg.loss) * static_cast<double>(batch.size());

            ++step;
            const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(step));
            const float b1 = static_cast<float>(adam.beta1);
            const float b2 = static_cast<float>(adam.beta2);
            const float step_size = static_cast<float>(adam.learning_rate / bc1);
            const float inv_sqrt_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
            const float eps = static_cast<float>(adam.epsilon);

            std::vector<Matrix<float>*> params, grads, first, second;
            model.params.for_each([&](Matrix<float>& m) { params.push_back(&m); });
            lg.gradients.for_each([&](Matrix<float>& m) { grads.push_back(&m); });
            m1.for_each([&](Matrix<float>& m) { first.push_back(&m); });
            m2.for_each([&](Matrix<float>& m) { second.push_back(&m); });
            for (std::size_t t = 0; t < params.size(); ++t) {
                auto& pw = params[t]->data;
                const auto& gw = grads[t]->data;
                auto& mw = first[t]->data;
                auto& vw = second[t]->data;
                for (std::size_t i = 0; i < pw.size(); ++i) {
                    mw[i] = b1 * mw[i] + (1.0f - b1) * gw[i];
                    vw[i] = b2 * vw[i] + (1.0f - b2) * gw[i] * gw[i];
                    pw[i] -= step_size * mw[i] / (std::sqrt(vw[i]) * inv_sqrt_bc2 + eps);
                }
            }
        }

        EpochStats stats;
        stats.train_loss = loss_sum / static_cast<double>(order.size());
        stats.train_accuracy = accuracy(model, train_set);
        if (!val_set.graphs.empty()) stats.val_accuracy = accuracy(model, val_set);
        stats.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.epochs.push_back(stats);
        if (on_epoch) on_epoch(epoch, stats);

        if (train_config.early_stopping_patience > 0 && stats.val_accuracy) {
            if (!best_val || *stats.val_accuracy > *best_val) {
                best_val = stats.val_accuracy;
                best_params = model.params;
                since_best = 0;
            } else if (++since_best >= train_config.early_stopping_patience) {
                model.params = best_params;
                break;
            }
        }
    }
    return result;
}

#define EFFGNN_INSTANTIATE(T)                                                                              \
    template BasicGnnModel<T> make_model<T>(const GnnConfig&, std::size_t, std::size_t, std::uint64_t);     \
    template Matrix<T> graph_conv_forward<T>(const Matrix<T>&, std::span<const Edge>, const Matrix<T>&,     \
                                             std::span<const T>);                                           \
    template SortPoolResult<T> sort_pooling<T>(const Matrix<T>&, std::size_t);                              \
    template std::vector<T> forward<T>(const DocGraph&, const BasicGnnModel<T>&, bool, std::uint64_t);      \
    template LossAndGradients<T> loss_and_gradients<T>(std::span<const DocGraph>, const BasicGnnModel<T>&, \
                                                       std::uint64_t);                                      \
    template std::size_t argmax<T>(std::span<const T>);

EFFGNN_INSTANTIATE(float)
EFFGNN_INSTANTIATE(double)

#undef EFFGNN_INSTANTIATE

}  // namespace effgnn
