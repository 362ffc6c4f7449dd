#include "wsn/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

namespace wsn::model {

// ============================================================================
// Config
// ============================================================================

void ModelConfig::validate() const {
    if (window < 2 || window % 2 != 0)
        throw ConfigError("config: window W=" + std::to_string(window) + " must be even and >= 2");
    if (detect_tail == 0 || detect_tail > window)
        throw ConfigError("config: detect_tail=" + std::to_string(detect_tail) +
                          " must satisfy 0 < detect_tail <= W=" + std::to_string(window));
    if (step == 0 || step > window)
        throw ConfigError("config: step L=" + std::to_string(step) +
                          " must satisfy 0 < L <= W=" + std::to_string(window));
    if (hidden_width == 0 || attention_dim == 0 || fusion_dim == 0)
        throw ConfigError("config: hidden/attention/fusion widths must be positive");
    if (mfdgcn_depth == 0) throw ConfigError("config: mfdgcn_depth must be >= 1");
    if (epochs == 0) throw ConfigError("config: epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("config: learning_rate must be positive");
    if (moving_average_window == 0)
        throw ConfigError("config: moving_average_window must be >= 1");
}

const char* to_string(Decomposition d) {
    return d == Decomposition::dwt ? "dwt" : "moving_average";
}
const char* to_string(SeasonalAttention s) {
    return s == SeasonalAttention::frequency ? "frequency" : "time";
}
const char* to_string(GraphMode g) { return g == GraphMode::mfdgcn ? "mfdgcn" : "static_gcn"; }

Decomposition decomposition_from_string(const std::string& s) {
    if (s == "dwt") return Decomposition::dwt;
    if (s == "moving_average") return Decomposition::moving_average;
    throw ConfigError("config: unknown decomposition '" + s + "' (dwt|moving_average)");
}
SeasonalAttention seasonal_attention_from_string(const std::string& s) {
    if (s == "frequency") return SeasonalAttention::frequency;
    if (s == "time") return SeasonalAttention::time;
    throw ConfigError("config: unknown seasonal_attention '" + s + "' (frequency|time)");
}
GraphMode graph_mode_from_string(const std::string& s) {
    if (s == "mfdgcn") return GraphMode::mfdgcn;
    if (s == "static_gcn") return GraphMode::static_gcn;
    throw ConfigError("config: unknown graph mode '" + s + "' (mfdgcn|static_gcn)");
}

namespace {

std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_hex(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> ModelConfig::entries() const {
    return {
        {"window", std::to_string(window)},
        {"step", std::to_string(step)},
        {"detect_tail", std::to_string(detect_tail)},
        {"hidden_width", std::to_string(hidden_width)},
        {"mfdgcn_depth", std::to_string(mfdgcn_depth)},
        {"attention_dim", std::to_string(attention_dim)},
        {"fusion_dim", std::to_string(fusion_dim)},
        {"learning_rate", fmt_double(learning_rate)},
        {"epochs", std::to_string(epochs)},
        {"seed", std::to_string(seed)},
        {"decomposition", to_string(decomposition)},
        {"seasonal_attention", to_string(seasonal_attention)},
        {"graph", to_string(graph_mode)},
        {"moving_average_window", std::to_string(moving_average_window)},
        {"spatial_per_instant", spatial_per_instant ? "1" : "0"},
        {"fusion_prose_indexing", fusion_prose_indexing ? "1" : "0"},
    };
}

void ModelConfig::set_entry(const std::string& key, const std::string& value) {
    try {
        if (key == "window") window = std::stoul(value);
        else if (key == "step") step = std::stoul(value);
        else if (key == "detect_tail") detect_tail = std::stoul(value);
        else if (key == "hidden_width") hidden_width = std::stoul(value);
        else if (key == "mfdgcn_depth") mfdgcn_depth = std::stoul(value);
        else if (key == "attention_dim") attention_dim = std::stoul(value);
        else if (key == "fusion_dim") fusion_dim = std::stoul(value);
        else if (key == "learning_rate") learning_rate = std::stod(value);
        else if (key == "epochs") epochs = std::stoul(value);
        else if (key == "seed") seed = std::stoull(value);
        else if (key == "decomposition") decomposition = decomposition_from_string(value);
        else if (key == "seasonal_attention")
            seasonal_attention = seasonal_attention_from_string(value);
        else if (key == "graph") graph_mode = graph_mode_from_string(value);
        else if (key == "moving_average_window") moving_average_window = std::stoul(value);
        else if (key == "spatial_per_instant") spatial_per_instant = value == "1" || value == "true";
        else if (key == "fusion_prose_indexing")
            fusion_prose_indexing = value == "1" || value == "true";
        else throw ConfigError("config: unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
        throw ConfigError("config: bad value '" + value + "' for key '" + key + "'");
    } catch (const std::out_of_range&) {
        throw ConfigError("config: value '" + value + "' out of range for key '" + key + "'");
    }
}

// ============================================================================
// Parameters
// ============================================================================

namespace {

template <typename Self, typename Fn>
void visit_params(Self& p, Fn&& fn) {
    fn("trend_mlp.w1", p.trend_w1);
    fn("trend_mlp.b1", p.trend_b1);
    fn("trend_mlp.w2", p.trend_w2);
    fn("trend_mlp.b2", p.trend_b2);
    fn("trend_mlp.w3", p.trend_w3);
    fn("trend_mlp.b3", p.trend_b3);
    for (std::size_t m = 0; m < p.trend_fusion_q.size(); ++m) {
        const std::string suffix = std::to_string(m);
        fn("trend_fusion.q" + suffix, p.trend_fusion_q[m]);
        fn("trend_fusion.k" + suffix, p.trend_fusion_k[m]);
        fn("trend_fusion.v" + suffix, p.trend_fusion_v[m]);
    }
    for (std::size_t l = 0; l < p.trend_graph_w.size(); ++l)
        fn("trend_graph.w" + std::to_string(l), p.trend_graph_w[l]);
    fn("fdam.wq", p.fdam_wq);
    fn("fdam.wk", p.fdam_wk);
    fn("fdam.wv", p.fdam_wv);
    for (std::size_t m = 0; m < p.seasonal_fusion_q.size(); ++m) {
        const std::string suffix = std::to_string(m);
        fn("seasonal_fusion.q" + suffix, p.seasonal_fusion_q[m]);
        fn("seasonal_fusion.k" + suffix, p.seasonal_fusion_k[m]);
        fn("seasonal_fusion.v" + suffix, p.seasonal_fusion_v[m]);
    }
    for (std::size_t l = 0; l < p.seasonal_graph_w.size(); ++l)
        fn("seasonal_graph.w" + std::to_string(l), p.seasonal_graph_w[l]);
    fn("decoder.w", p.out_w);
    fn("decoder.b", p.out_b);
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, std::size_t n_nodes,
                              std::size_t n_modalities) {
    cfg.validate();
    if (n_nodes == 0 || n_modalities == 0)
        throw ConfigError("params: node and modality counts must be positive");
    const std::size_t t = cfg.component_length();
    const std::size_t h = cfg.hidden_width;
    const std::size_t w = cfg.window;
    const std::size_t mt = n_modalities * t;

    ModelParams p;
    p.n_nodes = n_nodes;
    p.n_modalities = n_modalities;
    Rng rng(cfg.seed);

    p.trend_w1 = init_scaled_uniform({t, h}, t, rng);
    p.trend_b1 = init_scaled_uniform({1, h}, t, rng);
    p.trend_w2 = init_scaled_uniform({h, h}, h, rng);
    p.trend_b2 = init_scaled_uniform({1, h}, h, rng);
    p.trend_w3 = init_scaled_uniform({h, t}, h, rng);
    p.trend_b3 = init_scaled_uniform({1, t}, h, rng);
    for (std::size_t m = 0; m < n_modalities; ++m) {
        p.trend_fusion_q.push_back(init_scaled_uniform({1, cfg.fusion_dim}, cfg.fusion_dim, rng));
        p.trend_fusion_k.push_back(init_scaled_uniform({1, cfg.fusion_dim}, cfg.fusion_dim, rng));
        p.trend_fusion_v.push_back(init_scaled_uniform({1, 1}, 1, rng));
    }
    for (std::size_t l = 0; l < cfg.mfdgcn_depth; ++l)
        p.trend_graph_w.push_back(init_scaled_uniform({mt, mt}, mt, rng));
    p.fdam_wq = init_scaled_uniform({1, cfg.attention_dim}, cfg.attention_dim, rng);
    p.fdam_wk = init_scaled_uniform({1, cfg.attention_dim}, cfg.attention_dim, rng);
    p.fdam_wv = init_scaled_uniform({1, 1}, 1, rng);
    for (std::size_t m = 0; m < n_modalities; ++m) {
        p.seasonal_fusion_q.push_back(
            init_scaled_uniform({1, cfg.fusion_dim}, cfg.fusion_dim, rng));
        p.seasonal_fusion_k.push_back(
            init_scaled_uniform({1, cfg.fusion_dim}, cfg.fusion_dim, rng));
        p.seasonal_fusion_v.push_back(init_scaled_uniform({1, 1}, 1, rng));
    }
    for (std::size_t l = 0; l < cfg.mfdgcn_depth; ++l)
        p.seasonal_graph_w.push_back(init_scaled_uniform({mt, mt}, mt, rng));
    p.out_w = init_scaled_uniform({w, w}, w, rng);
    p.out_b = init_scaled_uniform({1, w}, w, rng);
    return p;
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::named_tensors() {
    std::vector<std::pair<std::string, Tensor*>> out;
    visit_params(*this, [&](const std::string& name, Tensor& t) { out.emplace_back(name, &t); });
    return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named_tensors() const {
    std::vector<std::pair<std::string, const Tensor*>> out;
    visit_params(*this,
                 [&](const std::string& name, const Tensor& t) { out.emplace_back(name, &t); });
    return out;
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : named_tensors()) n += t->size();
    return n;
}

bool ModelParams::all_finite() const {
    for (const auto& [name, t] : named_tensors())
        if (!t->all_finite()) return false;
    return true;
}

// ============================================================================
// Row layout helpers
// ============================================================================

Tensor window_to_rows(const Tensor& window) {
    if (window.rank() != 3)
        throw DimensionError("window_to_rows: expected N x M x T, got " + window.shape_str());
    const std::size_t n = window.extent(0), m = window.extent(1), t = window.extent(2);
    Tensor rows({m * n, t});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t k = 0; k < t; ++k) rows.at(j * n + i, k) = window.at3(i, j, k);
    return rows;
}

Tensor rows_to_window(const Tensor& rows, std::size_t n_nodes, std::size_t n_modalities) {
    if (rows.rank() != 2 || rows.rows() != n_nodes * n_modalities)
        throw DimensionError("rows_to_window: unexpected shape " + rows.shape_str());
    const std::size_t t = rows.cols();
    Tensor window({n_nodes, n_modalities, t});
    for (std::size_t i = 0; i < n_nodes; ++i)
        for (std::size_t j = 0; j < n_modalities; ++j)
            for (std::size_t k = 0; k < t; ++k)
                window.at3(i, j, k) = rows.at(j * n_nodes + i, k);
    return window;
}

// ============================================================================
// Decomposition
// ============================================================================

signal::DecomposedSeries decompose(const Tensor& window, const ModelConfig& cfg,
                                   const signal::WaveletFilterPair& filters) {
    if (cfg.decomposition == Decomposition::dwt) return signal::dwt_level1(window, filters);

    if (window.rank() != 3)
        throw DimensionError("decompose: expected N x M x W, got " + window.shape_str());
    const std::size_t n = window.extent(0), m = window.extent(1), w = window.extent(2);
    const std::size_t lo = (cfg.moving_average_window - 1) / 2;
    const std::size_t hi = cfg.moving_average_window / 2;
    signal::DecomposedSeries out;
    out.original_length = w;
    out.trend = Tensor({n, m, w});
    out.seasonal = Tensor({n, m, w});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t t = 0; t < w; ++t) {
                double acc = 0.0;
                for (long long off = -static_cast<long long>(lo);
                     off <= static_cast<long long>(hi); ++off) {
                    long long idx = static_cast<long long>(t) + off;
                    idx = std::clamp<long long>(idx, 0, static_cast<long long>(w) - 1);
                    acc += window.at3(i, j, static_cast<std::size_t>(idx));
                }
                const double trend = acc / static_cast<double>(cfg.moving_average_window);
                out.trend.at3(i, j, t) = trend;
                out.seasonal.at3(i, j, t) = window.at3(i, j, t) - trend;
            }
        }
    }
    return out;
}

double loss_mse(const Tensor& x, const Tensor& x_hat) {
    require_same_shape(x, x_hat, "loss_mse");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - x_hat[i];
        acc += d * d;
    }
    return acc / static_cast<double>(x.size());
}

// ============================================================================
// Network
// ============================================================================

Network::Network(ModelConfig cfg, graph::AdjacencyMatrix adjacency, std::size_t n_modalities,
                 signal::WaveletFilterPair filters)
    : cfg_(std::move(cfg)), adjacency_(std::move(adjacency)), n_modalities_(n_modalities),
      filters_(std::move(filters)) {
    cfg_.validate();
    if (n_modalities_ == 0) throw ConfigError("network: modality count must be positive");
    if (adjacency_.weights.rank() != 2 ||
        adjacency_.weights.rows() != adjacency_.weights.cols())
        throw DimensionError("network: adjacency must be square, got " +
                             adjacency_.weights.shape_str());
    const std::size_t t = cfg_.component_length();
    dft_ = signal::dft_matrices(t);
    idft_cos_ = transpose(dft_.cos_fwd);
    idft_sin_ = transpose(dft_.sin_fwd);
    if (cfg_.decomposition == Decomposition::dwt) {
        auto [uh, ug] = signal::synthesis_matrices(filters_, t);
        synth_low_ = std::move(uh);
        synth_high_ = std::move(ug);
    }
}

Var Network::Bound::get(const std::string& name) const {
    for (const auto& [n, v] : vars)
        if (n == name) return v;
    throw ContractError("network: unbound parameter '" + name + "'");
}

Network::Bound Network::bind(Tape& tape, const ModelParams& params, bool as_leaves) const {
    if (params.n_nodes != n_nodes() || params.n_modalities != n_modalities_)
        throw DimensionError("network: params sized for " + std::to_string(params.n_nodes) +
                             " nodes / " + std::to_string(params.n_modalities) +
                             " modalities, network has " + std::to_string(n_nodes()) + " / " +
                             std::to_string(n_modalities_));
    Bound b;
    for (const auto& [name, t] : params.named_tensors())
        b.vars.emplace_back(name, as_leaves ? tape.leaf(*t) : tape.constant(*t));
    return b;
}

namespace {

std::vector<Var> split_modalities(Var rows, std::size_t n_nodes, std::size_t n_modalities) {
    std::vector<Var> mods;
    mods.reserve(n_modalities);
    for (std::size_t m = 0; m < n_modalities; ++m)
        mods.push_back(slice_rows(rows, m * n_nodes, (m + 1) * n_nodes));
    return mods;
}

}  // namespace

std::vector<Var> Network::encode_graph(Tape& tape, std::vector<Var> mods,
                                       const std::vector<Var>& fusion_q,
                                       const std::vector<Var>& fusion_k,
                                       const std::vector<Var>& fusion_v,
                                       const std::vector<Var>& layer_w) const {
    Var adj = tape.constant(adjacency_.weights);
    graph::FusionVars fusion{fusion_q, fusion_k, fusion_v};
    for (std::size_t l = 0; l < layer_w.size(); ++l) {
        Var a_tilde = adj;
        if (cfg_.graph_mode == GraphMode::mfdgcn) {
            Var s{};
            if (cfg_.spatial_per_instant) {
                // average the per-instant correlation weights before masking
                const std::size_t t = tape.value(mods[0]).cols();
                Var acc{};
                for (std::size_t k = 0; k < t; ++k) {
                    std::vector<Var> cols;
                    cols.reserve(mods.size());
                    for (Var m : mods) cols.push_back(slice_cols(m, k, k + 1));
                    Var z_t = hconcat(cols);
                    Var s_t = graph::spatial_correlation(tape, z_t);
                    acc = k == 0 ? s_t : add(acc, s_t);
                }
                s = scale(acc, 1.0 / static_cast<double>(t));
            } else {
                Var z = graph::node_representation(tape, mods);
                s = graph::spatial_correlation(tape, z);
            }
            a_tilde = graph::adjust_adjacency(s, adj);
        }
        mods = graph::mfdgcn_layer(tape, mods, a_tilde, layer_w[l], fusion, cfg_.graph_mode,
                                   cfg_.fusion_prose_indexing);
    }
    return mods;
}

std::vector<Var> Network::trend_encode(Tape& tape, Var trend_rows, const Bound& b) const {
    Var h1 = relu(add_rowvec(matmul(trend_rows, b.get("trend_mlp.w1")), b.get("trend_mlp.b1")));
    Var h2 = relu(add_rowvec(matmul(h1, b.get("trend_mlp.w2")), b.get("trend_mlp.b2")));
    Var y = add_rowvec(matmul(h2, b.get("trend_mlp.w3")), b.get("trend_mlp.b3"));

    std::vector<Var> q, k, v, w;
    for (std::size_t m = 0; m < n_modalities_; ++m) {
        const std::string s = std::to_string(m);
        q.push_back(b.get("trend_fusion.q" + s));
        k.push_back(b.get("trend_fusion.k" + s));
        v.push_back(b.get("trend_fusion.v" + s));
    }
    for (std::size_t l = 0; l < cfg_.mfdgcn_depth; ++l)
        w.push_back(b.get("trend_graph.w" + std::to_string(l)));
    return encode_graph(tape, split_modalities(y, n_nodes(), n_modalities_), q, k, v, w);
}

// Attention runs per series with the frequency bins as tokens: each scalar
// bin embeds through the 1 x d_k query/key maps, so the score between bins k
// and l is |X(k) X(l)| scaled by the learned maps. The softmax therefore
// concentrates on the dominant bins of the spectrum and the attended output
// rebuilds every bin from them, suppressing dispersed (anomalous) energy.
std::vector<Var> Network::seasonal_encode(Tape& tape, Var seasonal_rows, const Bound& b,
                                          ForwardTrace* trace) const {
    const bool frequency = cfg_.seasonal_attention == SeasonalAttention::frequency;
    const std::size_t t = tape.value(seasonal_rows).cols();
    const std::size_t n_rows = tape.value(seasonal_rows).rows();

    Var wq = b.get("fdam.wq"), wk = b.get("fdam.wk"), wv = b.get("fdam.wv");
    Var fc{}, fs{}, gc{}, gs{};
    if (frequency) {
        fc = tape.constant(dft_.cos_fwd);
        fs = tape.constant(dft_.sin_fwd);
        gc = tape.constant(idft_cos_);
        gs = tape.constant(idft_sin_);
    }
    const Tensor zero_bins({t, 1});
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg_.attention_dim));

    std::vector<Var> out_rows;
    std::vector<Var> attn_stack;
    double max_residue = 0.0;
    for (std::size_t r = 0; r < n_rows; ++r) {
        Var row = slice_rows(seasonal_rows, r, r + 1);  // 1 x T
        Var re{}, im{};
        if (frequency) {
            re = transpose(matmul(row, fc));              // T bins as a column
            im = transpose(scale(matmul(row, fs), -1.0));
        } else {
            re = transpose(row);  // time points as tokens, zero imaginary part
            im = tape.constant(zero_bins);
        }
        Var q_re = matmul(re, wq), q_im = matmul(im, wq);
        Var k_re = matmul(re, wk), k_im = matmul(im, wk);
        Var v_re = matmul(re, wv), v_im = matmul(im, wv);

        Var score_re = sub(matmul(q_re, transpose(k_re)), matmul(q_im, transpose(k_im)));
        Var score_im = add(matmul(q_re, transpose(k_im)), matmul(q_im, transpose(k_re)));
        Var attn = softmax_rows(scale(complex_modulus(score_re, score_im), inv_sqrt_d));
        Var out_re = matmul(attn, v_re), out_im = matmul(attn, v_im);

        if (frequency) {
            Var re_row = transpose(out_re), im_row = transpose(out_im);
            out_rows.push_back(
                scale(sub(matmul(re_row, gc), matmul(im_row, gs)), 1.0 / static_cast<double>(t)));
            if (trace) {
                // imaginary residue discarded by the inverse transform, off-tape
                Tensor residue = matmul(tape.value(re_row), idft_sin_);
                const Tensor part = matmul(tape.value(im_row), idft_cos_);
                for (std::size_t i = 0; i < residue.size(); ++i)
                    residue[i] = (residue[i] + part[i]) / static_cast<double>(t);
                max_residue = std::max(max_residue, residue.max_abs());
            }
        } else {
            out_rows.push_back(transpose(out_re));
        }
        if (trace) attn_stack.push_back(attn);
    }
    Var y = vconcat(out_rows);
    if (trace) {
        trace->max_imag_residue = max_residue;
        trace->seasonal_attn_out = tape.value(y);
        Tensor stacked({n_rows * t, t});
        for (std::size_t r = 0; r < n_rows; ++r) {
            const Tensor& a = tape.value(attn_stack[r]);
            for (std::size_t i = 0; i < t; ++i)
                for (std::size_t j = 0; j < t; ++j) stacked.at(r * t + i, j) = a.at(i, j);
        }
        trace->attention_weights = std::move(stacked);
    }

    std::vector<Var> q, k, v, w;
    for (std::size_t m = 0; m < n_modalities_; ++m) {
        const std::string s = std::to_string(m);
        q.push_back(b.get("seasonal_fusion.q" + s));
        k.push_back(b.get("seasonal_fusion.k" + s));
        v.push_back(b.get("seasonal_fusion.v" + s));
    }
    for (std::size_t l = 0; l < cfg_.mfdgcn_depth; ++l)
        w.push_back(b.get("seasonal_graph.w" + std::to_string(l)));
    return encode_graph(tape, split_modalities(y, n_nodes(), n_modalities_), q, k, v, w);
}

Var Network::decode(Tape& tape, const std::vector<Var>& z_trend,
                    const std::vector<Var>& z_seasonal, const Bound& b) const {
    Var a_rows = vconcat(z_trend);
    Var d_rows = vconcat(z_seasonal);
    Var full{};
    if (cfg_.decomposition == Decomposition::dwt) {
        Var uh = tape.constant(synth_low_), ug = tape.constant(synth_high_);
        full = add(matmul(a_rows, uh), matmul(d_rows, ug));
    } else {
        // the moving-average split is additive, so synthesis is a plain sum
        full = add(a_rows, d_rows);
    }
    return add_rowvec(matmul(full, b.get("decoder.w")), b.get("decoder.b"));
}

Network::TapeForward Network::forward_loss(Tape& tape, const Tensor& window,
                                           const ModelParams& params, bool params_as_leaves,
                                           ForwardTrace* trace) const {
    if (window.rank() != 3 || window.extent(0) != n_nodes() ||
        window.extent(1) != n_modalities_ || window.extent(2) != cfg_.window)
        throw DimensionError("network: window " + window.shape_str() + " does not match N=" +
                             std::to_string(n_nodes()) + " M=" + std::to_string(n_modalities_) +
                             " W=" + std::to_string(cfg_.window));

    TapeForward fwd;
    fwd.bound = bind(tape, params, params_as_leaves);

    const signal::DecomposedSeries parts = decompose(window, cfg_, filters_);
    Var trend_rows = tape.constant(window_to_rows(parts.trend));
    Var seasonal_rows = tape.constant(window_to_rows(parts.seasonal));

    // trace the MLP output before any graph mixing
    if (trace) {
        Var h1 = relu(add_rowvec(matmul(trend_rows, fwd.bound.get("trend_mlp.w1")),
                                 fwd.bound.get("trend_mlp.b1")));
        Var h2 = relu(add_rowvec(matmul(h1, fwd.bound.get("trend_mlp.w2")),
                                 fwd.bound.get("trend_mlp.b2")));
        Var y = add_rowvec(matmul(h2, fwd.bound.get("trend_mlp.w3")),
                           fwd.bound.get("trend_mlp.b3"));
        trace->trend_mlp_out = tape.value(y);
    }

    const std::vector<Var> z_trend = trend_encode(tape, trend_rows, fwd.bound);
    const std::vector<Var> z_seasonal = seasonal_encode(tape, seasonal_rows, fwd.bound, trace);
    fwd.reconstruction = decode(tape, z_trend, z_seasonal, fwd.bound);

    Var x_rows = tape.constant(window_to_rows(window));
    Var resid = sub(fwd.reconstruction, x_rows);
    fwd.loss = mean_all(hadamard(resid, resid));
    return fwd;
}

Tensor Network::reconstruct(const Tensor& window, const ModelParams& params,
                            ForwardTrace* trace) const {
    Tape tape;
    const TapeForward fwd = forward_loss(tape, window, params, false, trace);
    return rows_to_window(tape.value(fwd.reconstruction), n_nodes(), n_modalities_);
}

double Network::loss_value(const Tensor& window, const ModelParams& params) const {
    Tape tape;
    return tape.value(forward_loss(tape, window, params, false).loss)[0];
}

// ============================================================================
// Scoring, thresholding, classification
// ============================================================================

AnomalyScoreGrid residual_scores(const Tensor& x, const Tensor& x_hat, std::size_t tail) {
    require_same_shape(x, x_hat, "residual_scores");
    if (x.rank() != 3) throw DimensionError("residual_scores: expected N x M x W");
    const std::size_t n = x.extent(0), m = x.extent(1), w = x.extent(2);
    if (tail == 0 || tail > w)
        throw ContractError("residual_scores: tail " + std::to_string(tail) +
                            " out of range for window length " + std::to_string(w));
    AnomalyScoreGrid grid;
    grid.scores = Tensor({n, m, tail});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t k = 0; k < tail; ++k) {
                const std::size_t t = w - tail + k;
                const double r = x.at3(i, j, t) - x_hat.at3(i, j, t);
                grid.scores.at3(i, j, k) = r * r;
            }
    return grid;
}

AnomalyScoreGrid score(const Network& net, const Tensor& window, const ModelParams& params) {
    if (!params.trained)
        throw ContractError("score: parameters are untrained; run train() or load a checkpoint");
    return residual_scores(window, net.reconstruct(window, params), net.config().detect_tail);
}

double calibrate_threshold(const std::vector<AnomalyScoreGrid>& training_scores) {
    if (training_scores.empty())
        throw ContractError("calibrate_threshold: empty training score set");
    double tau = 0.0;
    for (const auto& g : training_scores)
        for (double v : g.scores.data()) tau = std::max(tau, v);
    return tau;
}

LabelGrid classify(const AnomalyScoreGrid& grid) {
    const auto& s = grid.scores;
    LabelGrid labels(s.extent(0), s.extent(1), s.extent(2));
    for (std::size_t i = 0; i < s.size(); ++i)
        labels.values[i] = s[i] > grid.threshold ? 1 : 0;
    return labels;
}

// ============================================================================
// Training loop
// ============================================================================

TrainResult train(const Network& net, const std::vector<Tensor>& windows, std::ostream* log) {
    if (windows.empty()) throw ContractError("train: need at least one window");
    const ModelConfig& cfg = net.config();

    TrainResult result;
    result.params = ModelParams::init(cfg, net.n_nodes(), net.n_modalities());
    result.parameter_count = result.params.parameter_count();
    if (log) *log << "training on " << windows.size() << " windows, " << result.parameter_count
                  << " parameters\n";

    AdamState opt;
    opt.learning_rate = cfg.learning_rate;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (std::size_t wi = 0; wi < windows.size(); ++wi) {
            Tape tape;
            const Network::TapeForward fwd =
                net.forward_loss(tape, windows[wi], result.params, true);
            const double loss = tape.value(fwd.loss)[0];
            if (!std::isfinite(loss)) {
                std::string bad;
                for (const auto& [name, t] : result.params.named_tensors())
                    if (!t->all_finite()) bad += (bad.empty() ? "" : ", ") + name;
                throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                    ", window " + std::to_string(wi) +
                                    (bad.empty() ? "" : "; non-finite parameters: " + bad));
            }
            epoch_loss += loss;
            tape.backward(fwd.loss);
            opt.step += 1;
            auto named = result.params.named_tensors();
            for (std::size_t pi = 0; pi < named.size(); ++pi)
                adam_update(named[pi].first, *named[pi].second,
                            tape.grad(fwd.bound.vars[pi].second), opt);
        }
        epoch_loss /= static_cast<double>(windows.size());
        result.epoch_loss.push_back(epoch_loss);
        if (log && (epoch == 1 || epoch % 25 == 0 || epoch == cfg.epochs))
            *log << "epoch " << epoch << " loss " << fmt_double(epoch_loss) << "\n";
    }

    result.params.trained = true;
    std::vector<AnomalyScoreGrid> grids;
    grids.reserve(windows.size());
    for (const auto& w : windows) grids.push_back(score(net, w, result.params));
    result.tau = calibrate_threshold(grids);
    if (log) *log << "threshold " << fmt_double(result.tau) << "\n";
    return result;
}

// ============================================================================
// Checkpoint container
// ============================================================================

namespace {
constexpr const char* kCheckpointMagic = "wsn-anomaly-checkpoint v1";
}

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
    out << kCheckpointMagic << "\n";
    out << "config";
    for (const auto& [k, v] : ckpt.config.entries()) out << " " << k << "=" << v;
    out << "\n";
    out << "seed " << ckpt.seed << "\n";
    out << "tau " << fmt_hex(ckpt.tau) << "\n";
    out << "nodes " << ckpt.params.n_nodes << "\n";
    out << "modalities " << ckpt.params.n_modalities << "\n";
    out << "trained " << (ckpt.params.trained ? 1 : 0) << "\n";
    if (!ckpt.adjacency.node_ids.empty()) {
        out << "node_ids";
        for (int id : ckpt.adjacency.node_ids) out << " " << id;
        out << "\n";
        out << "adjacency " << ckpt.adjacency.weights.rows() << "\n";
        for (std::size_t i = 0; i < ckpt.adjacency.weights.size(); ++i)
            out << (i ? " " : "") << fmt_hex(ckpt.adjacency.weights[i]);
        out << "\n";
    }
    for (const auto& [name, t] : ckpt.params.named_tensors()) {
        out << "tensor " << name << " " << t->rank();
        for (std::size_t d : t->shape()) out << " " << d;
        out << "\n";
        for (std::size_t i = 0; i < t->size(); ++i)
            out << (i ? " " : "") << fmt_hex((*t)[i]);
        out << "\n";
    }
    out << "end\n";
    if (!out.good()) throw IoError("checkpoint: write failed");
}

void save_checkpoint_file(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path);
    if (!out) throw IoError("checkpoint: cannot open '" + path + "' for writing");
    save_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kCheckpointMagic)
        throw FormatError("checkpoint: bad or missing header line");
    Checkpoint ckpt;
    std::size_t nodes = 0, mods = 0;
    bool trained = false;
    bool have_dims = false;
    while (std::getline(in, line)) {
        if (line == "end") break;
        std::istringstream row(line);
        std::string tag;
        row >> tag;
        if (tag == "config") {
            std::string kv;
            while (row >> kv) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos)
                    throw FormatError("checkpoint: malformed config entry '" + kv + "'");
                ckpt.config.set_entry(kv.substr(0, eq), kv.substr(eq + 1));
            }
        } else if (tag == "seed") {
            row >> ckpt.seed;
        } else if (tag == "tau") {
            std::string v;
            row >> v;
            ckpt.tau = std::strtod(v.c_str(), nullptr);
        } else if (tag == "nodes") {
            row >> nodes;
        } else if (tag == "modalities") {
            row >> mods;
        } else if (tag == "trained") {
            int flag = 0;
            row >> flag;
            trained = flag != 0;
        } else if (tag == "node_ids") {
            int id;
            while (row >> id) ckpt.adjacency.node_ids.push_back(id);
        } else if (tag == "adjacency") {
            std::size_t dim = 0;
            row >> dim;
            std::string values_line;
            if (!std::getline(in, values_line))
                throw FormatError("checkpoint: missing adjacency values");
            ckpt.adjacency.weights = Tensor({dim, dim});
            std::istringstream vals(values_line);
            std::string v;
            for (std::size_t i = 0; i < dim * dim; ++i) {
                if (!(vals >> v)) throw FormatError("checkpoint: short adjacency row");
                ckpt.adjacency.weights[i] = std::strtod(v.c_str(), nullptr);
            }
        } else if (tag == "tensor") {
            if (!have_dims) {
                if (nodes == 0 || mods == 0)
                    throw FormatError("checkpoint: tensor before nodes/modalities");
                ckpt.params = ModelParams::init(ckpt.config, nodes, mods);
                have_dims = true;
            }
            std::string name;
            std::size_t rank = 0;
            row >> name >> rank;
            std::vector<std::size_t> shape(rank);
            for (auto& d : shape) row >> d;
            std::string values_line;
            if (!std::getline(in, values_line))
                throw FormatError("checkpoint: missing values for tensor '" + name + "'");
            Tensor t(shape);
            std::istringstream vals(values_line);
            std::string v;
            for (std::size_t i = 0; i < t.size(); ++i) {
                if (!(vals >> v))
                    throw FormatError("checkpoint: short value row for tensor '" + name + "'");
                t[i] = std::strtod(v.c_str(), nullptr);
            }
            bool matched = false;
            for (auto& [n, ptr] : ckpt.params.named_tensors()) {
                if (n == name) {
                    if (!ptr->same_shape(t))
                        throw FormatError("checkpoint: tensor '" + name + "' has shape " +
                                          t.shape_str() + ", expected " + ptr->shape_str());
                    *ptr = std::move(t);
                    matched = true;
                    break;
                }
            }
            if (!matched) throw FormatError("checkpoint: unknown tensor '" + name + "'");
        } else if (!tag.empty()) {
            throw FormatError("checkpoint: unknown record '" + tag + "'");
        }
    }
    if (!have_dims) throw FormatError("checkpoint: no tensors found");
    ckpt.params.trained = trained;
    return ckpt;
}

Checkpoint load_checkpoint_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ContractError("checkpoint: cannot open '" + path + "'");
    return load_checkpoint(in);
}

}  // namespace wsn::model
