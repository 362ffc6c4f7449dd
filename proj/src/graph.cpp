#include "wsn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace wsn::graph {

// ============================================================================
// Adjacency construction
// ============================================================================

AdjacencyMatrix build_adjacency(const Tensor& positions, std::size_t k,
                                std::vector<int> node_ids,
                                std::vector<std::string>* warnings) {
    if (positions.rank() != 2 || positions.cols() != 2)
        throw DimensionError("build_adjacency: positions must be N x 2, got " +
                             positions.shape_str());
    const std::size_t n = positions.rows();
    if (n < 2) throw ConfigError("build_adjacency: need at least 2 nodes, got " +
                                 std::to_string(n));
    if (k < 1 || k >= n)
        throw ConfigError("build_adjacency: neighbor count k=" + std::to_string(k) +
                          " must satisfy 1 <= k < N=" + std::to_string(n));
    if (node_ids.empty()) {
        node_ids.resize(n);
        for (std::size_t i = 0; i < n; ++i) node_ids[i] = static_cast<int>(i);
    }
    if (node_ids.size() != n)
        throw DimensionError("build_adjacency: " + std::to_string(node_ids.size()) +
                             " node ids for " + std::to_string(n) + " positions");

    for (std::size_t i = 0; i < n && warnings; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (positions.at(i, 0) == positions.at(j, 0) &&
                positions.at(i, 1) == positions.at(j, 1)) {
                warnings->push_back("duplicate coordinates for nodes " +
                                    std::to_string(node_ids[i]) + " and " +
                                    std::to_string(node_ids[j]) +
                                    "; neighbor ties broken by index order");
            }
        }
    }

    AdjacencyMatrix a;
    a.node_ids = std::move(node_ids);
    a.weights = Tensor({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::pair<double, std::size_t>> dist;
        dist.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dx = positions.at(i, 0) - positions.at(j, 0);
            const double dy = positions.at(i, 1) - positions.at(j, 1);
            dist.emplace_back(dx * dx + dy * dy, j);
        }
        std::sort(dist.begin(), dist.end());  // ties fall back to index order
        for (std::size_t r = 0; r < k; ++r) a.weights.at(i, dist[r].second) = 1.0;
    }
    // symmetrize and add self-loops
    for (std::size_t i = 0; i < n; ++i) {
        a.weights.at(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double w = std::max(a.weights.at(i, j), a.weights.at(j, i));
            a.weights.at(i, j) = w;
            a.weights.at(j, i) = w;
        }
    }
    return a;
}

Positions load_positions(std::istream& in) {
    Positions p;
    std::vector<double> coords;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string id_s, x_s, y_s;
        if (!std::getline(row, id_s, ',') || !std::getline(row, x_s, ',') ||
            !std::getline(row, y_s, ','))
            throw FormatError("positions: line " + std::to_string(lineno) +
                              " is not node_id,x,y");
        if (lineno == 1 && id_s == "node_id") continue;  // header
        try {
            p.node_ids.push_back(std::stoi(id_s));
            coords.push_back(std::stod(x_s));
            coords.push_back(std::stod(y_s));
        } catch (const std::exception&) {
            throw FormatError("positions: line " + std::to_string(lineno) +
                              " has non-numeric fields");
        }
    }
    if (p.node_ids.empty()) throw FormatError("positions: no rows parsed");
    p.coords = Tensor({p.node_ids.size(), 2}, std::move(coords));
    return p;
}

void save_adjacency(const AdjacencyMatrix& a, std::ostream& out) {
    const std::size_t n = a.weights.rows();
    char buf[64];
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", a.weights.at(i, j));
            out << (j ? "," : "") << buf;
        }
        out << "\n";
    }
    if (!out.good()) throw IoError("save_adjacency: failed to write");
}

// ============================================================================
// Spatial correlation weights (plain forms)
// ============================================================================

SpatialWeights spatial_correlation(const Tensor& z) {
    if (z.rank() != 2 || z.cols() < 1)
        throw DimensionError("spatial_correlation: need N x d features, got " + z.shape_str());
    Tensor gram = matmul(z, transpose(z));
    const double inv = 1.0 / std::sqrt(static_cast<double>(z.cols()));
    for (double& v : gram.data()) v *= inv;
    return SpatialWeights{softmax_rows(gram)};
}

Tensor adjust_adjacency(const SpatialWeights& s, const AdjacencyMatrix& a) {
    require_same_shape(s.weights, a.weights, "adjust_adjacency");
    return hadamard(s.weights, a.weights);
}

// ============================================================================
// Tape-level blocks
// ============================================================================

Var node_representation(Tape& tape, const std::vector<Var>& mods) {
    if (mods.empty()) throw ConfigError("node_representation: no modalities");
    std::vector<Var> cols;
    cols.reserve(mods.size());
    for (Var m : mods) cols.push_back(row_mean(m));
    (void)tape;
    return hconcat(cols);
}

Var spatial_correlation(Tape& tape, Var z) {
    const std::size_t d = tape.value(z).cols();
    Var gram = matmul(z, transpose(z));
    return softmax_rows(scale(gram, 1.0 / std::sqrt(static_cast<double>(d))));
}

Var adjust_adjacency(Var s, Var a) { return hadamard(s, a); }

std::vector<Var> modal_fusion(Tape& tape, const std::vector<Var>& mods, const FusionVars& params,
                              bool prose_indexing) {
    const std::size_t m = mods.size();
    if (m == 0) throw ConfigError("modal_fusion: zero modalities");
    if (params.w_query.size() != m || params.w_key.size() != m || params.w_value.size() != m)
        throw DimensionError("modal_fusion: projection triple count does not match " +
                             std::to_string(m) + " modalities");
    const std::size_t n = tape.value(mods[0]).rows();
    const std::size_t t = tape.value(mods[0]).cols();

    // one node's modal sequence as a T x 1 column of time tokens
    auto sequence = [&](std::size_t mod, std::size_t node) {
        return transpose(slice_rows(mods[mod], node, node + 1));
    };

    if (m == 1) {
        std::vector<Var> rows;
        rows.reserve(n);
        for (std::size_t node = 0; node < n; ++node)
            rows.push_back(transpose(matmul(sequence(0, node), params.w_value[0])));
        return {vconcat(rows)};
    }

    const double inv_sqrt_d =
        1.0 / std::sqrt(static_cast<double>(tape.value(params.w_key[0]).cols()));
    std::vector<Var> fused;
    fused.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::vector<Var> rows;
        rows.reserve(n);
        for (std::size_t node = 0; node < n; ++node) {
            Var acc{};
            bool first = true;
            for (std::size_t j = 0; j < m; ++j) {
                if (j == i) continue;
                const std::size_t q_mod = prose_indexing ? i : j;
                const std::size_t kv_mod = prose_indexing ? j : i;
                Var q = matmul(sequence(q_mod, node), params.w_query[q_mod]);   // T x d
                Var k = matmul(sequence(kv_mod, node), params.w_key[kv_mod]);   // T x d
                Var v = matmul(sequence(kv_mod, node), params.w_value[kv_mod]); // T x 1
                Var attn = softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt_d));
                Var term = matmul(attn, v);
                acc = first ? term : add(acc, term);
                first = false;
            }
            rows.push_back(transpose(acc));
        }
        (void)t;
        fused.push_back(vconcat(rows));
    }
    return fused;
}

std::vector<Var> mfdgcn_layer(Tape& tape, const std::vector<Var>& mods, Var a_tilde, Var layer_w,
                              const FusionVars& fusion, GraphMode mode, bool prose_indexing) {
    if (mods.empty()) throw ConfigError("mfdgcn_layer: zero modalities");
    std::vector<Var> fused =
        mode == GraphMode::mfdgcn ? modal_fusion(tape, mods, fusion, prose_indexing) : mods;
    Var h = hconcat(fused);
    const Tensor& av = tape.value(a_tilde);
    const Tensor& hv = tape.value(h);
    const Tensor& wv = tape.value(layer_w);
    if (av.cols() != hv.rows() || hv.cols() != wv.rows())
        throw DimensionError("mfdgcn_layer: shape chain broken: " + av.shape_str() + " * " +
                             hv.shape_str() + " * " + wv.shape_str());
    Var out = relu(matmul(matmul(a_tilde, h), layer_w));
    // slice back into per-modality blocks
    const std::size_t m = mods.size();
    const std::size_t width = tape.value(out).cols();
    if (width % m != 0)
        throw DimensionError("mfdgcn_layer: output width " + std::to_string(width) +
                             " is not divisible into " + std::to_string(m) + " modalities");
    const std::size_t per = width / m;
    std::vector<Var> slices;
    slices.reserve(m);
    for (std::size_t i = 0; i < m; ++i) slices.push_back(slice_cols(out, i * per, (i + 1) * per));
    return slices;
}

}  // namespace wsn::graph
