#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "wsn/tensor.hpp"

namespace wsn::graph {

// ============================================================================
// Spatial topology
// ============================================================================

struct AdjacencyMatrix {
    Tensor weights;            // N x N, symmetric, nonnegative, unit self-loops
    std::vector<int> node_ids; // sensor identifiers, row order
};

// Symmetrized k-nearest-neighbour graph over 2-D sensor coordinates; unit edge
// weights and unit self-loops. Duplicate coordinates are resolved by index
// order and reported through `warnings`.
AdjacencyMatrix build_adjacency(const Tensor& positions, std::size_t k,
                                std::vector<int> node_ids = {},
                                std::vector<std::string>* warnings = nullptr);

struct Positions {
    Tensor coords;  // N x 2
    std::vector<int> node_ids;
};

// CSV `node_id,x,y` (header optional).
Positions load_positions(std::istream& in);
void save_adjacency(const AdjacencyMatrix& a, std::ostream& out);

// ============================================================================
// Dynamic reweighting and multimodal fusion
// ============================================================================

struct SpatialWeights {
    Tensor weights;  // N x N, rows sum to 1
};

// Row-softmax of Z Z^T / sqrt(d), d = feature width of z.
SpatialWeights spatial_correlation(const Tensor& z);
// Elementwise mask: zero edges stay zero.
Tensor adjust_adjacency(const SpatialWeights& s, const AdjacencyMatrix& a);

enum class GraphMode { mfdgcn, static_gcn };

// Per-modality projection triples. The fusion attends across time positions
// of one node's modal sequences, so queries/keys embed scalar samples through
// 1 x d maps and the value map is a scalar gain; w_query[j] belongs to the
// querying modality, w_key[i]/w_value[i] to the modality being fused.
struct FusionVars {
    std::vector<Var> w_query;  // 1 x d each
    std::vector<Var> w_key;    // 1 x d each
    std::vector<Var> w_value;  // 1 x 1 each
};

// ---- tape-level building blocks (the model trains through these) ----

// Time-averaged node representation: per-modality N x T features -> N x M.
Var node_representation(Tape& tape, const std::vector<Var>& mods);

Var spatial_correlation(Tape& tape, Var z);

Var adjust_adjacency(Var s, Var a);

// Cross-attention fusion of modality features, independently per node: the
// output for modality i sums, over every other modality j, time attention of
// query x_j w_q^(j) against key x_i w_k^(i), applied to values x_i w_v^(i),
// where x are one node's length-T modal sequences. With prose_indexing the
// roles swap: query from x_i, keys/values from x_j. A single modality passes
// through its value projection. Nodes never mix here; that is the graph
// convolution's job.
std::vector<Var> modal_fusion(Tape& tape, const std::vector<Var>& mods, const FusionVars& params,
                              bool prose_indexing = false);

// One propagation step: relu(A_tilde * Concat(fusion(mods)) * layer_w),
// returned re-sliced per modality. static_gcn bypasses fusion entirely.
std::vector<Var> mfdgcn_layer(Tape& tape, const std::vector<Var>& mods, Var a_tilde, Var layer_w,
                              const FusionVars& fusion, GraphMode mode,
                              bool prose_indexing = false);

}  // namespace wsn::graph
