#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wsn/graph.hpp"
#include "wsn/labels.hpp"
#include "wsn/signal.hpp"
#include "wsn/tensor.hpp"

namespace wsn::model {

// ============================================================================
// Configuration
// ============================================================================

enum class Decomposition { dwt, moving_average };
enum class SeasonalAttention { frequency, time };
using graph::GraphMode;

struct ModelConfig {
    std::size_t window = 300;       // sliding window W
    std::size_t step = 100;         // sliding step L
    std::size_t detect_tail = 100;  // scored suffix of each window
    std::size_t hidden_width = 64;
    std::size_t mfdgcn_depth = 1;
    std::size_t attention_dim = 32;  // key width of the seasonal attention
    std::size_t fusion_dim = 32;     // key width of the modal-fusion projections
    double learning_rate = 0.001;
    std::size_t epochs = 200;
    std::uint64_t seed = 1;
    Decomposition decomposition = Decomposition::dwt;
    SeasonalAttention seasonal_attention = SeasonalAttention::frequency;
    GraphMode graph_mode = GraphMode::mfdgcn;
    std::size_t moving_average_window = 25;
    bool spatial_per_instant = false;
    bool fusion_prose_indexing = false;

    void validate() const;
    // Length of the trend/seasonal components entering the encoders.
    std::size_t component_length() const {
        return decomposition == Decomposition::dwt ? window / 2 : window;
    }

    // Key-value form shared by the checkpoint container and config echo.
    std::vector<std::pair<std::string, std::string>> entries() const;
    void set_entry(const std::string& key, const std::string& value);
};

const char* to_string(Decomposition d);
const char* to_string(SeasonalAttention s);
const char* to_string(GraphMode g);
Decomposition decomposition_from_string(const std::string& s);
SeasonalAttention seasonal_attention_from_string(const std::string& s);
GraphMode graph_mode_from_string(const std::string& s);

// ============================================================================
// Parameters
// ============================================================================

struct ModelParams {
    // trend encoder: 3-layer MLP along time, then graph convolution
    Tensor trend_w1, trend_b1, trend_w2, trend_b2, trend_w3, trend_b3;
    std::vector<Tensor> trend_fusion_q, trend_fusion_k, trend_fusion_v;  // per modality
    std::vector<Tensor> trend_graph_w;                                   // per layer

    // seasonal encoder: per-bin frequency-attention maps (1 x d_k embeddings
    // and a scalar value gain), then graph convolution
    Tensor fdam_wq, fdam_wk, fdam_wv;
    std::vector<Tensor> seasonal_fusion_q, seasonal_fusion_k, seasonal_fusion_v;
    std::vector<Tensor> seasonal_graph_w;

    // decoder output map along time
    Tensor out_w, out_b;

    std::size_t n_nodes = 0;
    std::size_t n_modalities = 0;
    bool trained = false;

    static ModelParams init(const ModelConfig& cfg, std::size_t n_nodes,
                            std::size_t n_modalities);

    std::vector<std::pair<std::string, Tensor*>> named_tensors();
    std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;
    std::size_t parameter_count() const;
    bool all_finite() const;
};

// ============================================================================
// The autoencoder network
// ============================================================================

struct ForwardTrace {
    Tensor trend_mlp_out;        // (M*N) x T rows after the MLP
    Tensor seasonal_attn_out;    // (M*N) x T rows after the (frequency) attention
    Tensor attention_weights;    // per-series T x T bin-attention maps, stacked
    double max_imag_residue = 0.0;
};

class Network {
public:
    Network(ModelConfig cfg, graph::AdjacencyMatrix adjacency, std::size_t n_modalities,
            signal::WaveletFilterPair filters = signal::WaveletFilterPair::haar());

    const ModelConfig& config() const { return cfg_; }
    const graph::AdjacencyMatrix& adjacency() const { return adjacency_; }
    std::size_t n_nodes() const { return adjacency_.weights.rows(); }
    std::size_t n_modalities() const { return n_modalities_; }

    // Parameters bound on a tape, leaves when training.
    struct Bound {
        std::vector<std::pair<std::string, Var>> vars;
        Var get(const std::string& name) const;
    };
    Bound bind(Tape& tape, const ModelParams& params, bool as_leaves) const;

    // Differentiable pipeline pieces; rows are modality-major (M*N) x T.
    std::vector<Var> trend_encode(Tape& tape, Var trend_rows, const Bound& b) const;
    std::vector<Var> seasonal_encode(Tape& tape, Var seasonal_rows, const Bound& b,
                                     ForwardTrace* trace = nullptr) const;
    Var decode(Tape& tape, const std::vector<Var>& z_trend, const std::vector<Var>& z_seasonal,
               const Bound& b) const;

    struct TapeForward {
        Bound bound;
        Var reconstruction;  // (M*N) x W rows
        Var loss;            // scalar mean squared error
    };
    TapeForward forward_loss(Tape& tape, const Tensor& window, const ModelParams& params,
                             bool params_as_leaves, ForwardTrace* trace = nullptr) const;

    // Plain-value reconstruction N x M x W.
    Tensor reconstruct(const Tensor& window, const ModelParams& params,
                       ForwardTrace* trace = nullptr) const;
    double loss_value(const Tensor& window, const ModelParams& params) const;

private:
    std::vector<Var> encode_graph(Tape& tape, std::vector<Var> mods,
                                  const std::vector<Var>& fusion_q,
                                  const std::vector<Var>& fusion_k,
                                  const std::vector<Var>& fusion_v,
                                  const std::vector<Var>& layer_w) const;

    ModelConfig cfg_;
    graph::AdjacencyMatrix adjacency_;
    std::size_t n_modalities_;
    signal::WaveletFilterPair filters_;
    signal::DftMatrices dft_;       // T x T forward transform tables
    Tensor idft_cos_, idft_sin_;    // transposed tables for the inverse
    Tensor synth_low_, synth_high_; // T x W wavelet synthesis matrices (dwt mode)
};

// ============================================================================
// Free operations
// ============================================================================

// Trend/seasonal split; dwt mode delegates to the level-1 wavelet transform,
// the moving-average ablation keeps full-length components.
signal::DecomposedSeries decompose(const Tensor& window, const ModelConfig& cfg,
                                   const signal::WaveletFilterPair& filters =
                                       signal::WaveletFilterPair::haar());

double loss_mse(const Tensor& x, const Tensor& x_hat);

// Modality-major row flattening used throughout the network.
Tensor window_to_rows(const Tensor& window);
Tensor rows_to_window(const Tensor& rows, std::size_t n_nodes, std::size_t n_modalities);

struct AnomalyScoreGrid {
    Tensor scores;  // N x M x detect_tail squared residuals
    double threshold = 0.0;
};

// Squared residual per cell over the final `tail` time steps.
AnomalyScoreGrid residual_scores(const Tensor& x, const Tensor& x_hat, std::size_t tail);

AnomalyScoreGrid score(const Network& net, const Tensor& window, const ModelParams& params);

// Global maximum over every cell of every training grid.
double calibrate_threshold(const std::vector<AnomalyScoreGrid>& training_scores);

// Strict-inequality thresholding: label 1 iff score > threshold.
LabelGrid classify(const AnomalyScoreGrid& grid);

struct TrainResult {
    ModelParams params;
    std::vector<double> epoch_loss;
    double tau = 0.0;
    std::size_t parameter_count = 0;
};

TrainResult train(const Network& net, const std::vector<Tensor>& windows,
                  std::ostream* log = nullptr);

// ============================================================================
// Checkpoint container (versioned text, bit-exact round trip)
// ============================================================================

struct Checkpoint {
    ModelConfig config;
    ModelParams params;
    graph::AdjacencyMatrix adjacency;
    double tau = 0.0;
    std::uint64_t seed = 0;
};

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt);
void save_checkpoint_file(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint_file(const std::string& path);

}  // namespace wsn::model
