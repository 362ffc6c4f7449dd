#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wsn/errors.hpp"

namespace wsn {

// ============================================================================
// Dense tensors (64-bit scalars, row-major)
// ============================================================================

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> values);

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, double value);
    static Tensor ones(std::vector<std::size_t> shape) { return full(std::move(shape), 1.0); }
    // 2-D identity.
    static Tensor identity(std::size_t n);
    static Tensor matrix(std::size_t rows, std::size_t cols,
                         std::initializer_list<double> values);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

    // 2-D accessors (most tape arithmetic is matrix-shaped).
    std::size_t rows() const;
    std::size_t cols() const;
    double& at(std::size_t r, std::size_t c);
    double at(std::size_t r, std::size_t c) const;

    // 3-D accessor for (node, modality, time)-shaped data.
    double& at3(std::size_t i, std::size_t j, std::size_t k);
    double at3(std::size_t i, std::size_t j, std::size_t k) const;

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    double max_abs() const;
    double squared_norm() const;

    std::string shape_str() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// Throws DimensionError naming both shapes if they differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

class ComplexTensor {
public:
    ComplexTensor() = default;
    explicit ComplexTensor(std::vector<std::size_t> shape);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }

    std::complex<double>& operator[](std::size_t i) { return data_[i]; }
    const std::complex<double>& operator[](std::size_t i) const { return data_[i]; }

    std::vector<std::complex<double>>& data() { return data_; }
    const std::vector<std::complex<double>>& data() const { return data_; }

private:
    std::vector<std::size_t> shape_;
    std::vector<std::complex<double>> data_;
};

// ============================================================================
// Seeded PRNG helpers (implementation-independent streams)
// ============================================================================

class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    // Uniform in [0, 1).
    double next_double();
    // Uniform in [lo, hi).
    double uniform(double lo, double hi);
    // Standard normal via Box-Muller.
    double normal();
    // Uniform integer in [0, n).
    std::size_t index(std::size_t n);
    // Derive an independent stream (for per-trial seeding).
    std::uint64_t derive(std::uint64_t stream) const;

private:
    std::uint64_t state_[4];
    bool have_normal_ = false;
    double cached_normal_ = 0.0;
};

// Scaled uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
Tensor init_scaled_uniform(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng);

// ============================================================================
// Reverse-mode autodiff tape
// ============================================================================

class Tape;

// Lightweight handle to a tape node.
struct Var {
    Tape* tape = nullptr;
    std::size_t idx = 0;
};

class Tape {
public:
    // Differentiable leaf (parameter or probed input).
    Var leaf(Tensor value);
    // Non-differentiable input (data, masks, fixed transform matrices).
    Var constant(Tensor value);

    const Tensor& value(Var v) const { return nodes_[v.idx].value; }
    const Tensor& grad(Var v) const { return nodes_[v.idx].grad; }

    // Seeds d(output)/d(output) = 1 and replays adjoints in exact reverse
    // recording order. Output must be scalar (1x1 or single-element).
    void backward(Var output);

    std::size_t node_count() const { return nodes_.size(); }

private:
    friend Var op_nary(Tape&, const std::vector<Var>&, Tensor,
                       std::function<void(Tape&, std::size_t)>);

    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::function<void(Tape&, std::size_t)> backprop;  // empty for leaves/constants
    };

    std::size_t push(Tensor value, bool requires_grad,
                     std::function<void(Tape&, std::size_t)> backprop);

    std::vector<Node> nodes_;

public:
    // Internal accessors for op implementations.
    Tensor& mutable_grad(std::size_t idx) { return nodes_[idx].grad; }
    const Tensor& node_value(std::size_t idx) const { return nodes_[idx].value; }
    const Tensor& node_grad(std::size_t idx) const { return nodes_[idx].grad; }
    bool node_requires_grad(std::size_t idx) const { return nodes_[idx].requires_grad; }
};

// ---- differentiable primitives (matrices unless noted) ----

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
// Elementwise product (identical shapes).
Var hadamard(Var a, Var b);
// Standard 2-D matrix product.
Var matmul(Var a, Var b);
Var transpose(Var a);
Var relu(Var a);
// Row-wise softmax with max-subtraction; rows sum to 1.
Var softmax_rows(Var a);
// Adds a 1xC row vector to every row of an RxC matrix.
Var add_rowvec(Var a, Var bias);
// RxC -> Rx1, mean over each row.
Var row_mean(Var a);
// Elementwise sqrt(re^2 + im^2); gradient 0 where the modulus is 0.
Var complex_modulus(Var re, Var im);
// Column-wise concatenation of matrices with equal row counts.
Var hconcat(const std::vector<Var>& parts);
// Row-wise concatenation of matrices with equal column counts.
Var vconcat(const std::vector<Var>& parts);
// Columns [c0, c1) of a matrix.
Var slice_cols(Var a, std::size_t c0, std::size_t c1);
// Rows [r0, r1) of a matrix.
Var slice_rows(Var a, std::size_t r0, std::size_t r1);
// Mean of all entries -> 1x1 scalar.
Var mean_all(Var a);
Var sum_all(Var a);

// Plain-tensor counterparts used by oracles and non-training paths.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax_rows(const Tensor& a);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// ============================================================================
// Adam optimizer
// ============================================================================

struct AdamState {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step = 0;

    // Moment accumulators keyed by parameter name, shape-matched lazily.
    std::vector<std::pair<std::string, Tensor>> first_moment;
    std::vector<std::pair<std::string, Tensor>> second_moment;

    Tensor& moment(std::vector<std::pair<std::string, Tensor>>& store,
                   const std::string& name, const Tensor& like);
};

// One bias-corrected Adam update for a single named parameter. The caller
// advances state.step once per optimization step, before updating parameters.
// Throws TrainingError naming the parameter on non-finite gradients.
void adam_update(const std::string& name, Tensor& param, const Tensor& grad, AdamState& state);

}  // namespace wsn
