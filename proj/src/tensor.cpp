#include "wsn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <utility>

namespace wsn {

// ============================================================================
// Tensor
// ============================================================================

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    if (shape_product(shape_) != data_.size()) {
        throw DimensionError("tensor: " + std::to_string(data_.size()) +
                             " values do not fill shape " + shape_str());
    }
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> values) {
    return Tensor({rows, cols}, std::vector<double>(values));
}

std::size_t Tensor::rows() const {
    if (shape_.size() != 2) throw DimensionError("expected 2-D tensor, got shape " + shape_str());
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (shape_.size() != 2) throw DimensionError("expected 2-D tensor, got shape " + shape_str());
    return shape_[1];
}

double& Tensor::at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
double Tensor::at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

double& Tensor::at3(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
}
double Tensor::at3(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

double Tensor::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::fabs(v));
    return m;
}

double Tensor::squared_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return s;
}

std::string Tensor::shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape_[i]);
    }
    return s + "]";
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                             b.shape_str());
    }
}

ComplexTensor::ComplexTensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), std::complex<double>(0.0, 0.0)) {}

// ============================================================================
// Rng — xoshiro256** seeded via splitmix64
// ============================================================================

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& w : state_) w = splitmix64(s);
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

double Rng::normal() {
    if (have_normal_) {
        have_normal_ = false;
        return cached_normal_;
    }
    double u1 = 0.0;
    do {
        u1 = next_double();
    } while (u1 <= 0.0);
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    cached_normal_ = r * std::sin(theta);
    have_normal_ = true;
    return r * std::cos(theta);
}

std::size_t Rng::index(std::size_t n) {
    return static_cast<std::size_t>(next_double() * static_cast<double>(n)) % n;
}

std::uint64_t Rng::derive(std::uint64_t stream) const {
    std::uint64_t s = state_[0] ^ (0x6a09e667f3bcc909ULL + stream * 0x9e3779b97f4a7c15ULL);
    return splitmix64(s);
}

Tensor init_scaled_uniform(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : t.data()) v = rng.uniform(-bound, bound);
    return t;
}

// ============================================================================
// Tape
// ============================================================================

std::size_t Tape::push(Tensor value, bool requires_grad,
                       std::function<void(Tape&, std::size_t)> backprop) {
    Node n;
    n.grad = Tensor(value.shape());
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

Var Tape::leaf(Tensor value) { return Var{this, push(std::move(value), true, nullptr)}; }

Var Tape::constant(Tensor value) { return Var{this, push(std::move(value), false, nullptr)}; }

void Tape::backward(Var output) {
    const Tensor& out = nodes_[output.idx].value;
    if (out.size() != 1) {
        throw ContractError("backward: output must be scalar, got shape " + out.shape_str());
    }
    for (auto& n : nodes_) std::fill(n.grad.data().begin(), n.grad.data().end(), 0.0);
    nodes_[output.idx].grad[0] = 1.0;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        Node& n = nodes_[i];
        if (n.backprop && n.requires_grad) n.backprop(*this, i);
    }
}

// ---- op builders ----

Var op_nary(Tape& tape, const std::vector<Var>& parents, Tensor value,
            std::function<void(Tape&, std::size_t)> backprop) {
    bool needs = false;
    for (Var p : parents) {
        if (p.tape != &tape) throw ContractError("autodiff: operands recorded on different tapes");
        needs = needs || tape.node_requires_grad(p.idx);
    }
    return Var{&tape, tape.push(std::move(value), needs, needs ? std::move(backprop) : nullptr)};
}

namespace {

Var op_unary(Tape& tape, Var a, Tensor value, std::function<void(Tape&, std::size_t)> backprop) {
    return op_nary(tape, {a}, std::move(value), std::move(backprop));
}

Var op_binary(Tape& tape, Var a, Var b, Tensor value,
              std::function<void(Tape&, std::size_t)> backprop) {
    return op_nary(tape, {a, b}, std::move(value), std::move(backprop));
}

void accumulate(Tape& tape, std::size_t idx, const Tensor& delta) {
    if (!tape.node_requires_grad(idx)) return;
    Tensor& g = tape.mutable_grad(idx);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

}  // namespace

// ---- primitives ----

Var add(Var a, Var b) {
    Tape& t = *a.tape;
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    require_same_shape(av, bv, "add");
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    const std::size_t ai = a.idx, bi = b.idx;
    return op_binary(t, a, b, std::move(out), [ai, bi](Tape& tp, std::size_t self) {
        accumulate(tp, ai, tp.node_grad(self));
        accumulate(tp, bi, tp.node_grad(self));
    });
}

Var sub(Var a, Var b) {
    Tape& t = *a.tape;
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    require_same_shape(av, bv, "sub");
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    const std::size_t ai = a.idx, bi = b.idx;
    return op_binary(t, a, b, std::move(out), [ai, bi](Tape& tp, std::size_t self) {
        const Tensor& g = tp.node_grad(self);
        accumulate(tp, ai, g);
        if (tp.node_requires_grad(bi)) {
            Tensor neg = g;
            for (double& v : neg.data()) v = -v;
            accumulate(tp, bi, neg);
        }
    });
}

Var scale(Var a, double s) {
    Tape& t = *a.tape;
    Tensor out = t.value(a);
    for (double& v : out.data()) v *= s;
    const std::size_t ai = a.idx;
    return op_unary(t, a, std::move(out), [ai, s](Tape& tp, std::size_t self) {
        Tensor g = tp.node_grad(self);
        for (double& v : g.data()) v *= s;
        accumulate(tp, ai, g);
    });
}

Var hadamard(Var a, Var b) {
    Tape& t = *a.tape;
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    require_same_shape(av, bv, "hadamard");
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    const std::size_t ai = a.idx, bi = b.idx;
    return op_binary(t, a, b, std::move(out), [ai, bi](Tape& tp, std::size_t self) {
        const Tensor& g = tp.node_grad(self);
        if (tp.node_requires_grad(ai)) {
            Tensor da = g;
            const Tensor& bv2 = tp.node_value(bi);
            for (std::size_t i = 0; i < da.size(); ++i) da[i] *= bv2[i];
            accumulate(tp, ai, da);
        }
        if (tp.node_requires_grad(bi)) {
            Tensor db = g;
            const Tensor& av2 = tp.node_value(ai);
            for (std::size_t i = 0; i < db.size(); ++i) db[i] *= av2[i];
            accumulate(tp, bi, db);
        }
    });
}

namespace {

Tensor matmul_plain(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
        throw DimensionError("matmul: incompatible shapes " + a.shape_str() + " x " +
                             b.shape_str());
    }
    const std::size_t r = a.rows(), k = a.cols(), c = b.cols();
    Tensor out({r, c});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t m = 0; m < k; ++m) {
            const double av = a.at(i, m);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < c; ++j) out.at(i, j) += av * b.at(m, j);
        }
    }
    return out;
}

Tensor transpose_plain(const Tensor& a) {
    Tensor out({a.cols(), a.rows()});
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
    return out;
}

Tensor softmax_rows_plain(const Tensor& a) {
    if (a.rank() != 2 || a.cols() == 0) {
        throw DimensionError("softmax_rows: needs a 2-D tensor with non-empty rows, got " +
                             a.shape_str());
    }
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double mx = a.at(i, 0);
        for (std::size_t j = 1; j < a.cols(); ++j) mx = std::max(mx, a.at(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const double e = std::exp(a.at(i, j) - mx);
            out.at(i, j) = e;
            sum += e;
        }
        for (std::size_t j = 0; j < a.cols(); ++j) out.at(i, j) /= sum;
    }
    return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) { return matmul_plain(a, b); }
Tensor transpose(const Tensor& a) { return transpose_plain(a); }
Tensor softmax_rows(const Tensor& a) { return softmax_rows_plain(a); }
Tensor hadamard(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "hadamard");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

Var matmul(Var a, Var b) {
    Tape& t = *a.tape;
    Tensor out = matmul_plain(t.value(a), t.value(b));
    const std::size_t ai = a.idx, bi = b.idx;
    return op_binary(t, a, b, std::move(out), [ai, bi](Tape& tp, std::size_t self) {
        const Tensor& g = tp.node_grad(self);
        if (tp.node_requires_grad(ai))
            accumulate(tp, ai, matmul_plain(g, transpose_plain(tp.node_value(bi))));
        if (tp.node_requires_grad(bi))
            accumulate(tp, bi, matmul_plain(transpose_plain(tp.node_value(ai)), g));
    });
}

Var transpose(Var a) {
    Tape& t = *a.tape;
    Tensor out = transpose_plain(t.value(a));
    const std::size_t ai = a.idx;
    return op_unary(t, a, std::move(out), [ai](Tape& tp, std::size_t self) {
        accumulate(tp, ai, transpose_plain(tp.node_grad(self)));
    });
}

Var relu(Var a) {
    Tape& t = *a.tape;
    Tensor out = t.value(a);
    for (double& v : out.data()) v = std::max(0.0, v);
    const std::size_t ai = a.idx;
    return op_unary(t, a, std::move(out), [ai](Tape& tp, std::size_t self) {
        Tensor g = tp.node_grad(self);
        const Tensor& x = tp.node_value(ai);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (x[i] <= 0.0) g[i] = 0.0;
        accumulate(tp, ai, g);
    });
}

Var softmax_rows(Var a) {
    Tape& t = *a.tape;
    Tensor out = softmax_rows_plain(t.value(a));
    const std::size_t ai = a.idx;
    return op_unary(t, a, std::move(out), [ai](Tape& tp, std::size_t self) {
        const Tensor& y = tp.node_value(self);
        const Tensor& g = tp.node_grad(self);
        Tensor dx(y.shape());
        for (std::size_t i = 0; i < y.rows(); ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < y.cols(); ++j) dot += g.at(i, j) * y.at(i, j);
            for (std::size_t j = 0; j < y.cols(); ++j)
                dx.at(i, j) = y.at(i, j) * (g.at(i, j) - dot);
        }
        accumulate(tp, ai, dx);
    });
}

Var add_rowvec(Var a, Var bias) {
    Tape& t = *a.tape;
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(bias);
    if (bv.rank() != 2 || bv.rows() != 1 || bv.cols() != av.cols()) {
        throw DimensionError("add_rowvec: bias " + bv.shape_str() + " does not match " +
                             av.shape_str());
    }
    Tensor out = av;
    for (std::size_t i = 0; i < av.rows(); ++i)
        for (std::size_t j = 0; j < av.cols(); ++j) out.at(i, j) += bv.at(0, j);
    const std::size_t ai = a.idx, bi = bias.idx;
    return op_binary(t, a, bias, std::move(out), [ai, bi](Tape& tp, std::size_t self) {
        const Tensor& g = tp.node_grad(self);
        accumulate(tp, ai, g);
        if (tp.node_requires_grad(bi)) {
            Tensor db({1, g.cols()});
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) db.at(0, j) += g.at(i, j);
            accumulate(tp, bi, db);
        }
    });
}

Var row_mean(Var a) {
    Tape& t = *a.tape;
    const Tensor& av = t.value(a);
    if (av.rank() != 2 || av.cols() == 0)
        throw DimensionError("row_mean: needs non-empty 2-D tensor, got " + av.shape_str());
    Tensor out({av.rows(), 1});
    for (std::size_t i = 0; i < av.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < av.cols(); ++j) s += av.at(i, j);
        out.at(i, 0) = s / static_cast<double>(av.cols());
    }
    const std::size_t ai = a.idx;
    const std::size_t c = av.cols();
    return op_unary(t, a, std::move(out), [ai, c](Tape& tp, std::size_t self) {
        const Tensor& g = tp.node_grad(self);
        Tensor da(tp.node_value(ai).shape());
        for (std::size_t i = 0; i < da.rows(); ++i)
            for (std::size_t j = 0; j < c; ++j) da.at(i, j) = g.at(i, 0) / static_cast<double>(c);
        accumulate(tp, ai, da);
    });
}

Var complex_modulus(Var re, Var im) {
    Tape& t = *re.tape;
    const Tensor& rv = t.value(re);
    const Tensor& iv = t.value(im);
    require_same_shape(rv, iv, "complex_modulus");
    Tensor out = rv;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::hypot(rv[i], iv[i]);
    const std::size_t ri = re.idx, ii = im.idx;
    return op_binary(t, re, im, std::move(out), [ri, ii](Tape& tp, std::size_t self) {
        const Tensor& g = tp.node_grad(self);
        const Tensor& m = tp.node_value(self);
        const Tensor& rv2 = tp.node_value(ri);
        const Tensor& iv2 = tp.node_value(ii);
        if (tp.node_requires_grad(ri)) {
            Tensor dr(rv2.shape());
            for (std::size_t i = 0; i < dr.size(); ++i)
                dr[i] = m[i] > 0.0 ? g[i] * rv2[i] / m[i] : 0.0;
            accumulate(tp, ri, dr);
        }
        if (tp.node_requires_grad(ii)) {
            Tensor di(iv2.shape());
            for (std::size_t i = 0; i < di.size(); ++i)
                di[i] = m[i] > 0.0 ? g[i] * iv2[i] / m[i] : 0.0;
            accumulate(tp, ii, di);
        }
    });
}

Var hconcat(const std::vector<Var>& parts) {
    if (parts.empty()) throw DimensionError("hconcat: no parts");
    Tape& t = *parts[0].tape;
    const std::size_t rows = t.value(parts[0]).rows();
    std::size_t cols = 0;
    for (Var p : parts) {
        if (t.value(p).rows() != rows)
            throw DimensionError("hconcat: row mismatch " + t.value(p).shape_str());
        cols += t.value(p).cols();
    }
    Tensor out({rows, cols});
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (Var p : parts) {
        const Tensor& pv = t.value(p);
        offsets.push_back(off);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < pv.cols(); ++j) out.at(i, off + j) = pv.at(i, j);
        off += pv.cols();
    }
    std::vector<std::size_t> pidx;
    for (Var p : parts) pidx.push_back(p.idx);
    return op_nary(t, parts, std::move(out), [pidx, offsets](Tape& tp, std::size_t self) {
        const Tensor& g = tp.node_grad(self);
        for (std::size_t k = 0; k < pidx.size(); ++k) {
            if (!tp.node_requires_grad(pidx[k])) continue;
            const Tensor& pv = tp.node_value(pidx[k]);
            Tensor dp(pv.shape());
            for (std::size_t i = 0; i < pv.rows(); ++i)
                for (std::size_t j = 0; j < pv.cols(); ++j) dp.at(i, j) = g.at(i, offsets[k] + j);
            accumulate(tp, pidx[k], dp);
        }
    });
}

Var vconcat(const std::vector<Var>& parts) {
    if (parts.empty()) throw DimensionError("vconcat: no parts");
    Tape& t = *parts[0].tape;
    const std::size_t cols = t.value(parts[0]).cols();
    std::size_t rows = 0;
    for (Var p : parts) {
        if (t.value(p).cols() != cols)
            throw DimensionError("vconcat: column mismatch " + t.value(p).shape_str());
        rows += t.value(p).rows();
    }
    Tensor out({rows, cols});
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (Var p : parts) {
        const Tensor& pv = t.value(p);
        offsets.push_back(off);
        for (std::size_t i = 0; i < pv.rows(); ++i)
            for (std::size_t j = 0; j < cols; ++j) out.at(off + i, j) = pv.at(i, j);
        off += pv.rows();
    }
    std::vector<std::size_t> pidx;
    for (Var p : parts) pidx.push_back(p.idx);
    return op_nary(t, parts, std::move(out), [pidx, offsets](Tape& tp, std::size_t self) {
        const Tensor& g = tp.node_grad(self);
        for (std::size_t k = 0; k < pidx.size(); ++k) {
            if (!tp.node_requires_grad(pidx[k])) continue;
            const Tensor& pv = tp.node_value(pidx[k]);
            Tensor dp(pv.shape());
            for (std::size_t i = 0; i < pv.rows(); ++i)
                for (std::size_t j = 0; j < pv.cols(); ++j) dp.at(i, j) = g.at(offsets[k] + i, j);
            accumulate(tp, pidx[k], dp);
        }
    });
}

Var slice_cols(Var a, std::size_t c0, std::size_t c1) {
    Tape& t = *a.tape;
    const Tensor& av = t.value(a);
    if (c0 >= c1 || c1 > av.cols())
        throw DimensionError("slice_cols: bad range on " + av.shape_str());
    Tensor out({av.rows(), c1 - c0});
    for (std::size_t i = 0; i < av.rows(); ++i)
        for (std::size_t j = c0; j < c1; ++j) out.at(i, j - c0) = av.at(i, j);
    const std::size_t ai = a.idx;
    return op_unary(t, a, std::move(out), [ai, c0](Tape& tp, std::size_t self) {
        const Tensor& g = tp.node_grad(self);
        Tensor da(tp.node_value(ai).shape());
        for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) da.at(i, c0 + j) = g.at(i, j);
        accumulate(tp, ai, da);
    });
}

Var slice_rows(Var a, std::size_t r0, std::size_t r1) {
    Tape& t = *a.tape;
    const Tensor& av = t.value(a);
    if (r0 >= r1 || r1 > av.rows())
        throw DimensionError("slice_rows: bad range on " + av.shape_str());
    Tensor out({r1 - r0, av.cols()});
    for (std::size_t i = r0; i < r1; ++i)
        for (std::size_t j = 0; j < av.cols(); ++j) out.at(i - r0, j) = av.at(i, j);
    const std::size_t ai = a.idx;
    return op_unary(t, a, std::move(out), [ai, r0](Tape& tp, std::size_t self) {
        const Tensor& g = tp.node_grad(self);
        Tensor da(tp.node_value(ai).shape());
        for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) da.at(r0 + i, j) = g.at(i, j);
        accumulate(tp, ai, da);
    });
}

Var mean_all(Var a) {
    Tape& t = *a.tape;
    const Tensor& av = t.value(a);
    if (av.size() == 0) throw DimensionError("mean_all: empty tensor");
    double s = 0.0;
    for (double v : av.data()) s += v;
    Tensor out({1, 1});
    out[0] = s / static_cast<double>(av.size());
    const std::size_t ai = a.idx;
    const double inv = 1.0 / static_cast<double>(av.size());
    return op_unary(t, a, std::move(out), [ai, inv](Tape& tp, std::size_t self) {
        const double g = tp.node_grad(self)[0];
        Tensor da(tp.node_value(ai).shape());
        for (double& v : da.data()) v = g * inv;
        accumulate(tp, ai, da);
    });
}

Var sum_all(Var a) {
    Tape& t = *a.tape;
    const Tensor& av = t.value(a);
    double s = 0.0;
    for (double v : av.data()) s += v;
    Tensor out({1, 1});
    out[0] = s;
    const std::size_t ai = a.idx;
    return op_unary(t, a, std::move(out), [ai](Tape& tp, std::size_t self) {
        const double g = tp.node_grad(self)[0];
        Tensor da(tp.node_value(ai).shape());
        for (double& v : da.data()) v = g;
        accumulate(tp, ai, da);
    });
}

// ============================================================================
// Adam
// ============================================================================

Tensor& AdamState::moment(std::vector<std::pair<std::string, Tensor>>& store,
                          const std::string& name, const Tensor& like) {
    for (auto& [n, t] : store)
        if (n == name) return t;
    store.emplace_back(name, Tensor(like.shape()));
    return store.back().second;
}

void adam_update(const std::string& name, Tensor& param, const Tensor& grad, AdamState& state) {
    require_same_shape(param, grad, "adam_update");
    if (!grad.all_finite())
        throw TrainingError("adam_update: non-finite gradient for parameter '" + name + "'");
    if (state.step < 1)
        throw ContractError("adam_update: state.step must be advanced to >= 1 before updates");
    Tensor& m = state.moment(state.first_moment, name, param);
    Tensor& v = state.moment(state.second_moment, name, param);
    require_same_shape(m, param, "adam_update/moment");
    const double b1 = state.beta1, b2 = state.beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        const double m_hat = m[i] / corr1;
        const double v_hat = v[i] / corr2;
        param[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

}  // namespace wsn
