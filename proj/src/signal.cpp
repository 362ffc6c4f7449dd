#include "wsn/signal.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <ostream>

namespace wsn::signal {

namespace {

std::size_t wrap(long long i, std::size_t n) {
    const long long m = static_cast<long long>(n);
    long long r = i % m;
    if (r < 0) r += m;
    return static_cast<std::size_t>(r);
}

}  // namespace

// ============================================================================
// Filter pairs
// ============================================================================

WaveletFilterPair WaveletFilterPair::from_orthonormal_lowpass(std::vector<double> lowpass) {
    WaveletFilterPair f;
    const std::size_t n = lowpass.size();
    f.lowpass = std::move(lowpass);
    f.highpass.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double sign = (k % 2 == 0) ? 1.0 : -1.0;
        f.highpass[k] = sign * f.lowpass[n - 1 - k];
    }
    // Synthesis taps are the time-reversed analysis taps: h(i) = H(-i).
    f.synth_low.assign(f.lowpass.rbegin(), f.lowpass.rend());
    f.synth_high.assign(f.highpass.rbegin(), f.highpass.rend());
    f.synth_offset = -static_cast<int>(n - 1);
    return f;
}

WaveletFilterPair WaveletFilterPair::haar() {
    const double s = 1.0 / std::sqrt(2.0);
    return from_orthonormal_lowpass({s, s});
}

WaveletFilterPair WaveletFilterPair::daubechies2() {
    const double r3 = std::sqrt(3.0);
    const double d = 4.0 * std::sqrt(2.0);
    return from_orthonormal_lowpass(
        {(1.0 + r3) / d, (3.0 + r3) / d, (3.0 - r3) / d, (1.0 - r3) / d});
}

// ============================================================================
// Level-1 Mallat transform
// ============================================================================

std::pair<std::vector<double>, std::vector<double>> dwt_series(const std::vector<double>& x,
                                                               const WaveletFilterPair& filters) {
    const std::size_t w = x.size();
    if (w < 2 || w % 2 != 0) {
        throw DimensionError("dwt_level1: window length " + std::to_string(w) +
                             " must be even and >= 2; pad or trim the window");
    }
    const std::size_t half = w / 2;
    std::vector<double> approx(half, 0.0), detail(half, 0.0);
    for (std::size_t n = 0; n < half; ++n) {
        double a = 0.0, d = 0.0;
        for (std::size_t k = 0; k < filters.lowpass.size(); ++k)
            a += filters.lowpass[k] * x[wrap(2 * static_cast<long long>(n) - static_cast<long long>(k), w)];
        for (std::size_t k = 0; k < filters.highpass.size(); ++k)
            d += filters.highpass[k] * x[wrap(2 * static_cast<long long>(n) - static_cast<long long>(k), w)];
        approx[n] = a;
        detail[n] = d;
    }
    return {std::move(approx), std::move(detail)};
}

std::vector<double> idwt_series(const std::vector<double>& approx,
                                const std::vector<double>& detail,
                                const WaveletFilterPair& filters) {
    if (approx.size() != detail.size()) {
        throw DimensionError("idwt_level1: component lengths differ: " +
                             std::to_string(approx.size()) + " vs " +
                             std::to_string(detail.size()));
    }
    const std::size_t half = approx.size();
    const std::size_t w = half * 2;
    std::vector<double> x(w, 0.0);
    for (std::size_t k = 0; k < half; ++k) {
        for (std::size_t t = 0; t < filters.synth_low.size(); ++t) {
            const long long lag = static_cast<long long>(t) + filters.synth_offset;
            x[wrap(2 * static_cast<long long>(k) + lag, w)] += filters.synth_low[t] * approx[k];
        }
        for (std::size_t t = 0; t < filters.synth_high.size(); ++t) {
            const long long lag = static_cast<long long>(t) + filters.synth_offset;
            x[wrap(2 * static_cast<long long>(k) + lag, w)] += filters.synth_high[t] * detail[k];
        }
    }
    return x;
}

DecomposedSeries dwt_level1(const Tensor& x, const WaveletFilterPair& filters) {
    if (x.rank() != 3) throw DimensionError("dwt_level1: expected N x M x W, got " + x.shape_str());
    const std::size_t n = x.extent(0), m = x.extent(1), w = x.extent(2);
    if (w < 2 || w % 2 != 0) {
        throw DimensionError("dwt_level1: window length " + std::to_string(w) +
                             " must be even and >= 2; pad or trim the window");
    }
    DecomposedSeries out;
    out.original_length = w;
    out.trend = Tensor({n, m, w / 2});
    out.seasonal = Tensor({n, m, w / 2});
    std::vector<double> series(w);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t t = 0; t < w; ++t) series[t] = x.at3(i, j, t);
            auto [a, d] = dwt_series(series, filters);
            for (std::size_t t = 0; t < w / 2; ++t) {
                out.trend.at3(i, j, t) = a[t];
                out.seasonal.at3(i, j, t) = d[t];
            }
        }
    }
    return out;
}

Tensor idwt_level1(const DecomposedSeries& d, const WaveletFilterPair& filters) {
    require_same_shape(d.trend, d.seasonal, "idwt_level1");
    if (d.trend.rank() != 3)
        throw DimensionError("idwt_level1: expected N x M x W/2 components, got " +
                             d.trend.shape_str());
    const std::size_t n = d.trend.extent(0), m = d.trend.extent(1), half = d.trend.extent(2);
    Tensor x({n, m, half * 2});
    std::vector<double> a(half), dd(half);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t t = 0; t < half; ++t) {
                a[t] = d.trend.at3(i, j, t);
                dd[t] = d.seasonal.at3(i, j, t);
            }
            const std::vector<double> rec = idwt_series(a, dd, filters);
            for (std::size_t t = 0; t < rec.size(); ++t) x.at3(i, j, t) = rec[t];
        }
    }
    return x;
}

std::pair<Tensor, Tensor> synthesis_matrices(const WaveletFilterPair& filters,
                                             std::size_t half_len) {
    const std::size_t w = half_len * 2;
    Tensor uh({half_len, w}), ug({half_len, w});
    for (std::size_t k = 0; k < half_len; ++k) {
        for (std::size_t t = 0; t < filters.synth_low.size(); ++t) {
            const long long lag = static_cast<long long>(t) + filters.synth_offset;
            uh.at(k, wrap(2 * static_cast<long long>(k) + lag, w)) += filters.synth_low[t];
        }
        for (std::size_t t = 0; t < filters.synth_high.size(); ++t) {
            const long long lag = static_cast<long long>(t) + filters.synth_offset;
            ug.at(k, wrap(2 * static_cast<long long>(k) + lag, w)) += filters.synth_high[t];
        }
    }
    return {std::move(uh), std::move(ug)};
}

// ============================================================================
// DFT / IDFT
// ============================================================================

std::vector<std::complex<double>> dft_series(const std::vector<double>& x) {
    const std::size_t l = x.size();
    std::vector<std::complex<double>> out(l);
    for (std::size_t k = 0; k < l; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t n = 0; n < l; ++n) {
            const double angle = -2.0 * M_PI * static_cast<double>(k) * static_cast<double>(n) /
                                 static_cast<double>(l);
            acc += x[n] * std::complex<double>(std::cos(angle), std::sin(angle));
        }
        out[k] = acc;
    }
    return out;
}

ComplexSpectrum dft(const Tensor& x) {
    if (x.rank() == 0 || x.size() == 0)
        throw DimensionError("dft: empty input " + x.shape_str());
    const std::size_t l = x.shape().back();
    if (l < 1) throw DimensionError("dft: last axis must have length >= 1");
    ComplexSpectrum s;
    s.source_length = l;
    s.amplitudes = ComplexTensor(x.shape());
    const std::size_t series_count = x.size() / l;
    std::vector<double> series(l);
    for (std::size_t r = 0; r < series_count; ++r) {
        for (std::size_t t = 0; t < l; ++t) series[t] = x[r * l + t];
        const auto bins = dft_series(series);
        for (std::size_t k = 0; k < l; ++k) s.amplitudes[r * l + k] = bins[k];
    }
    return s;
}

IdftResult idft(const ComplexSpectrum& s) {
    const std::size_t l = s.source_length;
    if (l < 1) throw DimensionError("idft: spectrum length must be >= 1");
    IdftResult out;
    out.values = Tensor(s.amplitudes.shape());
    const std::size_t series_count = s.amplitudes.size() / l;
    for (std::size_t r = 0; r < series_count; ++r) {
        for (std::size_t n = 0; n < l; ++n) {
            std::complex<double> acc(0.0, 0.0);
            for (std::size_t k = 0; k < l; ++k) {
                const double angle = 2.0 * M_PI * static_cast<double>(k) *
                                     static_cast<double>(n) / static_cast<double>(l);
                acc += s.amplitudes[r * l + k] *
                       std::complex<double>(std::cos(angle), std::sin(angle));
            }
            acc /= static_cast<double>(l);
            out.values[r * l + n] = acc.real();
            out.max_imag_residue = std::max(out.max_imag_residue, std::fabs(acc.imag()));
        }
    }
    return out;
}

DftMatrices dft_matrices(std::size_t length) {
    DftMatrices m;
    m.cos_fwd = Tensor({length, length});
    m.sin_fwd = Tensor({length, length});
    for (std::size_t n = 0; n < length; ++n) {
        for (std::size_t k = 0; k < length; ++k) {
            const double angle = 2.0 * M_PI * static_cast<double>(k) * static_cast<double>(n) /
                                 static_cast<double>(length);
            m.cos_fwd.at(n, k) = std::cos(angle);
            m.sin_fwd.at(n, k) = std::sin(angle);
        }
    }
    return m;
}

void spectrum_report(const std::vector<double>& x, std::ostream& out) {
    if (x.empty()) throw DimensionError("spectrum_report: empty series");
    const auto bins = dft_series(x);
    out << "freq_index,amplitude\n";
    char buf[64];
    for (std::size_t k = 0; k < bins.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g", std::abs(bins[k]));
        out << k << "," << buf << "\n";
    }
    if (!out.good()) throw IoError("spectrum_report: failed to write to sink");
}

}  // namespace wsn::signal
