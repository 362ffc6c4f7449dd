#pragma once

#include <iosfwd>
#include <utility>
#include <vector>

#include "wsn/tensor.hpp"

namespace wsn::signal {

// ============================================================================
// Wavelet filter bank (level-1 Mallat analysis/synthesis, periodic boundary)
// ============================================================================

// Analysis: A(n) = sum_k H(k) x(2n-k), D(n) = sum_k G(k) x(2n-k).
// Synthesis: x(n) = sum_k h(n-2k) A(k) + g(n-2k) D(k), where tap i of the
// synthesis lists corresponds to lag (i + synth_offset).
struct WaveletFilterPair {
    std::vector<double> lowpass;     // H
    std::vector<double> highpass;    // G
    std::vector<double> synth_low;   // h
    std::vector<double> synth_high;  // g
    int synth_offset = 0;

    static WaveletFilterPair haar();
    static WaveletFilterPair daubechies2();
    // Builds the quadrature mirror + time-reversed synthesis taps for an
    // orthonormal lowpass filter.
    static WaveletFilterPair from_orthonormal_lowpass(std::vector<double> lowpass);
};

struct DecomposedSeries {
    Tensor trend;     // approximation component A
    Tensor seasonal;  // detail component D
    std::size_t original_length = 0;
};

// Level-1 decomposition applied independently per (node, modality) series.
// x has shape N x M x W with W even; components come out N x M x W/2.
DecomposedSeries dwt_level1(const Tensor& x, const WaveletFilterPair& filters);

// Perfect-reconstruction inverse of dwt_level1.
Tensor idwt_level1(const DecomposedSeries& d, const WaveletFilterPair& filters);

// Single-series forms (used by the tensor-level ops and handy in tests).
std::pair<std::vector<double>, std::vector<double>> dwt_series(const std::vector<double>& x,
                                                               const WaveletFilterPair& filters);
std::vector<double> idwt_series(const std::vector<double>& approx,
                                const std::vector<double>& detail,
                                const WaveletFilterPair& filters);

// Constant matrices U_h (half x full) and U_g with x = A*U_h + D*U_g; lets the
// model run the synthesis step as two matrix products on the autodiff tape.
std::pair<Tensor, Tensor> synthesis_matrices(const WaveletFilterPair& filters,
                                             std::size_t half_len);

// ============================================================================
// Discrete Fourier transform (direct evaluation along the last axis)
// ============================================================================

struct ComplexSpectrum {
    ComplexTensor amplitudes;  // same shape as the input, F = source_length bins
    std::size_t source_length = 0;
};

ComplexSpectrum dft(const Tensor& x);

struct IdftResult {
    Tensor values;
    // Largest |imaginary part| discarded when mapping back to a real series.
    double max_imag_residue = 0.0;
};

IdftResult idft(const ComplexSpectrum& s);

// DFT of one series -> complex bins.
std::vector<std::complex<double>> dft_series(const std::vector<double>& x);

// Constant matrices for tape-level transforms of row-major series batches:
//   forward:  Re = X * Fc, Im = -(X * Fs)      (Fc, Fs are L x L)
//   inverse:  x = (Re * Gc - Im * Gs) / L      (Gc = Fc^T, Gs = Fs^T)
struct DftMatrices {
    Tensor cos_fwd;  // Fc(n, k) = cos(2 pi k n / L)
    Tensor sin_fwd;  // Fs(n, k) = sin(2 pi k n / L)
};
DftMatrices dft_matrices(std::size_t length);

// Writes `freq_index,amplitude` rows for one real series.
void spectrum_report(const std::vector<double>& x, std::ostream& out);

}  // namespace wsn::signal
