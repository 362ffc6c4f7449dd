#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

#include "test_util.hpp"
#include "wsn/signal.hpp"

using namespace wsn;
using namespace wsn::signal;

namespace {

// Literal evaluation of the analysis equations: A(n) = sum_k H(k) x(2n-k),
// D(n) = sum_k G(k) x(2n-k), periodic indexing.
std::pair<std::vector<double>, std::vector<double>> analysis_oracle(
    const std::vector<double>& x, const std::vector<double>& low, const std::vector<double>& high) {
    const long long l = static_cast<long long>(x.size());
    std::vector<double> a(x.size() / 2), d(x.size() / 2);
    for (long long n = 0; n < l / 2; ++n) {
        double sa = 0.0, sd = 0.0;
        for (long long k = 0; k < static_cast<long long>(low.size()); ++k) {
            long long idx = ((2 * n - k) % l + l) % l;
            sa += low[k] * x[idx];
            sd += high[k] * x[idx];
        }
        a[n] = sa;
        d[n] = sd;
    }
    return {a, d};
}

// O(L^2) complex-exponential oracle, written against std::polar.
std::vector<std::complex<double>> dft_oracle(const std::vector<double>& x) {
    const std::size_t l = x.size();
    std::vector<std::complex<double>> out(l);
    for (std::size_t k = 0; k < l; ++k) {
        std::complex<double> acc;
        for (std::size_t n = 0; n < l; ++n)
            acc += x[n] * std::polar(1.0, -2.0 * M_PI * double(k) * double(n) / double(l));
        out[k] = acc;
    }
    return out;
}

Tensor wrap_series(const std::vector<double>& x) {
    Tensor t({1, 1, x.size()});
    for (std::size_t i = 0; i < x.size(); ++i) t[i] = x[i];
    return t;
}

std::vector<double> random_series(std::size_t n, Rng& rng) {
    std::vector<double> x(n);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    return x;
}

}  // namespace

TEST_CASE("haar on a constant window has no detail") {
    const double c = 2.5;
    auto d = dwt_level1(wrap_series({c, c, c, c}), WaveletFilterPair::haar());
    CHECK(d.trend.extent(2) == 2);
    for (std::size_t t = 0; t < 2; ++t) {
        CHECK(d.trend.at3(0, 0, t) == doctest::Approx(c * std::sqrt(2.0)).epsilon(1e-12));
        CHECK(std::fabs(d.seasonal.at3(0, 0, t)) < 1e-12);
    }
}

TEST_CASE("haar on pure alternation has no trend") {
    auto d = dwt_level1(wrap_series({1, -1, 1, -1}), WaveletFilterPair::haar());
    const double mag = std::sqrt(2.0);
    for (std::size_t t = 0; t < 2; ++t) {
        CHECK(std::fabs(d.trend.at3(0, 0, t)) < 1e-12);
        CHECK(std::fabs(std::fabs(d.seasonal.at3(0, 0, t)) - mag) < 1e-12);
    }
}

TEST_CASE("dwt matches explicit analysis summation") {
    Rng rng(99);
    for (const auto& filters : {WaveletFilterPair::haar(), WaveletFilterPair::daubechies2()}) {
        const auto x = random_series(16, rng);
        const auto got = dwt_level1(wrap_series(x), filters);
        const auto [a, d] = analysis_oracle(x, filters.lowpass, filters.highpass);
        for (std::size_t t = 0; t < 8; ++t) {
            CHECK(std::fabs(got.trend.at3(0, 0, t) - a[t]) < 1e-12);
            CHECK(std::fabs(got.seasonal.at3(0, 0, t) - d[t]) < 1e-12);
        }
    }
}

TEST_CASE("dwt rejects odd windows with advice") {
    try {
        dwt_level1(wrap_series({1, 2, 3}), WaveletFilterPair::haar());
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("pad or trim") != std::string::npos);
    }
}

TEST_CASE("idwt round-trips random signals") {
    Rng rng(5);
    const auto filters = WaveletFilterPair::haar();
    for (int trial = 0; trial < 100; ++trial) {
        const auto x = random_series(300, rng);
        const auto d = dwt_level1(wrap_series(x), filters);
        const Tensor rec = idwt_level1(d, filters);
        double err = 0.0;
        for (std::size_t t = 0; t < 300; ++t) err = std::max(err, std::fabs(rec[t] - x[t]));
        REQUIRE(err < 1e-10);
    }
}

TEST_CASE("idwt of constant components and of zeros") {
    const double c = -1.75;
    DecomposedSeries d;
    d.original_length = 4;
    d.trend = wrap_series({c * std::sqrt(2.0), c * std::sqrt(2.0)});
    d.seasonal = wrap_series({0.0, 0.0});
    const Tensor rec = idwt_level1(d, WaveletFilterPair::haar());
    for (std::size_t t = 0; t < 4; ++t) CHECK(rec[t] == doctest::Approx(c).epsilon(1e-12));

    d.trend = wrap_series({0.0, 0.0});
    const Tensor zero = idwt_level1(d, WaveletFilterPair::haar());
    for (std::size_t t = 0; t < 4; ++t) CHECK(zero[t] == 0.0);

    DecomposedSeries bad;
    bad.trend = wrap_series({1.0, 2.0});
    bad.seasonal = wrap_series({1.0});
    CHECK_THROWS_AS(idwt_level1(bad, WaveletFilterPair::haar()), DimensionError);
}

TEST_CASE("perfect reconstruction and haar energy over a length sweep") {
    Rng rng(21);
    for (const auto& filters : {WaveletFilterPair::haar(), WaveletFilterPair::daubechies2()}) {
        for (std::size_t len : {2ul, 4ul, 6ul, 16ul, 64ul, 100ul, 256ul, 512ul}) {
            for (int trial = 0; trial < 8; ++trial) {
                const auto x = random_series(len, rng);
                const auto d = dwt_level1(wrap_series(x), filters);
                const Tensor rec = idwt_level1(d, filters);
                double err = 0.0;
                for (std::size_t t = 0; t < len; ++t)
                    err = std::max(err, std::fabs(rec[t] - x[t]));
                REQUIRE(err < 1e-10);
            }
        }
    }
    // orthonormal haar conserves energy across the split
    for (std::size_t len : {8ul, 64ul, 300ul}) {
        const auto x = random_series(len, rng);
        const auto d = dwt_level1(wrap_series(x), WaveletFilterPair::haar());
        double ex = 0.0;
        for (double v : x) ex += v * v;
        REQUIRE(std::fabs(ex - d.trend.squared_norm() - d.seasonal.squared_norm()) < 1e-9);
    }
}

TEST_CASE("synthesis matrices agree with idwt") {
    Rng rng(33);
    for (const auto& filters : {WaveletFilterPair::haar(), WaveletFilterPair::daubechies2()}) {
        const std::size_t half = 10;
        auto [uh, ug] = synthesis_matrices(filters, half);
        std::vector<double> a = random_series(half, rng), d = random_series(half, rng);
        const auto direct = idwt_series(a, d, filters);
        Tensor arow({1, half}), drow({1, half});
        for (std::size_t i = 0; i < half; ++i) {
            arow[i] = a[i];
            drow[i] = d[i];
        }
        Tensor viaA = matmul(arow, uh), viaD = matmul(drow, ug);
        for (std::size_t t = 0; t < 2 * half; ++t)
            CHECK(std::fabs(viaA[t] + viaD[t] - direct[t]) < 1e-12);
    }
}

TEST_CASE("dft of constants and single tones") {
    const std::size_t l = 12;
    std::vector<double> constant(l, 3.0);
    const auto sc = dft(wrap_series(constant));
    CHECK(std::abs(sc.amplitudes[0] - std::complex<double>(3.0 * l, 0.0)) < 1e-9);
    for (std::size_t k = 1; k < l; ++k) CHECK(std::abs(sc.amplitudes[k]) < 1e-9);

    std::vector<double> tone(l);
    for (std::size_t n = 0; n < l; ++n) tone[n] = std::cos(2.0 * M_PI * double(n) / double(l));
    const auto st = dft(wrap_series(tone));
    for (std::size_t k = 0; k < l; ++k) {
        const double amp = std::abs(st.amplitudes[k]);
        if (k == 1 || k == l - 1)
            CHECK(amp == doctest::Approx(l / 2.0).epsilon(1e-9));
        else
            CHECK(amp < 1e-9);
    }
}

TEST_CASE("dft matches the direct oracle and is linear") {
    Rng rng(14);
    const auto x = random_series(64, rng);
    const auto got = dft(wrap_series(x));
    const auto want = dft_oracle(x);
    for (std::size_t k = 0; k < 64; ++k) CHECK(std::abs(got.amplitudes[k] - want[k]) < 1e-9);

    const auto y = random_series(64, rng);
    std::vector<double> sum(64);
    for (std::size_t i = 0; i < 64; ++i) sum[i] = x[i] + y[i];
    const auto sx = dft(wrap_series(x)), sy = dft(wrap_series(y)), ss = dft(wrap_series(sum));
    for (std::size_t k = 0; k < 64; ++k)
        CHECK(std::abs(ss.amplitudes[k] - sx.amplitudes[k] - sy.amplitudes[k]) < 1e-9);
}

TEST_CASE("dft conjugate symmetry and parseval") {
    Rng rng(8);
    const std::size_t l = 50;
    const auto x = random_series(l, rng);
    const auto s = dft(wrap_series(x));
    for (std::size_t k = 1; k < l; ++k)
        CHECK(std::abs(s.amplitudes[k] - std::conj(s.amplitudes[l - k])) < 1e-10);

    double ex = 0.0, ef = 0.0;
    for (double v : x) ex += v * v;
    for (std::size_t k = 0; k < l; ++k) ef += std::norm(s.amplitudes[k]);
    CHECK(std::fabs(ex - ef / double(l)) < 1e-9);
}

TEST_CASE("idft round-trip, dc-only, zero spectrum") {
    Rng rng(77);
    const auto x = random_series(150, rng);
    const auto rt = idft(dft(wrap_series(x)));
    double err = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) err = std::max(err, std::fabs(rt.values[t] - x[t]));
    CHECK(err < 1e-9);
    CHECK(rt.max_imag_residue < 1e-9);

    const std::size_t l = 9;
    ComplexSpectrum dc;
    dc.source_length = l;
    dc.amplitudes = ComplexTensor({1, 1, l});
    dc.amplitudes[0] = {double(l), 0.0};
    const auto ones = idft(dc);
    for (std::size_t t = 0; t < l; ++t) CHECK(ones.values[t] == doctest::Approx(1.0).epsilon(1e-12));

    ComplexSpectrum zero;
    zero.source_length = l;
    zero.amplitudes = ComplexTensor({1, 1, l});
    const auto zr = idft(zero);
    for (std::size_t t = 0; t < l; ++t) CHECK(zr.values[t] == 0.0);
}

TEST_CASE("spectrum report format and contents") {
    std::ostringstream out;
    spectrum_report({2.0, 2.0, 2.0, 2.0}, out);
    std::istringstream in(out.str());
    std::string header;
    std::getline(in, header);
    CHECK(header == "freq_index,amplitude");
    for (int k = 0; k < 4; ++k) {
        std::string row;
        REQUIRE(std::getline(in, row));
        const auto comma = row.find(',');
        CHECK(row.substr(0, comma) == std::to_string(k));
        const double amp = std::stod(row.substr(comma + 1));
        if (k == 0)
            CHECK(amp == doctest::Approx(8.0).epsilon(1e-12));
        else
            CHECK(amp < 1e-9);  // only the DC row is nonzero
    }

    // pure tone k=3 dominates row 3
    const std::size_t l = 32;
    std::vector<double> tone(l);
    for (std::size_t n = 0; n < l; ++n) tone[n] = std::sin(2.0 * M_PI * 3.0 * double(n) / double(l));
    const auto bins = dft_series(tone);
    std::size_t best = 0;
    for (std::size_t k = 1; k <= l / 2; ++k)
        if (std::abs(bins[k]) > std::abs(bins[best])) best = k;
    CHECK(best == 3);
}

TEST_CASE("spectrum of a sum equals the sum of spectra") {
    const std::size_t l = 64;
    std::vector<double> normal(l), spike(l, 0.0);
    for (std::size_t n = 0; n < l; ++n)
        normal[n] = std::sin(2.0 * M_PI * 2.0 * double(n) / double(l));
    spike[17] = 4.0;
    std::vector<double> mixed(l);
    for (std::size_t n = 0; n < l; ++n) mixed[n] = normal[n] + spike[n];
    const auto bn = dft_series(normal), bs = dft_series(spike), bm = dft_series(mixed);
    for (std::size_t k = 0; k < l; ++k) CHECK(std::abs(bm[k] - bn[k] - bs[k]) < 1e-9);
}

TEST_CASE("clean periodic signal concentrates energy; a spike does not") {
    const std::size_t l = 128;
    std::vector<double> clean(l), residual(l, 0.0);
    for (std::size_t n = 0; n < l; ++n) {
        clean[n] = std::sin(2.0 * M_PI * 4.0 * double(n) / double(l)) +
                   0.4 * std::cos(2.0 * M_PI * 9.0 * double(n) / double(l));
    }
    residual[40] = 1.0;  // the injected point anomaly alone

    auto top3_fraction = [](const std::vector<double>& x) {
        const auto bins = dft_series(x);
        std::vector<double> energy(bins.size());
        double total = 0.0;
        for (std::size_t k = 0; k < bins.size(); ++k) {
            energy[k] = std::norm(bins[k]);
            total += energy[k];
        }
        std::sort(energy.rbegin(), energy.rend());
        return (energy[0] + energy[1] + energy[2]) / total;
    };

    CHECK(top3_fraction(clean) > top3_fraction(residual));
}
