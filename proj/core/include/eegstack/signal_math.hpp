#pragma once

#include <complex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace eegstack {

using Complex = std::complex<double>;

// Exact DFT, X[k] = sum_n x[n] exp(-2 pi i k n / N), for any N >= 1.
// Power-of-two lengths use an iterative radix-2 FFT; other lengths go through
// Bluestein's chirp transform.
std::vector<Complex> dft(std::span<const Complex> x);
// Inverse with the 1/N factor.
std::vector<Complex> idft(std::span<const Complex> x);
std::vector<Complex> dft_real(std::span<const double> x);

enum class Window { rect, hann };

// One-sided spectrum. power is a density (units^2 / Hz): integrating it over a
// band (sum of power * resolution) gives the band's mean-square contribution,
// so a unit-amplitude sinusoid integrates to ~0.5.
struct Spectrum {
  std::vector<double> freqs;
  std::vector<double> power;
  double resolution = 0.0;
};

Spectrum psd(std::span<const double> x, double sample_rate, Window window = Window::hann);

// Sum of power * resolution over bins with lo <= f < hi.
double band_power(const Spectrum& s, double lo, double hi);

enum class Wavelet { haar, db2, db4 };

Wavelet parse_wavelet(std::string_view name);
std::string_view wavelet_name(Wavelet w);
// Orthonormal decomposition low-pass filter.
std::span<const double> wavelet_lowpass(Wavelet w);

// Subbands ordered [detail 1, ..., detail L, approximation L].
struct WaveletDecomposition {
  Wavelet wavelet = Wavelet::db4;
  int levels = 0;
  std::vector<std::vector<double>> subbands;
};

// Mallat cascade with periodization. The transform is orthogonal, so
// coefficient count equals input length and energy is conserved; this needs
// the length to be a multiple of 2^levels.
WaveletDecomposition dwt(std::span<const double> x, Wavelet wavelet, int levels);
std::vector<double> idwt(const WaveletDecomposition& d);

// |analytic signal| built by one-siding the spectrum.
std::vector<double> hilbert_envelope(std::span<const double> x);

std::size_t next_pow2(std::size_t n);

}  // namespace eegstack
