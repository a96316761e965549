#include "eegstack/signal_math.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "eegstack/common.hpp"

namespace eegstack {
namespace {

constexpr double kPi = std::numbers::pi;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Forward twiddles e^{-2 pi i k / n} for k < n/2, evaluated directly per index
// (no recurrence) so round-off stays at machine precision. Cached per thread
// for the last length used, which covers the repeated same-length calls of
// PSD, VMD and the feature extractors.
const std::vector<Complex>& twiddles(std::size_t n) {
  thread_local std::size_t cached_n = 0;
  thread_local std::vector<Complex> tw;
  if (cached_n != n) {
    tw.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double ang = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
      tw[k] = {std::cos(ang), std::sin(ang)};
    }
    cached_n = n;
  }
  return tw;
}

// In-place iterative radix-2 FFT; inverse=true flips the exponent sign and
// omits the 1/N factor.
void fft_pow2(std::vector<Complex>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const auto& tw = twiddles(n);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2, stride = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex w = inverse ? std::conj(tw[k * stride]) : tw[k * stride];
        const Complex u = a[i + k];
        const Complex v = a[i + k + half] * w;
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

// Chirp and transformed convolution kernel for one length, cached per thread
// like the twiddles.
struct BluesteinPlan {
  std::size_t n = 0, m = 0;
  std::vector<Complex> chirp, kernel;
};

const BluesteinPlan& bluestein_plan(std::size_t n) {
  thread_local BluesteinPlan plan;
  if (plan.n == n) return plan;
  plan.n = n;
  plan.m = next_pow2(2 * n - 1);
  plan.chirp.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle small and exact.
    const auto k2 = static_cast<std::size_t>((static_cast<unsigned __int128>(k) * k) % (2 * n));
    const double ang = -kPi * static_cast<double>(k2) / static_cast<double>(n);
    plan.chirp[k] = {std::cos(ang), std::sin(ang)};
  }
  plan.kernel.assign(plan.m, Complex{});
  plan.kernel[0] = std::conj(plan.chirp[0]);
  for (std::size_t k = 1; k < n; ++k) plan.kernel[k] = plan.kernel[plan.m - k] = std::conj(plan.chirp[k]);
  fft_pow2(plan.kernel, false);
  return plan;
}

std::vector<Complex> bluestein(std::span<const Complex> x) {
  const std::size_t n = x.size();
  const auto& plan = bluestein_plan(n);
  const std::size_t m = plan.m;
  std::vector<Complex> a(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * plan.chirp[k];
  fft_pow2(a, false);
  for (std::size_t i = 0; i < m; ++i) a[i] *= plan.kernel[i];
  fft_pow2(a, true);
  std::vector<Complex> out(n);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * inv_m * plan.chirp[k];
  return out;
}

constexpr std::array<double, 2> kHaar = {0.70710678118654752440, 0.70710678118654752440};
constexpr std::array<double, 4> kDb2 = {0.48296291314469025, 0.836516303737469, 0.22414386804185735,
                                        -0.12940952255092145};
constexpr std::array<double, 8> kDb4 = {0.23037781330885523,  0.7148465705525415,   0.6308807679295904,
                                        -0.02798376941698385, -0.18703481171888114, 0.030841381835986965,
                                        0.032883011666982945, -0.010597401784997278};

}  // namespace

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<Complex> dft(std::span<const Complex> x) {
  if (x.empty()) throw std::invalid_argument("dft: empty input");
  if (is_pow2(x.size())) {
    std::vector<Complex> a(x.begin(), x.end());
    fft_pow2(a, false);
    return a;
  }
  return bluestein(x);
}

std::vector<Complex> idft(std::span<const Complex> x) {
  std::vector<Complex> c(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) c[i] = std::conj(x[i]);
  auto y = dft(c);
  const double inv_n = 1.0 / static_cast<double>(x.size());
  for (auto& v : y) v = std::conj(v) * inv_n;
  return y;
}

std::vector<Complex> dft_real(std::span<const double> x) {
  std::vector<Complex> c(x.begin(), x.end());
  return dft(c);
}

Spectrum psd(std::span<const double> x, double sample_rate, Window window) {
  const std::size_t n = x.size();
  if (n < 8) throw std::invalid_argument("psd: need at least 8 samples");
  if (!(sample_rate > 0.0)) throw std::invalid_argument("psd: sample rate must be positive");

  std::vector<double> w(n, 1.0);
  if (window == Window::hann) {
    for (std::size_t i = 0; i < n; ++i)
      w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
  }
  double w2 = 0.0;
  std::vector<Complex> buf(n);
  for (std::size_t i = 0; i < n; ++i) {
    buf[i] = x[i] * w[i];
    w2 += w[i] * w[i];
  }
  const auto spec = dft(buf);

  const std::size_t n_bins = n / 2 + 1;
  Spectrum s;
  s.resolution = sample_rate / static_cast<double>(n);
  s.freqs.resize(n_bins);
  s.power.resize(n_bins);
  const double scale = 1.0 / (sample_rate * w2);
  for (std::size_t k = 0; k < n_bins; ++k) {
    s.freqs[k] = static_cast<double>(k) * s.resolution;
    const bool unpaired = k == 0 || (n % 2 == 0 && k == n / 2);
    s.power[k] = std::norm(spec[k]) * scale * (unpaired ? 1.0 : 2.0);
  }
  return s;
}

double band_power(const Spectrum& s, double lo, double hi) {
  double acc = 0.0;
  for (std::size_t k = 0; k < s.freqs.size(); ++k)
    if (s.freqs[k] >= lo && s.freqs[k] < hi) acc += s.power[k];
  return acc * s.resolution;
}

Wavelet parse_wavelet(std::string_view name) {
  if (name == "haar") return Wavelet::haar;
  if (name == "db2") return Wavelet::db2;
  if (name == "db4") return Wavelet::db4;
  throw std::invalid_argument("unknown wavelet '" + std::string(name) + "' (expected haar, db2, db4)");
}

std::string_view wavelet_name(Wavelet w) {
  switch (w) {
    case Wavelet::haar: return "haar";
    case Wavelet::db2: return "db2";
    case Wavelet::db4: return "db4";
  }
  return "?";
}

std::span<const double> wavelet_lowpass(Wavelet w) {
  switch (w) {
    case Wavelet::haar: return kHaar;
    case Wavelet::db2: return kDb2;
    case Wavelet::db4: return kDb4;
  }
  throw std::invalid_argument("wavelet_lowpass: bad wavelet");
}

WaveletDecomposition dwt(std::span<const double> x, Wavelet wavelet, int levels) {
  if (levels < 1) throw std::invalid_argument("dwt: levels must be >= 1");
  const std::size_t block = std::size_t{1} << levels;
  if (x.size() < block)
    throw std::invalid_argument("dwt: " + std::to_string(x.size()) + " samples too few for " +
                                std::to_string(levels) + " levels");
  if (x.size() % block != 0)
    throw std::invalid_argument("dwt: length " + std::to_string(x.size()) + " is not a multiple of 2^" +
                                std::to_string(levels) + " (periodization needs even lengths at every level)");

  const auto h = wavelet_lowpass(wavelet);
  const std::size_t taps = h.size();
  std::vector<double> g(taps);
  for (std::size_t i = 0; i < taps; ++i) g[i] = ((i % 2) ? -1.0 : 1.0) * h[taps - 1 - i];

  WaveletDecomposition out;
  out.wavelet = wavelet;
  out.levels = levels;
  std::vector<double> approx(x.begin(), x.end());
  for (int level = 0; level < levels; ++level) {
    const std::size_t n = approx.size();
    const std::size_t half = n / 2;
    std::vector<double> a(half, 0.0), d(half, 0.0);
    for (std::size_t k = 0; k < half; ++k) {
      double sa = 0.0, sd = 0.0;
      for (std::size_t i = 0; i < taps; ++i) {
        const double v = approx[(2 * k + i) % n];
        sa += h[i] * v;
        sd += g[i] * v;
      }
      a[k] = sa;
      d[k] = sd;
    }
    out.subbands.push_back(std::move(d));
    approx = std::move(a);
  }
  out.subbands.push_back(std::move(approx));
  return out;
}

std::vector<double> idwt(const WaveletDecomposition& dec) {
  if (dec.levels < 1 || dec.subbands.size() != static_cast<std::size_t>(dec.levels) + 1)
    throw std::invalid_argument("idwt: malformed decomposition");
  const auto h = wavelet_lowpass(dec.wavelet);
  const std::size_t taps = h.size();
  std::vector<double> g(taps);
  for (std::size_t i = 0; i < taps; ++i) g[i] = ((i % 2) ? -1.0 : 1.0) * h[taps - 1 - i];

  std::vector<double> approx = dec.subbands.back();
  for (int level = dec.levels - 1; level >= 0; --level) {
    const auto& d = dec.subbands[static_cast<std::size_t>(level)];
    if (d.size() != approx.size()) throw std::invalid_argument("idwt: subband size mismatch");
    const std::size_t half = approx.size();
    const std::size_t n = 2 * half;
    std::vector<double> x(n, 0.0);
    for (std::size_t k = 0; k < half; ++k)
      for (std::size_t i = 0; i < taps; ++i) x[(2 * k + i) % n] += h[i] * approx[k] + g[i] * d[k];
    approx = std::move(x);
  }
  return approx;
}

std::vector<double> hilbert_envelope(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 8) throw std::invalid_argument("hilbert_envelope: need at least 8 samples");
  auto spec = dft_real(x);
  const std::size_t pos_end = (n % 2 == 0) ? n / 2 : (n + 1) / 2;  // exclusive
  for (std::size_t k = 1; k < pos_end; ++k) spec[k] *= 2.0;
  for (std::size_t k = (n % 2 == 0) ? n / 2 + 1 : pos_end; k < n; ++k) spec[k] = 0.0;
  const auto analytic = idft(spec);
  std::vector<double> env(n);
  for (std::size_t i = 0; i < n; ++i) env[i] = std::abs(analytic[i]);
  return env;
}

}  // namespace eegstack
