#include "eegstack/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "eegstack/common.hpp"
#include "eegstack/signal_math.hpp"

namespace eegstack {
namespace {

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  const double hi = *mid;
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

// Robust z-scores: (v - median) / max(1.4826 * MAD, 1e-12).
std::vector<double> robust_z(const std::vector<double>& v) {
  const double med = median_of(v);
  std::vector<double> dev(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) dev[i] = std::abs(v[i] - med);
  const double scale = std::max(1.4826 * median_of(dev), 1e-12);
  std::vector<double> z(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) z[i] = (v[i] - med) / scale;
  return z;
}

}  // namespace

std::size_t ArtifactMask::count() const {
  return static_cast<std::size_t>(std::count_if(reasons.begin(), reasons.end(), [](auto r) { return r != 0; }));
}

ArtifactMask ArtifactMask::empty(std::size_t n_trials, std::size_t n_channels) {
  ArtifactMask m;
  m.n_trials = n_trials;
  m.n_channels = n_channels;
  const std::size_t n = n_trials * n_channels;
  m.reasons.assign(n, kReasonNone);
  m.z_mean.assign(n, 0.0);
  m.z_std.assign(n, 0.0);
  m.drift.assign(n, 0.0);
  m.drift_limit.assign(n_channels, 0.0);
  return m;
}

ArtifactMask detect_artifacts(const TrialSet& ts, const ArtifactPolicy& policy) {
  if (ts.n_trials < 8) throw DataError("detect_artifacts: need at least 8 trials, got " + std::to_string(ts.n_trials));
  if (ts.n_samples < 2) throw DataError("detect_artifacts: need at least 2 samples per trial");
  const std::size_t n_tr = ts.n_trials;
  const std::size_t n_ch = ts.n_channels();
  const std::size_t n = ts.n_samples;
  const std::size_t window =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(policy.drift_window_sec * ts.sample_rate)), 1, n);

  ArtifactMask mask = ArtifactMask::empty(n_tr, n_ch);
  mask.policy = policy;
  std::vector<double> means(n_tr), stds(n_tr), drifts(n_tr);
  for (std::size_t c = 0; c < n_ch; ++c) {
    for (std::size_t t = 0; t < n_tr; ++t) {
      const auto x = ts.signal(t, c);
      double sum = 0.0;
      for (float v : x) sum += v;
      const double mean = sum / static_cast<double>(n);
      double ss = 0.0;
      for (float v : x) ss += (v - mean) * (v - mean);
      means[t] = mean;
      stds[t] = std::sqrt(ss / static_cast<double>(n));

      // Running mean over `window` samples ('valid' positions only).
      double acc = 0.0;
      for (std::size_t s = 0; s < window; ++s) acc += x[s];
      double lo = acc, hi = acc;
      for (std::size_t s = window; s < n; ++s) {
        acc += x[s] - x[s - window];
        lo = std::min(lo, acc);
        hi = std::max(hi, acc);
      }
      drifts[t] = (hi - lo) / static_cast<double>(window);
    }
    const auto zm = robust_z(means);
    const auto zs = robust_z(stds);
    const double limit = policy.drift_factor * median_of(stds);
    mask.drift_limit[c] = limit;
    for (std::size_t t = 0; t < n_tr; ++t) {
      const std::size_t i = t * n_ch + c;
      mask.z_mean[i] = zm[t];
      mask.z_std[i] = zs[t];
      mask.drift[i] = drifts[t];
      std::uint8_t r = kReasonNone;
      if (std::abs(zm[t]) > policy.z_thresh) r |= kReasonMean;
      if (std::abs(zs[t]) > policy.z_thresh) r |= kReasonStd;
      if (drifts[t] > limit) r |= kReasonDrift;
      mask.reasons[i] = r;
    }
  }
  return mask;
}

void write_mask_csv(const ArtifactMask& mask, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "trial,channel,reason,z_mean,z_std,drift,drift_limit\n";
  out.precision(10);
  for (std::size_t t = 0; t < mask.n_trials; ++t)
    for (std::size_t c = 0; c < mask.n_channels; ++c) {
      const std::size_t i = t * mask.n_channels + c;
      const auto r = mask.reasons[i];
      if (r == kReasonNone) continue;
      std::string reason;
      auto add = [&](const char* s) { reason += reason.empty() ? s : std::string("|") + s; };
      if (r & kReasonMean) add("mean");
      if (r & kReasonStd) add("std");
      if (r & kReasonDrift) add("drift");
      out << t << ',' << c << ',' << reason << ',' << mask.z_mean[i] << ',' << mask.z_std[i] << ',' << mask.drift[i]
          << ',' << mask.drift_limit[c] << '\n';
    }
}

VmdResult vmd(std::span<const double> x, const VmdParams& p, double sample_rate) {
  const std::size_t n = x.size();
  if (n < 16) throw std::invalid_argument("vmd: need at least 16 samples");
  if (p.modes < 1) throw std::invalid_argument("vmd: K must be >= 1");
  if (static_cast<std::size_t>(p.modes) > n / 4) throw std::invalid_argument("vmd: K exceeds N/4");
  if (p.max_iter < 1) throw std::invalid_argument("vmd: max_iter must be >= 1");
  for (double v : x)
    if (!std::isfinite(v)) throw NumericalError("vmd: non-finite input sample");

  // Mirror extension: [reversed first half | x | reversed second half].
  const std::size_t front = n / 2;
  const std::size_t len = 2 * n;
  std::vector<Complex> ext(len);
  for (std::size_t i = 0; i < front; ++i) ext[i] = x[front - 1 - i];
  for (std::size_t i = 0; i < n; ++i) ext[front + i] = x[i];
  for (std::size_t i = 0; i < n - front; ++i) ext[front + n + i] = x[n - 1 - i];

  const auto spectrum = dft(ext);
  const std::size_t bins = len / 2 + 1;  // one-sided: frequencies j / len, j = 0 .. len/2
  std::vector<Complex> f(spectrum.begin(), spectrum.begin() + static_cast<std::ptrdiff_t>(bins));
  std::vector<double> freq(bins);
  for (std::size_t j = 0; j < bins; ++j) freq[j] = static_cast<double>(j) / static_cast<double>(len);

  const auto K = static_cast<std::size_t>(p.modes);
  double f_energy = 0.0;
  for (const auto& v : f) f_energy += std::norm(v);
  const double eps = 1e-12 * f_energy + std::numeric_limits<double>::min();

  std::vector<std::vector<Complex>> u(K, std::vector<Complex>(bins));
  std::vector<Complex> u_sum(bins), lambda(bins);
  std::vector<double> omega(K);
  for (std::size_t k = 0; k < K; ++k) omega[k] = 0.5 * static_cast<double>(k) / static_cast<double>(K);

  VmdResult res;
  double diff = std::numeric_limits<double>::infinity();
  int iter = 0;
  while (iter < p.max_iter) {
    ++iter;
    diff = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      auto& uk = u[k];
      double change = 0.0, prev_norm = 0.0, num = 0.0, den = 0.0;
      for (std::size_t j = 0; j < bins; ++j) {
        const Complex old = uk[j];
        const Complex others = u_sum[j] - old;
        const double dw = freq[j] - omega[k];
        const Complex next = (f[j] - others + lambda[j] * 0.5) / (1.0 + 2.0 * p.alpha * dw * dw);
        uk[j] = next;
        u_sum[j] = others + next;
        change += std::norm(next - old);
        prev_norm += std::norm(old);
        const double e = std::norm(next);
        num += freq[j] * e;
        den += e;
      }
      if (den > 0.0) omega[k] = num / den;
      diff += change / (prev_norm + eps);
    }
    if (p.tau != 0.0)
      for (std::size_t j = 0; j < bins; ++j) lambda[j] += p.tau * (f[j] - u_sum[j]);
    if (!std::isfinite(diff)) throw NumericalError("vmd: iteration diverged");
    if (diff < p.tol) break;
  }
  res.iterations = iter;
  res.final_residual = diff;

  std::vector<std::size_t> order(K);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return omega[a] < omega[b]; });

  std::vector<Complex> full(len);
  for (std::size_t k : order) {
    const auto& uk = u[k];
    full[0] = uk[0].real();
    for (std::size_t j = 1; j < bins; ++j) {
      full[j] = uk[j];
      full[len - j] = std::conj(uk[j]);
    }
    full[len / 2] = uk[len / 2].real();
    const auto time = idft(full);
    std::vector<double> mode(n);
    for (std::size_t i = 0; i < n; ++i) {
      mode[i] = time[front + i].real();
      if (!std::isfinite(mode[i])) throw NumericalError("vmd: non-finite mode");
    }
    res.modes.push_back(std::move(mode));
    res.center_freqs.push_back(omega[k]);
    res.center_freqs_hz.push_back(omega[k] * sample_rate);
  }
  return res;
}

std::vector<double> drop_lowest_mode(std::span<const double> x, const VmdParams& params) {
  const auto r = vmd(x, params);
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t k = 1; k < r.modes.size(); ++k)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += r.modes[k][i];
  return out;
}

TrialSet remove_artifacts(const TrialSet& ts, const ArtifactMask& mask, const VmdParams& params, unsigned threads) {
  if (mask.n_trials != ts.n_trials || mask.n_channels != ts.n_channels() ||
      mask.reasons.size() != ts.n_trials * ts.n_channels())
    throw DataError("artifact mask shape does not match trial set");
  TrialSet out = ts;
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t t = 0; t < ts.n_trials; ++t)
    for (std::size_t c = 0; c < ts.n_channels(); ++c)
      if (mask.flagged(t, c)) jobs.emplace_back(t, c);

  parallel_for(jobs.size(), threads, [&](std::size_t j) {
    const auto [t, c] = jobs[j];
    const auto src = ts.signal(t, c);
    std::vector<double> x(src.begin(), src.end());
    std::vector<double> clean;
    const auto context = "trial " + std::to_string(t) + ", channel " + std::to_string(c) + ": ";
    try {
      clean = drop_lowest_mode(x, params);
    } catch (const NumericalError& e) {
      throw NumericalError(context + e.what());
    } catch (const std::invalid_argument& e) {
      throw DataError(context + e.what());
    }
    auto dst = out.signal(t, c);
    for (std::size_t s = 0; s < clean.size(); ++s) dst[s] = static_cast<float>(clean[s]);
  });
  return out;
}

}  // namespace eegstack
