#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "eegstack/trialset.hpp"

namespace eegstack {

struct ArtifactPolicy {
  double z_thresh = 3.0;
  double drift_factor = 5.0;
  double drift_window_sec = 0.5;
};

enum ArtifactReason : std::uint8_t {
  kReasonNone = 0,
  kReasonMean = 1,
  kReasonStd = 2,
  kReasonDrift = 4,
};

struct ArtifactMask {
  std::size_t n_trials = 0;
  std::size_t n_channels = 0;
  ArtifactPolicy policy;
  // All arrays are [n_trials x n_channels]; reasons holds ArtifactReason bits.
  std::vector<std::uint8_t> reasons;
  std::vector<double> z_mean;
  std::vector<double> z_std;
  std::vector<double> drift;
  std::vector<double> drift_limit;  // per channel

  bool flagged(std::size_t t, std::size_t c) const { return reasons[t * n_channels + c] != kReasonNone; }
  std::size_t count() const;
  static ArtifactMask empty(std::size_t n_trials, std::size_t n_channels);
};

// Robust per-channel screening. For each channel the per-trial mean and std are
// turned into median/MAD z-scores across trials (MAD * 1.4826, floored at
// 1e-12); drift is the peak-to-peak of a moving average over
// drift_window_sec. A pair is flagged when |z_mean| or |z_std| exceeds
// z_thresh, or drift exceeds drift_factor * the channel's median trial std.
ArtifactMask detect_artifacts(const TrialSet& ts, const ArtifactPolicy& policy = {});

void write_mask_csv(const ArtifactMask& mask, const std::filesystem::path& path);

struct VmdParams {
  int modes = 6;
  double alpha = 2000.0;
  double tau = 0.0;
  double tol = 1e-7;
  int max_iter = 500;
};

struct VmdResult {
  std::vector<std::vector<double>> modes;  // [K][N], ordered by center frequency
  std::vector<double> center_freqs;        // cycles/sample, in [0, 0.5]
  std::vector<double> center_freqs_hz;
  int iterations = 0;
  double final_residual = 0.0;  // last value of the convergence measure
};

// Variational mode decomposition by ADMM over the one-sided spectrum of the
// mirror-extended signal. Mode update:
//   u_k(w) = (f(w) - sum_{i != k} u_i(w) + lambda(w)/2) / (1 + 2 alpha (w - w_k)^2)
// with centre frequencies re-estimated as spectral centroids after each
// update, and lambda advanced by tau * (f - sum_k u_k).
VmdResult vmd(std::span<const double> x, const VmdParams& params = {}, double sample_rate = 1.0);

// Sum of every mode except the lowest-frequency one.
std::vector<double> drop_lowest_mode(std::span<const double> x, const VmdParams& params = {});

// Replaces each flagged signal by its VMD reconstruction without the lowest
// mode; unflagged signals are copied bit-for-bit.
TrialSet remove_artifacts(const TrialSet& ts, const ArtifactMask& mask, const VmdParams& params = {},
                          unsigned threads = 1);

}  // namespace eegstack
