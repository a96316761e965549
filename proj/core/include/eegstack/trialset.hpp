#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace eegstack {

struct Position {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Position&) const = default;
};

// Half-open sample range [start, end).
struct Interval {
  std::string name;
  std::uint32_t start = 0;
  std::uint32_t end = 0;
  std::uint32_t length() const { return end - start; }
  bool operator==(const Interval&) const = default;
};

// Segmented multi-channel EEG. Samples are stored trial-major, then
// channel-major: data[(t * n_channels + c) * n_samples + s], in microvolts.
struct TrialSet {
  std::string subject_id;
  double sample_rate = 0.0;
  std::vector<std::string> class_names;
  std::vector<std::string> channel_names;
  std::optional<std::vector<Position>> channel_positions;
  std::vector<Interval> intervals;
  std::size_t n_trials = 0;
  std::size_t n_samples = 0;
  std::vector<int> labels;
  std::vector<float> data;

  std::size_t n_channels() const { return channel_names.size(); }
  std::size_t n_classes() const { return class_names.size(); }

  std::span<const float> signal(std::size_t trial, std::size_t channel) const {
    return {data.data() + (trial * n_channels() + channel) * n_samples, n_samples};
  }
  std::span<float> signal(std::size_t trial, std::size_t channel) {
    return {data.data() + (trial * n_channels() + channel) * n_samples, n_samples};
  }

  const Interval* find_interval(std::string_view name) const;

  // Throws DataError on any violated invariant: inconsistent dimensions,
  // non-finite samples, labels outside [0, C), intervals outside
  // [0, n_samples], non-positive rate, positions outside the unit disc.
  void validate() const;

  bool operator==(const TrialSet&) const = default;
};

// EIT1 container. Layout (little-endian): "EIT1", version u32, n_trials u32,
// n_ch u32, n_samples u32, C u32, sample_rate f64, subject id, C class names,
// n_ch channel names (all u32-length-prefixed UTF-8), positions flag u8
// [+ n_ch x (x f64, y f64)], interval count u32 + (name, start u32, end u32)*,
// labels u16 x n_trials, data f32 x n_trials*n_ch*n_samples.
inline constexpr std::uint32_t kTrialSetVersion = 1;

std::vector<std::uint8_t> encode_trialset(const TrialSet& ts);
TrialSet decode_trialset(std::span<const std::uint8_t> bytes, const std::string& what = "EIT1");

TrialSet load_trialset(const std::filesystem::path& path);
void save_trialset(const TrialSet& ts, const std::filesystem::path& path);

// Copies the named interval out of every trial; interval markers are rebased
// to the new origin and clamped to the new length.
TrialSet slice_interval(const TrialSet& ts, std::string_view interval_name);

// --- synthetic ground truth ------------------------------------------------

struct SyntheticConfig {
  std::string subject_id = "synthetic";
  std::size_t n_trials = 160;
  std::size_t n_channels = 16;
  std::size_t n_samples = 640;
  double sample_rate = 256.0;
  std::vector<double> class_freqs = {8.0, 12.0, 20.0, 30.0};
  // Channels carrying each class's signature; empty selects channels
  // {2c, 2c+1} for class c (wrapping modulo n_channels).
  std::vector<std::vector<int>> class_channels;
  double signature_amplitude = 1.0;
  double noise_level = 1.0;  // std of the 1/f background
  double artifact_prob = 0.0;
  double artifact_amplitude = 10.0;
};

struct TrialSignature {
  double frequency = 0.0;
  double amplitude = 0.0;
  std::vector<int> channels;
};

struct GroundTruth {
  std::vector<TrialSignature> signatures;   // per trial
  std::vector<std::uint8_t> artifact_flags;  // [n_trials x n_ch]
  std::uint64_t seed = 0;

  bool flagged(std::size_t trial, std::size_t channel, std::size_t n_channels) const {
    return artifact_flags[trial * n_channels + channel] != 0;
  }
};

struct SyntheticData {
  TrialSet trials;
  GroundTruth truth;
};

// Each trial: 1/f background + the class sinusoid (phase 0 at the action
// onset) on the class's channels during the action interval. Flagged
// (trial, channel) pairs additionally get a sub-0.5 Hz sinusoidal drift.
// Labels are balanced and shuffled. Traces longer than 4.5 s carry the
// concentration/cue/action/relax layout; shorter ones are a single action
// interval.
SyntheticData generate_synthetic(const SyntheticConfig& config, std::uint64_t seed);

// Writes "trial,channel,flag" rows for every pair, plus signature columns.
void save_ground_truth_csv(const GroundTruth& truth, std::size_t n_channels, const std::filesystem::path& path);

}  // namespace eegstack
