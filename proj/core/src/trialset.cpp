#include "eegstack/trialset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>

#include "eegstack/binary_io.hpp"
#include "eegstack/common.hpp"
#include "eegstack/signal_math.hpp"

namespace eegstack {

const Interval* TrialSet::find_interval(std::string_view name) const {
  for (const auto& iv : intervals)
    if (iv.name == name) return &iv;
  return nullptr;
}

void TrialSet::validate() const {
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) throw DataError("sample rate must be positive and finite");
  if (class_names.empty()) throw DataError("at least one class name required");
  if (labels.size() != n_trials)
    throw DataError("label count " + std::to_string(labels.size()) + " != n_trials " + std::to_string(n_trials));
  const std::size_t expected = n_trials * n_channels() * n_samples;
  if (n_channels() != 0 && n_samples != 0 && expected / n_channels() / n_samples != n_trials)
    throw DataError("dimension product overflow");
  if (data.size() != expected)
    throw DataError("data size " + std::to_string(data.size()) + " != " + std::to_string(expected));
  for (std::size_t t = 0; t < n_trials; ++t)
    if (labels[t] < 0 || static_cast<std::size_t>(labels[t]) >= n_classes())
      throw DataError("label out of range at trial " + std::to_string(t));
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!std::isfinite(data[i])) throw DataError("non-finite sample at flat index " + std::to_string(i));
  for (const auto& iv : intervals)
    if (iv.start > iv.end || iv.end > n_samples) throw DataError("interval '" + iv.name + "' outside [0, n_samples]");
  if (channel_positions) {
    if (channel_positions->size() != n_channels()) throw DataError("position count != channel count");
    for (const auto& p : *channel_positions)
      if (!std::isfinite(p.x) || !std::isfinite(p.y) || std::hypot(p.x, p.y) > 1.0 + 1e-12)
        throw DataError("channel position outside the unit disc");
  }
}

std::vector<std::uint8_t> encode_trialset(const TrialSet& ts) {
  ts.validate();
  auto u32_checked = [](std::size_t v, const char* what) {
    if (v > std::numeric_limits<std::uint32_t>::max()) throw DataError(std::string(what) + " exceeds u32");
    return static_cast<std::uint32_t>(v);
  };
  io::ByteWriter w;
  w.magic("EIT1");
  w.u32(kTrialSetVersion);
  w.u32(u32_checked(ts.n_trials, "n_trials"));
  w.u32(u32_checked(ts.n_channels(), "n_channels"));
  w.u32(u32_checked(ts.n_samples, "n_samples"));
  w.u32(u32_checked(ts.n_classes(), "n_classes"));
  w.f64(ts.sample_rate);
  w.str(ts.subject_id);
  for (const auto& s : ts.class_names) w.str(s);
  for (const auto& s : ts.channel_names) w.str(s);
  w.u8(ts.channel_positions ? 1 : 0);
  if (ts.channel_positions)
    for (const auto& p : *ts.channel_positions) {
      w.f64(p.x);
      w.f64(p.y);
    }
  w.u32(u32_checked(ts.intervals.size(), "interval count"));
  for (const auto& iv : ts.intervals) {
    w.str(iv.name);
    w.u32(iv.start);
    w.u32(iv.end);
  }
  if (ts.n_classes() > 65536) throw DataError("too many classes for u16 labels");
  for (int l : ts.labels) w.u16(static_cast<std::uint16_t>(l));
  for (float v : ts.data) w.f32(v);
  return w.take();
}

TrialSet decode_trialset(std::span<const std::uint8_t> bytes, const std::string& what) {
  io::ByteReader r(bytes, what);
  r.expect_magic("EIT1");
  const auto version = r.u32();
  if (version != kTrialSetVersion) r.fail("unsupported version " + std::to_string(version));
  TrialSet ts;
  ts.n_trials = r.u32();
  const std::size_t n_ch = r.u32();
  ts.n_samples = r.u32();
  const std::size_t n_classes = r.u32();
  ts.sample_rate = r.f64();

  const unsigned __int128 product = static_cast<unsigned __int128>(ts.n_trials) * n_ch * ts.n_samples;
  if (product > std::numeric_limits<std::size_t>::max() / 8) r.fail("dimension product overflow");
  // Every class and channel name costs at least its 4-byte length prefix.
  r.require(4 * (n_classes + n_ch));

  ts.subject_id = r.str();
  ts.class_names.reserve(n_classes);
  for (std::size_t i = 0; i < n_classes; ++i) ts.class_names.push_back(r.str());
  ts.channel_names.reserve(n_ch);
  for (std::size_t i = 0; i < n_ch; ++i) ts.channel_names.push_back(r.str());
  const auto has_pos = r.u8();
  if (has_pos > 1) r.fail("bad position flag");
  if (has_pos) {
    r.require(16 * n_ch);
    std::vector<Position> pos(n_ch);
    for (auto& p : pos) {
      p.x = r.f64();
      p.y = r.f64();
    }
    ts.channel_positions = std::move(pos);
  }
  const std::size_t n_iv = r.u32();
  r.require(12 * n_iv);
  for (std::size_t i = 0; i < n_iv; ++i) {
    Interval iv;
    iv.name = r.str();
    iv.start = r.u32();
    iv.end = r.u32();
    ts.intervals.push_back(std::move(iv));
  }
  const auto n_values = static_cast<std::size_t>(product);
  r.require(2 * ts.n_trials + 4 * n_values);
  ts.labels.resize(ts.n_trials);
  for (std::size_t t = 0; t < ts.n_trials; ++t) {
    const auto l = r.u16();
    if (l >= n_classes) r.fail("label out of range at trial " + std::to_string(t));
    ts.labels[t] = l;
  }
  ts.data.resize(n_values);
  for (std::size_t i = 0; i < n_values; ++i) ts.data[i] = r.f32();
  if (r.remaining() != 0) r.fail("trailing bytes after data block");
  try {
    ts.validate();
  } catch (const DataError& e) {
    r.fail(e.what());
  }
  return ts;
}

TrialSet load_trialset(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return decode_trialset(bytes, path.string());
}

void save_trialset(const TrialSet& ts, const std::filesystem::path& path) {
  const auto bytes = encode_trialset(ts);
  io::write_file(path, bytes);
}

TrialSet slice_interval(const TrialSet& ts, std::string_view interval_name) {
  const Interval* iv = ts.find_interval(interval_name);
  if (!iv) throw DataError("unknown interval '" + std::string(interval_name) + "'");
  const std::uint32_t start = iv->start;
  const std::uint32_t len = iv->length();

  TrialSet out;
  out.subject_id = ts.subject_id;
  out.sample_rate = ts.sample_rate;
  out.class_names = ts.class_names;
  out.channel_names = ts.channel_names;
  out.channel_positions = ts.channel_positions;
  out.n_trials = ts.n_trials;
  out.n_samples = len;
  out.labels = ts.labels;
  for (const auto& other : ts.intervals) {
    auto rebase = [&](std::uint32_t v) {
      const std::int64_t r = static_cast<std::int64_t>(v) - start;
      return static_cast<std::uint32_t>(std::clamp<std::int64_t>(r, 0, len));
    };
    out.intervals.push_back({other.name, rebase(other.start), rebase(other.end)});
  }
  out.data.resize(out.n_trials * out.n_channels() * len);
  for (std::size_t t = 0; t < ts.n_trials; ++t)
    for (std::size_t c = 0; c < ts.n_channels(); ++c) {
      const auto src = ts.signal(t, c).subspan(start, len);
      std::copy(src.begin(), src.end(), out.signal(t, c).begin());
    }
  return out;
}

// --- synthetic generator ----------------------------------------------------

namespace {

// Sunflower layout: deterministic, roughly uniform cover of the disc.
std::vector<Position> sunflower_positions(std::size_t n) {
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::vector<Position> pos(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = 0.9 * std::sqrt((static_cast<double>(i) + 0.5) / static_cast<double>(n));
    const double th = golden * static_cast<double>(i);
    pos[i] = {r * std::cos(th), r * std::sin(th)};
  }
  return pos;
}

// 1/f-power background: white Gaussian shaped by 1/sqrt(f) in the frequency
// domain over a 2x-or-longer power-of-two buffer, then cropped so trial means
// are not pinned to zero.
class PinkNoise {
 public:
  explicit PinkNoise(std::size_t n) : n_(n), m_(next_pow2(2 * n)), gain_(m_, 0.0) {
    double sum_sq = 0.0;
    for (std::size_t k = 1; k < m_; ++k) {
      const double f = static_cast<double>(std::min(k, m_ - k));
      gain_[k] = 1.0 / std::sqrt(f);
      sum_sq += gain_[k] * gain_[k];
    }
    unit_std_ = std::sqrt(sum_sq / static_cast<double>(m_));
  }

  void fill(Rng& rng, double level, std::span<double> out) const {
    std::vector<Complex> buf(m_);
    for (auto& v : buf) v = rng.normal();
    auto spec = dft(buf);
    for (std::size_t k = 0; k < m_; ++k) spec[k] *= gain_[k];
    const auto y = idft(spec);
    const double scale = level / unit_std_;
    for (std::size_t i = 0; i < n_; ++i) out[i] = y[i].real() * scale;
  }

 private:
  std::size_t n_, m_;
  std::vector<double> gain_;
  double unit_std_ = 1.0;
};

}  // namespace

SyntheticData generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed) {
  const std::size_t C = cfg.class_freqs.size();
  if (C < 2) throw DataError("generator needs at least two classes");
  if (cfg.n_channels == 0 || cfg.n_samples < 16) throw DataError("generator needs channels and >= 16 samples");
  if (cfg.n_trials % C != 0) throw DataError("n_trials must be a multiple of the class count for balance");
  if (!(cfg.sample_rate > 0.0)) throw DataError("sample rate must be positive");
  const double nyquist = cfg.sample_rate / 2.0;
  std::set<double> distinct;
  for (double f : cfg.class_freqs) {
    if (!(f > 0.0) || f >= nyquist) throw DataError("class frequency " + std::to_string(f) + " Hz outside (0, Nyquist)");
    if (!distinct.insert(f).second) throw DataError("class frequencies must be distinct");
  }
  if (cfg.noise_level < 0.0 || cfg.artifact_prob < 0.0 || cfg.artifact_prob > 1.0)
    throw DataError("noise level must be >= 0 and artifact probability in [0, 1]");

  std::vector<std::vector<int>> class_channels = cfg.class_channels;
  if (class_channels.empty()) {
    for (std::size_t c = 0; c < C; ++c)
      class_channels.push_back({static_cast<int>((2 * c) % cfg.n_channels), static_cast<int>((2 * c + 1) % cfg.n_channels)});
  }
  if (class_channels.size() != C) throw DataError("class_channels must list one channel set per class");
  for (const auto& set : class_channels)
    for (int ch : set)
      if (ch < 0 || static_cast<std::size_t>(ch) >= cfg.n_channels) throw DataError("signature channel out of range");

  SyntheticData out;
  TrialSet& ts = out.trials;
  ts.subject_id = cfg.subject_id;
  ts.sample_rate = cfg.sample_rate;
  for (std::size_t c = 0; c < C; ++c) ts.class_names.push_back("class" + std::to_string(c));
  for (std::size_t ch = 0; ch < cfg.n_channels; ++ch) ts.channel_names.push_back("E" + std::to_string(ch + 1));
  ts.channel_positions = sunflower_positions(cfg.n_channels);
  ts.n_trials = cfg.n_trials;
  ts.n_samples = cfg.n_samples;

  const auto n = static_cast<std::uint32_t>(cfg.n_samples);
  const auto at = [&](double sec) { return static_cast<std::uint32_t>(std::lround(sec * cfg.sample_rate)); };
  Interval action{"action", 0, n};
  if (cfg.n_samples >= at(4.5)) {
    ts.intervals.push_back({"concentration", 0, at(0.5)});
    ts.intervals.push_back({"cue", at(0.5), at(1.0)});
    action = {"action", at(1.0), at(3.5)};
    ts.intervals.push_back(action);
    ts.intervals.push_back({"relax", at(3.5), at(4.5)});
  } else {
    ts.intervals.push_back(action);
  }
  ts.intervals.push_back({"full", 0, n});

  Rng label_rng(splitmix64(seed ^ 0x1ULL));
  Rng noise_rng(splitmix64(seed ^ 0x2ULL));
  Rng artifact_rng(splitmix64(seed ^ 0x3ULL));

  ts.labels.resize(cfg.n_trials);
  for (std::size_t t = 0; t < cfg.n_trials; ++t) ts.labels[t] = static_cast<int>(t % C);
  label_rng.shuffle(ts.labels.begin(), ts.labels.end());

  out.truth.seed = seed;
  out.truth.artifact_flags.assign(cfg.n_trials * cfg.n_channels, 0);
  ts.data.assign(cfg.n_trials * cfg.n_channels * cfg.n_samples, 0.0f);

  const PinkNoise pink(cfg.n_samples);
  std::vector<double> trace(cfg.n_samples);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t t = 0; t < cfg.n_trials; ++t) {
    const auto cls = static_cast<std::size_t>(ts.labels[t]);
    const double freq = cfg.class_freqs[cls];
    out.truth.signatures.push_back({freq, cfg.signature_amplitude, class_channels[cls]});
    std::vector<bool> active(cfg.n_channels, false);
    for (int ch : class_channels[cls]) active[static_cast<std::size_t>(ch)] = true;

    for (std::size_t ch = 0; ch < cfg.n_channels; ++ch) {
      if (cfg.noise_level > 0.0) {
        pink.fill(noise_rng, cfg.noise_level, trace);
      } else {
        std::fill(trace.begin(), trace.end(), 0.0);
      }
      if (active[ch]) {
        for (std::uint32_t s = action.start; s < action.end; ++s)
          trace[s] += cfg.signature_amplitude * std::sin(two_pi * freq * (s - action.start) / cfg.sample_rate);
      }
      // Artifact draws happen for every pair so the flag pattern depends only
      // on the seed and probability.
      const double draw = artifact_rng.uniform();
      const double drift_freq = artifact_rng.uniform(0.1, 0.45);
      const double drift_phase = artifact_rng.uniform(0.0, two_pi);
      if (draw < cfg.artifact_prob) {
        out.truth.artifact_flags[t * cfg.n_channels + ch] = 1;
        for (std::size_t s = 0; s < cfg.n_samples; ++s)
          trace[s] += cfg.artifact_amplitude * std::sin(two_pi * drift_freq * s / cfg.sample_rate + drift_phase);
      }
      auto dst = ts.signal(t, ch);
      for (std::size_t s = 0; s < cfg.n_samples; ++s) dst[s] = static_cast<float>(trace[s]);
    }
  }
  ts.validate();
  return out;
}

void save_ground_truth_csv(const GroundTruth& truth, std::size_t n_channels, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "# seed=" << truth.seed << "\n";
  out << "trial,channel,artifact,signature_hz,signature_amplitude,signature_channel\n";
  for (std::size_t t = 0; t < truth.signatures.size(); ++t) {
    const auto& sig = truth.signatures[t];
    for (std::size_t c = 0; c < n_channels; ++c) {
      const bool on = std::find(sig.channels.begin(), sig.channels.end(), static_cast<int>(c)) != sig.channels.end();
      out << t << ',' << c << ',' << int(truth.artifact_flags[t * n_channels + c]) << ',' << sig.frequency << ','
          << sig.amplitude << ',' << (on ? 1 : 0) << '\n';
    }
  }
}

}  // namespace eegstack
