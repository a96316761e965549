#include "eegstack/features.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "eegstack/binary_io.hpp"
#include "eegstack/common.hpp"

namespace eegstack {
namespace {

struct Moments {
  double mean = 0, m2 = 0, m3 = 0, m4 = 0;  // central moments (population)
};

Moments moments(std::span<const double> x) {
  Moments m;
  const double n = static_cast<double>(x.size());
  m.mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  for (double v : x) {
    const double d = v - m.mean, d2 = d * d;
    m.m2 += d2;
    m.m3 += d2 * d;
    m.m4 += d2 * d2;
  }
  m.m2 /= n;
  m.m3 /= n;
  m.m4 /= n;
  return m;
}

bool is_constant(std::span<const double> x) {
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  return *lo == *hi;
}

double quantile_sorted(const std::vector<double>& s, double q) {
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(i);
  if (i + 1 >= s.size()) return s.back();
  return s[i] + frac * (s[i + 1] - s[i]);
}

double variance_of(std::span<const double> x) { return moments(x).m2; }

std::vector<double> diff(std::span<const double> x) {
  std::vector<double> d(x.size() > 0 ? x.size() - 1 : 0);
  for (std::size_t i = 0; i + 1 < x.size(); ++i) d[i] = x[i + 1] - x[i];
  return d;
}

double mobility(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double v = variance_of(x);
  if (v <= 0.0) return 0.0;
  const auto d = diff(x);
  return std::sqrt(variance_of(d) / v);
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, 0.5);
}

constexpr double kPowerFloor = 1e-20;

struct Band {
  const char* name;
  double lo, hi;
};
constexpr Band kBands[] = {{"delta", 0.5, 4.0}, {"theta", 4.0, 8.0}, {"alpha", 8.0, 13.0},
                           {"beta", 13.0, 30.0}, {"gamma", 30.0, 100.0}};

}  // namespace

std::string_view domain_name(Domain d) {
  switch (d) {
    case Domain::TD: return "TD";
    case Domain::FD: return "FD";
    case Domain::TFD: return "TFD";
  }
  return "?";
}

std::string FeatureDescriptor::label() const {
  std::string s = "ch" + std::to_string(channel) + "/" + std::string(domain_name(domain)) + "/" + name;
  if (!params.empty()) {
    s += '[';
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (i) s += ';';
      s += params[i].first + "=" + params[i].second;
    }
    s += ']';
  }
  return s;
}

void FeatureMatrix::validate() const {
  if (descriptors.size() != n_features()) throw DataError("descriptor count != feature count");
  if (labels.size() != n_rows()) throw DataError("label count != row count");
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= n_classes()) throw DataError("label out of range");
  if (!values.allFinite()) throw DataError("feature matrix contains non-finite values");
}

// --- TD ----------------------------------------------------------------------

const std::vector<std::string>& td_names() {
  static const std::vector<std::string> names = {
      "mean",           "median",          "std",
      "variance",       "skewness",        "kurtosis",
      "rms",            "mean_abs",        "peak_to_peak",
      "iqr",            "zero_crossings",  "slope_sign_changes",
      "waveform_length", "willison_amplitude", "log_energy",
      "hjorth_activity", "hjorth_mobility", "hjorth_complexity",
      "histogram_entropy", "envelope_mean", "envelope_std",
      "envelope_max",   "envelope_median"};
  return names;
}

std::vector<double> extract_td(std::span<const double> x, double sample_rate) {
  (void)sample_rate;
  const std::size_t n = x.size();
  if (n < 16) throw std::invalid_argument("extract_td: need at least 16 samples");
  const auto m = moments(x);
  const bool flat = is_constant(x);
  const double sd = std::sqrt(m.m2);

  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());

  double sum_sq = 0.0, sum_abs = 0.0, wl = 0.0;
  for (double v : x) {
    sum_sq += v * v;
    sum_abs += std::abs(v);
  }
  const double willison_eps = 0.1 * sd;
  double zc = 0, ssc = 0, wamp = 0;
  int last_sign = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int sign = (x[i] > 0.0) - (x[i] < 0.0);
    if (sign != 0) {
      if (last_sign != 0 && sign != last_sign) zc += 1;
      last_sign = sign;
    }
    if (i + 1 < n) {
      const double step = std::abs(x[i + 1] - x[i]);
      wl += step;
      if (step > willison_eps) wamp += 1;
    }
    if (i > 0 && i + 1 < n && (x[i] - x[i - 1]) * (x[i] - x[i + 1]) > 0.0) ssc += 1;
  }

  const double mob = flat ? 0.0 : mobility(x);
  double complexity = 0.0;
  if (mob > 0.0) {
    const auto d = diff(x);
    const double mob_d = mobility(d);
    complexity = mob_d / mob;
  }

  // Amplitude histogram entropy (bits), 16 equal-width bins over [min, max].
  double hist_entropy = 0.0;
  if (!flat) {
    constexpr int kBins = 16;
    std::array<double, kBins> counts{};
    const double lo = sorted.front(), width = (sorted.back() - lo) / kBins;
    for (double v : x) counts[static_cast<std::size_t>(std::min(kBins - 1, static_cast<int>((v - lo) / width)))] += 1;
    for (double c : counts)
      if (c > 0) {
        const double p = c / static_cast<double>(n);
        hist_entropy -= p * std::log2(p);
      }
  }

  auto env = hilbert_envelope(x);
  const auto em = moments(env);
  const double env_max = *std::max_element(env.begin(), env.end());
  const double env_median = median_of(env);

  return {m.mean,
          quantile_sorted(sorted, 0.5),
          sd,
          m.m2,
          flat ? 0.0 : m.m3 / std::pow(m.m2, 1.5),
          flat ? 0.0 : m.m4 / (m.m2 * m.m2) - 3.0,
          std::sqrt(sum_sq / static_cast<double>(n)),
          sum_abs / static_cast<double>(n),
          sorted.back() - sorted.front(),
          quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25),
          zc,
          ssc,
          wl,
          wamp,
          std::log(std::max(sum_sq, kPowerFloor)),
          m.m2,
          mob,
          complexity,
          hist_entropy,
          em.mean,
          std::sqrt(em.m2),
          env_max,
          env_median};
}

// --- FD ----------------------------------------------------------------------

const std::vector<std::string>& fd_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v = {"dominant_frequency", "spectral_centroid", "median_frequency",
                                  "spectral_rolloff_85", "spectral_slope",  "spectral_skewness",
                                  "spectral_kurtosis",  "spectral_entropy",  "spectral_flatness"};
    for (const auto& b : kBands) v.push_back(std::string("abs_power_") + b.name);
    for (const auto& b : kBands) v.push_back(std::string("rel_power_") + b.name);
    return v;
  }();
  return names;
}

std::vector<double> extract_fd(std::span<const double> x, double sample_rate) {
  if (x.size() < 64) throw std::invalid_argument("extract_fd: need at least 64 samples");
  const Spectrum s = psd(x, sample_rate, Window::hann);
  const std::size_t m = s.power.size();
  const double total = std::accumulate(s.power.begin(), s.power.end(), 0.0);
  const double nyquist = sample_rate / 2.0;

  std::vector<double> out(fd_names().size(), 0.0);
  if (total > 0.0) {
    out[0] = s.freqs[static_cast<std::size_t>(std::max_element(s.power.begin(), s.power.end()) - s.power.begin())];
    double centroid = 0.0;
    for (std::size_t k = 0; k < m; ++k) centroid += s.freqs[k] * s.power[k];
    centroid /= total;
    out[1] = centroid;

    double cum = 0.0;
    bool have_median = false, have_rolloff = false;
    for (std::size_t k = 0; k < m; ++k) {
      cum += s.power[k];
      if (!have_median && cum >= 0.5 * total) {
        out[2] = s.freqs[k];
        have_median = true;
      }
      if (!have_rolloff && cum >= 0.85 * total) {
        out[3] = s.freqs[k];
        have_rolloff = true;
      }
    }

    double var = 0.0, m3 = 0.0, m4 = 0.0, entropy = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double p = s.power[k] / total;
      const double d = s.freqs[k] - centroid;
      var += p * d * d;
      m3 += p * d * d * d;
      m4 += p * d * d * d * d;
      if (p > 0.0) entropy -= p * std::log(p);
    }
    if (var > 0.0) {
      out[5] = m3 / std::pow(var, 1.5);
      out[6] = m4 / (var * var) - 3.0;
    }
    out[7] = m > 1 ? entropy / std::log(static_cast<double>(m)) : 0.0;

    double log_sum = 0.0, lin_sum = 0.0;
    for (std::size_t k = 1; k < m; ++k) {
      log_sum += std::log(std::max(s.power[k], kPowerFloor));
      lin_sum += s.power[k];
    }
    if (m > 1 && lin_sum > 0.0) {
      const double count = static_cast<double>(m - 1);
      out[8] = std::exp(log_sum / count) / (lin_sum / count);
    }
  }

  // Least-squares slope of log10 power against frequency over 0.5-100 Hz.
  {
    double sx = 0, sy = 0, sxx = 0, sxy = 0, cnt = 0;
    for (std::size_t k = 0; k < m; ++k) {
      const double f = s.freqs[k];
      if (f < 0.5 || f > 100.0) continue;
      const double y = std::log10(std::max(s.power[k], kPowerFloor));
      sx += f;
      sy += y;
      sxx += f * f;
      sxy += f * y;
      cnt += 1;
    }
    const double den = cnt * sxx - sx * sx;
    if (cnt >= 2 && den > 0.0) out[4] = (cnt * sxy - sx * sy) / den;
  }

  double band_sum = 0.0;
  std::array<double, 5> bands{};
  for (std::size_t b = 0; b < 5; ++b) {
    const double hi = std::min(kBands[b].hi, nyquist);
    bands[b] = hi > kBands[b].lo ? band_power(s, kBands[b].lo, hi) : 0.0;
    band_sum += bands[b];
  }
  for (std::size_t b = 0; b < 5; ++b) {
    out[9 + b] = bands[b];
    out[14 + b] = band_sum > 0.0 ? bands[b] / band_sum : 0.0;
  }
  return out;
}

// --- TFD ---------------------------------------------------------------------

const std::vector<std::string>& tfd_stat_names() {
  static const std::vector<std::string> names = {"band_power", "mean_abs", "waveform_length",
                                                 "rms",        "std",      "fractal_length"};
  return names;
}

std::vector<std::string> tfd_names(int levels, std::span<const std::string> stats) {
  std::vector<std::string> names;
  for (int b = 0; b <= levels; ++b) {
    const std::string sub = b < levels ? "d" + std::to_string(b + 1) : "a" + std::to_string(levels);
    for (const auto& st : stats) names.push_back(sub + "_" + st);
  }
  return names;
}

double katz_fractal_dimension(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  double length = 0.0, extent = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    length += std::abs(x[i] - x[i - 1]);
    extent = std::max(extent, std::abs(x[i] - x[0]));
  }
  if (length <= 0.0 || extent <= 0.0) return 0.0;
  const double n = std::log10(static_cast<double>(x.size() - 1));
  // A path that never strays further than one mean step from its start has no
  // finite dimension under this formula; treat it like the constant case.
  const double den = n + std::log10(extent / length);
  return den > 0.0 ? n / den : 0.0;
}

std::vector<double> extract_tfd(std::span<const double> x, double sample_rate, Wavelet wavelet, int levels) {
  (void)sample_rate;
  if (levels < 1) throw std::invalid_argument("extract_tfd: levels must be >= 1");
  const std::size_t block = std::size_t{1} << levels;
  if (x.size() < block) throw std::invalid_argument("extract_tfd: signal shorter than 2^levels");
  const auto dec = dwt(x.first(x.size() - x.size() % block), wavelet, levels);

  std::vector<double> out;
  out.reserve(dec.subbands.size() * 6);
  for (const auto& c : dec.subbands) {
    const double n = static_cast<double>(c.size());
    double ss = 0.0, sa = 0.0, wl = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      ss += c[i] * c[i];
      sa += std::abs(c[i]);
      if (i > 0) wl += std::abs(c[i] - c[i - 1]);
    }
    const double sd = is_constant(c) ? 0.0 : std::sqrt(moments(c).m2);
    out.push_back(ss / n);
    out.push_back(sa / n);
    out.push_back(wl);
    out.push_back(std::sqrt(ss / n));
    out.push_back(sd);
    out.push_back(katz_fractal_dimension(c));
  }
  return out;
}

std::string feature_definition(Domain d, std::string_view name) {
  static const std::map<std::string, std::string, std::less<>> td = {
      {"mean", "arithmetic mean"},
      {"median", "median (linear interpolation)"},
      {"std", "population standard deviation"},
      {"variance", "population variance"},
      {"skewness", "third standardized moment; 0 for constant input"},
      {"kurtosis", "excess kurtosis (fourth standardized moment - 3); 0 for constant input"},
      {"rms", "root mean square"},
      {"mean_abs", "mean absolute value"},
      {"peak_to_peak", "max - min"},
      {"iqr", "75th - 25th percentile (linear interpolation)"},
      {"zero_crossings", "sign changes between consecutive non-zero samples (threshold 0)"},
      {"slope_sign_changes", "count of i with (x[i]-x[i-1])(x[i]-x[i+1]) > 0"},
      {"waveform_length", "sum |x[i+1]-x[i]|"},
      {"willison_amplitude", "count |x[i+1]-x[i]| > 0.1 * std"},
      {"log_energy", "ln(max(sum x^2, 1e-20))"},
      {"hjorth_activity", "variance"},
      {"hjorth_mobility", "sqrt(var(dx)/var(x))"},
      {"hjorth_complexity", "mobility(dx)/mobility(x)"},
      {"histogram_entropy", "Shannon entropy (bits) of a 16-bin amplitude histogram over [min, max]"},
      {"envelope_mean", "mean of the Hilbert envelope"},
      {"envelope_std", "std of the Hilbert envelope"},
      {"envelope_max", "max of the Hilbert envelope"},
      {"envelope_median", "median of the Hilbert envelope"},
  };
  static const std::map<std::string, std::string, std::less<>> fd = {
      {"dominant_frequency", "frequency of the Hann periodogram maximum"},
      {"spectral_centroid", "power-weighted mean frequency"},
      {"median_frequency", "lowest frequency with cumulative power >= 50%"},
      {"spectral_rolloff_85", "lowest frequency with cumulative power >= 85%"},
      {"spectral_slope",
       "least-squares slope of log10 power vs frequency over 0.5-100 Hz (spectral deformation); power floored at 1e-20"},
      {"spectral_skewness", "skewness of frequency under the normalized power distribution"},
      {"spectral_kurtosis", "excess kurtosis of frequency under the normalized power distribution"},
      {"spectral_entropy", "Shannon entropy of the normalized power, divided by ln(bins)"},
      {"spectral_flatness", "geometric / arithmetic mean power over non-DC bins"},
  };
  const std::string key(name);
  if (d == Domain::TD) {
    if (auto it = td.find(key); it != td.end()) return it->second;
  } else if (d == Domain::FD) {
    if (auto it = fd.find(key); it != fd.end()) return it->second;
    for (const auto& b : kBands) {
      if (key == std::string("abs_power_") + b.name)
        return "integrated PSD over [" + std::to_string(b.lo) + ", " + std::to_string(b.hi) + ") Hz (capped at Nyquist)";
      if (key == std::string("rel_power_") + b.name) return std::string(b.name) + " power / sum of the five band powers";
    }
  } else {
    const auto us = key.find('_');
    const std::string stat = us == std::string::npos ? key : key.substr(us + 1);
    static const std::map<std::string, std::string, std::less<>> tfd = {
        {"band_power", "mean squared coefficient"},
        {"mean_abs", "mean absolute coefficient"},
        {"waveform_length", "sum of absolute coefficient differences"},
        {"rms", "root mean square coefficient"},
        {"std", "coefficient standard deviation"},
        {"fractal_length", "Katz fractal dimension of the coefficient sequence; 0 when constant or confined to one mean step"},
    };
    if (auto it = tfd.find(stat); it != tfd.end()) return it->second + " of subband " + key.substr(0, us);
  }
  return "";
}

// --- catalog -------------------------------------------------------------------

namespace {

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(ch))) {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::string> parse_name_list(std::string_view spec, const std::vector<std::string>& all, const char* what) {
  const auto items = split(spec, ',');
  if (items.size() == 1 && items[0] == "all") return all;
  if (items.size() == 1 && (items[0] == "none" || items[0].empty())) return {};
  std::vector<std::string> out;
  for (const auto& it : items) {
    if (std::find(all.begin(), all.end(), it) == all.end())
      throw std::invalid_argument(std::string("unknown ") + what + " feature '" + it + "'");
    out.push_back(it);
  }
  return out;
}

std::vector<std::size_t> index_of(const std::vector<std::string>& chosen, const std::vector<std::string>& all) {
  std::vector<std::size_t> idx;
  for (const auto& c : chosen)
    idx.push_back(static_cast<std::size_t>(std::find(all.begin(), all.end(), c) - all.begin()));
  return idx;
}

}  // namespace

FeatureCatalog FeatureCatalog::defaults() {
  FeatureCatalog c;
  c.td = td_names();
  c.fd = fd_names();
  c.tfd.push_back({Wavelet::db4, 5, tfd_stat_names()});
  return c;
}

FeatureCatalog FeatureCatalog::parse(std::string_view td, std::string_view fd, std::string_view tfd) {
  FeatureCatalog c;
  c.td = parse_name_list(td, td_names(), "TD");
  c.fd = parse_name_list(fd, fd_names(), "FD");
  const auto entries = split(tfd, ';');
  if (!(entries.size() == 1 && (entries[0] == "none" || entries[0].empty()))) {
    for (const auto& e : entries) {
      const auto first = e.find(':');
      const auto second = first == std::string::npos ? std::string::npos : e.find(':', first + 1);
      if (second == std::string::npos)
        throw std::invalid_argument("TFD entry '" + e + "' must look like wavelet:levels:stats");
      TfdEntry t;
      t.wavelet = parse_wavelet(e.substr(0, first));
      t.levels = std::stoi(e.substr(first + 1, second - first - 1));
      t.stats = parse_name_list(e.substr(second + 1), tfd_stat_names(), "TFD");
      c.tfd.push_back(std::move(t));
    }
  }
  c.validate();
  return c;
}

std::size_t FeatureCatalog::per_channel() const {
  std::size_t n = td.size() + fd.size();
  for (const auto& e : tfd) n += static_cast<std::size_t>(e.levels + 1) * e.stats.size();
  return n;
}

std::string FeatureCatalog::version() const {
  std::string v = "catalog-v1:td" + std::to_string(td.size()) + ":fd" + std::to_string(fd.size());
  for (const auto& e : tfd)
    v += ":" + std::string(wavelet_name(e.wavelet)) + "L" + std::to_string(e.levels) + "x" + std::to_string(e.stats.size());
  return v;
}

void FeatureCatalog::validate() const {
  auto check_unique = [](const std::vector<std::string>& v, const char* what) {
    std::set<std::string> s(v.begin(), v.end());
    if (s.size() != v.size()) throw std::invalid_argument(std::string("duplicate ") + what + " feature in catalog");
  };
  check_unique(td, "TD");
  check_unique(fd, "FD");
  std::set<std::pair<int, int>> seen;
  for (const auto& e : tfd) {
    if (e.levels < 1 || e.levels > 16) throw std::invalid_argument("TFD levels must be in [1, 16]");
    if (e.stats.empty()) throw std::invalid_argument("TFD entry with no statistics");
    check_unique(e.stats, "TFD");
    if (!seen.insert({static_cast<int>(e.wavelet), e.levels}).second)
      throw std::invalid_argument("duplicate TFD wavelet/level entry");
  }
  if (per_channel() == 0) throw std::invalid_argument("feature catalog is empty");
}

FeatureMatrix build_feature_matrix(const TrialSet& ts, const FeatureCatalog& catalog, unsigned threads) {
  ts.validate();
  catalog.validate();
  const std::size_t n_ch = ts.n_channels();
  const std::size_t per = catalog.per_channel();

  FeatureMatrix fm;
  fm.labels = ts.labels;
  fm.class_names = ts.class_names;
  fm.catalog_version = catalog.version();
  {
    std::vector<std::uint8_t> raw(ts.data.size() * sizeof(float));
    std::memcpy(raw.data(), ts.data.data(), raw.size());
    fm.source_id = ts.subject_id + ":" + io::hex64(io::fnv1a64(raw));
  }

  const auto td_idx = index_of(catalog.td, td_names());
  const auto fd_idx = index_of(catalog.fd, fd_names());
  std::vector<std::vector<std::size_t>> tfd_idx;
  std::vector<FeatureDescriptor> channel_template;
  for (const auto& n : catalog.td) channel_template.push_back({0, Domain::TD, n, {}});
  for (const auto& n : catalog.fd) channel_template.push_back({0, Domain::FD, n, {}});
  for (const auto& e : catalog.tfd) {
    const auto all = tfd_names(e.levels);
    const auto chosen = tfd_names(e.levels, e.stats);
    tfd_idx.push_back(index_of(chosen, all));
    for (const auto& n : chosen)
      channel_template.push_back({0, Domain::TFD, n,
                                  {{"wavelet", std::string(wavelet_name(e.wavelet))},
                                   {"levels", std::to_string(e.levels)},
                                   {"subband", n.substr(0, n.find('_'))}}});
  }
  for (std::size_t c = 0; c < n_ch; ++c)
    for (auto d : channel_template) {
      d.channel = static_cast<std::uint32_t>(c);
      fm.descriptors.push_back(std::move(d));
    }

  fm.values.resize(static_cast<Eigen::Index>(ts.n_trials), static_cast<Eigen::Index>(n_ch * per));
  parallel_for(ts.n_trials * n_ch, threads, [&](std::size_t job) {
    const std::size_t t = job / n_ch, c = job % n_ch;
    const auto src = ts.signal(t, c);
    const std::vector<double> x(src.begin(), src.end());
    std::vector<double> row;
    row.reserve(per);
    const std::string where = "trial " + std::to_string(t) + ", channel " + std::to_string(c);
    try {
      if (!td_idx.empty()) {
        const auto v = extract_td(x, ts.sample_rate);
        for (auto i : td_idx) row.push_back(v[i]);
      }
      if (!fd_idx.empty()) {
        const auto v = extract_fd(x, ts.sample_rate);
        for (auto i : fd_idx) row.push_back(v[i]);
      }
      for (std::size_t e = 0; e < catalog.tfd.size(); ++e) {
        const auto v = extract_tfd(x, ts.sample_rate, catalog.tfd[e].wavelet, catalog.tfd[e].levels);
        for (auto i : tfd_idx[e]) row.push_back(v[i]);
      }
    } catch (const std::invalid_argument& e) {
      throw DataError(where + ": " + e.what());
    }
    for (std::size_t k = 0; k < per; ++k) {
      if (!std::isfinite(row[k]))
        throw DataError(where + ", feature " + channel_template[k].name + ": non-finite value");
      fm.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c * per + k)) = row[k];
    }
  });
  return fm;
}

// --- standardization -----------------------------------------------------------

Scaler fit_scaler(const Eigen::MatrixXd& x) {
  if (x.rows() == 0) throw DataError("fit_scaler: empty row subset");
  Scaler s;
  const auto p = x.cols();
  s.mean.resize(p);
  s.std.resize(p);
  s.constant.assign(static_cast<std::size_t>(p), 0);
  const double n = static_cast<double>(x.rows());
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto col = x.col(j);
    const double mu = col.sum() / n;
    const double var = (col.array() - mu).square().sum() / n;
    s.mean(j) = mu;
    s.std(j) = std::max(std::sqrt(var), 1e-12);
    s.constant[static_cast<std::size_t>(j)] = col.minCoeff() == col.maxCoeff() ? 1 : 0;
  }
  return s;
}

Scaler fit_scaler(const FeatureMatrix& fm, std::span<const std::size_t> rows) {
  if (rows.empty()) throw DataError("fit_scaler: empty row subset");
  return fit_scaler(take_rows(fm.values, rows));
}

Eigen::MatrixXd apply_scaler(const Eigen::MatrixXd& x, const Scaler& s) {
  if (static_cast<std::size_t>(x.cols()) != s.size()) throw DataError("apply_scaler: column count mismatch");
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (s.constant[static_cast<std::size_t>(j)]) {
      out.col(j).setZero();
    } else {
      out.col(j) = (x.col(j).array() - s.mean(j)) / s.std(j);
    }
  }
  return out;
}

FeatureMatrix apply_scaler(const FeatureMatrix& fm, const Scaler& s) {
  FeatureMatrix out = fm;
  out.values = apply_scaler(fm.values, s);
  return out;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

Eigen::MatrixXd take_cols(const Eigen::MatrixXd& x, std::span<const std::size_t> cols) {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = x.col(static_cast<Eigen::Index>(cols[j]));
  return out;
}

// --- EITF ----------------------------------------------------------------------

std::vector<std::uint8_t> encode_feature_matrix(const FeatureMatrix& fm) {
  fm.validate();
  io::ByteWriter w;
  w.magic("EITF");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(fm.n_rows()));
  w.u32(static_cast<std::uint32_t>(fm.n_features()));
  w.u32(static_cast<std::uint32_t>(fm.n_classes()));
  w.str(fm.source_id);
  w.str(fm.catalog_version);
  for (const auto& c : fm.class_names) w.str(c);
  for (int l : fm.labels) w.u16(static_cast<std::uint16_t>(l));
  for (const auto& d : fm.descriptors) {
    w.u32(d.channel);
    w.u8(static_cast<std::uint8_t>(d.domain));
    w.str(d.name);
    w.u32(static_cast<std::uint32_t>(d.params.size()));
    for (const auto& [k, v] : d.params) {
      w.str(k);
      w.str(v);
    }
  }
  for (Eigen::Index i = 0; i < fm.values.rows(); ++i)
    for (Eigen::Index j = 0; j < fm.values.cols(); ++j) w.f64(fm.values(i, j));
  return w.take();
}

FeatureMatrix decode_feature_matrix(std::span<const std::uint8_t> bytes, const std::string& what) {
  io::ByteReader r(bytes, what);
  r.expect_magic("EITF");
  if (const auto v = r.u32(); v != 1) r.fail("unsupported version " + std::to_string(v));
  const std::size_t rows = r.u32(), cols = r.u32(), n_classes = r.u32();
  if (static_cast<unsigned __int128>(rows) * cols * 8 > bytes.size()) r.fail("dimension product exceeds file size");
  FeatureMatrix fm;
  fm.source_id = r.str();
  fm.catalog_version = r.str();
  r.require(4 * n_classes);
  for (std::size_t i = 0; i < n_classes; ++i) fm.class_names.push_back(r.str());
  r.require(2 * rows);
  for (std::size_t i = 0; i < rows; ++i) fm.labels.push_back(r.u16());
  r.require(13 * cols);
  fm.descriptors.reserve(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    FeatureDescriptor d;
    d.channel = r.u32();
    const auto dom = r.u8();
    if (dom > 2) r.fail("bad domain code");
    d.domain = static_cast<Domain>(dom);
    d.name = r.str();
    const std::size_t np = r.u32();
    r.require(8 * np);
    for (std::size_t k = 0; k < np; ++k) {
      auto key = r.str();
      auto val = r.str();
      d.params.emplace_back(std::move(key), std::move(val));
    }
    fm.descriptors.push_back(std::move(d));
  }
  r.require(8 * rows * cols);
  fm.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) fm.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r.f64();
  if (r.remaining() != 0) r.fail("trailing bytes after value block");
  try {
    fm.validate();
  } catch (const DataError& e) {
    r.fail(e.what());
  }
  return fm;
}

void save_feature_matrix(const FeatureMatrix& fm, const std::filesystem::path& path) {
  io::write_file(path, encode_feature_matrix(fm));
}

FeatureMatrix load_feature_matrix(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return decode_feature_matrix(bytes, path.string());
}

void write_catalog_csv(const FeatureMatrix& fm, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "column,channel,domain,name,params,definition\n";
  for (std::size_t j = 0; j < fm.descriptors.size(); ++j) {
    const auto& d = fm.descriptors[j];
    std::string params;
    for (const auto& [k, v] : d.params) params += (params.empty() ? "" : ";") + k + "=" + v;
    out << j << ',' << d.channel << ',' << domain_name(d.domain) << ',' << d.name << ',' << params << ",\""
        << feature_definition(d.domain, d.name) << "\"\n";
  }
}

}  // namespace eegstack
