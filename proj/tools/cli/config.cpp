#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace eegstack::cli {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw UsageError("config key '" + key + "': '" + v + "' is not a number");
  }
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw UsageError("config key '" + key + "': '" + v + "' is not an integer");
  return out;
}

}  // namespace

const std::map<std::string, std::string>& RunConfig::defaults() {
  static const std::map<std::string, std::string> d = {
      // shared
      {"seed", "0"},
      {"threads", "1"},
      {"subject", "synthetic"},
      // inputs
      {"trials", ""},
      {"features", ""},
      {"model", ""},
      {"positions", ""},
      {"report_inputs", ""},
      {"external_rows", ""},
      // synth
      {"n_trials", "160"},
      {"n_channels", "16"},
      {"n_samples", "640"},
      {"sample_rate", "256"},
      {"class_freqs", "8,12,20,30"},
      {"signature_amplitude", "1"},
      {"noise_level", "1"},
      {"artifact_prob", "0"},
      {"artifact_amplitude", "10"},
      // clean
      {"z_thresh", "3"},
      {"drift_factor", "5"},
      {"drift_window_sec", "0.5"},
      {"vmd_modes", "6"},
      {"vmd_alpha", "2000"},
      {"vmd_tau", "0"},
      {"vmd_tol", "1e-7"},
      {"vmd_max_iter", "500"},
      // features
      {"interval", "none"},
      {"catalog_td", "all"},
      {"catalog_fd", "all"},
      {"catalog_tfd", "db4:5:all"},
      // selection
      {"selector", "mrmr_fcq"},
      {"k", "12"},
      {"mi_bins", "10"},
      {"relieff_k", "10"},
      {"k_grid", "2,4,8,12"},
      // models
      {"model_kind", "ensemble"},
      {"standardize", "true"},
      {"l2_lambda", "1"},
      {"lambdas", "100,10,1,0.1,0.01"},
      {"inner_folds", "5"},
      {"meta_lambda", "1"},
      {"lda_gamma", "0.1"},
      {"max_iter", "2000"},
      {"grad_tol", "1e-6"},
      // evaluation
      {"folds", "10"},
      {"protocol", "leakage_safe"},
      // topomap
      {"topomap_class", "all"},
      {"topomap_interval", "action"},
      {"erp_summary", "rms"},
      {"grid", "64"},
  };
  return d;
}

RunConfig::RunConfig() : values_(defaults()) {}

void RunConfig::merge_text(std::string_view text, const std::string& origin) {
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    std::string line(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw UsageError(where + ": expected 'key = value'");
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), where);
    if (end == text.size()) break;
  }
}

void RunConfig::set(const std::string& key, const std::string& value, const std::string& origin) {
  if (!defaults().contains(key)) throw UsageError(origin + ": unknown config key '" + key + "'");
  values_[key] = value;
}

const std::string& RunConfig::str(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw std::logic_error("config key not declared: " + key);
  return it->second;
}

double RunConfig::real(const std::string& key) const { return parse_real(key, str(key)); }

std::int64_t RunConfig::integer(const std::string& key) const { return parse_int(key, str(key)); }

std::uint64_t RunConfig::u64(const std::string& key) const {
  const auto& v = str(key);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw UsageError("config key '" + key + "': '" + v + "' is not an unsigned integer");
  return out;
}

bool RunConfig::flag(const std::string& key) const {
  const auto& v = str(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw UsageError("config key '" + key + "': '" + v + "' is not a boolean");
}

std::vector<double> RunConfig::reals(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(str(key))) out.push_back(parse_real(key, item));
  return out;
}

std::vector<std::size_t> RunConfig::sizes(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(str(key))) {
    if (item.find(':') == std::string::npos) {
      const auto v = parse_int(key, item);
      if (v < 0) throw UsageError("config key '" + key + "': negative value");
      out.push_back(static_cast<std::size_t>(v));
      continue;
    }
    std::vector<std::string> parts;
    std::stringstream ss(item);
    std::string p;
    while (std::getline(ss, p, ':')) parts.push_back(trim(p));
    if (parts.size() != 3) throw UsageError("config key '" + key + "': ranges look like lo:hi:step");
    const auto lo = parse_int(key, parts[0]), hi = parse_int(key, parts[1]), step = parse_int(key, parts[2]);
    if (lo < 0 || hi < lo || step <= 0) throw UsageError("config key '" + key + "': bad range '" + item + "'");
    for (auto v = lo; v <= hi; v += step) out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::vector<std::string> RunConfig::strings(const std::string& key) const { return split_list(str(key)); }

std::string RunConfig::echo() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

}  // namespace eegstack::cli
