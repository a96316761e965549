#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eegstack/signal_math.hpp"
#include "eegstack/trialset.hpp"

namespace eegstack {

enum class Domain : std::uint8_t { TD = 0, FD = 1, TFD = 2 };

std::string_view domain_name(Domain d);

struct FeatureDescriptor {
  std::uint32_t channel = 0;
  Domain domain = Domain::TD;
  std::string name;
  std::vector<std::pair<std::string, std::string>> params;

  // "ch<idx>/<domain>/<name>[k=v;...]"
  std::string label() const;
  bool operator==(const FeatureDescriptor&) const = default;
};

struct FeatureMatrix {
  Eigen::MatrixXd values;  // n_trials x n_features
  std::vector<FeatureDescriptor> descriptors;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  std::string source_id;
  std::string catalog_version;

  std::size_t n_rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t n_features() const { return static_cast<std::size_t>(values.cols()); }
  std::size_t n_classes() const { return class_names.size(); }
  void validate() const;
};

// --- per-signal extractors ---------------------------------------------------
// Each returns its full catalog in the order of the matching *_names().

const std::vector<std::string>& td_names();
const std::vector<std::string>& fd_names();
const std::vector<std::string>& tfd_stat_names();
// Per-subband TFD names: d1_<stat> ... dL_<stat>, aL_<stat>.
std::vector<std::string> tfd_names(int levels, std::span<const std::string> stats = tfd_stat_names());

std::vector<double> extract_td(std::span<const double> x, double sample_rate);
std::vector<double> extract_fd(std::span<const double> x, double sample_rate);
std::vector<double> extract_tfd(std::span<const double> x, double sample_rate, Wavelet wavelet = Wavelet::db4,
                                int levels = 5);

// Katz fractal dimension log10(n) / (log10(n) + log10(d / L)) with n steps,
// path length L and maximum excursion d from the first sample. 0 for constant
// or single-point input and whenever the denominator is not positive.
double katz_fractal_dimension(std::span<const double> x);

// Human-readable definition of a catalog entry, written to manifests.
std::string feature_definition(Domain d, std::string_view name);

// --- catalog -------------------------------------------------------------------

struct TfdEntry {
  Wavelet wavelet = Wavelet::db4;
  int levels = 5;
  std::vector<std::string> stats;  // subset of tfd_stat_names()
};

// Which features each channel contributes, in column order TD, FD, TFD.
struct FeatureCatalog {
  std::vector<std::string> td;
  std::vector<std::string> fd;
  std::vector<TfdEntry> tfd;

  static FeatureCatalog defaults();  // 23 TD + 19 FD + db4/L5 x 6 stats = 78
  // Parses the textual forms used by run configs:
  //   td, fd:  "all" | "none" | comma list of names
  //   tfd:     "none" | ';'-separated "wavelet:levels:stats" with stats
  //            "all" or a comma list, e.g. "db4:5:all;haar:3:band_power,rms"
  static FeatureCatalog parse(std::string_view td, std::string_view fd, std::string_view tfd);

  std::size_t per_channel() const;
  std::string version() const;
  void validate() const;
};

// Trials x (channels * catalog) matrix, channel-major. Non-finite values are a
// hard DataError naming trial, channel and feature.
FeatureMatrix build_feature_matrix(const TrialSet& ts, const FeatureCatalog& catalog = FeatureCatalog::defaults(),
                                   unsigned threads = 1);

// --- standardization -----------------------------------------------------------

struct Scaler {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;  // floored at 1e-12
  std::vector<std::uint8_t> constant;  // column constant on the fitted rows -> scaled to 0

  std::size_t size() const { return static_cast<std::size_t>(mean.size()); }
};

Scaler fit_scaler(const Eigen::MatrixXd& x);
Scaler fit_scaler(const FeatureMatrix& fm, std::span<const std::size_t> rows);
Eigen::MatrixXd apply_scaler(const Eigen::MatrixXd& x, const Scaler& s);
FeatureMatrix apply_scaler(const FeatureMatrix& fm, const Scaler& s);

// --- EITF container -------------------------------------------------------------
// "EITF", version u32, n_rows u32, n_features u32, C u32, source id, catalog
// version, C class names, labels u16 x n_rows, descriptors (channel u32,
// domain u8, name, param count u32, (key, value)*), values f64 row-major.

std::vector<std::uint8_t> encode_feature_matrix(const FeatureMatrix& fm);
FeatureMatrix decode_feature_matrix(std::span<const std::uint8_t> bytes, const std::string& what = "EITF");
void save_feature_matrix(const FeatureMatrix& fm, const std::filesystem::path& path);
FeatureMatrix load_feature_matrix(const std::filesystem::path& path);
void write_catalog_csv(const FeatureMatrix& fm, const std::filesystem::path& path);

// Row subset helper used throughout selection and evaluation.
Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, std::span<const std::size_t> rows);
Eigen::MatrixXd take_cols(const Eigen::MatrixXd& x, std::span<const std::size_t> cols);

}  // namespace eegstack
