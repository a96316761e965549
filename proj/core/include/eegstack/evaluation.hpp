#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eegstack/features.hpp"
#include "eegstack/model_io.hpp"
#include "eegstack/models.hpp"

namespace eegstack {

struct FoldPlan {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<int> assignment;  // fold index per row

  std::vector<std::size_t> train_indices(std::size_t fold) const;
  std::vector<std::size_t> test_indices(std::size_t fold) const;
};

// Each class's indices are shuffled with the seed, then dealt round-robin;
// the dealing position carries over between classes so fold sizes stay
// within one of each other overall as well as per class.
FoldPlan stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed);

using Confusion = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

Confusion confusion_matrix(std::span<const int> truth, std::span<const int> predicted, std::size_t n_classes);

// All values in percent.
struct Metrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
};

// Accuracy = trace / total. Per class: F1 = 2 TP / (2 TP + FP + FN), 0 for a
// class absent from both truth and predictions; macro F1 is the unweighted
// mean over classes.
Metrics metrics_from_confusion(const Confusion& m);

enum class Protocol { leakage_safe, paper_protocol };

Protocol parse_protocol(std::string_view s);
std::string_view protocol_name(Protocol p);

struct CvConfig {
  std::size_t folds = 10;
  std::uint64_t seed = 0;
  Protocol protocol = Protocol::leakage_safe;
  unsigned threads = 1;
};

struct FoldResult {
  std::size_t fold = 0;
  std::size_t n_test = 0;
  Metrics metrics;
};

struct EvalReport {
  std::string subject;
  std::string model;
  std::string selector;
  std::size_t k = 0;
  Protocol protocol = Protocol::leakage_safe;
  std::size_t folds = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> class_names;
  Confusion confusion;
  Metrics pooled;
  std::vector<FoldResult> per_fold;
  std::vector<int> predictions;  // out-of-fold prediction per row
  double seconds = 0.0;
};

// Pooled out-of-fold evaluation. leakage_safe fits scaler and selector on the
// training folds only; paper_protocol fits the selector once on the whole
// matrix before folding. A non-empty factory overrides spec.model.
EvalReport cross_validate(const FeatureMatrix& fm, const PipelineSpec& spec, const CvConfig& cfg,
                          const ClassifierFactory& factory = {});

struct SweepRow {
  std::size_t k = 0;
  double accuracy = 0.0;
  double f1 = 0.0;
  bool best = false;
};

std::vector<SweepRow> k_sweep(const FeatureMatrix& fm, const PipelineSpec& spec, std::span<const std::size_t> ks,
                              const CvConfig& cfg);
void write_sweep_csv(std::span<const SweepRow> rows, const std::string& subject, const std::filesystem::path& path);

// --- reporting -------------------------------------------------------------------

struct ComparisonRow {
  std::string subject;
  std::string model;
  double accuracy = 0.0;
  double f1 = 0.0;
};

// One row per (subject, model) plus an "overall" row per model holding the
// mean across subjects, emitted when a model has more than one subject row.
// External rows (other toolkits, published figures) are merged in unchanged;
// an external "overall" row replaces the computed one.
std::vector<ComparisonRow> comparison_rows(std::span<const EvalReport> reports,
                                           std::span<const ComparisonRow> external = {});
std::string comparison_csv(std::span<const ComparisonRow> rows);
std::string comparison_text(std::span<const ComparisonRow> rows);

std::string confusion_csv(const Confusion& m, std::span<const std::string> class_names);
// Row-normalised percentages.
std::string confusion_text(const Confusion& m, std::span<const std::string> class_names);
std::string per_fold_csv(const EvalReport& r);

// Writes summary.csv, summary.txt and per-report confusion/per-fold files.
void write_report(const std::filesystem::path& dir, std::span<const EvalReport> reports,
                  std::span<const ComparisonRow> external = {});

// Reads rows written by comparison_csv (subject,model,accuracy,f1).
std::vector<ComparisonRow> read_comparison_csv(const std::filesystem::path& path);

}  // namespace eegstack
