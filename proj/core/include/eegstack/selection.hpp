#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eegstack/features.hpp"

namespace eegstack {

enum class RankMethod { anova_f, chi_square, mutual_info, pearson, relieff };

RankMethod parse_rank_method(std::string_view s);
std::string_view rank_method_name(RankMethod m);

struct RankParams {
  int mi_bins = 10;
  int relieff_k = 10;
};

struct RankedFeatures {
  std::string method;
  std::vector<std::size_t> order;  // column indices, best first
  std::vector<double> scores;      // aligned with order
  std::size_t k = 0;
  std::vector<std::pair<std::string, std::string>> params;

  std::vector<std::size_t> top(std::size_t k) const;
};

// Per-column scores in column order; higher is better, constant columns score
// exactly 0. Labels must lie in [0, n_classes).
std::vector<double> score_features(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t n_classes,
                                   RankMethod method, const RankParams& params = {}, unsigned threads = 1);

// Full ranking: score descending, ties broken by lower column index.
RankedFeatures rank_features(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t n_classes,
                             RankMethod method, std::size_t k = 0, const RankParams& params = {},
                             unsigned threads = 1);

enum class MrmrVariant { FCQ, MIQ };

// Greedy relevance / (redundancy + 1e-12). FCQ: ANOVA F over mean |Pearson|
// with the picks so far. MIQ: mutual information over mean MI between binned
// features. The first pick is the most relevant column; ties go to the lower
// index. scores[i] is the objective value at pick i.
RankedFeatures mrmr_select(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t n_classes, std::size_t k,
                           MrmrVariant variant = MrmrVariant::FCQ, const RankParams& params = {});

// Equal-width binning into `bins` cells over the observed range; constant
// columns land in bin 0.
std::vector<int> discretize(std::span<const double> v, int bins);
// Plug-in mutual information in nats between two discrete sequences.
double mutual_information(std::span<const int> a, int a_levels, std::span<const int> b, int b_levels);

struct PcaTransform {
  Eigen::MatrixXd components;  // p x m, orthonormal columns
  Eigen::VectorXd explained_ratio;
  Eigen::VectorXd mean;
};

PcaTransform pca_fit(const Eigen::MatrixXd& x, std::size_t m);
Eigen::MatrixXd pca_apply(const Eigen::MatrixXd& x, const PcaTransform& t);

// Selector used inside a pipeline: a ranker, MRMR or PCA, fitted on training
// rows and then applied to any rows.
enum class SelectorKind { none, anova_f, chi_square, mutual_info, pearson, relieff, mrmr_fcq, mrmr_miq, pca };

SelectorKind parse_selector(std::string_view s);
std::string_view selector_name(SelectorKind k);

struct SelectorSpec {
  SelectorKind kind = SelectorKind::mrmr_fcq;
  std::size_t k = 12;
  RankParams params;
};

struct FittedSelector {
  SelectorKind kind = SelectorKind::none;
  std::vector<std::size_t> columns;  // empty for none/pca
  std::optional<PcaTransform> pca;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

FittedSelector fit_selector(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t n_classes,
                            const SelectorSpec& spec, unsigned threads = 1);

// rank, column, descriptor, score
void write_ranking_csv(const RankedFeatures& r, std::span<const FeatureDescriptor> descriptors,
                       const std::filesystem::path& path);

}  // namespace eegstack
