#include "eegstack/selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "eegstack/common.hpp"

namespace eegstack {
namespace {

constexpr double kMrmrEps = 1e-12;

void check_inputs(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t n_classes) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw DataError("label count does not match row count");
  if (n_classes < 2) throw DataError("need at least 2 classes");
  std::vector<std::size_t> counts(n_classes, 0);
  for (int l : y) {
    if (l < 0 || static_cast<std::size_t>(l) >= n_classes) throw DataError("label out of range");
    ++counts[static_cast<std::size_t>(l)];
  }
  if (std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) < 2)
    throw DataError("single-class input: at least 2 classes must be present");
  if (!x.allFinite()) throw DataError("feature matrix contains non-finite values");
}

std::vector<std::size_t> class_counts(std::span<const int> y, std::size_t n_classes) {
  std::vector<std::size_t> counts(n_classes, 0);
  for (int l : y) ++counts[static_cast<std::size_t>(l)];
  return counts;
}

bool column_constant(const Eigen::MatrixXd& x, Eigen::Index j) { return x.col(j).minCoeff() == x.col(j).maxCoeff(); }

double anova_f(const Eigen::VectorXd& col, std::span<const int> y, std::size_t n_classes) {
  const auto n = static_cast<std::size_t>(col.size());
  std::vector<double> sum(n_classes, 0.0);
  std::vector<std::size_t> cnt(n_classes, 0);
  for (std::size_t i = 0; i < n; ++i) {
    sum[static_cast<std::size_t>(y[i])] += col(static_cast<Eigen::Index>(i));
    ++cnt[static_cast<std::size_t>(y[i])];
  }
  const double grand = col.mean();
  double ssb = 0.0, ssw = 0.0, sst = 0.0;
  std::size_t groups = 0;
  for (std::size_t c = 0; c < n_classes; ++c)
    if (cnt[c] > 0) {
      ++groups;
      const double m = sum[c] / static_cast<double>(cnt[c]);
      ssb += static_cast<double>(cnt[c]) * (m - grand) * (m - grand);
    }
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(y[i]);
    const double v = col(static_cast<Eigen::Index>(i));
    const double m = sum[c] / static_cast<double>(cnt[c]);
    ssw += (v - m) * (v - m);
    sst += (v - grand) * (v - grand);
  }
  if (sst <= 0.0 || n <= groups) return 0.0;
  const double msb = ssb / static_cast<double>(groups - 1);
  // A within-class floor relative to the total keeps perfect predictors finite.
  const double msw = std::max(ssw / static_cast<double>(n - groups), 1e-12 * sst / static_cast<double>(n - 1));
  return msb / msw;
}

double chi_square(const Eigen::VectorXd& col, std::span<const int> y, std::size_t n_classes) {
  const double lo = col.minCoeff(), range = col.maxCoeff() - lo;
  if (range <= 0.0) return 0.0;
  const auto n = static_cast<std::size_t>(col.size());
  std::vector<double> observed(n_classes, 0.0), prior(n_classes, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = (col(static_cast<Eigen::Index>(i)) - lo) / range;
    observed[static_cast<std::size_t>(y[i])] += v;
    prior[static_cast<std::size_t>(y[i])] += 1.0;
    total += v;
  }
  double chi = 0.0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    const double expected = total * prior[c] / static_cast<double>(n);
    if (expected > 0.0) chi += (observed[c] - expected) * (observed[c] - expected) / expected;
  }
  return chi;
}

double pearson_max(const Eigen::VectorXd& col, std::span<const int> y, std::size_t n_classes) {
  const auto n = static_cast<double>(col.size());
  const Eigen::VectorXd centered = col.array() - col.mean();
  const double sxx = centered.squaredNorm();
  if (sxx <= 0.0) return 0.0;
  double best = 0.0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    double count = 0.0, sxy = 0.0;
    for (Eigen::Index i = 0; i < col.size(); ++i)
      if (static_cast<std::size_t>(y[static_cast<std::size_t>(i)]) == c) {
        count += 1.0;
        sxy += centered(i);
      }
    const double p = count / n;
    const double syy = count * (1.0 - p) * (1.0 - p) + (n - count) * p * p;
    if (syy <= 0.0) continue;
    best = std::max(best, std::abs(sxy) / std::sqrt(sxx * syy));
  }
  return best;
}

std::vector<double> relieff(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t n_classes, int k_param) {
  const Eigen::Index n = x.rows(), p = x.cols();
  const auto counts = class_counts(y, n_classes);

  Eigen::VectorXd range(p);
  Eigen::MatrixXd z(n, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto col = x.col(j);
    range(j) = col.maxCoeff() - col.minCoeff();
    const double mu = col.mean();
    const double sd = std::sqrt((col.array() - mu).square().mean());
    z.col(j) = sd > 0.0 ? Eigen::VectorXd((col.array() - mu) / sd) : Eigen::VectorXd::Zero(n);
  }
  const Eigen::VectorXd sq = z.rowwise().squaredNorm();
  Eigen::MatrixXd dist = -2.0 * z * z.transpose();
  dist.colwise() += sq;
  dist.rowwise() += sq.transpose();

  Eigen::VectorXd inv_range(p);
  for (Eigen::Index j = 0; j < p; ++j) inv_range(j) = range(j) > 0.0 ? 1.0 / range(j) : 0.0;

  Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
  const double m = static_cast<double>(n);
  std::vector<std::pair<double, Eigen::Index>> cand;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ci = static_cast<std::size_t>(y[static_cast<std::size_t>(i)]);
    const double p_own = static_cast<double>(counts[ci]) / m;
    for (std::size_t c = 0; c < n_classes; ++c) {
      cand.clear();
      for (Eigen::Index j = 0; j < n; ++j)
        if (j != i && static_cast<std::size_t>(y[static_cast<std::size_t>(j)]) == c) cand.emplace_back(dist(i, j), j);
      if (cand.empty()) continue;
      const auto kk = std::min(cand.size(), static_cast<std::size_t>(k_param));
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(kk), cand.end());
      double weight;
      if (c == ci) {
        weight = -1.0 / (m * static_cast<double>(kk));
      } else {
        if (p_own >= 1.0) continue;
        weight = (static_cast<double>(counts[c]) / m) / (1.0 - p_own) / (m * static_cast<double>(kk));
      }
      for (std::size_t r = 0; r < kk; ++r)
        w += weight * ((x.row(i) - x.row(cand[r].second)).cwiseAbs().transpose().cwiseProduct(inv_range));
    }
  }
  std::vector<double> out(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) out[static_cast<std::size_t>(j)] = range(j) > 0.0 ? w(j) : 0.0;
  return out;
}

std::vector<std::size_t> order_by_score(const std::vector<double>& s) {
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return s[a] > s[b]; });
  return idx;
}

std::vector<double> column(const Eigen::MatrixXd& x, Eigen::Index j) {
  return {x.col(j).data(), x.col(j).data() + x.rows()};
}

}  // namespace

RankMethod parse_rank_method(std::string_view s) {
  if (s == "anova_f") return RankMethod::anova_f;
  if (s == "chi_square") return RankMethod::chi_square;
  if (s == "mutual_info") return RankMethod::mutual_info;
  if (s == "pearson") return RankMethod::pearson;
  if (s == "relieff") return RankMethod::relieff;
  throw std::invalid_argument("unknown ranking method '" + std::string(s) + "'");
}

std::string_view rank_method_name(RankMethod m) {
  switch (m) {
    case RankMethod::anova_f: return "anova_f";
    case RankMethod::chi_square: return "chi_square";
    case RankMethod::mutual_info: return "mutual_info";
    case RankMethod::pearson: return "pearson";
    case RankMethod::relieff: return "relieff";
  }
  return "?";
}

std::vector<std::size_t> RankedFeatures::top(std::size_t n) const {
  if (n > order.size()) throw std::invalid_argument("requested more features than were ranked");
  return {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n)};
}

std::vector<int> discretize(std::span<const double> v, int bins) {
  if (bins < 1) throw std::invalid_argument("bin count must be positive");
  std::vector<int> out(v.size(), 0);
  if (v.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it, range = *hi_it - lo;
  if (range <= 0.0) return out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = std::min(bins - 1, static_cast<int>((v[i] - lo) / range * bins));
  return out;
}

double mutual_information(std::span<const int> a, int a_levels, std::span<const int> b, int b_levels) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("mutual_information: size mismatch");
  std::vector<double> joint(static_cast<std::size_t>(a_levels * b_levels), 0.0), pa(static_cast<std::size_t>(a_levels), 0.0),
      pb(static_cast<std::size_t>(b_levels), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[static_cast<std::size_t>(a[i] * b_levels + b[i])] += 1.0;
    pa[static_cast<std::size_t>(a[i])] += 1.0;
    pb[static_cast<std::size_t>(b[i])] += 1.0;
  }
  const double n = static_cast<double>(a.size());
  double mi = 0.0;
  for (int i = 0; i < a_levels; ++i)
    for (int j = 0; j < b_levels; ++j) {
      const double nij = joint[static_cast<std::size_t>(i * b_levels + j)];
      if (nij > 0.0) mi += nij / n * std::log(nij * n / (pa[static_cast<std::size_t>(i)] * pb[static_cast<std::size_t>(j)]));
    }
  return std::max(mi, 0.0);
}

std::vector<double> score_features(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t n_classes,
                                   RankMethod method, const RankParams& params, unsigned threads) {
  check_inputs(x, y, n_classes);
  const auto p = static_cast<std::size_t>(x.cols());
  if (method == RankMethod::anova_f) {
    for (auto c : class_counts(y, n_classes))
      if (c == 1) throw DataError("anova_f needs at least 2 samples per present class");
  }
  if (method == RankMethod::relieff) {
    if (params.relieff_k < 1) throw std::invalid_argument("relieff k must be positive");
    return relieff(x, y, n_classes, params.relieff_k);
  }
  std::vector<int> labels(y.begin(), y.end());
  std::vector<double> scores(p, 0.0);
  parallel_for(p, threads, [&](std::size_t j) {
    const auto jj = static_cast<Eigen::Index>(j);
    if (column_constant(x, jj)) return;
    const Eigen::VectorXd col = x.col(jj);
    switch (method) {
      case RankMethod::anova_f: scores[j] = anova_f(col, y, n_classes); break;
      case RankMethod::chi_square: scores[j] = chi_square(col, y, n_classes); break;
      case RankMethod::pearson: scores[j] = pearson_max(col, y, n_classes); break;
      case RankMethod::mutual_info:
        scores[j] = mutual_information(discretize(column(x, jj), params.mi_bins), params.mi_bins, labels,
                                       static_cast<int>(n_classes));
        break;
      case RankMethod::relieff: break;
    }
  });
  return scores;
}

RankedFeatures rank_features(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t n_classes,
                             RankMethod method, std::size_t k, const RankParams& params, unsigned threads) {
  if (k > static_cast<std::size_t>(x.cols())) throw std::invalid_argument("K exceeds the number of features");
  const auto s = score_features(x, y, n_classes, method, params, threads);
  RankedFeatures r;
  r.method = std::string(rank_method_name(method));
  r.order = order_by_score(s);
  for (auto j : r.order) r.scores.push_back(s[j]);
  r.k = k == 0 ? s.size() : k;
  if (method == RankMethod::mutual_info) r.params.emplace_back("bins", std::to_string(params.mi_bins));
  if (method == RankMethod::relieff) r.params.emplace_back("k", std::to_string(params.relieff_k));
  return r;
}

RankedFeatures mrmr_select(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t n_classes, std::size_t k,
                           MrmrVariant variant, const RankParams& params) {
  const auto p = static_cast<std::size_t>(x.cols());
  if (k > p) throw std::invalid_argument("K exceeds the number of features");
  if (k == 0) throw std::invalid_argument("K must be positive");
  const bool fcq = variant == MrmrVariant::FCQ;
  const auto relevance = score_features(x, y, n_classes, fcq ? RankMethod::anova_f : RankMethod::mutual_info, params);

  // FCQ redundancy uses unit-norm centred columns so |z_a . z_b| is |Pearson|.
  Eigen::MatrixXd z;
  std::vector<std::vector<int>> bins;
  if (fcq) {
    z = x.rowwise() - x.colwise().mean();
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double norm = z.col(j).norm();
      if (norm > 0.0 && !column_constant(x, j))
        z.col(j) /= norm;
      else
        z.col(j).setZero();
    }
  } else {
    for (Eigen::Index j = 0; j < x.cols(); ++j) bins.push_back(discretize(column(x, j), params.mi_bins));
  }

  RankedFeatures r;
  r.method = fcq ? "mrmr_fcq" : "mrmr_miq";
  r.k = k;
  if (!fcq) r.params.emplace_back("bins", std::to_string(params.mi_bins));
  std::vector<double> redundancy_sum(p, 0.0);
  std::vector<char> taken(p, 0);
  for (std::size_t step = 0; step < k; ++step) {
    std::size_t best = p;
    double best_score = -1.0;
    for (std::size_t j = 0; j < p; ++j) {
      if (taken[j]) continue;
      const double score =
          step == 0 ? relevance[j] : relevance[j] / (redundancy_sum[j] / static_cast<double>(step) + kMrmrEps);
      if (score > best_score) {
        best_score = score;
        best = j;
      }
    }
    taken[best] = 1;
    r.order.push_back(best);
    r.scores.push_back(best_score);
    if (step + 1 == k) break;
    for (std::size_t j = 0; j < p; ++j) {
      if (taken[j]) continue;
      if (fcq) {
        redundancy_sum[j] += std::abs(z.col(static_cast<Eigen::Index>(j)).dot(z.col(static_cast<Eigen::Index>(best))));
      } else {
        redundancy_sum[j] += mutual_information(bins[j], params.mi_bins, bins[best], params.mi_bins);
      }
    }
  }
  return r;
}

PcaTransform pca_fit(const Eigen::MatrixXd& x, std::size_t m) {
  const auto n = static_cast<std::size_t>(x.rows()), p = static_cast<std::size_t>(x.cols());
  if (n < 2 || m == 0 || m > std::min(n - 1, p))
    throw std::invalid_argument("pca: m must be in [1, min(n_rows - 1, p)]");
  PcaTransform t;
  t.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd xc = x.rowwise() - t.mean.transpose();
  const double denom = static_cast<double>(n - 1);
  const auto mi = static_cast<Eigen::Index>(m);

  Eigen::VectorXd eigval;
  Eigen::MatrixXd comps;
  double total = 0.0;
  if (p <= n) {
    const Eigen::MatrixXd cov = xc.transpose() * xc / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw NumericalError("pca: eigendecomposition failed");
    total = cov.trace();
    eigval = es.eigenvalues().reverse().head(mi);
    comps = es.eigenvectors().rowwise().reverse().leftCols(mi);
  } else {
    const Eigen::MatrixXd gram = xc * xc.transpose() / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    if (es.info() != Eigen::Success) throw NumericalError("pca: eigendecomposition failed");
    total = gram.trace();
    eigval = es.eigenvalues().reverse().head(mi);
    const Eigen::MatrixXd v = es.eigenvectors().rowwise().reverse().leftCols(mi);
    comps.resize(static_cast<Eigen::Index>(p), mi);
    for (Eigen::Index i = 0; i < mi; ++i) {
      if (eigval(i) <= 1e-12 * std::max(total, 1e-300))
        throw NumericalError("pca: requested component has zero variance");
      comps.col(i) = xc.transpose() * v.col(i) / std::sqrt(denom * eigval(i));
    }
  }
  for (Eigen::Index i = 0; i < mi; ++i) {
    Eigen::Index arg;
    comps.col(i).cwiseAbs().maxCoeff(&arg);
    if (comps(arg, i) < 0.0) comps.col(i) *= -1.0;
  }
  t.components = comps;
  t.explained_ratio = total > 0.0 ? Eigen::VectorXd(eigval.cwiseMax(0.0) / total) : Eigen::VectorXd::Zero(mi);
  return t;
}

Eigen::MatrixXd pca_apply(const Eigen::MatrixXd& x, const PcaTransform& t) {
  if (x.cols() != t.mean.size()) throw DataError("pca_apply: column count mismatch");
  return (x.rowwise() - t.mean.transpose()) * t.components;
}

SelectorKind parse_selector(std::string_view s) {
  static const std::pair<std::string_view, SelectorKind> table[] = {
      {"none", SelectorKind::none},       {"anova_f", SelectorKind::anova_f},
      {"chi_square", SelectorKind::chi_square}, {"mutual_info", SelectorKind::mutual_info},
      {"pearson", SelectorKind::pearson}, {"relieff", SelectorKind::relieff},
      {"mrmr", SelectorKind::mrmr_fcq},   {"mrmr_fcq", SelectorKind::mrmr_fcq},
      {"mrmr_miq", SelectorKind::mrmr_miq}, {"pca", SelectorKind::pca}};
  for (const auto& [name, kind] : table)
    if (name == s) return kind;
  throw std::invalid_argument("unknown selector '" + std::string(s) + "'");
}

std::string_view selector_name(SelectorKind k) {
  switch (k) {
    case SelectorKind::none: return "none";
    case SelectorKind::anova_f: return "anova_f";
    case SelectorKind::chi_square: return "chi_square";
    case SelectorKind::mutual_info: return "mutual_info";
    case SelectorKind::pearson: return "pearson";
    case SelectorKind::relieff: return "relieff";
    case SelectorKind::mrmr_fcq: return "mrmr_fcq";
    case SelectorKind::mrmr_miq: return "mrmr_miq";
    case SelectorKind::pca: return "pca";
  }
  return "?";
}

Eigen::MatrixXd FittedSelector::apply(const Eigen::MatrixXd& x) const {
  switch (kind) {
    case SelectorKind::none: return x;
    case SelectorKind::pca: return pca_apply(x, *pca);
    default:
      for (auto c : columns)
        if (static_cast<Eigen::Index>(c) >= x.cols()) throw DataError("selected column out of range");
      return take_cols(x, columns);
  }
}

FittedSelector fit_selector(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t n_classes,
                            const SelectorSpec& spec, unsigned threads) {
  FittedSelector f;
  f.kind = spec.kind;
  switch (spec.kind) {
    case SelectorKind::none: break;
    case SelectorKind::pca: f.pca = pca_fit(x, spec.k); break;
    case SelectorKind::mrmr_fcq:
      f.columns = mrmr_select(x, y, n_classes, spec.k, MrmrVariant::FCQ, spec.params).order;
      break;
    case SelectorKind::mrmr_miq:
      f.columns = mrmr_select(x, y, n_classes, spec.k, MrmrVariant::MIQ, spec.params).order;
      break;
    default: {
      const auto method = parse_rank_method(selector_name(spec.kind));
      f.columns = rank_features(x, y, n_classes, method, spec.k, spec.params, threads).top(spec.k);
    }
  }
  return f;
}

void write_ranking_csv(const RankedFeatures& r, std::span<const FeatureDescriptor> descriptors,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  out << "rank,column,descriptor,score\n";
  for (std::size_t i = 0; i < r.order.size(); ++i) {
    const auto c = r.order[i];
    out << i + 1 << ',' << c << ',' << (c < descriptors.size() ? descriptors[c].label() : std::string()) << ','
        << r.scores[i] << '\n';
  }
}

}  // namespace eegstack
