#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <numbers>
#include <set>
#include <tuple>

#include "eegstack/selection.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace eegstack;
using namespace testing_support;

namespace {

const RankMethod kMethods[] = {RankMethod::anova_f, RankMethod::chi_square, RankMethod::mutual_info,
                               RankMethod::pearson, RankMethod::relieff};

// Column 0 is the class code itself; columns 1-9 are noise.
void perfect_fixture(Eigen::MatrixXd& x, std::vector<int>& y, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = 80;
  x.resize(n, 10);
  y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % 4);
    x(static_cast<Eigen::Index>(i), 0) = y[i];
    for (Eigen::Index j = 1; j < 10; ++j) x(static_cast<Eigen::Index>(i), j) = rng.normal();
  }
}

double chi_square_oracle(const Eigen::VectorXd& raw, std::span<const int> y, int n_classes) {
  const double lo = raw.minCoeff(), hi = raw.maxCoeff();
  const Eigen::VectorXd f = (raw.array() - lo) / (hi - lo);
  std::vector<double> observed(n_classes, 0.0), prior(n_classes, 0.0);
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    observed[y[i]] += f(i);
    prior[y[i]] += 1.0 / static_cast<double>(f.size());
  }
  double chi = 0.0;
  for (int c = 0; c < n_classes; ++c) {
    const double expected = prior[c] * f.sum();
    chi += (observed[c] - expected) * (observed[c] - expected) / expected;
  }
  return chi;
}

double mi_oracle(const Eigen::VectorXd& col, std::span<const int> y, int n_classes, int bins) {
  const double lo = col.minCoeff(), hi = col.maxCoeff();
  const double n = static_cast<double>(col.size());
  std::vector<std::vector<double>> joint(bins, std::vector<double>(n_classes, 0.0));
  for (Eigen::Index i = 0; i < col.size(); ++i) {
    int b = static_cast<int>(std::floor((col(i) - lo) / (hi - lo) * bins));
    b = std::clamp(b, 0, bins - 1);
    joint[b][y[i]] += 1.0 / n;
  }
  double mi = 0.0;
  for (int b = 0; b < bins; ++b) {
    double pb = 0.0;
    for (int c = 0; c < n_classes; ++c) pb += joint[b][c];
    for (int c = 0; c < n_classes; ++c) {
      double pc = 0.0;
      for (int bb = 0; bb < bins; ++bb) pc += joint[bb][c];
      if (joint[b][c] > 0.0) mi += joint[b][c] * std::log(joint[b][c] / (pb * pc));
    }
  }
  return mi;
}

}  // namespace

TEST_CASE("a perfect predictor is ranked first by every method") {
  Eigen::MatrixXd x;
  std::vector<int> y;
  perfect_fixture(x, y, 1);
  for (RankMethod m : kMethods) {
    const auto r = rank_features(x, y, 4, m);
    CHECK_MESSAGE(r.order.front() == 0, rank_method_name(m));
    CHECK(r.order.size() == 10);
    CHECK(std::is_sorted(r.scores.rbegin(), r.scores.rend()));
    CHECK(parse_rank_method(rank_method_name(m)) == m);
  }
  for (auto v : {MrmrVariant::FCQ, MrmrVariant::MIQ}) CHECK(mrmr_select(x, y, 4, 3, v).order.front() == 0);
}

TEST_CASE("zero-variance columns score exactly zero") {
  Eigen::MatrixXd x;
  std::vector<int> y;
  perfect_fixture(x, y, 2);
  x.col(5).setConstant(3.25);
  for (RankMethod m : kMethods) {
    const auto s = score_features(x, y, 4, m);
    CHECK_MESSAGE(s[5] == 0.0, rank_method_name(m));
    for (double v : s) CHECK(std::isfinite(v));
  }
}

TEST_CASE("scores agree with brute-force oracles") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const int C = 2 + static_cast<int>(rng.below(3));
    const std::size_t n = static_cast<std::size_t>(C) * (5 + rng.below(20));
    Eigen::MatrixXd x(n, 6);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(i % static_cast<std::size_t>(C));
      for (Eigen::Index j = 0; j < 6; ++j) x(static_cast<Eigen::Index>(i), j) = rng.normal() + 0.4 * j * y[i];
    }
    const auto f = score_features(x, y, C, RankMethod::anova_f);
    const auto chi = score_features(x, y, C, RankMethod::chi_square);
    const auto mi = score_features(x, y, C, RankMethod::mutual_info);
    const auto pc = score_features(x, y, C, RankMethod::pearson);
    for (Eigen::Index j = 0; j < 6; ++j) {
      const Eigen::VectorXd col = x.col(j);
      CHECK(f[j] == doctest::Approx(oracles::anova_f(col, y, C)).epsilon(1e-10));
      CHECK(chi[j] == doctest::Approx(chi_square_oracle(col, y, C)).epsilon(1e-10));
      CHECK(mi[j] == doctest::Approx(mi_oracle(col, y, C, 10)).epsilon(1e-10));
      double best = 0.0;
      for (int c = 0; c < C; ++c) {
        Eigen::VectorXd ind(n);
        for (std::size_t i = 0; i < n; ++i) ind(static_cast<Eigen::Index>(i)) = y[i] == c ? 1.0 : 0.0;
        best = std::max(best, std::abs(oracles::pearson(col, ind)));
      }
      CHECK(pc[j] == doctest::Approx(best).epsilon(1e-10));
    }
  }
}

TEST_CASE("anova ranks the signal and its negation above noise") {
  Rng rng(4);
  const std::size_t n = 60;
  Eigen::MatrixXd x(n, 3);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % 3);
    const auto r = static_cast<Eigen::Index>(i);
    x(r, 0) = 2.0 * y[i] + 0.3 * rng.normal();
    x(r, 1) = rng.normal();
    x(r, 2) = -x(r, 0);
  }
  const auto r = rank_features(x, y, 3, RankMethod::anova_f);
  CHECK(std::set<std::size_t>{r.order[0], r.order[1]} == std::set<std::size_t>{0, 2});
  CHECK(r.order[2] == 1);
  CHECK(r.scores[0] == doctest::Approx(oracles::anova_f(x.col(0), y, 3)));
}

TEST_CASE("rankers are permutation-equivariant and shift-invariant") {
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd x;
    std::vector<int> y;
    make_clusters(rng, 15, 3, 8, 1.0, x, y);
    std::vector<Eigen::Index> perm(8);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm.begin(), perm.end());
    Eigen::MatrixXd xp(x.rows(), 8), xs = x;
    for (Eigen::Index j = 0; j < 8; ++j) {
      xp.col(j) = x.col(perm[j]);
      xs.col(j).array() += rng.uniform(-50.0, 50.0);
    }
    for (RankMethod m : kMethods) {
      const auto s = score_features(x, y, 3, m);
      const auto sp = score_features(xp, y, 3, m);
      const auto ss = score_features(xs, y, 3, m);
      for (Eigen::Index j = 0; j < 8; ++j) {
        CHECK_MESSAGE(sp[j] == doctest::Approx(s[perm[j]]).epsilon(1e-9), rank_method_name(m));
        CHECK_MESSAGE(ss[j] == doctest::Approx(s[j]).epsilon(1e-6), rank_method_name(m));
      }
    }
  }
}

TEST_CASE("rank_features rejects single-class input") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(10, 3);
  std::vector<int> y(10, 1);
  for (RankMethod m : kMethods) CHECK_THROWS(rank_features(x, y, 2, m));
}

TEST_CASE("mrmr K=1 is the top relevance pick") {
  Eigen::MatrixXd x;
  std::vector<int> y;
  oracles::mrmr_fixture(8, 25, x, y);
  CHECK(mrmr_select(x, y, 4, 1, MrmrVariant::FCQ).order.front() == rank_features(x, y, 4, RankMethod::anova_f).order.front());
  CHECK(mrmr_select(x, y, 4, 1, MrmrVariant::MIQ).order.front() ==
        rank_features(x, y, 4, RankMethod::mutual_info).order.front());
}

TEST_CASE("mrmr excludes duplicates and matches the greedy oracle") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    Eigen::MatrixXd x;
    std::vector<int> y;
    oracles::mrmr_fixture(seed, 30, x, y);
    const auto r = mrmr_select(x, y, 4, 3);
    CHECK(std::set<std::size_t>(r.order.begin(), r.order.end()).count(3) == 0);
    CHECK(std::set<std::size_t>(r.order.begin(), r.order.end()).count(4) == 0);
    CHECK(std::set<std::size_t>(r.order.begin(), r.order.end()).count(5) == 0);
    if (seed != 5) CHECK(std::set<std::size_t>(r.order.begin(), r.order.end()) == std::set<std::size_t>{0, 1, 2});
    const auto full = mrmr_select(x, y, 4, 10);
    CHECK(full.order == oracles::mrmr_fcq(x, y, 4, 10));
    for (std::size_t k = 1; k <= 10; ++k) {
      const auto part = mrmr_select(x, y, 4, k).order;
      CHECK(std::equal(part.begin(), part.end(), full.order.begin()));
    }
    const auto miq = mrmr_select(x, y, 4, 3, MrmrVariant::MIQ);
    CHECK(std::set<std::size_t>(miq.order.begin(), miq.order.end()) == std::set<std::size_t>{0, 1, 2});
  }
}

// The FCQ quotient rewards a weak column whose correlation with the current
// selection is near zero; seed 5 draws such a noise column.
TEST_CASE("fcq can prefer a noise column nearly uncorrelated with the selection") {
  Eigen::MatrixXd x;
  std::vector<int> y;
  oracles::mrmr_fixture(5, 30, x, y);
  const auto r = mrmr_select(x, y, 4, 3);
  CHECK(r.order == oracles::mrmr_fcq(x, y, 4, 3));
  CHECK(r.order[1] >= 6);
  const double corr = std::abs(oracles::pearson(x.col(static_cast<Eigen::Index>(r.order[1])),
                                                x.col(static_cast<Eigen::Index>(r.order[0]))));
  CHECK(corr < 0.01);
}

TEST_CASE("appending a copy of the first pick keeps the first two picks") {
  Eigen::MatrixXd x;
  std::vector<int> y;
  oracles::mrmr_fixture(11, 30, x, y);
  const auto before = mrmr_select(x, y, 4, 2).order;
  Eigen::MatrixXd aug(x.rows(), x.cols() + 1);
  aug << x, x.col(static_cast<Eigen::Index>(before[0]));
  const auto after = mrmr_select(aug, y, 4, 2).order;
  CHECK(after == before);
}

TEST_CASE("zero-variance columns are never picked while relevant ones remain") {
  Eigen::MatrixXd x;
  std::vector<int> y;
  oracles::mrmr_fixture(12, 20, x, y);
  x.col(0).setZero();
  const auto r = mrmr_select(x, y, 4, 19);
  CHECK(std::find(r.order.begin(), r.order.end(), std::size_t{0}) == r.order.end());
  CHECK_THROWS(mrmr_select(x, y, 4, 21));
}

TEST_CASE("pca on a noisy diagonal line") {
  Rng rng(13);
  Eigen::MatrixXd x(200, 2);
  for (Eigen::Index i = 0; i < 200; ++i) {
    const double t = rng.normal() * 3.0;
    x(i, 0) = t + 0.01 * rng.normal();
    x(i, 1) = t + 0.01 * rng.normal();
  }
  const auto t = pca_fit(x, 1);
  const Eigen::Vector2d axis(1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0));
  const double cosang = std::abs(t.components.col(0).dot(axis));
  CHECK(std::acos(std::min(1.0, cosang)) * 180.0 / std::numbers::pi < 1.0);
  CHECK(t.explained_ratio(0) >= 0.99);
}

TEST_CASE("pca on isotropic data and completeness") {
  Rng rng(14);
  Eigen::MatrixXd x(2000, 4);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < 4; ++j) x(i, j) = rng.normal();
  const auto t = pca_fit(x, 4);
  for (Eigen::Index j = 0; j < 4; ++j) CHECK(std::abs(t.explained_ratio(j) / 0.25 - 1.0) < 0.15);
  CHECK(t.explained_ratio.sum() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("pca invariants hold on both covariance and Gram paths") {
  Rng rng(15);
  for (auto [n, p, m] : {std::tuple{50, 8, 5}, std::tuple{12, 40, 6}}) {
    Eigen::MatrixXd x(n, p);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < p; ++j) x(i, j) = rng.normal() * (1.0 + j % 5);
    const auto t = pca_fit(x, static_cast<std::size_t>(m));
    const Eigen::MatrixXd gram = t.components.transpose() * t.components;
    CHECK((gram - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff() < 1e-8);
    for (int j = 1; j < m; ++j) CHECK(t.explained_ratio(j) <= t.explained_ratio(j - 1) + 1e-12);
    CHECK(t.explained_ratio.sum() <= 1.0 + 1e-12);
    // Ratio equals projected variance over total variance.
    const Eigen::MatrixXd proj = pca_apply(x, t);
    const Eigen::MatrixXd centred = x.rowwise() - x.colwise().mean();
    const double total = centred.squaredNorm();
    for (int j = 0; j < m; ++j) CHECK(proj.col(j).squaredNorm() / total == doctest::Approx(t.explained_ratio(j)).epsilon(1e-8));
    CHECK_THROWS(pca_fit(x, static_cast<std::size_t>(std::min(n - 1, p) + 1)));
  }
}

TEST_CASE("fitted selectors apply consistently") {
  Eigen::MatrixXd x;
  std::vector<int> y;
  oracles::mrmr_fixture(16, 20, x, y);
  for (const char* name : {"none", "anova_f", "chi_square", "mutual_info", "pearson", "relieff", "mrmr", "mrmr_fcq",
                           "mrmr_miq", "pca"}) {
    SelectorSpec spec;
    spec.kind = parse_selector(name);
    spec.k = 4;
    const auto f = fit_selector(x, y, 4, spec);
    const auto out = f.apply(x);
    CHECK(out.rows() == x.rows());
    CHECK(out.cols() == (spec.kind == SelectorKind::none ? 20 : 4));
    if (!f.columns.empty())
      for (std::size_t i = 0; i < f.columns.size(); ++i)
        CHECK(out.col(static_cast<Eigen::Index>(i)) == x.col(static_cast<Eigen::Index>(f.columns[i])));
  }
  CHECK_THROWS(parse_selector("trees"));
}

TEST_CASE("ranking csv") {
  Eigen::MatrixXd x;
  std::vector<int> y;
  perfect_fixture(x, y, 17);
  const auto r = rank_features(x, y, 4, RankMethod::pearson, 3);
  CHECK(r.top(3).size() == 3);
  std::vector<FeatureDescriptor> desc(10);
  for (std::uint32_t j = 0; j < 10; ++j) desc[j] = {j, Domain::TD, "f" + std::to_string(j), {}};
  TempDir dir("ranking");
  write_ranking_csv(r, desc, dir / "r.csv");
  const auto csv = slurp(dir / "r.csv");
  CHECK(csv.rfind("rank,column,descriptor,score\n1,0,", 0) == 0);
}

TEST_CASE("discretize and mutual information helpers") {
  const std::vector<double> v = {0.0, 0.05, 0.5, 0.99, 1.0};
  const auto b = discretize(v, 10);
  CHECK(b == std::vector<int>{0, 0, 5, 9, 9});
  const std::vector<int> a = {0, 0, 1, 1}, c = {1, 1, 0, 0};
  CHECK(mutual_information(a, 2, c, 2) == doctest::Approx(std::log(2.0)));
  const std::vector<int> d = {0, 1, 0, 1};
  CHECK(mutual_information(a, 2, d, 2) == doctest::Approx(0.0));
}
