#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "eegstack/evaluation.hpp"
#include "test_support.hpp"

using namespace eegstack;
using namespace testing_support;

namespace {

// Reads the true label back out of column 0; lets the harness be checked
// against a known upper bound.
class OracleClassifier : public Classifier {
 public:
  void fit(const Eigen::MatrixXd&, std::span<const int>, std::size_t n_classes) override { classes_ = n_classes; }
  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const override {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(x.rows(), static_cast<Eigen::Index>(classes_));
    for (Eigen::Index i = 0; i < x.rows(); ++i) p(i, static_cast<Eigen::Index>(std::lround(x(i, 0)))) = 1.0;
    return p;
  }

 private:
  std::size_t classes_ = 0;
};

FeatureMatrix matrix_from(const Eigen::MatrixXd& x, const std::vector<int>& y, std::size_t C) {
  FeatureMatrix fm;
  fm.values = x;
  fm.labels = y;
  for (std::size_t c = 0; c < C; ++c) fm.class_names.push_back("c" + std::to_string(c));
  for (Eigen::Index j = 0; j < x.cols(); ++j) fm.descriptors.push_back({static_cast<std::uint32_t>(j), Domain::TD, "f", {}});
  fm.source_id = "unit";
  fm.catalog_version = "v";
  return fm;
}

// Independent F1: per-class 2TP / (2TP + FP + FN) by counting pairs.
double f1_oracle(const std::vector<int>& truth, const std::vector<int>& pred, int c) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    tp += truth[i] == c && pred[i] == c;
    fp += truth[i] != c && pred[i] == c;
    fn += truth[i] == c && pred[i] != c;
  }
  return 2 * tp + fp + fn > 0 ? 100.0 * 2 * tp / (2 * tp + fp + fn) : 0.0;
}

}  // namespace

TEST_CASE("stratified folds on tiny and balanced sets") {
  const std::vector<int> tiny = {0, 1, 2, 3, 0, 1, 2, 3};
  const auto plan = stratified_kfold(tiny, 2, 5);
  for (std::size_t f = 0; f < 2; ++f) {
    std::multiset<int> classes;
    for (auto i : plan.test_indices(f)) classes.insert(tiny[i]);
    CHECK(classes == std::multiset<int>{0, 1, 2, 3});
  }
  CHECK(stratified_kfold(tiny, 2, 5).assignment == plan.assignment);

  std::vector<int> balanced(240);
  for (std::size_t i = 0; i < 240; ++i) balanced[i] = static_cast<int>(i % 4);
  const auto p10 = stratified_kfold(balanced, 10, 1);
  for (std::size_t f = 0; f < 10; ++f) {
    std::map<int, int> count;
    for (auto i : p10.test_indices(f)) count[balanced[i]]++;
    for (int c = 0; c < 4; ++c) CHECK(count[c] == 6);
  }
  CHECK_THROWS_AS(stratified_kfold(std::vector<int>{0, 0, 0, 1, 1}, 3, 0), DataError);
}

TEST_CASE("fold plan invariants over random label vectors") {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng.below(9);
    const int C = 2 + static_cast<int>(rng.below(4));
    std::vector<int> labels;
    for (int c = 0; c < C; ++c) {
      const std::size_t count = k + rng.below(25);
      labels.insert(labels.end(), count, c);
    }
    rng.shuffle(labels.begin(), labels.end());
    const auto plan = stratified_kfold(labels, k, rng.next_u64());
    REQUIRE(plan.assignment.size() == labels.size());
    std::vector<int> seen(labels.size(), 0);
    for (std::size_t f = 0; f < k; ++f) {
      for (auto i : plan.test_indices(f)) seen[i]++;
      CHECK(plan.train_indices(f).size() + plan.test_indices(f).size() == labels.size());
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
    for (int c = 0; c < C; ++c) {
      std::vector<int> per_fold(k, 0);
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == c) per_fold[static_cast<std::size_t>(plan.assignment[i])]++;
      const auto [lo, hi] = std::minmax_element(per_fold.begin(), per_fold.end());
      CHECK(*hi - *lo <= 1);
    }
  }
}

TEST_CASE("metrics: hand-computed confusion matrices") {
  Confusion diag = Confusion::Zero(3, 3);
  diag.diagonal() << 4, 7, 2;
  const auto d = metrics_from_confusion(diag);
  CHECK(d.accuracy == 100.0);
  CHECK(d.macro_f1 == 100.0);

  Confusion half(2, 2);
  half << 5, 5, 5, 5;
  const auto h = metrics_from_confusion(half);
  CHECK(h.accuracy == 50.0);
  CHECK(h.f1[0] == 50.0);
  CHECK(h.macro_f1 == 50.0);

  Confusion m(3, 3);
  m << 3, 1, 0, 2, 4, 0, 0, 0, 0;
  const auto r = metrics_from_confusion(m);
  CHECK(r.accuracy == doctest::Approx(70.0));
  CHECK(r.f1[0] == doctest::Approx(100.0 * 6.0 / 9.0));
  CHECK(r.f1[1] == doctest::Approx(100.0 * 8.0 / 11.0));
  CHECK(r.f1[2] == 0.0);
  CHECK(r.precision[0] == doctest::Approx(60.0));
  CHECK(r.recall[1] == doctest::Approx(400.0 / 6.0));

  CHECK_THROWS_AS(metrics_from_confusion(Confusion::Zero(2, 2)), DataError);
}

TEST_CASE("metrics agree with pairwise counting; micro F1 equals accuracy") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const int C = 2 + static_cast<int>(rng.below(5));
    const std::size_t n = 1 + rng.below(300);
    std::vector<int> truth(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = static_cast<int>(rng.below(C));
      pred[i] = rng.uniform() < 0.6 ? truth[i] : static_cast<int>(rng.below(C));
    }
    const auto cm = confusion_matrix(truth, pred, C);
    CHECK(cm.sum() == static_cast<std::int64_t>(n));
    const auto m = metrics_from_confusion(cm);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < n; ++i) hit += truth[i] == pred[i];
    CHECK(m.accuracy == 100.0 * static_cast<double>(hit) / static_cast<double>(n));
    CHECK(m.micro_f1 == m.accuracy);
    double macro = 0.0;
    for (int c = 0; c < C; ++c) {
      CHECK(m.f1[c] == doctest::Approx(f1_oracle(truth, pred, c)).epsilon(1e-12));
      macro += f1_oracle(truth, pred, c);
    }
    CHECK(m.macro_f1 == doctest::Approx(macro / C).epsilon(1e-12));
    for (double v : m.f1) CHECK((v >= 0.0 && v <= 100.0));
  }
}

TEST_CASE("oracle classifier reaches the upper bound") {
  Rng rng(3);
  const std::size_t n = 80;
  Eigen::MatrixXd x(n, 3);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % 4);
    x(static_cast<Eigen::Index>(i), 0) = y[i];
    x(static_cast<Eigen::Index>(i), 1) = rng.normal();
    x(static_cast<Eigen::Index>(i), 2) = rng.normal();
  }
  const auto fm = matrix_from(x, y, 4);
  PipelineSpec spec;
  spec.standardize = false;
  spec.selector.kind = SelectorKind::none;
  const auto rep = cross_validate(fm, spec, {}, [] { return std::make_unique<OracleClassifier>(); });
  CHECK(rep.pooled.accuracy == 100.0);
  CHECK(rep.pooled.macro_f1 == 100.0);
  CHECK(rep.predictions == y);
}

TEST_CASE("cross-validation bookkeeping and determinism") {
  Rng rng(4);
  Eigen::MatrixXd x;
  std::vector<int> y;
  make_clusters(rng, 20, 4, 12, 1.0, x, y);
  const auto fm = matrix_from(x, y, 4);
  PipelineSpec spec;
  spec.model.kind = ModelKind::logreg;
  spec.selector.k = 6;
  for (Protocol protocol : {Protocol::leakage_safe, Protocol::paper_protocol}) {
    CvConfig cfg;
    cfg.seed = 9;
    cfg.protocol = protocol;
    const auto rep = cross_validate(fm, spec, cfg);
    CHECK(rep.confusion.sum() == 80);
    CHECK(rep.per_fold.size() == 10);
    std::size_t correct = 0, tested = 0;
    for (const auto& f : rep.per_fold) {
      correct += static_cast<std::size_t>(std::lround(f.metrics.accuracy * static_cast<double>(f.n_test) / 100.0));
      tested += f.n_test;
    }
    CHECK(tested == 80);
    CHECK(rep.pooled.accuracy == 100.0 * static_cast<double>(correct) / 80.0);
    CHECK(rep.pooled.micro_f1 == rep.pooled.accuracy);
    CHECK((rep.pooled.accuracy >= 0.0 && rep.pooled.accuracy <= 100.0));
    cfg.threads = 3;
    const auto again = cross_validate(fm, spec, cfg);
    CHECK(again.predictions == rep.predictions);
    CHECK(again.confusion == rep.confusion);
    CHECK(rep.protocol == protocol);
  }
}

// One 160-row draw has a binomial sd near 3.4 points, so the band is checked on
// the mean of forty independent draws (sd near 0.55 points).
TEST_CASE("label-permuted noise sits at chance") {
  Rng rng(5);
  const std::size_t n = 160;
  double sum = 0.0;
  for (int draw = 0; draw < 40; ++draw) {
    Eigen::MatrixXd x(n, 10);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(i % 4);
      for (Eigen::Index j = 0; j < 10; ++j) x(static_cast<Eigen::Index>(i), j) = rng.normal();
    }
    rng.shuffle(y.begin(), y.end());
    PipelineSpec spec;
    spec.model.kind = ModelKind::logreg;
    spec.selector.k = 5;
    CvConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(draw);
    const auto rep = cross_validate(matrix_from(x, y, 4), spec, cfg);
    CHECK(rep.pooled.accuracy >= 12.5);
    CHECK(rep.pooled.accuracy <= 37.5);
    sum += rep.pooled.accuracy;
  }
  CHECK(sum / 40.0 >= 23.0);
  CHECK(sum / 40.0 <= 27.0);
}

TEST_CASE("fold failures abort with context") {
  Rng rng(6);
  Eigen::MatrixXd x;
  std::vector<int> y;
  make_clusters(rng, 10, 2, 4, 1.0, x, y);
  PipelineSpec spec;
  spec.model.kind = ModelKind::logreg;
  spec.selector.k = 50;  // more than the 4 columns
  try {
    cross_validate(matrix_from(x, y, 2), spec, {});
    FAIL("expected failure");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("fold") != std::string::npos);
  }
}

TEST_CASE("k sweep: consistency and informative prefix") {
  Rng rng(7);
  const std::size_t n = 120;
  Eigen::MatrixXd x(n, 30);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % 4);
    for (Eigen::Index j = 0; j < 30; ++j) {
      // Columns 0-11 carry weak, independent class information.
      const double shift = j < 12 ? ((j % 4 == y[i]) ? 0.9 : 0.0) : 0.0;
      x(static_cast<Eigen::Index>(i), j) = shift + rng.normal();
    }
  }
  const auto fm = matrix_from(x, y, 4);
  PipelineSpec spec;
  spec.model.kind = ModelKind::logreg;
  spec.selector.kind = SelectorKind::anova_f;
  CvConfig cfg;
  cfg.seed = 3;

  const std::vector<std::size_t> one = {12};
  const auto single = k_sweep(fm, spec, one, cfg);
  REQUIRE(single.size() == 1);
  spec.selector.k = 12;
  const auto direct = cross_validate(fm, spec, cfg);
  CHECK(single[0].accuracy == direct.pooled.accuracy);
  CHECK(single[0].f1 == direct.pooled.macro_f1);
  CHECK(single[0].best);

  const std::vector<std::size_t> grid = {2, 12};
  const auto rows = k_sweep(fm, spec, grid, cfg);
  CHECK(rows[1].accuracy >= rows[0].accuracy);
  CHECK(std::count_if(rows.begin(), rows.end(), [](const SweepRow& r) { return r.best; }) == 1);

  TempDir dir("sweep");
  write_sweep_csv(rows, "s1", dir / "sweep.csv");
  CHECK(slurp(dir / "sweep.csv").rfind("subject,k,accuracy,f1,best\n", 0) == 0);
}

TEST_CASE("comparison tables") {
  EvalReport a;
  a.subject = "sub-01";
  a.model = "ensemble";
  a.pooled.accuracy = 60.0;
  a.pooled.macro_f1 = 58.0;
  EvalReport b = a;
  b.subject = "sub-02";
  b.pooled.accuracy = 80.0;
  b.pooled.macro_f1 = 79.0;

  const std::vector<EvalReport> one = {a};
  const auto r1 = comparison_rows(one);
  REQUIRE(r1.size() == 1);
  CHECK(r1[0].accuracy == 60.0);
  CHECK(r1[0].f1 == 58.0);

  const std::vector<EvalReport> two = {a, b};
  const auto r2 = comparison_rows(two);
  REQUIRE(r2.size() == 3);
  CHECK(r2[2].subject == "overall");
  CHECK(comparison_csv(r2).find("overall,ensemble,70.00,68.50") != std::string::npos);

  std::vector<EvalReport> ten;
  for (int s = 1; s <= 10; ++s) {
    EvalReport r = a;
    r.subject = "sub-" + std::to_string(s);
    r.pooled.accuracy = 50.0 + s;
    ten.push_back(r);
  }
  const std::vector<ComparisonRow> external = {{"sub-1", "svm", 40.0, 39.0}, {"overall", "svm", 41.0, 40.0}};
  const auto r10 = comparison_rows(ten, external);
  CHECK(std::count_if(r10.begin(), r10.end(), [](const auto& r) { return r.model == "ensemble"; }) == 11);
  CHECK(std::count_if(r10.begin(), r10.end(), [](const auto& r) { return r.subject == "overall"; }) == 2);
  const auto given = std::find_if(r10.begin(), r10.end(), [](const auto& r) { return r.subject == "overall" && r.model == "svm"; });
  CHECK(given->accuracy == 41.0);

  TempDir dir("report");
  write_report(dir.path(), two);
  const auto back = read_comparison_csv(dir / "summary.csv");
  REQUIRE(back.size() == 3);
  CHECK(back[2].accuracy == 70.0);
}

TEST_CASE("confusion renderings") {
  Confusion m(2, 2);
  m << 3, 1, 0, 4;
  const std::vector<std::string> names = {"up", "down"};
  const auto csv = confusion_csv(m, names);
  CHECK(csv.find("3,1") != std::string::npos);
  const auto txt = confusion_text(m, names);
  CHECK(txt.find("75.0") != std::string::npos);
  CHECK(txt.find("100.0") != std::string::npos);
}
