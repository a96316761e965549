#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "eegstack/features.hpp"
#include "eegstack/models.hpp"
#include "test_support.hpp"

using namespace eegstack;
using namespace testing_support;

namespace {

double accuracy(const std::vector<int>& a, const std::vector<int>& b) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < a.size(); ++i) hit += a[i] == b[i];
  return static_cast<double>(hit) / static_cast<double>(a.size());
}

void separable_2d(Eigen::MatrixXd& x, std::vector<int>& y, std::uint64_t seed, std::size_t per_class = 30) {
  Rng rng(seed);
  x.resize(static_cast<Eigen::Index>(2 * per_class), 2);
  y.resize(2 * per_class);
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const int c = static_cast<int>(i % 2);
    y[i] = c;
    const double cx = c ? 3.0 : -3.0;
    x(static_cast<Eigen::Index>(i), 0) = cx + 0.5 * rng.normal();
    x(static_cast<Eigen::Index>(i), 1) = cx + 0.5 * rng.normal();
  }
}

}  // namespace

TEST_CASE("softmax rows sum to one and are shift invariant") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.below(10)), c = 2 + static_cast<Eigen::Index>(rng.below(5));
    Eigen::MatrixXd z(n, c);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < c; ++j) z(i, j) = rng.uniform(-700.0, 700.0);
    const auto p = softmax_rows(z);
    CHECK(p.allFinite());
    for (Eigen::Index i = 0; i < n; ++i) CHECK(std::abs(p.row(i).sum() - 1.0) < 1e-9);
    Eigen::MatrixXd shifted = z;
    for (Eigen::Index i = 0; i < n; ++i) shifted.row(i).array() += rng.uniform(-100.0, 100.0);
    CHECK((softmax_rows(shifted) - p).cwiseAbs().maxCoeff() < 1e-12);
  }
  Eigen::MatrixXd tie(1, 3);
  tie << 2.0, 5.0, 5.0;
  CHECK(argmax_rows(tie) == std::vector<int>{1});
}

TEST_CASE("zero-weight model predicts uniform probabilities") {
  LogRegModel m;
  m.weights = Eigen::MatrixXd::Zero(4, 6);
  Rng rng(2);
  Eigen::MatrixXd x(5, 5);
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index j = 0; j < 5; ++j) x(i, j) = rng.normal() * 10.0;
  const auto p = logreg_predict_proba(m, x);
  CHECK((p.array() - 0.25).abs().maxCoeff() < 1e-15);
  CHECK_THROWS(logreg_predict_proba(m, Eigen::MatrixXd::Zero(2, 4)));
}

TEST_CASE("separable clusters are fit perfectly") {
  Eigen::MatrixXd x;
  std::vector<int> y;
  separable_2d(x, y, 3);
  LogRegParams p;
  p.l2_lambda = 0.01;
  const auto m = logreg_train(x, y, 2, p);
  CHECK(accuracy(logreg_predict(m, x), y) == 1.0);
  CHECK(m.weights.allFinite());
  CHECK(m.record.iterations <= p.max_iter);
  const auto probs = logreg_predict_proba(m, x);
  for (Eigen::Index i = 0; i < probs.rows(); ++i) CHECK(std::abs(probs.row(i).sum() - 1.0) < 1e-9);
}

TEST_CASE("a linear model cannot solve XOR") {
  Eigen::MatrixXd x(4, 2);
  x << 0, 0, 1, 1, 0, 1, 1, 0;
  const std::vector<int> y = {0, 0, 1, 1};
  LogRegParams p;
  p.l2_lambda = 0.0;
  p.max_iter = 500;
  const auto m = logreg_train(x, y, 2, p);
  CHECK(accuracy(logreg_predict(m, x), y) <= 0.75);
}

TEST_CASE("analytic gradient matches central differences") {
  Rng rng(4);
  for (int problem = 0; problem < 5; ++problem) {
    const int C = 2 + problem % 3;
    Eigen::MatrixXd x(20, 6);
    std::vector<int> y(20);
    for (int i = 0; i < 20; ++i) {
      y[i] = i % C;
      for (int j = 0; j < 6; ++j) x(i, j) = rng.normal();
    }
    const double lambda = rng.uniform(0.0, 2.0);
    Eigen::MatrixXd w(C, 7);
    for (int a = 0; a < C; ++a)
      for (int b = 0; b < 7; ++b) w(a, b) = rng.normal();
    const auto g = logreg_gradient(x, y, w, lambda);
    const double h = 1e-5;
    double worst = 0.0;
    for (int a = 0; a < C; ++a)
      for (int b = 0; b < 7; ++b) {
        Eigen::MatrixXd wp = w, wm = w;
        wp(a, b) += h;
        wm(a, b) -= h;
        const double fd = (logreg_loss(x, y, wp, lambda) - logreg_loss(x, y, wm, lambda)) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - g(a, b)));
      }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("loss trace is monotone non-increasing") {
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd x;
    std::vector<int> y;
    make_clusters(rng, 20, 3, 5, 0.8, x, y);
    LogRegParams p;
    p.l2_lambda = std::pow(10.0, -2.0 + trial);
    const auto m = logreg_train(x, y, 3, p);
    const auto& tr = m.record.loss_trace;
    REQUIRE(tr.size() >= 2);
    CHECK(tr.front() == doctest::Approx(std::log(3.0)));
    for (std::size_t i = 1; i < tr.size(); ++i) CHECK(tr[i] <= tr[i - 1]);
    CHECK(m.record.final_loss == tr.back());
    if (m.record.converged) CHECK(m.record.grad_norm < p.grad_tol);
  }
}

TEST_CASE("degenerate training input") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(6, 2);
  CHECK_THROWS(logreg_train(x, std::vector<int>(6, 0), 2));
  std::vector<int> y = {0, 1, 0, 1, 0, 1};
  CHECK_THROWS(logreg_train(x, std::span<const int>(y).first(5), 2));
  CHECK_THROWS(lda_train(x, std::vector<int>{0, 1, 1, 1, 1, 1}, 2));
}

TEST_CASE("lda matches the perpendicular bisector for spherical classes") {
  Rng rng(6);
  const std::size_t per = 500;
  Eigen::MatrixXd x(2 * per, 2);
  std::vector<int> y(2 * per);
  const Eigen::Vector2d m0(-1.0, 0.5), m1(1.5, -0.5);
  for (std::size_t i = 0; i < 2 * per; ++i) {
    y[i] = static_cast<int>(i % 2);
    const Eigen::Vector2d& m = y[i] ? m1 : m0;
    x(static_cast<Eigen::Index>(i), 0) = m(0) + rng.normal();
    x(static_cast<Eigen::Index>(i), 1) = m(1) + rng.normal();
  }
  const auto model = lda_train(x, y, 2, 0.0);
  std::size_t agree = 0, total = 0;
  Eigen::MatrixXd grid(41 * 41, 2);
  std::vector<int> rule;
  for (int a = 0; a < 41; ++a)
    for (int b = 0; b < 41; ++b) {
      const Eigen::Vector2d p(-4.0 + 0.2 * a, -4.0 + 0.2 * b);
      grid.row(a * 41 + b) = p.transpose();
      rule.push_back((p - m1).squaredNorm() < (p - m0).squaredNorm() ? 1 : 0);
    }
  const auto pred = lda_predict(model, grid);
  for (std::size_t i = 0; i < rule.size(); ++i) {
    agree += pred[i] == rule[i];
    ++total;
  }
  CHECK(static_cast<double>(agree) / static_cast<double>(total) >= 0.98);
  CHECK(model.priors.sum() == doctest::Approx(1.0));
  const Eigen::LLT<Eigen::MatrixXd> llt(model.covariance);
  CHECK(llt.info() == Eigen::Success);
  CHECK((model.covariance - model.covariance.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("full shrinkage reduces lda to nearest mean with priors") {
  Rng rng(7);
  Eigen::MatrixXd x;
  std::vector<int> y;
  make_clusters(rng, 10, 3, 4, 1.0, x, y);
  // Unbalance the priors.
  Eigen::MatrixXd xb(x.rows() + 6, 4);
  xb << x, x.topRows(6);
  std::vector<int> yb(y);
  yb.insert(yb.end(), y.begin(), y.begin() + 6);
  const auto m = lda_train(xb, yb, 3, 1.0);
  const double s = m.covariance(0, 0);
  CHECK((m.covariance - s * Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);

  Eigen::MatrixXd probe(200, 4);
  for (Eigen::Index i = 0; i < 200; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) probe(i, j) = rng.normal() * 2.0;
  const auto pred = lda_predict(m, probe);
  for (Eigen::Index i = 0; i < 200; ++i) {
    int best = 0;
    double best_v = -1e300;
    for (int c = 0; c < 3; ++c) {
      const Eigen::VectorXd mu = m.means.row(c).transpose();
      const double v = -(probe.row(i).transpose() - mu).squaredNorm() / (2.0 * s) + std::log(m.priors(c));
      if (v > best_v) {
        best_v = v;
        best = c;
      }
    }
    CHECK(pred[static_cast<std::size_t>(i)] == best);
  }
}

TEST_CASE("duplicating the training set leaves lda unchanged") {
  Rng rng(8);
  Eigen::MatrixXd x;
  std::vector<int> y;
  make_clusters(rng, 8, 3, 5, 1.0, x, y);
  Eigen::MatrixXd xx(2 * x.rows(), x.cols());
  xx << x, x;
  std::vector<int> yy(y);
  yy.insert(yy.end(), y.begin(), y.end());
  const auto a = lda_train(x, y, 3, 0.1), b = lda_train(xx, yy, 3, 0.1);
  CHECK((a.means - b.means).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.covariance - b.covariance).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.priors - b.priors).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((a.coef - b.coef).cwiseAbs().maxCoeff() < 1e-9);
  const auto p = lda_predict_proba(a, x);
  for (Eigen::Index i = 0; i < p.rows(); ++i) CHECK(std::abs(p.row(i).sum() - 1.0) < 1e-9);
}

TEST_CASE("ensemble with equal lambdas reduces to the base model") {
  Eigen::MatrixXd x;
  std::vector<int> y;
  separable_2d(x, y, 9, 25);
  EnsembleParams p;
  p.lambdas = {1.0, 1.0, 1.0, 1.0, 1.0};
  const auto e = ensemble_train(x, y, 2, p);
  REQUIRE(e.bases.size() == 5);
  const auto meta = ensemble_meta_features(e, x);
  CHECK(meta.cols() == 10);
  for (int b = 1; b < 5; ++b) CHECK(meta.middleCols(2 * b, 2) == meta.leftCols(2));
  LogRegParams lp;
  lp.l2_lambda = 1.0;
  const auto single = logreg_train(x, y, 2, lp);
  CHECK(ensemble_predict(e, x) == logreg_predict(single, x));
  CHECK(accuracy(ensemble_predict(e, x), y) == 1.0);
}

TEST_CASE("ensemble defaults: determinism, shapes, probabilities") {
  Rng rng(10);
  Eigen::MatrixXd x;
  std::vector<int> y;
  make_clusters(rng, 20, 4, 6, 2.5, x, y);
  EnsembleParams p;
  p.seed = 42;
  const auto a = ensemble_train(x, y, 4, p);
  p.threads = 3;
  const auto b = ensemble_train(x, y, 4, p);
  REQUIRE(a.bases.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(a.bases[i].weights == b.bases[i].weights);
  CHECK(a.meta.weights == b.meta.weights);
  CHECK(a.meta.n_features() == 20);
  std::vector<double> lambdas;
  for (const auto& m : a.bases) lambdas.push_back(m.l2_lambda);
  CHECK(lambdas == std::vector<double>{100, 10, 1, 0.1, 0.01});

  const auto one = ensemble_predict(a, x.topRows(1));
  REQUIRE(one.size() == 1);
  CHECK((one[0] >= 0 && one[0] < 4));
  Eigen::MatrixXd probe(30, 6);
  for (Eigen::Index i = 0; i < 30; ++i)
    for (Eigen::Index j = 0; j < 6; ++j) probe(i, j) = rng.normal() * 5.0;
  const auto prob = ensemble_predict_proba(a, probe);
  for (Eigen::Index i = 0; i < 30; ++i) CHECK(std::abs(prob.row(i).sum() - 1.0) < 1e-9);
  CHECK_THROWS(ensemble_predict(a, Eigen::MatrixXd::Zero(2, 5)));

  Eigen::MatrixXd small = x.topRows(30);
  std::vector<int> ys(y.begin(), y.begin() + 30);
  CHECK_THROWS(ensemble_train(small, ys, 4, p));  // needs 2 * 5 * 4 rows
}

TEST_CASE("predictions are invariant to per-feature rescaling with a refit scaler") {
  Rng rng(11);
  Eigen::MatrixXd x;
  std::vector<int> y;
  make_clusters(rng, 25, 3, 5, 1.2, x, y);
  Eigen::MatrixXd x2 = x;
  x2.col(2) *= 2.0;
  x2.col(4) = x2.col(4) * 4.0 + Eigen::VectorXd::Constant(x.rows(), 3.0);
  for (ModelKind kind : {ModelKind::logreg, ModelKind::lda, ModelKind::ensemble}) {
    ModelSpec spec;
    spec.kind = kind;
    const auto s1 = fit_scaler(x), s2 = fit_scaler(x2);
    const auto z1 = apply_scaler(x, s1), z2 = apply_scaler(x2, s2);
    CHECK((z1 - z2).cwiseAbs().maxCoeff() < 1e-12);
    const auto m1 = fit_model(spec, z1, y, 3), m2 = fit_model(spec, z2, y, 3);
    CHECK(argmax_rows(predict_proba(m1, z1)) == argmax_rows(predict_proba(m2, z2)));
    CHECK(model_kind(m1) == kind);
    CHECK(model_input_dim(m1) == 5);
    CHECK(parse_model_kind(model_kind_name(kind)) == kind);
  }
  CHECK(parse_model_kind("lr") == ModelKind::logreg);
  CHECK_THROWS(parse_model_kind("svm"));
}

TEST_CASE("classifier factory produces independent fitted models") {
  Rng rng(12);
  Eigen::MatrixXd x;
  std::vector<int> y;
  make_clusters(rng, 15, 2, 3, 3.0, x, y);
  ModelSpec spec;
  spec.kind = ModelKind::logreg;
  const auto factory = classifier_factory(spec);
  auto a = factory(), b = factory();
  a->fit(x, y, 2);
  CHECK(accuracy(a->predict(x), y) >= 0.95);
  CHECK_THROWS(b->predict_proba(x));
}
