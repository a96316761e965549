#include "eegstack/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "eegstack/common.hpp"
#include "eegstack/evaluation.hpp"

namespace eegstack {
namespace {

constexpr double kArmijo = 1e-4;

void check_xy(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t n_classes, const char* who) {
  if (static_cast<std::size_t>(x.rows()) != y.size())
    throw DataError(std::string(who) + ": label count does not match row count");
  if (x.rows() == 0) throw DataError(std::string(who) + ": no training rows");
  if (!x.allFinite()) throw DataError(std::string(who) + ": non-finite input");
  std::vector<std::size_t> counts(n_classes, 0);
  for (int l : y) {
    if (l < 0 || static_cast<std::size_t>(l) >= n_classes) throw DataError(std::string(who) + ": label out of range");
    ++counts[static_cast<std::size_t>(l)];
  }
  if (std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) < 2)
    throw DataError(std::string(who) + ": degenerate single-class input");
}

Eigen::MatrixXd with_bias(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd xb(x.rows(), x.cols() + 1);
  xb.leftCols(x.cols()) = x;
  xb.col(x.cols()).setOnes();
  return xb;
}

// Loss and (optionally) gradient on a design matrix that already carries the
// bias column.
double loss_xb(const Eigen::MatrixXd& xb, std::span<const int> y, const Eigen::MatrixXd& w, double lambda,
               Eigen::MatrixXd* grad) {
  const double n = static_cast<double>(xb.rows());
  const Eigen::MatrixXd logits = xb * w.transpose();
  const Eigen::VectorXd mx = logits.rowwise().maxCoeff();
  const Eigen::MatrixXd shifted = logits.colwise() - mx;
  const Eigen::VectorXd lse = shifted.array().exp().rowwise().sum().log().matrix();
  double ce = 0.0;
  for (Eigen::Index i = 0; i < xb.rows(); ++i) ce += lse(i) - shifted(i, y[static_cast<std::size_t>(i)]);
  const auto nb = w.leftCols(w.cols() - 1);
  const double loss = ce / n + 0.5 * lambda * nb.squaredNorm() / n;
  if (grad) {
    Eigen::MatrixXd p = (shifted.colwise() - lse).array().exp().matrix();
    for (Eigen::Index i = 0; i < xb.rows(); ++i) p(i, y[static_cast<std::size_t>(i)]) -= 1.0;
    *grad = p.transpose() * xb / n;
    grad->leftCols(w.cols() - 1) += lambda * nb / n;
  }
  return loss;
}

void check_dim(std::size_t expected, const Eigen::MatrixXd& x, const char* who) {
  if (static_cast<std::size_t>(x.cols()) != expected)
    throw DataError(std::string(who) + ": expected " + std::to_string(expected) + " features, got " +
                    std::to_string(x.cols()));
}

}  // namespace

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  const Eigen::VectorXd mx = logits.rowwise().maxCoeff();
  Eigen::MatrixXd e = (logits.colwise() - mx).array().exp().matrix();
  const Eigen::VectorXd s = e.rowwise().sum();
  return e.array().colwise() / s.array();
}

std::vector<int> argmax_rows(const Eigen::MatrixXd& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < m.cols(); ++j)
      if (m(i, j) > m(i, best)) best = j;
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

double logreg_loss(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::MatrixXd& w, double l2_lambda) {
  return loss_xb(with_bias(x), y, w, l2_lambda, nullptr);
}

Eigen::MatrixXd logreg_gradient(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::MatrixXd& w,
                                double l2_lambda) {
  Eigen::MatrixXd g;
  loss_xb(with_bias(x), y, w, l2_lambda, &g);
  return g;
}

LogRegModel logreg_train(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t n_classes,
                         const LogRegParams& params) {
  check_xy(x, y, n_classes, "logreg_train");
  if (params.l2_lambda < 0.0) throw std::invalid_argument("logreg_train: lambda must be non-negative");
  const Eigen::MatrixXd xb = with_bias(x);
  LogRegModel m;
  m.l2_lambda = params.l2_lambda;
  m.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_classes), xb.cols());

  Eigen::MatrixXd grad, trial_grad;
  double loss = loss_xb(xb, y, m.weights, params.l2_lambda, &grad);
  auto& rec = m.record;
  rec.loss_trace.push_back(loss);
  double step = 1.0;
  while (true) {
    rec.grad_norm = grad.cwiseAbs().maxCoeff();
    if (rec.grad_norm < params.grad_tol) {
      rec.converged = true;
      break;
    }
    if (rec.iterations >= params.max_iter) break;
    const double gg = grad.squaredNorm();
    bool accepted = false;
    while (step > 1e-20) {
      const Eigen::MatrixXd trial = m.weights - step * grad;
      const double trial_loss = loss_xb(xb, y, trial, params.l2_lambda, &trial_grad);
      if (std::isfinite(trial_loss) && trial_loss <= loss - kArmijo * step * gg) {
        m.weights = trial;
        loss = trial_loss;
        grad.swap(trial_grad);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no descent possible at machine precision
    ++rec.iterations;
    rec.loss_trace.push_back(loss);
    step *= 2.0;
  }
  rec.final_loss = loss;
  if (!m.weights.allFinite()) throw NumericalError("logreg_train: non-finite weights");
  return m;
}

Eigen::MatrixXd logreg_predict_proba(const LogRegModel& m, const Eigen::MatrixXd& x) {
  check_dim(m.n_features(), x, "logreg_predict");
  return softmax_rows(with_bias(x) * m.weights.transpose());
}

std::vector<int> logreg_predict(const LogRegModel& m, const Eigen::MatrixXd& x) {
  return argmax_rows(logreg_predict_proba(m, x));
}

LdaModel lda_train(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t n_classes, double gamma) {
  check_xy(x, y, n_classes, "lda_train");
  if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("lda_train: gamma must be in [0, 1]");
  const Eigen::Index p = x.cols(), c_count = static_cast<Eigen::Index>(n_classes);
  const double n = static_cast<double>(x.rows());
  LdaModel m;
  m.gamma = gamma;
  m.means = Eigen::MatrixXd::Zero(c_count, p);
  m.priors = Eigen::VectorXd::Zero(c_count);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int c = y[static_cast<std::size_t>(i)];
    m.means.row(c) += x.row(i);
    m.priors(c) += 1.0;
  }
  for (Eigen::Index c = 0; c < c_count; ++c) {
    if (m.priors(c) < 2.0)
      throw DataError("lda_train: class " + std::to_string(c) + " has fewer than 2 training samples");
    m.means.row(c) /= m.priors(c);
  }
  Eigen::MatrixXd centered(x.rows(), p);
  for (Eigen::Index i = 0; i < x.rows(); ++i) centered.row(i) = x.row(i) - m.means.row(y[static_cast<std::size_t>(i)]);
  const Eigen::MatrixXd pooled = centered.transpose() * centered / n;
  const double avg_var = pooled.trace() / static_cast<double>(p);
  m.covariance = (1.0 - gamma) * pooled;
  m.covariance.diagonal().array() += gamma * avg_var;
  m.priors /= n;

  Eigen::LLT<Eigen::MatrixXd> llt(m.covariance);
  if (llt.info() != Eigen::Success) throw NumericalError("lda_train: shrunk covariance is not positive definite");
  m.coef = llt.solve(m.means.transpose());
  m.intercept.resize(c_count);
  for (Eigen::Index c = 0; c < c_count; ++c)
    m.intercept(c) = -0.5 * m.means.row(c).dot(m.coef.col(c)) + std::log(m.priors(c));
  if (!m.coef.allFinite()) throw NumericalError("lda_train: non-finite discriminant");
  return m;
}

Eigen::MatrixXd lda_decision(const LdaModel& m, const Eigen::MatrixXd& x) {
  check_dim(m.n_features(), x, "lda_predict");
  Eigen::MatrixXd d = x * m.coef;
  d.rowwise() += m.intercept.transpose();
  return d;
}

Eigen::MatrixXd lda_predict_proba(const LdaModel& m, const Eigen::MatrixXd& x) {
  return softmax_rows(lda_decision(m, x));
}

std::vector<int> lda_predict(const LdaModel& m, const Eigen::MatrixXd& x) { return argmax_rows(lda_decision(m, x)); }

StackEnsemble ensemble_train(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t n_classes,
                             const EnsembleParams& params) {
  check_xy(x, y, n_classes, "ensemble_train");
  if (params.lambdas.empty()) throw std::invalid_argument("ensemble_train: empty lambda grid");
  if (params.inner_folds < 2) throw std::invalid_argument("ensemble_train: need at least 2 inner folds");
  const auto n = static_cast<std::size_t>(x.rows());
  const auto folds = static_cast<std::size_t>(params.inner_folds);
  if (n < 2 * folds * n_classes)
    throw DataError("ensemble_train: need at least " + std::to_string(2 * folds * n_classes) + " rows, got " +
                    std::to_string(n));
  const FoldPlan plan = stratified_kfold(y, folds, params.seed);
  const std::size_t n_bases = params.lambdas.size();
  const auto c_count = static_cast<Eigen::Index>(n_classes);

  // Every (base, fold) fit and every full refit is an independent job.
  Eigen::MatrixXd meta_x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n_bases) * c_count);
  StackEnsemble e;
  e.inner_folds = params.inner_folds;
  e.seed = params.seed;
  e.bases.resize(n_bases);
  const std::size_t n_oof_jobs = n_bases * folds;
  parallel_for(n_oof_jobs + n_bases, params.threads, [&](std::size_t job) {
    if (job >= n_oof_jobs) {
      const std::size_t b = job - n_oof_jobs;
      e.bases[b] = logreg_train(x, y, n_classes, {params.lambdas[b], params.max_iter, params.grad_tol});
      return;
    }
    const std::size_t b = job / folds, f = job % folds;
    const auto train = plan.train_indices(f);
    const auto test = plan.test_indices(f);
    std::vector<int> ytr;
    for (auto i : train) ytr.push_back(y[i]);
    const auto model =
        logreg_train(take_rows(x, train), ytr, n_classes, {params.lambdas[b], params.max_iter, params.grad_tol});
    const Eigen::MatrixXd p = logreg_predict_proba(model, take_rows(x, test));
    for (std::size_t r = 0; r < test.size(); ++r)
      meta_x.block(static_cast<Eigen::Index>(test[r]), static_cast<Eigen::Index>(b) * c_count, 1, c_count) =
          p.row(static_cast<Eigen::Index>(r));
  });
  e.meta = logreg_train(meta_x, y, n_classes, {params.meta_lambda, params.max_iter, params.grad_tol});
  return e;
}

Eigen::MatrixXd ensemble_meta_features(const StackEnsemble& e, const Eigen::MatrixXd& x) {
  check_dim(e.n_features(), x, "ensemble_predict");
  const auto c_count = static_cast<Eigen::Index>(e.n_classes());
  Eigen::MatrixXd meta_x(x.rows(), static_cast<Eigen::Index>(e.bases.size()) * c_count);
  for (std::size_t b = 0; b < e.bases.size(); ++b)
    meta_x.middleCols(static_cast<Eigen::Index>(b) * c_count, c_count) = logreg_predict_proba(e.bases[b], x);
  return meta_x;
}

Eigen::MatrixXd ensemble_predict_proba(const StackEnsemble& e, const Eigen::MatrixXd& x) {
  return logreg_predict_proba(e.meta, ensemble_meta_features(e, x));
}

std::vector<int> ensemble_predict(const StackEnsemble& e, const Eigen::MatrixXd& x) {
  return argmax_rows(ensemble_predict_proba(e, x));
}

ModelKind parse_model_kind(std::string_view s) {
  if (s == "logreg" || s == "lr") return ModelKind::logreg;
  if (s == "lda") return ModelKind::lda;
  if (s == "ensemble") return ModelKind::ensemble;
  throw std::invalid_argument("unknown model '" + std::string(s) + "'");
}

std::string_view model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::logreg: return "logreg";
    case ModelKind::lda: return "lda";
    case ModelKind::ensemble: return "ensemble";
  }
  return "?";
}

AnyModel fit_model(const ModelSpec& spec, const Eigen::MatrixXd& x, std::span<const int> y, std::size_t n_classes) {
  switch (spec.kind) {
    case ModelKind::logreg: return logreg_train(x, y, n_classes, spec.logreg);
    case ModelKind::lda: return lda_train(x, y, n_classes, spec.lda_gamma);
    case ModelKind::ensemble: return ensemble_train(x, y, n_classes, spec.ensemble);
  }
  throw std::invalid_argument("unknown model kind");
}

Eigen::MatrixXd predict_proba(const AnyModel& m, const Eigen::MatrixXd& x) {
  return std::visit(
      [&](const auto& model) -> Eigen::MatrixXd {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, LogRegModel>) return logreg_predict_proba(model, x);
        else if constexpr (std::is_same_v<T, LdaModel>) return lda_predict_proba(model, x);
        else return ensemble_predict_proba(model, x);
      },
      m);
}

std::size_t model_input_dim(const AnyModel& m) {
  return std::visit([](const auto& model) { return model.n_features(); }, m);
}

ModelKind model_kind(const AnyModel& m) { return static_cast<ModelKind>(m.index()); }

void SpecClassifier::fit(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t n_classes) {
  model_ = std::make_unique<AnyModel>(fit_model(spec_, x, y, n_classes));
}

Eigen::MatrixXd SpecClassifier::predict_proba(const Eigen::MatrixXd& x) const {
  return eegstack::predict_proba(model(), x);
}

const AnyModel& SpecClassifier::model() const {
  if (!model_) throw std::logic_error("classifier used before fit");
  return *model_;
}

ClassifierFactory classifier_factory(const ModelSpec& spec) {
  return [spec] { return std::make_unique<SpecClassifier>(spec); };
}

}  // namespace eegstack
