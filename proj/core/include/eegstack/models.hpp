#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace eegstack {

// Row-wise softmax with max subtraction.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);
// Row-wise argmax; ties go to the lowest column.
std::vector<int> argmax_rows(const Eigen::MatrixXd& m);

// --- multinomial logistic regression -------------------------------------------

struct LogRegParams {
  double l2_lambda = 1.0;
  int max_iter = 2000;
  double grad_tol = 1e-6;
};

struct TrainRecord {
  int iterations = 0;
  double final_loss = 0.0;
  double grad_norm = 0.0;  // infinity norm at exit
  bool converged = false;
  std::vector<double> loss_trace;  // loss after each accepted step, starting with the initial loss
};

struct LogRegModel {
  Eigen::MatrixXd weights;  // C x (p + 1), last column is the bias
  double l2_lambda = 0.0;
  TrainRecord record;

  std::size_t n_classes() const { return static_cast<std::size_t>(weights.rows()); }
  std::size_t n_features() const { return static_cast<std::size_t>(weights.cols()) - 1; }
};

// Mean cross-entropy + (lambda / 2) * ||W without bias||^2 / n.
double logreg_loss(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::MatrixXd& w, double l2_lambda);
// (1/n) (P - Y)^T [X 1] + lambda * W_nobias / n.
Eigen::MatrixXd logreg_gradient(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::MatrixXd& w,
                                double l2_lambda);

// Full-batch gradient descent from zero weights with Armijo backtracking
// (c = 1e-4, step halving). Stops when the gradient infinity norm drops below
// grad_tol or after max_iter accepted steps.
LogRegModel logreg_train(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t n_classes,
                         const LogRegParams& params = {});
Eigen::MatrixXd logreg_predict_proba(const LogRegModel& m, const Eigen::MatrixXd& x);
std::vector<int> logreg_predict(const LogRegModel& m, const Eigen::MatrixXd& x);

// --- shrinkage LDA ---------------------------------------------------------------

struct LdaModel {
  Eigen::MatrixXd means;       // C x p
  Eigen::MatrixXd covariance;  // p x p, shrunk pooled within-class covariance
  Eigen::VectorXd priors;      // C
  double gamma = 0.1;
  Eigen::MatrixXd coef;        // p x C, covariance^-1 * mean_c
  Eigen::VectorXd intercept;   // C

  std::size_t n_classes() const { return static_cast<std::size_t>(means.rows()); }
  std::size_t n_features() const { return static_cast<std::size_t>(means.cols()); }
};

// Sigma_g = (1 - g) * Sigma + g * (trace(Sigma) / p) * I with the pooled
// covariance normalised by n, so duplicating every row leaves the model
// unchanged.
LdaModel lda_train(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t n_classes, double gamma = 0.1);
Eigen::MatrixXd lda_decision(const LdaModel& m, const Eigen::MatrixXd& x);  // n x C discriminants
Eigen::MatrixXd lda_predict_proba(const LdaModel& m, const Eigen::MatrixXd& x);
std::vector<int> lda_predict(const LdaModel& m, const Eigen::MatrixXd& x);

// --- stacked ensemble -------------------------------------------------------------

struct EnsembleParams {
  std::vector<double> lambdas = {100.0, 10.0, 1.0, 0.1, 0.01};
  int inner_folds = 5;
  double meta_lambda = 1.0;
  std::uint64_t seed = 0;
  int max_iter = 2000;
  double grad_tol = 1e-6;
  unsigned threads = 1;
};

struct StackEnsemble {
  std::vector<LogRegModel> bases;  // refit on all training rows
  LogRegModel meta;                // over bases.size() * C out-of-fold probabilities
  int inner_folds = 5;
  std::uint64_t seed = 0;

  std::size_t n_classes() const { return meta.n_classes(); }
  std::size_t n_features() const { return bases.empty() ? 0 : bases.front().n_features(); }
};

StackEnsemble ensemble_train(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t n_classes,
                             const EnsembleParams& params = {});
// Concatenated base-model probabilities, the meta model's input.
Eigen::MatrixXd ensemble_meta_features(const StackEnsemble& e, const Eigen::MatrixXd& x);
Eigen::MatrixXd ensemble_predict_proba(const StackEnsemble& e, const Eigen::MatrixXd& x);
std::vector<int> ensemble_predict(const StackEnsemble& e, const Eigen::MatrixXd& x);

// --- uniform model handle ---------------------------------------------------------

enum class ModelKind : std::uint8_t { logreg = 0, lda = 1, ensemble = 2 };

ModelKind parse_model_kind(std::string_view s);
std::string_view model_kind_name(ModelKind k);

struct ModelSpec {
  ModelKind kind = ModelKind::ensemble;
  LogRegParams logreg;
  double lda_gamma = 0.1;
  EnsembleParams ensemble;
};

using AnyModel = std::variant<LogRegModel, LdaModel, StackEnsemble>;

AnyModel fit_model(const ModelSpec& spec, const Eigen::MatrixXd& x, std::span<const int> y, std::size_t n_classes);
Eigen::MatrixXd predict_proba(const AnyModel& m, const Eigen::MatrixXd& x);
std::size_t model_input_dim(const AnyModel& m);
ModelKind model_kind(const AnyModel& m);

// Interface used by the cross-validation harness so tests can inject models.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual void fit(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t n_classes) = 0;
  virtual Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const = 0;
  virtual std::vector<int> predict(const Eigen::MatrixXd& x) const { return argmax_rows(predict_proba(x)); }
};

using ClassifierFactory = std::function<std::unique_ptr<Classifier>()>;

class SpecClassifier : public Classifier {
 public:
  explicit SpecClassifier(ModelSpec spec) : spec_(std::move(spec)) {}
  void fit(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t n_classes) override;
  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const override;
  const AnyModel& model() const;

 private:
  ModelSpec spec_;
  std::unique_ptr<AnyModel> model_;
};

ClassifierFactory classifier_factory(const ModelSpec& spec);

}  // namespace eegstack
