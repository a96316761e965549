#include "eegstack/model_io.hpp"

#include <stdexcept>

#include "eegstack/binary_io.hpp"
#include "eegstack/common.hpp"

namespace eegstack {
namespace {

constexpr std::uint32_t kModelVersion = 1;

void put_matrix(io::ByteWriter& w, const Eigen::MatrixXd& m) {
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) w.f64(m(i, j));
}

Eigen::MatrixXd get_matrix(io::ByteReader& r) {
  const std::size_t rows = r.u32(), cols = r.u32();
  if (rows != 0 && cols > r.remaining() / 8 / rows) r.fail("matrix block exceeds file size");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.f64();
  return m;
}

void put_vector(io::ByteWriter& w, const Eigen::VectorXd& v) {
  w.u32(static_cast<std::uint32_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) w.f64(v(i));
}

Eigen::VectorXd get_vector(io::ByteReader& r) {
  const std::size_t n = r.u32();
  r.require(8 * n);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = r.f64();
  return v;
}

void put_logreg(io::ByteWriter& w, const LogRegModel& m) {
  w.f64(m.l2_lambda);
  put_matrix(w, m.weights);
  w.u32(static_cast<std::uint32_t>(m.record.iterations));
  w.f64(m.record.final_loss);
  w.f64(m.record.grad_norm);
  w.u8(m.record.converged ? 1 : 0);
}

LogRegModel get_logreg(io::ByteReader& r) {
  LogRegModel m;
  m.l2_lambda = r.f64();
  m.weights = get_matrix(r);
  if (m.weights.cols() < 2 || m.weights.rows() < 2) r.fail("logistic regression weights have bad shape");
  m.record.iterations = static_cast<int>(r.u32());
  m.record.final_loss = r.f64();
  m.record.grad_norm = r.f64();
  m.record.converged = r.u8() != 0;
  return m;
}

void put_model(io::ByteWriter& w, const AnyModel& model) {
  if (const auto* lr = std::get_if<LogRegModel>(&model)) {
    put_logreg(w, *lr);
  } else if (const auto* lda = std::get_if<LdaModel>(&model)) {
    w.f64(lda->gamma);
    put_matrix(w, lda->means);
    put_matrix(w, lda->covariance);
    put_vector(w, lda->priors);
    put_matrix(w, lda->coef);
    put_vector(w, lda->intercept);
  } else {
    const auto& e = std::get<StackEnsemble>(model);
    w.u32(static_cast<std::uint32_t>(e.inner_folds));
    w.u64(e.seed);
    w.u32(static_cast<std::uint32_t>(e.bases.size()));
    for (const auto& b : e.bases) put_logreg(w, b);
    put_logreg(w, e.meta);
  }
}

AnyModel get_model(io::ByteReader& r, ModelKind kind) {
  switch (kind) {
    case ModelKind::logreg: return get_logreg(r);
    case ModelKind::lda: {
      LdaModel m;
      m.gamma = r.f64();
      m.means = get_matrix(r);
      m.covariance = get_matrix(r);
      m.priors = get_vector(r);
      m.coef = get_matrix(r);
      m.intercept = get_vector(r);
      const auto c = m.means.rows(), p = m.means.cols();
      if (m.covariance.rows() != p || m.covariance.cols() != p || m.priors.size() != c || m.coef.rows() != p ||
          m.coef.cols() != c || m.intercept.size() != c)
        r.fail("LDA blocks have inconsistent shapes");
      return m;
    }
    case ModelKind::ensemble: {
      StackEnsemble e;
      e.inner_folds = static_cast<int>(r.u32());
      e.seed = r.u64();
      const std::size_t n = r.u32();
      if (n == 0 || n > 1024) r.fail("bad ensemble base count");
      for (std::size_t i = 0; i < n; ++i) e.bases.push_back(get_logreg(r));
      e.meta = get_logreg(r);
      for (const auto& b : e.bases)
        if (b.n_features() != e.bases.front().n_features() || b.n_classes() != e.meta.n_classes())
          r.fail("ensemble base shapes disagree");
      if (e.meta.n_features() != n * e.meta.n_classes()) r.fail("ensemble meta width != bases x classes");
      return e;
    }
  }
  r.fail("unknown model kind");
}

}  // namespace

Eigen::MatrixXd TrainedPipeline::transform(const Eigen::MatrixXd& raw) const {
  if (static_cast<std::size_t>(raw.cols()) != n_raw_features)
    throw DataError("pipeline expects " + std::to_string(n_raw_features) + " features, got " +
                    std::to_string(raw.cols()));
  return selector.apply(scaler ? apply_scaler(raw, *scaler) : raw);
}

Eigen::MatrixXd TrainedPipeline::predict_proba(const Eigen::MatrixXd& raw) const {
  return eegstack::predict_proba(model, transform(raw));
}

std::vector<int> TrainedPipeline::predict(const Eigen::MatrixXd& raw) const { return argmax_rows(predict_proba(raw)); }

TrainedPipeline fit_pipeline(const FeatureMatrix& fm, const PipelineSpec& spec, unsigned threads) {
  fm.validate();
  TrainedPipeline p;
  p.n_raw_features = fm.n_features();
  p.class_names = fm.class_names;
  p.catalog_version = fm.catalog_version;
  Eigen::MatrixXd x = fm.values;
  if (spec.standardize) {
    p.scaler = fit_scaler(x);
    x = apply_scaler(x, *p.scaler);
  }
  p.selector = fit_selector(x, fm.labels, fm.n_classes(), spec.selector, threads);
  p.model = fit_model(spec.model, p.selector.apply(x), fm.labels, fm.n_classes());
  return p;
}

std::vector<std::uint8_t> encode_pipeline(const TrainedPipeline& p) {
  io::ByteWriter w;
  w.magic("EIM1");
  w.u32(kModelVersion);
  w.u8(static_cast<std::uint8_t>(model_kind(p.model)));
  w.u32(static_cast<std::uint32_t>(p.n_raw_features));
  w.u32(static_cast<std::uint32_t>(p.class_names.size()));
  for (const auto& c : p.class_names) w.str(c);
  w.str(p.catalog_version);

  w.u8(p.scaler ? 1 : 0);
  if (p.scaler) {
    put_vector(w, p.scaler->mean);
    put_vector(w, p.scaler->std);
    for (auto c : p.scaler->constant) w.u8(c);
  }

  w.u8(static_cast<std::uint8_t>(p.selector.kind));
  w.u32(static_cast<std::uint32_t>(p.selector.columns.size()));
  for (auto c : p.selector.columns) w.u32(static_cast<std::uint32_t>(c));
  w.u8(p.selector.pca ? 1 : 0);
  if (p.selector.pca) {
    put_matrix(w, p.selector.pca->components);
    put_vector(w, p.selector.pca->explained_ratio);
    put_vector(w, p.selector.pca->mean);
  }

  put_model(w, p.model);
  return w.take();
}

TrainedPipeline decode_pipeline(std::span<const std::uint8_t> bytes, const std::string& what) {
  io::ByteReader r(bytes, what);
  r.expect_magic("EIM1");
  if (const auto v = r.u32(); v != kModelVersion) r.fail("unsupported version " + std::to_string(v));
  const auto kind = r.u8();
  if (kind > 2) r.fail("unknown model kind " + std::to_string(kind));
  TrainedPipeline p;
  p.n_raw_features = r.u32();
  const std::size_t n_classes = r.u32();
  r.require(4 * n_classes);
  for (std::size_t i = 0; i < n_classes; ++i) p.class_names.push_back(r.str());
  p.catalog_version = r.str();

  if (r.u8()) {
    Scaler s;
    s.mean = get_vector(r);
    s.std = get_vector(r);
    r.require(static_cast<std::size_t>(s.mean.size()));
    for (Eigen::Index i = 0; i < s.mean.size(); ++i) s.constant.push_back(r.u8());
    if (s.size() != p.n_raw_features || static_cast<std::size_t>(s.std.size()) != s.size())
      r.fail("scaler width does not match feature count");
    p.scaler = std::move(s);
  }

  const auto sel = r.u8();
  if (sel > static_cast<std::uint8_t>(SelectorKind::pca)) r.fail("unknown selector kind");
  p.selector.kind = static_cast<SelectorKind>(sel);
  const std::size_t n_cols = r.u32();
  r.require(4 * n_cols);
  for (std::size_t i = 0; i < n_cols; ++i) {
    const std::size_t c = r.u32();
    if (c >= p.n_raw_features) r.fail("selected column out of range");
    p.selector.columns.push_back(c);
  }
  if (r.u8()) {
    PcaTransform t;
    t.components = get_matrix(r);
    t.explained_ratio = get_vector(r);
    t.mean = get_vector(r);
    if (static_cast<std::size_t>(t.mean.size()) != p.n_raw_features || t.components.rows() != t.mean.size())
      r.fail("PCA block does not match feature count");
    p.selector.pca = std::move(t);
  }
  if ((p.selector.kind == SelectorKind::pca) != p.selector.pca.has_value()) r.fail("selector/PCA block mismatch");

  p.model = get_model(r, static_cast<ModelKind>(kind));
  if (r.remaining() != 0) r.fail("trailing bytes after model payload");

  std::size_t expected_dim = p.n_raw_features;
  if (p.selector.kind == SelectorKind::pca) expected_dim = static_cast<std::size_t>(p.selector.pca->components.cols());
  else if (p.selector.kind != SelectorKind::none) expected_dim = p.selector.columns.size();
  if (model_input_dim(p.model) != expected_dim) r.fail("model input width does not match selector output");
  if (std::visit([](const auto& m) { return m.n_classes(); }, p.model) != n_classes)
    r.fail("model class count does not match class names");
  return p;
}

void save_pipeline(const TrainedPipeline& p, const std::filesystem::path& path) {
  io::write_file(path, encode_pipeline(p));
}

TrainedPipeline load_pipeline(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return decode_pipeline(bytes, path.string());
}

}  // namespace eegstack
