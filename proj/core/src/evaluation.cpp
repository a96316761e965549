#include "eegstack/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "eegstack/common.hpp"

namespace eegstack {

std::vector<std::size_t> FoldPlan::train_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (static_cast<std::size_t>(assignment[i]) != fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::test_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (static_cast<std::size_t>(assignment[i]) == fold) out.push_back(i);
  return out;
}

FoldPlan stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("stratified_kfold: k must be at least 2");
  int max_label = -1;
  for (int l : labels) {
    if (l < 0) throw DataError("stratified_kfold: negative label");
    max_label = std::max(max_label, l);
  }
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(max_label + 1));
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignment.assign(labels.size(), -1);
  Rng rng(splitmix64(seed ^ 0x5f0dULL));
  std::size_t next = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    if (idx.empty()) continue;
    if (idx.size() < k)
      throw DataError("stratified_kfold: class " + std::to_string(c) + " has " + std::to_string(idx.size()) +
                      " members, fewer than k = " + std::to_string(k));
    rng.shuffle(idx.begin(), idx.end());
    for (auto i : idx) plan.assignment[i] = static_cast<int>(next++ % k);
  }
  return plan;
}

Confusion confusion_matrix(std::span<const int> truth, std::span<const int> predicted, std::size_t n_classes) {
  if (truth.size() != predicted.size()) throw DataError("confusion_matrix: length mismatch");
  const auto c = static_cast<Eigen::Index>(n_classes);
  Confusion m = Confusion::Zero(c, c);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= c || predicted[i] < 0 || predicted[i] >= c)
      throw DataError("confusion_matrix: class index out of range");
    ++m(truth[i], predicted[i]);
  }
  return m;
}

Metrics metrics_from_confusion(const Confusion& m) {
  if (m.rows() != m.cols() || m.rows() == 0) throw DataError("confusion matrix must be square and non-empty");
  if ((m.array() < 0).any()) throw DataError("confusion matrix has negative counts");
  const std::int64_t total = m.sum();
  if (total == 0) throw DataError("confusion matrix is all zero");
  Metrics r;
  const std::int64_t trace = m.trace();
  r.accuracy = 100.0 * static_cast<double>(trace) / static_cast<double>(total);
  std::int64_t sum_tp = 0, sum_fp = 0, sum_fn = 0;
  double f1_sum = 0.0;
  for (Eigen::Index c = 0; c < m.rows(); ++c) {
    const std::int64_t tp = m(c, c);
    const std::int64_t fp = m.col(c).sum() - tp;
    const std::int64_t fn = m.row(c).sum() - tp;
    sum_tp += tp;
    sum_fp += fp;
    sum_fn += fn;
    r.precision.push_back(tp + fp > 0 ? 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0);
    r.recall.push_back(tp + fn > 0 ? 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0);
    const std::int64_t den = 2 * tp + fp + fn;
    const double f1 = den > 0 ? 100.0 * static_cast<double>(2 * tp) / static_cast<double>(den) : 0.0;
    r.f1.push_back(f1);
    f1_sum += f1;
  }
  r.macro_f1 = f1_sum / static_cast<double>(m.rows());
  r.micro_f1 = 100.0 * static_cast<double>(2 * sum_tp) / static_cast<double>(2 * sum_tp + sum_fp + sum_fn);
  return r;
}

Protocol parse_protocol(std::string_view s) {
  if (s == "leakage_safe") return Protocol::leakage_safe;
  if (s == "paper_protocol") return Protocol::paper_protocol;
  throw std::invalid_argument("unknown protocol '" + std::string(s) + "'");
}

std::string_view protocol_name(Protocol p) {
  return p == Protocol::leakage_safe ? "leakage_safe" : "paper_protocol";
}

namespace {

std::vector<int> pick(std::span<const int> y, std::span<const std::size_t> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(y[r]);
  return out;
}

template <typename Fn>
void with_context(const std::string& ctx, Fn&& fn) {
  try {
    fn();
  } catch (const DataError& e) {
    throw DataError(ctx + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(ctx + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(ctx + e.what());
  }
}

}  // namespace

EvalReport cross_validate(const FeatureMatrix& fm, const PipelineSpec& spec, const CvConfig& cfg,
                          const ClassifierFactory& factory) {
  const auto t0 = std::chrono::steady_clock::now();
  fm.validate();
  const std::size_t n_classes = fm.n_classes();
  const std::span<const int> y = fm.labels;
  const FoldPlan plan = stratified_kfold(y, cfg.folds, cfg.seed);

  EvalReport rep;
  rep.subject = fm.source_id.substr(0, fm.source_id.find(':'));
  rep.model = factory ? "custom" : std::string(model_kind_name(spec.model.kind));
  rep.selector = std::string(selector_name(spec.selector.kind));
  rep.k = spec.selector.kind == SelectorKind::none ? fm.n_features() : spec.selector.k;
  rep.protocol = cfg.protocol;
  rep.folds = cfg.folds;
  rep.seed = cfg.seed;
  rep.class_names = fm.class_names;

  std::optional<FittedSelector> global;
  if (cfg.protocol == Protocol::paper_protocol) {
    with_context("global selection: ", [&] {
      Eigen::MatrixXd x = fm.values;
      if (spec.standardize) x = apply_scaler(x, fit_scaler(x));
      global = fit_selector(x, y, n_classes, spec.selector, cfg.threads);
    });
  }

  rep.predictions.assign(fm.n_rows(), -1);
  rep.per_fold.resize(cfg.folds);
  // Folds run one per worker; inner parallelism stays off so the schedule
  // cannot change any result.
  parallel_for(cfg.folds, cfg.threads, [&](std::size_t f) {
    with_context("fold " + std::to_string(f) + ": ", [&] {
      const auto train = plan.train_indices(f);
      const auto test = plan.test_indices(f);
      const auto ytr = pick(y, train);
      Eigen::MatrixXd xtr = take_rows(fm.values, train);
      Eigen::MatrixXd xte = take_rows(fm.values, test);
      if (spec.standardize) {
        const Scaler s = fit_scaler(xtr);
        xtr = apply_scaler(xtr, s);
        xte = apply_scaler(xte, s);
      }
      const FittedSelector sel = global ? *global : fit_selector(xtr, ytr, n_classes, spec.selector, 1);
      xtr = sel.apply(xtr);
      xte = sel.apply(xte);
      std::unique_ptr<Classifier> clf;
      if (factory) {
        clf = factory();
      } else {
        ModelSpec ms = spec.model;
        ms.ensemble.threads = 1;
        clf = std::make_unique<SpecClassifier>(ms);
      }
      clf->fit(xtr, ytr, n_classes);
      const auto pred = clf->predict(xte);
      if (pred.size() != test.size()) throw DataError("classifier returned wrong number of predictions");
      for (std::size_t i = 0; i < test.size(); ++i) rep.predictions[test[i]] = pred[i];
      rep.per_fold[f].fold = f;
      rep.per_fold[f].n_test = test.size();
      rep.per_fold[f].metrics = metrics_from_confusion(confusion_matrix(pick(y, test), pred, n_classes));
    });
  });

  if (std::any_of(rep.predictions.begin(), rep.predictions.end(), [](int p) { return p < 0; }))
    throw std::logic_error("cross_validate: a row was never predicted");
  rep.confusion = confusion_matrix(y, rep.predictions, n_classes);
  rep.pooled = metrics_from_confusion(rep.confusion);
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

std::vector<SweepRow> k_sweep(const FeatureMatrix& fm, const PipelineSpec& spec, std::span<const std::size_t> ks,
                              const CvConfig& cfg) {
  if (ks.empty()) throw std::invalid_argument("k_sweep: empty K grid");
  std::vector<SweepRow> rows;
  for (auto k : ks) {
    if (k == 0 || k > fm.n_features())
      throw std::invalid_argument("k_sweep: K = " + std::to_string(k) + " outside [1, " +
                                  std::to_string(fm.n_features()) + "]");
    PipelineSpec s = spec;
    s.selector.k = k;
    const auto rep = cross_validate(fm, s, cfg);
    rows.push_back({k, rep.pooled.accuracy, rep.pooled.macro_f1, false});
  }
  auto best = std::max_element(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.accuracy < b.accuracy; });
  best->best = true;
  return rows;
}

void write_sweep_csv(std::span<const SweepRow> rows, const std::string& subject, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "subject,k,accuracy,f1,best\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.4f,%.4f", r.accuracy, r.f1);
    out << subject << ',' << r.k << ',' << buf << ',' << (r.best ? 1 : 0) << '\n';
  }
}

// --- reporting -------------------------------------------------------------------

std::vector<ComparisonRow> comparison_rows(std::span<const EvalReport> reports, std::span<const ComparisonRow> external) {
  std::vector<ComparisonRow> rows;
  for (const auto& r : reports) rows.push_back({r.subject, r.model, r.pooled.accuracy, r.pooled.macro_f1});
  rows.insert(rows.end(), external.begin(), external.end());

  std::vector<std::string> models;
  for (const auto& r : rows)
    if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);

  std::vector<ComparisonRow> out;
  for (const auto& r : rows)
    if (r.subject != "overall") out.push_back(r);
  for (const auto& m : models) {
    const auto given = std::find_if(rows.begin(), rows.end(),
                                    [&](const auto& r) { return r.model == m && r.subject == "overall"; });
    if (given != rows.end()) {
      out.push_back(*given);
      continue;
    }
    double acc = 0.0, f1 = 0.0, n = 0.0;
    for (const auto& r : rows)
      if (r.model == m) {
        acc += r.accuracy;
        f1 += r.f1;
        n += 1.0;
      }
    // A single subject is its own overall.
    if (n > 1.0) out.push_back({"overall", m, acc / n, f1 / n});
  }
  return out;
}

std::string comparison_csv(std::span<const ComparisonRow> rows) {
  std::ostringstream out;
  out << "subject,model,accuracy,f1\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.2f,%.2f", r.accuracy, r.f1);
    out << r.subject << ',' << r.model << ',' << buf << '\n';
  }
  return out.str();
}

std::string comparison_text(std::span<const ComparisonRow> rows) {
  std::size_t ws = 7, wm = 5;
  for (const auto& r : rows) {
    ws = std::max(ws, r.subject.size());
    wm = std::max(wm, r.model.size());
  }
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %-*s  %10s  %8s\n", static_cast<int>(ws), "Subject", static_cast<int>(wm),
                "Model", "Accuracy %", "F1 %");
  out << buf << std::string(ws + wm + 24, '-') << '\n';
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %-*s  %10.2f  %8.2f\n", static_cast<int>(ws), r.subject.c_str(),
                  static_cast<int>(wm), r.model.c_str(), r.accuracy, r.f1);
    out << buf;
  }
  return out.str();
}

std::string confusion_csv(const Confusion& m, std::span<const std::string> class_names) {
  std::ostringstream out;
  out << "truth\\predicted";
  for (const auto& c : class_names) out << ',' << c;
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << class_names[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << m(i, j);
    out << '\n';
  }
  return out.str();
}

std::string confusion_text(const Confusion& m, std::span<const std::string> class_names) {
  std::size_t w = 8;
  for (const auto& c : class_names) w = std::max(w, c.size());
  const int iw = static_cast<int>(w);
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s", iw, "");
  out << buf;
  for (const auto& c : class_names) {
    std::snprintf(buf, sizeof buf, "  %*s", iw, c.c_str());
    out << buf;
  }
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "%-*s", iw, class_names[static_cast<std::size_t>(i)].c_str());
    out << buf;
    const double row = static_cast<double>(m.row(i).sum());
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double pct = row > 0 ? 100.0 * static_cast<double>(m(i, j)) / row : 0.0;
      std::snprintf(buf, sizeof buf, "  %*.2f", iw, pct);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

std::string per_fold_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "fold,n_test,accuracy,macro_f1\n";
  char buf[128];
  for (const auto& f : r.per_fold) {
    std::snprintf(buf, sizeof buf, "%.4f,%.4f", f.metrics.accuracy, f.metrics.macro_f1);
    out << f.fold << ',' << f.n_test << ',' << buf << '\n';
  }
  return out.str();
}

namespace {

std::string file_token(std::string s) {
  for (auto& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_') ch = '_';
  return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

}  // namespace

void write_report(const std::filesystem::path& dir, std::span<const EvalReport> reports,
                  std::span<const ComparisonRow> external) {
  if (reports.empty() && external.empty()) throw std::invalid_argument("write_report: nothing to report");
  std::filesystem::create_directories(dir);
  const auto rows = comparison_rows(reports, external);
  write_text(dir / "summary.csv", comparison_csv(rows));
  std::string text = comparison_text(rows);
  text += "\nAccuracy = trace / total of the pooled out-of-fold confusion matrix; F1 = macro average of per-class F1.\n";
  for (const auto& r : reports) {
    const std::string stem = file_token(r.subject) + "_" + file_token(r.model);
    write_text(dir / ("confusion_" + stem + ".csv"), confusion_csv(r.confusion, r.class_names));
    write_text(dir / ("confusion_" + stem + ".txt"), confusion_text(r.confusion, r.class_names));
    write_text(dir / ("folds_" + stem + ".csv"), per_fold_csv(r));
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s / %s: protocol %s, selector %s K=%zu, %zu folds, seed %llu\n",
                  r.subject.c_str(), r.model.c_str(), std::string(protocol_name(r.protocol)).c_str(),
                  r.selector.c_str(), r.k, r.folds, static_cast<unsigned long long>(r.seed));
    text += buf;
  }
  write_text(dir / "summary.txt", text);
}

std::vector<ComparisonRow> read_comparison_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("subject,model,accuracy,f1", 0) != 0) throw DataError(path.string() + ": unexpected header");
  std::vector<ComparisonRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> parts;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) parts.push_back(cell);
    if (parts.size() != 4) throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 4 fields");
    try {
      rows.push_back({parts[0], parts[1], std::stod(parts[2]), std::stod(parts[3])});
    } catch (const std::exception&) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad number");
    }
  }
  return rows;
}

}  // namespace eegstack
