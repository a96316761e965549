#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "config.hpp"
#include "eegstack/binary_io.hpp"
#include "eegstack/common.hpp"
#include "eegstack/evaluation.hpp"
#include "eegstack/features.hpp"
#include "eegstack/model_io.hpp"
#include "eegstack/preprocess.hpp"
#include "eegstack/selection.hpp"
#include "eegstack/topomap.hpp"
#include "eegstack/trialset.hpp"

#ifndef EEGSTACK_VERSION
#define EEGSTACK_VERSION "0.0.0"
#endif

namespace eegstack::cli {
namespace {

namespace fs = std::filesystem;

struct Run {
  std::string subcommand;
  RunConfig cfg;
  fs::path out_dir;
  unsigned threads = 1;
  std::ostream& out;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  nlohmann::json extra = nlohmann::json::object();

  fs::path input(const std::string& key) {
    const auto& v = cfg.str(key);
    if (v.empty()) throw UsageError("'" + subcommand + "' needs config key '" + key + "' (an input path)");
    const fs::path p(v);
    if (!fs::exists(p)) throw DataError(key + ": file not found: " + p.string());
    inputs.push_back(p);
    return p;
  }

  // Refuses to write over any input so no subcommand mutates what it reads.
  fs::path output(const std::string& name) {
    const fs::path p = out_dir / name;
    for (const auto& in : inputs)
      if (fs::weakly_canonical(in) == fs::weakly_canonical(p))
        throw UsageError("output " + p.string() + " would overwrite an input");
    outputs.push_back(p);
    return p;
  }
};

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw DataError("cannot write " + p.string());
  f << s;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json file_entry(const fs::path& p) {
  nlohmann::json j;
  j["path"] = p.string();
  if (fs::is_regular_file(p)) {
    const auto bytes = io::read_file(p);
    j["bytes"] = bytes.size();
    j["fnv1a64"] = io::hex64(io::fnv1a64(bytes));
  }
  return j;
}

// --- config -> module parameters ---------------------------------------------------

SyntheticConfig synth_config(const RunConfig& c) {
  SyntheticConfig s;
  s.subject_id = c.str("subject");
  s.n_trials = static_cast<std::size_t>(c.integer("n_trials"));
  s.n_channels = static_cast<std::size_t>(c.integer("n_channels"));
  s.n_samples = static_cast<std::size_t>(c.integer("n_samples"));
  s.sample_rate = c.real("sample_rate");
  s.class_freqs = c.reals("class_freqs");
  s.signature_amplitude = c.real("signature_amplitude");
  s.noise_level = c.real("noise_level");
  s.artifact_prob = c.real("artifact_prob");
  s.artifact_amplitude = c.real("artifact_amplitude");
  if (c.integer("n_trials") < 0 || c.integer("n_channels") < 1 || c.integer("n_samples") < 1)
    throw UsageError("n_trials, n_channels and n_samples must be positive");
  return s;
}

VmdParams vmd_params(const RunConfig& c) {
  VmdParams p;
  p.modes = static_cast<int>(c.integer("vmd_modes"));
  p.alpha = c.real("vmd_alpha");
  p.tau = c.real("vmd_tau");
  p.tol = c.real("vmd_tol");
  p.max_iter = static_cast<int>(c.integer("vmd_max_iter"));
  return p;
}

PipelineSpec pipeline_spec(const RunConfig& c, unsigned threads) {
  PipelineSpec s;
  s.standardize = c.flag("standardize");
  s.selector.kind = parse_selector(c.str("selector"));
  s.selector.k = static_cast<std::size_t>(c.integer("k"));
  s.selector.params.mi_bins = static_cast<int>(c.integer("mi_bins"));
  s.selector.params.relieff_k = static_cast<int>(c.integer("relieff_k"));
  auto& m = s.model;
  m.kind = parse_model_kind(c.str("model_kind"));
  m.logreg.l2_lambda = c.real("l2_lambda");
  m.logreg.max_iter = static_cast<int>(c.integer("max_iter"));
  m.logreg.grad_tol = c.real("grad_tol");
  m.lda_gamma = c.real("lda_gamma");
  m.ensemble.lambdas = c.reals("lambdas");
  m.ensemble.inner_folds = static_cast<int>(c.integer("inner_folds"));
  m.ensemble.meta_lambda = c.real("meta_lambda");
  m.ensemble.seed = c.u64("seed");
  m.ensemble.max_iter = m.logreg.max_iter;
  m.ensemble.grad_tol = m.logreg.grad_tol;
  m.ensemble.threads = threads;
  return s;
}

CvConfig cv_config(const RunConfig& c, unsigned threads) {
  CvConfig cv;
  cv.folds = static_cast<std::size_t>(c.integer("folds"));
  cv.seed = c.u64("seed");
  cv.protocol = parse_protocol(c.str("protocol"));
  cv.threads = threads;
  return cv;
}

std::string class_counts(std::span<const int> labels, std::span<const std::string> names) {
  std::vector<std::size_t> counts(names.size(), 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  std::string s;
  for (std::size_t c = 0; c < names.size(); ++c) s += (c ? ", " : "") + names[c] + "=" + std::to_string(counts[c]);
  return s;
}

// --- subcommands -----------------------------------------------------------------

void cmd_synth(Run& r) {
  const auto data = generate_synthetic(synth_config(r.cfg), r.cfg.u64("seed"));
  save_trialset(data.trials, r.output("trials.eit1"));
  save_ground_truth_csv(data.truth, data.trials.n_channels(), r.output("ground_truth.csv"));
  write_positions_csv(data.trials.channel_names, *data.trials.channel_positions, r.output("positions.csv"));
  r.out << "synth: " << data.trials.n_trials << " trials x " << data.trials.n_channels() << " channels x "
        << data.trials.n_samples << " samples\n";
}

void cmd_inspect(Run& r) {
  std::ostringstream s;
  s.precision(6);
  bool any = false;
  if (!r.cfg.str("trials").empty()) {
    any = true;
    const auto ts = load_trialset(r.input("trials"));
    s << "EIT1 " << r.cfg.str("trials") << "\n  subject: " << ts.subject_id << "\n  trials: " << ts.n_trials
      << "\n  channels: " << ts.n_channels() << "\n  samples: " << ts.n_samples << "\n  sample_rate: " << ts.sample_rate
      << " Hz\n  classes: " << class_counts(ts.labels, ts.class_names)
      << "\n  positions: " << (ts.channel_positions ? "yes" : "no") << "\n  intervals:";
    for (const auto& iv : ts.intervals) s << ' ' << iv.name << "[" << iv.start << "," << iv.end << ")";
    if (!ts.data.empty()) {
      const auto [lo, hi] = std::minmax_element(ts.data.begin(), ts.data.end());
      s << "\n  data range: [" << *lo << ", " << *hi << "]";
    }
    s << "\n";
  }
  if (!r.cfg.str("features").empty()) {
    any = true;
    const auto fm = load_feature_matrix(r.input("features"));
    s << "EITF " << r.cfg.str("features") << "\n  source: " << fm.source_id << "\n  catalog: " << fm.catalog_version
      << "\n  rows: " << fm.n_rows() << "\n  features: " << fm.n_features()
      << "\n  classes: " << class_counts(fm.labels, fm.class_names) << "\n";
  }
  if (!r.cfg.str("model").empty()) {
    any = true;
    const auto p = load_pipeline(r.input("model"));
    s << "EIM1 " << r.cfg.str("model") << "\n  model: " << model_kind_name(model_kind(p.model))
      << "\n  raw features: " << p.n_raw_features << "\n  standardize: " << (p.scaler ? "yes" : "no")
      << "\n  selector: " << selector_name(p.selector.kind) << "\n  model inputs: " << model_input_dim(p.model)
      << "\n  catalog: " << p.catalog_version << "\n  classes: " << p.class_names.size() << "\n";
  }
  if (!any) throw UsageError("'inspect' needs at least one of trials, features, model");
  write_text(r.output("inspect.txt"), s.str());
  r.out << s.str();
}

void cmd_clean(Run& r) {
  const auto ts = load_trialset(r.input("trials"));
  ArtifactPolicy policy;
  policy.z_thresh = r.cfg.real("z_thresh");
  policy.drift_factor = r.cfg.real("drift_factor");
  policy.drift_window_sec = r.cfg.real("drift_window_sec");
  const auto mask = detect_artifacts(ts, policy);
  const auto clean = remove_artifacts(ts, mask, vmd_params(r.cfg), r.threads);
  save_trialset(clean, r.output("clean.eit1"));
  write_mask_csv(mask, r.output("artifact_mask.csv"));
  r.out << "clean: " << mask.count() << " of " << ts.n_trials * ts.n_channels() << " trial/channel pairs flagged\n";
}

void cmd_features(Run& r) {
  auto ts = load_trialset(r.input("trials"));
  const auto& interval = r.cfg.str("interval");
  if (interval != "none") ts = slice_interval(ts, interval);
  const auto catalog =
      FeatureCatalog::parse(r.cfg.str("catalog_td"), r.cfg.str("catalog_fd"), r.cfg.str("catalog_tfd"));
  const auto fm = build_feature_matrix(ts, catalog, r.threads);
  save_feature_matrix(fm, r.output("features.eitf"));
  write_catalog_csv(fm, r.output("catalog.csv"));
  r.out << "features: " << fm.n_rows() << " x " << fm.n_features() << " (" << catalog.per_channel()
        << " per channel)\n";
}

void cmd_select(Run& r) {
  const auto fm = load_feature_matrix(r.input("features"));
  const auto spec = pipeline_spec(r.cfg, r.threads);
  Eigen::MatrixXd x = fm.values;
  if (spec.standardize) x = apply_scaler(x, fit_scaler(x));
  const auto& sel = spec.selector;
  switch (sel.kind) {
    case SelectorKind::none: throw UsageError("'select' needs a selector other than none");
    case SelectorKind::pca: {
      const auto t = pca_fit(x, sel.k);
      std::ostringstream s;
      s.precision(17);
      s << "component,explained_ratio\n";
      for (Eigen::Index i = 0; i < t.explained_ratio.size(); ++i) s << i + 1 << ',' << t.explained_ratio(i) << '\n';
      write_text(r.output("pca.csv"), s.str());
      r.out << "select: pca with " << sel.k << " components, total ratio " << t.explained_ratio.sum() << "\n";
      return;
    }
    case SelectorKind::mrmr_fcq:
    case SelectorKind::mrmr_miq: {
      const auto ranked = mrmr_select(x, fm.labels, fm.n_classes(), sel.k,
                                      sel.kind == SelectorKind::mrmr_fcq ? MrmrVariant::FCQ : MrmrVariant::MIQ,
                                      sel.params);
      write_ranking_csv(ranked, fm.descriptors, r.output("ranking.csv"));
      break;
    }
    default: {
      const auto ranked = rank_features(x, fm.labels, fm.n_classes(), parse_rank_method(selector_name(sel.kind)),
                                        sel.k, sel.params, r.threads);
      write_ranking_csv(ranked, fm.descriptors, r.output("ranking.csv"));
    }
  }
  r.out << "select: " << selector_name(sel.kind) << " over " << fm.n_features() << " features, K = " << sel.k << "\n";
}

void cmd_sweep(Run& r) {
  const auto fm = load_feature_matrix(r.input("features"));
  const auto ks = r.cfg.sizes("k_grid");
  const auto rows = k_sweep(fm, pipeline_spec(r.cfg, r.threads), ks, cv_config(r.cfg, r.threads));
  write_sweep_csv(rows, r.cfg.str("subject"), r.output("sweep.csv"));
  for (const auto& row : rows)
    if (row.best) r.out << "sweep: best K = " << row.k << " (accuracy " << row.accuracy << "%)\n";
}

void cmd_train(Run& r) {
  const auto fm = load_feature_matrix(r.input("features"));
  const auto p = fit_pipeline(fm, pipeline_spec(r.cfg, r.threads), r.threads);
  save_pipeline(p, r.output("model.eim1"));
  const auto acc = [&] {
    const auto pred = p.predict(fm.values);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == fm.labels[i];
    return 100.0 * static_cast<double>(ok) / static_cast<double>(pred.size());
  }();
  r.out << "train: " << model_kind_name(model_kind(p.model)) << " on " << fm.n_rows() << " rows, training accuracy "
        << acc << "%\n";
}

void cmd_evaluate(Run& r) {
  auto fm = load_feature_matrix(r.input("features"));
  const auto rep = cross_validate(fm, pipeline_spec(r.cfg, r.threads), cv_config(r.cfg, r.threads));
  EvalReport named = rep;
  named.subject = r.cfg.str("subject");
  const std::vector<EvalReport> reps{named};
  write_report(r.out_dir, reps);
  std::vector<std::string> written;
  for (const auto& e : fs::directory_iterator(r.out_dir)) {
    const auto name = e.path().filename().string();
    if (name.starts_with("summary.") || name.starts_with("confusion_") || name.starts_with("folds_"))
      written.push_back(name);
  }
  std::sort(written.begin(), written.end());
  for (const auto& name : written) r.output(name);
  std::ostringstream s;
  s << "row,truth,predicted\n";
  for (std::size_t i = 0; i < rep.predictions.size(); ++i) s << i << ',' << fm.labels[i] << ',' << rep.predictions[i] << '\n';
  write_text(r.output("predictions.csv"), s.str());
  r.extra["cv_seconds"] = rep.seconds;
  r.extra["f1"] = "macro";
  r.out << "evaluate: accuracy " << rep.pooled.accuracy << "%, macro F1 " << rep.pooled.macro_f1 << "% ("
        << protocol_name(rep.protocol) << ", " << rep.folds << " folds)\n";
}

void cmd_predict(Run& r) {
  const auto p = load_pipeline(r.input("model"));
  const auto fm = load_feature_matrix(r.input("features"));
  if (fm.catalog_version != p.catalog_version)
    throw DataError("feature catalog '" + fm.catalog_version + "' does not match the model's '" + p.catalog_version +
                    "'");
  const auto proba = p.predict_proba(fm.values);
  const auto pred = argmax_rows(proba);
  std::ostringstream s;
  s.precision(10);
  s << "row,predicted,class";
  for (const auto& c : p.class_names) s << ",p_" << c;
  s << '\n';
  for (std::size_t i = 0; i < pred.size(); ++i) {
    s << i << ',' << pred[i] << ',' << p.class_names[static_cast<std::size_t>(pred[i])];
    for (Eigen::Index c = 0; c < proba.cols(); ++c) s << ',' << proba(static_cast<Eigen::Index>(i), c);
    s << '\n';
  }
  write_text(r.output("predictions.csv"), s.str());
  r.out << "predict: " << pred.size() << " rows\n";
}

void cmd_topomap(Run& r) {
  const auto ts = load_trialset(r.input("trials"));
  std::optional<int> cls;
  if (const auto& c = r.cfg.str("topomap_class"); c != "all") cls = static_cast<int>(r.cfg.integer("topomap_class"));
  const auto values =
      compute_erp(ts, cls, r.cfg.str("topomap_interval"), parse_erp_summary(r.cfg.str("erp_summary")));

  std::vector<Position> positions;
  if (!r.cfg.str("positions").empty()) {
    std::map<std::string, Position> by_name;
    for (const auto& [name, pos] : read_positions_csv(r.input("positions"))) by_name[name] = pos;
    for (const auto& ch : ts.channel_names) {
      const auto it = by_name.find(ch);
      if (it == by_name.end()) throw DataError("positions file has no entry for channel '" + ch + "'");
      positions.push_back(it->second);
    }
  } else if (ts.channel_positions) {
    positions = *ts.channel_positions;
  }
  const auto grid = r.cfg.integer("grid");
  if (grid < 16) throw UsageError("grid must be at least 16");
  const auto field = render_topomap(values, positions, static_cast<std::size_t>(grid));
  write_pgm(field, r.output("topomap.pgm"));
  write_field_csv(field, r.output("topomap.csv"));
  std::ostringstream s;
  s.precision(17);
  s << "channel_name,x,y,value\n";
  for (std::size_t c = 0; c < values.size(); ++c)
    s << ts.channel_names[c] << ',' << positions[c].x << ',' << positions[c].y << ',' << values[c] << '\n';
  write_text(r.output("erp.csv"), s.str());
  r.out << "topomap: " << grid << "x" << grid << " field, range [" << field.min_value << ", " << field.max_value
        << "]\n";
}

void cmd_report(Run& r) {
  std::vector<ComparisonRow> rows;
  for (const auto& path : r.cfg.strings("report_inputs")) {
    r.inputs.push_back(path);
    for (auto& row : read_comparison_csv(path))
      if (row.subject != "overall") rows.push_back(std::move(row));
  }
  if (!r.cfg.str("external_rows").empty())
    for (auto& row : read_comparison_csv(r.input("external_rows"))) rows.push_back(std::move(row));
  if (rows.empty()) throw UsageError("'report' needs report_inputs and/or external_rows");
  const auto table = comparison_rows({}, rows);
  write_text(r.output("summary.csv"), comparison_csv(table));
  write_text(r.output("summary.txt"), comparison_text(table));
  r.out << comparison_text(table);
}

const std::map<std::string, std::pair<std::string, std::function<void(Run&)>>>& commands() {
  static const std::map<std::string, std::pair<std::string, std::function<void(Run&)>>> table = {
      {"synth", {"generate a synthetic trial set with ground truth", cmd_synth}},
      {"inspect", {"summarise EIT1 / EITF / EIM1 files", cmd_inspect}},
      {"clean", {"detect artifacts and remove the lowest VMD mode", cmd_clean}},
      {"features", {"extract the feature matrix", cmd_features}},
      {"select", {"rank or select features", cmd_select}},
      {"sweep", {"cross-validate over a grid of K", cmd_sweep}},
      {"train", {"fit scaler, selector and model on all rows", cmd_train}},
      {"evaluate", {"stratified k-fold cross-validation report", cmd_evaluate}},
      {"predict", {"apply a trained model to a feature matrix", cmd_predict}},
      {"topomap", {"ERP summary and scalp map", cmd_topomap}},
      {"report", {"merge comparison tables", cmd_report}},
  };
  return table;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"eegstack: EEG trial processing, features, selection and classification"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir = "out";
  int threads = -1;
  for (const auto& [name, entry] : commands()) {
    auto* sub = app.add_subcommand(name, entry.first);
    sub->add_option("-c,--config", config_path, "config file (key = value lines)");
    sub->add_option("--set", sets, "override one config key, key=value")->take_all();
    sub->add_option("--threads", threads, "worker cap, 0 = all cores (overrides config)");
    sub->add_option("-o,--out", out_dir, "output directory");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    const int code = app.exit(e, o, er);
    out << o.str();
    err << er.str();
    return code == 0 ? kOk : kUsage;
  }

  const auto subs = app.get_subcommands();
  Run r{subs.front()->get_name(), RunConfig{}, fs::path(out_dir), 1, out, {}, {}, nlohmann::json::object()};
  const auto t0 = std::chrono::steady_clock::now();
  const std::string started = utc_now();
  try {
    try {
      if (!config_path.empty()) {
        r.inputs.push_back(config_path);
        const auto bytes = io::read_file(config_path);
        r.cfg.merge_text(std::string(bytes.begin(), bytes.end()), config_path);
      }
      for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
        r.cfg.set(s.substr(0, eq), s.substr(eq + 1));
      }
      if (threads >= 0) r.cfg.set("threads", std::to_string(threads), "--threads");
      const auto t = r.cfg.integer("threads");
      if (t < 0) throw UsageError("threads must be >= 0");
      r.threads = resolve_threads(static_cast<unsigned>(t));

      fs::create_directories(r.out_dir);
      write_text(r.output("config.txt"), r.cfg.echo());
      commands().at(r.subcommand).second(r);
    } catch (const std::filesystem::filesystem_error& e) {
      throw DataError(e.what());
    }

    nlohmann::json m;
    m["tool"] = "eegstack";
    m["version"] = EEGSTACK_VERSION;
    m["subcommand"] = r.subcommand;
    m["config"] = r.cfg.values();
    m["threads"] = r.threads;
    m["inputs"] = nlohmann::json::array();
    for (const auto& p : r.inputs) m["inputs"].push_back(file_entry(p));
    m["outputs"] = nlohmann::json::array();
    for (const auto& p : r.outputs) m["outputs"].push_back(file_entry(p));
    if (!r.extra.empty()) m["details"] = r.extra;
    m["started_utc"] = started;
    m["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_text(r.out_dir / "manifest.json", m.dump(2) + "\n");
    return kOk;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
}

}  // namespace eegstack::cli
