#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eegstack/features.hpp"
#include "eegstack/models.hpp"
#include "eegstack/selection.hpp"

namespace eegstack {

struct PipelineSpec {
  bool standardize = true;
  SelectorSpec selector;
  ModelSpec model;
};

// Scaler -> selector -> model, fitted on one set of rows and applied to raw
// feature rows of the same layout.
struct TrainedPipeline {
  std::size_t n_raw_features = 0;
  std::vector<std::string> class_names;
  std::string catalog_version;
  std::optional<Scaler> scaler;
  FittedSelector selector;
  AnyModel model;

  Eigen::MatrixXd transform(const Eigen::MatrixXd& raw) const;
  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& raw) const;
  std::vector<int> predict(const Eigen::MatrixXd& raw) const;
};

TrainedPipeline fit_pipeline(const FeatureMatrix& fm, const PipelineSpec& spec, unsigned threads = 1);

// EIM1: "EIM1", version u32, model kind u8, raw feature count u32, C u32,
// class names, catalog version, scaler block, selector block, model payload.
// Every integer and float is little-endian; matrices are f64 row-major.
std::vector<std::uint8_t> encode_pipeline(const TrainedPipeline& p);
TrainedPipeline decode_pipeline(std::span<const std::uint8_t> bytes, const std::string& what = "EIM1");
void save_pipeline(const TrainedPipeline& p, const std::filesystem::path& path);
TrainedPipeline load_pipeline(const std::filesystem::path& path);

}  // namespace eegstack
