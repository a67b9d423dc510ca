#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "slad/matrix.hpp"

namespace slad {

struct Dataset {
  Matrix features;  // N x D
  std::optional<std::vector<int>> labels;  // 0 inlier, 1 anomaly
  std::vector<std::string> feature_names;

  std::size_t size() const { return features.rows(); }
  std::size_t dims() const { return features.cols(); }
  bool has_labels() const { return labels.has_value(); }

  // Throws InvalidInput on shape or label violations or non-finite values.
  void validate() const;
  Dataset subset(const std::vector<std::size_t>& rows) const;
};

enum class WeightMode { correlation, uniform };

struct FeatureWeights {
  std::vector<double> values;
  WeightMode mode = WeightMode::uniform;
};

struct SplitSpec {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
};

// Per-feature z-score parameters. A zero deviation maps the feature to 0.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> deviation;

  static Standardizer fit(const Matrix& train);
  Matrix apply(const Matrix& x) const;
  void apply_inplace(std::span<double> row) const;
};

Dataset load_csv(const std::filesystem::path& path,
                 const std::optional<std::string>& label_column = std::string("label"));
void write_csv(const std::filesystem::path& path, const Dataset& data,
               const std::string& label_column = "label");

// Returns standardized copies of train followed by each of others, all using
// the train statistics.
std::vector<Dataset> standardize(const Dataset& train, const std::vector<Dataset>& others);

// Half of the inliers (floor) train; the rest plus every anomaly test.
SplitSpec split_protocol(const Dataset& data, std::uint64_t seed);

struct ContaminatedSplit {
  Dataset data;  // original rows followed by any synthesized anomalies
  SplitSpec split;
  std::size_t synthesized = 0;
  std::size_t pool_used = 0;
};

inline constexpr double kMaxContamination = 0.10;

// Moves anomalies into the training set until they make up `rate` of it.
// Half of the anomalies stay reserved for testing; the remainder form the
// contamination pool. When the pool runs dry, new anomalies are made by
// copying a pool anomaly and overwriting ceil(5% of D) random positions with
// another pool anomaly's values.
ContaminatedSplit contaminate(const SplitSpec& split, const Dataset& data, double rate,
                              std::uint64_t seed);

std::size_t swap_count(std::size_t dims);

inline constexpr std::size_t kDefaultDelta = 50;

FeatureWeights compute_feature_weights(const Matrix& train, std::size_t delta = kDefaultDelta);
FeatureWeights uniform_weights(std::size_t dims);

}  // namespace slad
