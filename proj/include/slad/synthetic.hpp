#pragma once

#include <cstdint>

#include "slad/data.hpp"

namespace slad {

struct SyntheticSpec {
  std::size_t n = 2000;
  std::size_t informative = 2;
  std::size_t noise = 8;
  double outlier_fraction = 0.05;
  // Inlier correlation between consecutive informative dimensions.
  double correlation = 0.8;
  // Outlier box half-width relative to the inlier range, per informative dim.
  double box_expansion = 3.0;
  std::uint64_t seed = 0;
};

// Correlated Gaussian inliers in the informative dimensions plus independent
// standard-normal noise dimensions. Outliers are uniform over the inlier
// bounding box of the informative dimensions, widened by box_expansion, and
// share the inliers' noise distribution. Rows are shuffled.
Dataset make_synthetic(const SyntheticSpec& spec);

}  // namespace slad
