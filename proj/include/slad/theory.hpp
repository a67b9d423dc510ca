#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace slad {

class Rng;

namespace theory {

// Feature space F with G effective features; a subspace is useful when it
// holds at least q of them. alpha = q / G and beta = G / F.
struct SubspaceUsefulnessQuery {
  std::size_t features = 0;
  std::size_t effective = 0;
  std::size_t min_effective = 0;

  double alpha() const { return static_cast<double>(min_effective) / static_cast<double>(effective); }
  double beta() const { return static_cast<double>(effective) / static_cast<double>(features); }
  void validate() const;
  // G = round(beta * F) and q = ceil(alpha * G).
  static SubspaceUsefulnessQuery from_ratios(std::size_t features, double alpha, double beta);
};

inline constexpr std::size_t kMaxClosedFormFeatures = 2000;

// Probability that a subspace of uniform cardinality in {1..F}, filled by
// sampling features with replacement, contains at least q effective features.
// Binomial terms are summed in log space. Throws RangeError when F > 2000.
double pr_subspace_useful(const SubspaceUsefulnessQuery& q);

enum class SamplingRegime { with_replacement, without_replacement };

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
};

Estimate pr_subspace_useful_mc(const SubspaceUsefulnessQuery& q, std::size_t trials, Rng& rng,
                               SamplingRegime regime = SamplingRegime::with_replacement);

// 1 - alpha.
double theorem2_bound(double alpha);

struct UsefulU {
  double sum_form = 0.0;
  double closed_form = 0.0;  // 1 - alpha^c
};

// Probability that at least one of c subspaces, each useful with probability
// 1 - alpha, is useful. Throws std::logic_error if the two forms disagree by
// more than 1e-12.
UsefulU pr_U_useful(std::size_t c, double alpha);

struct CurvePoint {
  std::size_t features = 0;
  std::size_t effective = 0;
  std::size_t min_effective = 0;
  double probability = 0.0;
  double effective_alpha = 0.0;
  // G == beta * F and q == alpha * G hold without rounding.
  bool exact = false;
};

std::vector<CurvePoint> prob_curve(double alpha, double beta, std::size_t max_features);
std::string curve_to_csv(const std::vector<CurvePoint>& curve, double alpha, double beta);

struct InlierPriorityConfig {
  std::size_t penultimate_units = 16;  // u
  std::size_t classes = 10;            // c
  std::size_t n_inlier = 100;
  std::size_t n_anomaly = 10;
  std::size_t trials = 2000;
  std::uint64_t seed = 0;
  // Random sigmoid layer feeding the penultimate units.
  std::size_t input_dim = 8;
  double input_scale = 0.25;

  void validate() const;
};

struct InlierPriorityResult {
  double ratio = 0.0;  // E||grad_inlier||^2 / E||grad_anom||^2
  double ratio_std_error = 0.0;
  double mean_sq_norm_inlier = 0.0;
  double mean_sq_norm_anomaly = 0.0;
  // Empirical E[h_i h_j], E[h_i^2 h_j^2], E[h_i^3 h_j] over distinct samples.
  double moment_hh = 0.0;
  double moment_h2h2 = 0.0;
  double moment_h3h = 0.0;
};

// Monte-Carlo estimate of the squared-gradient-norm ratio between an inlier
// group and an anomaly group for the final softmax layer of a sigmoid network
// at uniform targets.
InlierPriorityResult inlier_priority_experiment(const InlierPriorityConfig& cfg);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_std_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

// Least squares fit of log(ratio) against log(population ratio), with a 95%
// interval from the residual variance (Student t quantile).
SlopeFit fit_log_log(const std::vector<double>& population_ratios, const std::vector<double>& gradient_ratios);

struct McCheckRow {
  SubspaceUsefulnessQuery query;
  double closed_form = 0.0;
  Estimate estimate;
  double delta = 0.0;  // estimate - closed form
  bool within_tolerance = false;
};

// Random queries with 2 <= F <= max_features compared against the
// with-replacement Monte-Carlo oracle. A row passes when |delta| is within
// both `abs_tol` and `se_multiple` standard errors.
std::vector<McCheckRow> mc_check(std::size_t queries, std::size_t max_features, std::size_t trials,
                                 std::uint64_t seed, double abs_tol = 0.005, double se_multiple = 4.0);

struct InlierPriorityGrid {
  std::vector<double> population_ratios;
  std::vector<InlierPriorityResult> results;
  SlopeFit fit;  // over every grid point
};

// Runs the experiment at n_inlier = ratio * base.n_anomaly for each ratio.
InlierPriorityGrid inlier_priority_grid(const InlierPriorityConfig& base, const std::vector<double>& ratios);

}  // namespace theory
}  // namespace slad
