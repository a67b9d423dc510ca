#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "slad/data.hpp"
#include "slad/model.hpp"

namespace slad {

// Probability that a random anomaly outscores a random inlier, ties counting
// one half (midranks).
double auc_roc(std::span<const double> scores, std::span<const int> labels);

// Average precision. Ranking is by descending score, then ascending index.
double auc_pr(std::span<const double> scores, std::span<const int> labels);

struct MetricReport {
  double auc_roc = 0.0;
  double auc_pr = 0.0;
  std::size_t n_inliers = 0;
  std::size_t n_anomalies = 0;
  std::uint64_t seed = 0;
  nlohmann::json config;
};

MetricReport evaluate_scores(std::span<const double> scores, std::span<const int> labels, std::uint64_t seed,
                             nlohmann::json config = nlohmann::json::object());
nlohmann::json to_json(const MetricReport& r);

struct Quartiles {
  double q0 = 0.0, q1 = 0.0, q2 = 0.0, q3 = 0.0, q4 = 0.0;
};

// Min, quartiles and max with linear interpolation between order statistics.
Quartiles quartiles(std::vector<double> values);

struct LossDistributionRow {
  std::size_t epoch = 0;  // 1-based
  int label = 0;
  Quartiles stats;
};

// Mean per-sample loss of every test instance (its score divided by r_eval).
std::vector<double> instance_losses(const SladModel& model, const Matrix& features, std::uint64_t seed,
                                    std::size_t r_eval = 0, unsigned threads = 1);

// Per-class loss quartiles of the test set after each training epoch.
class LossDistributionReport {
 public:
  LossDistributionReport(Dataset test, std::uint64_t seed, std::size_t r_eval = 0, unsigned threads = 1);

  EpochHook hook();
  const std::vector<LossDistributionRow>& rows() const { return rows_; }
  std::string to_csv() const;
  // Median loss of the given class at the final recorded epoch.
  double final_median(int label) const;

 private:
  Dataset test_;
  std::uint64_t seed_;
  std::size_t r_eval_;
  unsigned threads_;
  std::vector<LossDistributionRow> rows_;
};

std::vector<LossDistributionRow> loss_distribution_report(const Dataset& train, const Dataset& test,
                                                          const TrainConfig& config, std::uint64_t score_seed);

struct RunOutcome {
  MetricReport report;
  SladModel model;
  std::vector<double> scores;
  SplitSpec split;
};

// One protocol run: split (optionally contaminated) by seed, train, score the
// test rows, compute metrics. `config.seed` is replaced by `seed`.
RunOutcome run_protocol(const Dataset& data, TrainConfig config, std::uint64_t seed, double contamination = 0.0,
                        LossDistributionReport* report = nullptr);

struct MultiSeedSummary {
  std::vector<MetricReport> runs;
  double mean_auc_roc = 0.0, std_auc_roc = 0.0;
  double mean_auc_pr = 0.0, std_auc_pr = 0.0;
};

MultiSeedSummary summarize(std::vector<MetricReport> runs);
nlohmann::json to_json(const MultiSeedSummary& s);

}  // namespace slad
