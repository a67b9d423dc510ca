#include "slad/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "slad/error.hpp"
#include "slad/rng.hpp"

namespace slad {

namespace {

void check_metric_input(std::span<const double> scores, std::span<const int> labels, std::size_t& n_pos,
                        std::size_t& n_neg) {
  if (scores.size() != labels.size()) {
    throw MetricError("score count " + std::to_string(scores.size()) + " != label count " +
                      std::to_string(labels.size()));
  }
  n_pos = 0;
  n_neg = 0;
  for (int l : labels) {
    if (l == 1) ++n_pos;
    else if (l == 0) ++n_neg;
    else throw MetricError("labels must be 0 or 1");
  }
  if (n_pos == 0 || n_neg == 0) throw MetricError("metric needs both inliers and anomalies");
}

}  // namespace

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  std::size_t n_pos = 0, n_neg = 0;
  check_metric_input(scores, labels, n_pos, n_neg);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::sort(order, [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of midranks of the anomalies. Ranks are kept doubled to stay integral.
  std::uint64_t rank_sum_x2 = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const std::uint64_t midrank_x2 = i + 1 + j;  // (i+1) + j, i.e. twice the mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) rank_sum_x2 += midrank_x2;
    i = j;
  }
  const double u = static_cast<double>(rank_sum_x2) / 2.0 -
                   static_cast<double>(n_pos) * static_cast<double>(n_pos + 1) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double auc_pr(std::span<const double> scores, std::span<const int> labels) {
  std::size_t n_pos = 0, n_neg = 0;
  check_metric_input(scores, labels, n_pos, n_neg);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double ap = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[order[rank]] == 1) {
      ++hits;
      ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  return ap / static_cast<double>(n_pos);
}

MetricReport evaluate_scores(std::span<const double> scores, std::span<const int> labels, std::uint64_t seed,
                             nlohmann::json config) {
  MetricReport r;
  r.auc_roc = auc_roc(scores, labels);
  r.auc_pr = auc_pr(scores, labels);
  r.n_anomalies = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  r.n_inliers = labels.size() - r.n_anomalies;
  r.seed = seed;
  r.config = std::move(config);
  return r;
}

nlohmann::json to_json(const MetricReport& r) {
  return {{"auc_roc", r.auc_roc},     {"auc_pr", r.auc_pr}, {"n_inliers", r.n_inliers},
          {"n_anomalies", r.n_anomalies}, {"seed", r.seed},     {"config", r.config}};
}

Quartiles quartiles(std::vector<double> values) {
  if (values.empty()) throw InvalidInput("quartiles of an empty set");
  std::ranges::sort(values);
  auto at = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  return {values.front(), at(0.25), at(0.5), at(0.75), values.back()};
}

std::vector<double> instance_losses(const SladModel& model, const Matrix& features, std::uint64_t seed,
                                    std::size_t r_eval, unsigned threads) {
  const std::size_t r = r_eval == 0 ? model.config.r : r_eval;
  auto s = score_batch(model, features, seed, r, threads);
  for (double& v : s) v /= static_cast<double>(r);
  return s;
}

LossDistributionReport::LossDistributionReport(Dataset test, std::uint64_t seed, std::size_t r_eval, unsigned threads)
    : test_(std::move(test)), seed_(seed), r_eval_(r_eval), threads_(threads) {
  if (!test_.labels) throw InvalidInput("loss distribution report needs labeled test data");
}

EpochHook LossDistributionReport::hook() {
  return [this](std::size_t epoch, const SladModel& model, double) {
    const auto losses = instance_losses(model, test_.features, seed_, r_eval_, threads_);
    for (int label : {0, 1}) {
      std::vector<double> group;
      for (std::size_t i = 0; i < losses.size(); ++i)
        if ((*test_.labels)[i] == label) group.push_back(losses[i]);
      if (!group.empty()) rows_.push_back({epoch + 1, label, quartiles(std::move(group))});
    }
  };
}

std::string LossDistributionReport::to_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "epoch,class,q0,q1,q2,q3,q4\n";
  for (const auto& r : rows_) {
    out << r.epoch << ',' << (r.label == 1 ? "anomaly" : "inlier") << ',' << r.stats.q0 << ',' << r.stats.q1 << ','
        << r.stats.q2 << ',' << r.stats.q3 << ',' << r.stats.q4 << '\n';
  }
  return out.str();
}

double LossDistributionReport::final_median(int label) const {
  for (auto it = rows_.rbegin(); it != rows_.rend(); ++it)
    if (it->label == label) return it->stats.q2;
  throw InvalidState("no loss distribution recorded for this class");
}

std::vector<LossDistributionRow> loss_distribution_report(const Dataset& train, const Dataset& test,
                                                          const TrainConfig& config, std::uint64_t score_seed) {
  LossDistributionReport report(test, score_seed, 0, config.threads);
  slad::train(train, config, nullptr, report.hook());
  return report.rows();
}

RunOutcome run_protocol(const Dataset& data, TrainConfig config, std::uint64_t seed, double contamination,
                        LossDistributionReport* report) {
  if (!data.labels) throw ProtocolError("evaluation requires labels");
  config.seed = seed;
  SplitSpec split = split_protocol(data, seed);
  const Dataset* source = &data;
  ContaminatedSplit contaminated;
  if (contamination > 0.0) {
    contaminated = contaminate(split, data, contamination, seed);
    split = contaminated.split;
    source = &contaminated.data;
  }
  const Dataset train_set = source->subset(split.train);
  const Dataset test_set = source->subset(split.test);
  SladModel model = train(train_set, config, nullptr, report ? report->hook() : EpochHook{});
  auto scores = score_batch(model, test_set.features, seed, 0, config.threads);
  MetricReport metrics = evaluate_scores(scores, *test_set.labels, seed, config_to_json(config));
  return {std::move(metrics), std::move(model), std::move(scores), std::move(split)};
}

MultiSeedSummary summarize(std::vector<MetricReport> runs) {
  if (runs.empty()) throw InvalidInput("no runs to summarize");
  MultiSeedSummary s;
  const double n = static_cast<double>(runs.size());
  for (const auto& r : runs) {
    s.mean_auc_roc += r.auc_roc / n;
    s.mean_auc_pr += r.auc_pr / n;
  }
  // population deviation over runs
  for (const auto& r : runs) {
    s.std_auc_roc += (r.auc_roc - s.mean_auc_roc) * (r.auc_roc - s.mean_auc_roc) / n;
    s.std_auc_pr += (r.auc_pr - s.mean_auc_pr) * (r.auc_pr - s.mean_auc_pr) / n;
  }
  s.std_auc_roc = std::sqrt(s.std_auc_roc);
  s.std_auc_pr = std::sqrt(s.std_auc_pr);
  s.runs = std::move(runs);
  return s;
}

nlohmann::json to_json(const MultiSeedSummary& s) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : s.runs) runs.push_back(to_json(r));
  return {{"auc_roc", {{"mean", s.mean_auc_roc}, {"std", s.std_auc_roc}}},
          {"auc_pr", {{"mean", s.mean_auc_pr}, {"std", s.std_auc_pr}}},
          {"n_runs", s.runs.size()},
          {"runs", runs}};
}

}  // namespace slad
