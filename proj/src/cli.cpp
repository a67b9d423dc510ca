#include "slad/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "slad/error.hpp"
#include "slad/eval.hpp"
#include "slad/parallel.hpp"
#include "slad/synthetic.hpp"
#include "slad/theory.hpp"

namespace slad::cli {

namespace {

using nlohmann::json;

template <typename T>
T field(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw UsageError("config field '" + key + "' has the wrong type");
  }
}

std::size_t count_field(const json& j, const std::string& key) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
    throw UsageError("config field '" + key + "' must be a nonnegative integer");
  }
  return j.get<std::size_t>();
}

void apply_file(RunConfig& rc, const json& file) {
  if (!file.is_object()) throw UsageError("config file must hold a JSON object");
  auto& t = rc.train;
  for (const auto& [key, v] : file.items()) {
    if (key == "c") t.c = count_field(v, key);
    else if (key == "r") t.r = count_field(v, key);
    else if (key == "h") t.h = count_field(v, key);
    else if (key == "delta") t.delta = count_field(v, key);
    else if (key == "hidden_units") t.hidden_units = count_field(v, key);
    else if (key == "batch_size") t.batch_size = count_field(v, key);
    else if (key == "epochs") t.epochs = count_field(v, key);
    else if (key == "seed") t.seed = count_field(v, key);
    else if (key == "threads") t.threads = static_cast<unsigned>(count_field(v, key));
    else if (key == "gamma") t.gamma = field<double>(v, key);
    else if (key == "lr") t.lr = field<double>(v, key);
    else if (key == "loss_variant") t.loss_variant = loss_variant_from_string(field<std::string>(v, key));
    else if (key == "transform_variant") t.transform_variant = transform_variant_from_string(field<std::string>(v, key));
    else if (key == "use_feature_weights") t.use_feature_weights = field<bool>(v, key);
    else if (key == "resample_per_epoch") t.resample_per_epoch = field<bool>(v, key);
    else if (key == "data") rc.data = field<std::string>(v, key);
    else if (key == "label_column") rc.label_column = field<std::string>(v, key);
    else if (key == "out") rc.out = field<std::string>(v, key);
    else if (key == "contamination") rc.contamination = field<double>(v, key);
    else throw UsageError("unknown config field '" + key + "'");
  }
}

template <typename T, typename U>
void take(const std::optional<T>& flag, U& target) {
  if (flag) target = static_cast<U>(*flag);
}

}  // namespace

RunConfig resolve_run_config(const nlohmann::json* file, const FlagOverrides& f) {
  RunConfig rc;
  rc.train.threads = threads_from_env(1);
  try {
    if (file) apply_file(rc, *file);
  } catch (const InvalidInput& e) {
    throw UsageError(e.what());
  }
  auto& t = rc.train;
  take(f.c, t.c);
  take(f.r, t.r);
  take(f.h, t.h);
  take(f.delta, t.delta);
  take(f.hidden_units, t.hidden_units);
  take(f.batch_size, t.batch_size);
  take(f.epochs, t.epochs);
  take(f.gamma, t.gamma);
  take(f.lr, t.lr);
  take(f.seed, t.seed);
  take(f.use_feature_weights, t.use_feature_weights);
  take(f.resample_per_epoch, t.resample_per_epoch);
  take(f.threads, t.threads);
  take(f.contamination, rc.contamination);
  take(f.data, rc.data);
  take(f.label_column, rc.label_column);
  take(f.out, rc.out);
  try {
    if (f.loss_variant) t.loss_variant = loss_variant_from_string(*f.loss_variant);
    if (f.transform_variant) t.transform_variant = transform_variant_from_string(*f.transform_variant);
    t.validate();
  } catch (const InvalidInput& e) {
    throw UsageError(e.what());
  }
  if (!(rc.contamination >= 0.0 && rc.contamination <= kMaxContamination)) {
    throw UsageError("config field 'contamination' must lie in [0, 0.10]");
  }
  return rc;
}

nlohmann::json to_json(const RunConfig& c) {
  json j = config_to_json(c.train);
  j["threads"] = c.train.threads;
  j["data"] = c.data;
  j["label_column"] = c.label_column;
  j["out"] = c.out;
  j["contamination"] = c.contamination;
  return j;
}

namespace {

struct TrainingOptions {
  std::string config_path;
  FlagOverrides flags;
  bool no_feature_weights = false;
  bool resample = false;
};

void add_training_options(CLI::App* cmd, TrainingOptions& o) {
  cmd->add_option("--config", o.config_path, "JSON config file (flat keys)");
  cmd->add_option("--data", o.flags.data, "Input CSV");
  cmd->add_option("--label-column", o.flags.label_column, "Label column name (default 'label')");
  cmd->add_option("--c", o.flags.c, "Sub-vectors per scale sample");
  cmd->add_option("--r", o.flags.r, "Scale samples per instance");
  cmd->add_option("--h", o.flags.h, "Representation dimension");
  cmd->add_option("--gamma", o.flags.gamma, "Label magnification");
  cmd->add_option("--delta", o.flags.delta, "Dimension threshold for uniform feature weights");
  cmd->add_option("--hidden-units", o.flags.hidden_units, "Hidden units of the scoring network");
  cmd->add_option("--lr", o.flags.lr, "Learning rate");
  cmd->add_option("--batch-size", o.flags.batch_size, "Scale samples per mini-batch");
  cmd->add_option("--epochs", o.flags.epochs, "Training epochs");
  cmd->add_option("--seed", o.flags.seed, "Random seed");
  cmd->add_option("--loss", o.flags.loss_variant, "Loss: jsd, mse or ce");
  cmd->add_option("--transform", o.flags.transform_variant, "Transform: affine, zero_pad or deep_mlp");
  cmd->add_flag("--no-feature-weights", o.no_feature_weights, "Use uniform feature weights");
  cmd->add_flag("--resample-per-epoch", o.resample, "Draw fresh subspaces every epoch");
  cmd->add_option("--threads", o.flags.threads, "Worker threads (default SLAD_THREADS or 1)");
  cmd->add_option("--contamination", o.flags.contamination, "Training contamination rate in [0, 0.10]");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

RunConfig resolve(TrainingOptions& o) {
  if (o.no_feature_weights) o.flags.use_feature_weights = false;
  if (o.resample) o.flags.resample_per_epoch = true;
  if (o.config_path.empty()) return resolve_run_config(nullptr, o.flags);
  const json file = read_json_file(o.config_path);
  return resolve_run_config(&file, o.flags);
}

void require_path(const std::string& value, const std::string& name) {
  if (value.empty()) throw UsageError("missing required " + name);
}

// Writes to the named file, or to `fallback` when the path is empty.
void emit(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty()) {
    fallback << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path + "'");
  f << text;
}

std::string scores_csv(const std::vector<double>& scores) {
  std::ostringstream s;
  s << "index,score\n" << std::setprecision(17);
  for (std::size_t i = 0; i < scores.size(); ++i) s << i << ',' << scores[i] << '\n';
  return s.str();
}

std::vector<double> read_scores_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open scores file '" + path + "'");
  std::string line;
  std::getline(in, line);
  std::vector<double> scores;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    try {
      scores.push_back(std::stod(line.substr(comma == std::string::npos ? 0 : comma + 1)));
    } catch (const std::exception&) {
      throw IngestionError("'" + path + "' row " + std::to_string(row) + ": cannot parse score");
    }
  }
  return scores;
}

// Loads the data file; the label column is optional unless `need_labels`.
Dataset load_data(const RunConfig& rc, bool need_labels) {
  try {
    return load_csv(rc.data, rc.label_column);
  } catch (const IngestionError& e) {
    if (need_labels) throw;
    const std::string msg = e.what();
    if (msg.find("label column") == std::string::npos) throw;
    return load_csv(rc.data, std::nullopt);
  }
}

MultiSeedSummary run_seeds(const Dataset& data, const RunConfig& rc, std::size_t n_seeds) {
  std::vector<MetricReport> runs;
  for (std::size_t s = 0; s < n_seeds; ++s) {
    runs.push_back(run_protocol(data, rc.train, rc.train.seed + s, rc.contamination).report);
  }
  return summarize(std::move(runs));
}

int cmd_train(TrainingOptions& o, const std::string& summary_path, const std::string& loss_report_path,
              bool no_split, std::ostream& out) {
  const RunConfig rc = resolve(o);
  require_path(rc.data, "--data");
  require_path(rc.out, "--out");
  const Dataset data = load_data(rc, false);

  Dataset train_set = data;
  std::optional<Dataset> test_set;
  json split_info = nullptr;
  if (data.labels && !no_split) {
    SplitSpec split = split_protocol(data, rc.train.seed);
    const Dataset* source = &data;
    ContaminatedSplit contaminated;
    if (rc.contamination > 0.0) {
      contaminated = contaminate(split, data, rc.contamination, rc.train.seed);
      split = contaminated.split;
      source = &contaminated.data;
    }
    train_set = source->subset(split.train);
    test_set = source->subset(split.test);
    split_info = {{"n_train", split.train.size()}, {"n_test", split.test.size()}};
  } else if (!loss_report_path.empty()) {
    throw UsageError("--loss-report needs labeled data and the split protocol");
  }
  std::optional<LossDistributionReport> report;
  if (!loss_report_path.empty()) report.emplace(*test_set, rc.train.seed, 0, rc.train.threads);

  TrainHistory history;
  const SladModel model = train(train_set, rc.train, &history, report ? report->hook() : EpochHook{});
  save_model(model, rc.out);
  if (report) emit(loss_report_path, report->to_csv(), out);

  json summary{{"model", rc.out},
               {"seed", rc.train.seed},
               {"epochs", rc.train.epochs},
               {"n_train", train_set.size()},
               {"dims", train_set.dims()},
               {"initial_training_loss", history.initial_loss},
               {"final_training_loss", history.epoch_losses.back()},
               {"epoch_losses", history.epoch_losses},
               {"split", split_info},
               {"config", to_json(rc)}};
  emit(summary_path, summary.dump(2) + "\n", out);
  return kExitOk;
}

int cmd_score(const std::string& model_path, const std::string& data_path, const std::string& label_column,
              std::optional<std::uint64_t> seed, std::size_t r_eval, std::optional<unsigned> threads,
              const std::string& out_path, std::ostream& out) {
  require_path(model_path, "--model");
  require_path(data_path, "--data");
  const SladModel model = load_model(model_path);
  RunConfig rc;
  rc.data = data_path;
  rc.label_column = label_column;
  const Dataset data = load_data(rc, false);
  if (data.dims() != model.dims()) {
    throw InvalidInput("data has " + std::to_string(data.dims()) + " features; the model expects D = " +
                       std::to_string(model.dims()));
  }
  const auto scores = score_batch(model, data.features, seed.value_or(model.config.seed), r_eval,
                                  threads.value_or(threads_from_env(1)));
  emit(out_path, scores_csv(scores), out);
  return kExitOk;
}

int cmd_eval(TrainingOptions& o, const std::string& scores_path, std::size_t n_seeds,
             const std::string& loss_report_path, std::ostream& out) {
  const RunConfig rc = resolve(o);
  require_path(rc.data, "--data");
  const Dataset data = load_data(rc, true);
  json result;
  if (!scores_path.empty()) {
    const auto scores = read_scores_csv(scores_path);
    if (scores.size() != data.size()) {
      throw MetricError("scores file has " + std::to_string(scores.size()) + " rows, labels have " +
                        std::to_string(data.size()));
    }
    result = to_json(evaluate_scores(scores, *data.labels, rc.train.seed, to_json(rc)));
  } else if (n_seeds <= 1) {
    std::optional<LossDistributionReport> report;
    SplitSpec split = split_protocol(data, rc.train.seed);
    if (!loss_report_path.empty()) {
      if (rc.contamination > 0.0) throw UsageError("--loss-report is not combined with --contamination");
      report.emplace(data.subset(split.test), rc.train.seed, 0, rc.train.threads);
    }
    auto outcome = run_protocol(data, rc.train, rc.train.seed, rc.contamination, report ? &*report : nullptr);
    if (report) emit(loss_report_path, report->to_csv(), out);
    result = to_json(outcome.report);
    result["config"] = to_json(rc);
  } else {
    result = to_json(run_seeds(data, rc, n_seeds));
    result["config"] = to_json(rc);
  }
  emit(rc.out, result.dump(2) + "\n", out);
  return kExitOk;
}

TrainConfig ablated(TrainConfig c, const std::string& variant) {
  if (variant == "zero_pad") c.transform_variant = TransformVariant::zero_pad;
  else if (variant == "deep_mlp") c.transform_variant = TransformVariant::deep_mlp;
  else if (variant == "no_weights") c.use_feature_weights = false;
  else if (variant == "ce") c.loss_variant = LossVariant::ce;
  else if (variant == "mse") c.loss_variant = LossVariant::mse;
  else throw UsageError("unknown ablation variant '" + variant + "'");
  return c;
}

int cmd_ablate(TrainingOptions& o, const std::string& variant, std::size_t n_seeds, bool with_baseline,
               std::ostream& out) {
  RunConfig rc = resolve(o);
  require_path(rc.data, "--data");
  const TrainConfig variant_config = ablated(rc.train, variant);
  const Dataset data = load_data(rc, true);
  json result{{"variant", variant}};
  RunConfig variant_rc = rc;
  variant_rc.train = variant_config;
  const auto ablation = run_seeds(data, variant_rc, n_seeds);
  result["ablation"] = to_json(ablation);
  if (with_baseline) {
    const auto baseline = run_seeds(data, rc, n_seeds);
    result["baseline"] = to_json(baseline);
    result["auc_roc_drop"] = baseline.mean_auc_roc - ablation.mean_auc_roc;
    result["auc_pr_drop"] = baseline.mean_auc_pr - ablation.mean_auc_pr;
  }
  result["config"] = to_json(rc);
  emit(rc.out, result.dump(2) + "\n", out);
  return kExitOk;
}

void check_ratio(double v, const std::string& name) {
  if (!(v > 0.0 && v <= 1.0)) throw UsageError(name + " must lie in (0, 1]");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scale learning for tabular anomaly detection", "slad"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);

  // train
  TrainingOptions train_opts;
  std::string summary_path, loss_report_path;
  bool no_split = false;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write it to --out");
  add_training_options(train_cmd, train_opts);
  train_cmd->add_option("--out", train_opts.flags.out, "Model file to write");
  train_cmd->add_option("--summary", summary_path, "Run summary JSON (default stdout)");
  train_cmd->add_option("--loss-report", loss_report_path, "Per-epoch test loss quartiles CSV");
  train_cmd->add_flag("--no-split", no_split, "Train on every row even when labels are present");

  // score
  std::string model_path, score_data, score_label = "label", score_out;
  std::optional<std::uint64_t> score_seed;
  std::optional<unsigned> score_threads;
  std::size_t r_eval = 0;
  auto* score_cmd = app.add_subcommand("score", "Score every row of a CSV");
  score_cmd->add_option("--model", model_path, "Model file");
  score_cmd->add_option("--data", score_data, "Input CSV");
  score_cmd->add_option("--label-column", score_label, "Label column to drop if present");
  score_cmd->add_option("--seed", score_seed, "Scoring seed (default: training seed)");
  score_cmd->add_option("--r-eval", r_eval, "Scale samples per instance (default: training r)");
  score_cmd->add_option("--threads", score_threads, "Worker threads");
  score_cmd->add_option("--out", score_out, "Scores CSV (default stdout)");

  // eval
  TrainingOptions eval_opts;
  std::string scores_path, eval_loss_report;
  std::size_t eval_seeds = 1;
  auto* eval_cmd = app.add_subcommand("eval", "Compute AUC-ROC / AUC-PR");
  add_training_options(eval_cmd, eval_opts);
  eval_cmd->add_option("--scores", scores_path, "Precomputed scores CSV aligned with --data");
  eval_cmd->add_option("--seeds", eval_seeds, "Independent runs (seeds seed..seed+n-1)")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--loss-report", eval_loss_report, "Per-epoch test loss quartiles CSV (single seed)");
  eval_cmd->add_option("--out", eval_opts.flags.out, "Report JSON (default stdout)");

  // ablate
  TrainingOptions ablate_opts;
  std::string variant;
  std::size_t ablate_seeds = 5;
  bool no_baseline = false;
  auto* ablate_cmd = app.add_subcommand("ablate", "Train and evaluate an ablated variant");
  add_training_options(ablate_cmd, ablate_opts);
  ablate_cmd->add_option("--variant", variant, "zero_pad, deep_mlp, no_weights, ce or mse")
      ->check(CLI::IsMember({"zero_pad", "deep_mlp", "no_weights", "ce", "mse"}));
  ablate_cmd->add_option("--seeds", ablate_seeds, "Independent runs")->check(CLI::PositiveNumber);
  ablate_cmd->add_flag("--no-baseline", no_baseline, "Skip the paired default-config runs");
  ablate_cmd->add_option("--out", ablate_opts.flags.out, "Report JSON (default stdout)");

  // theory
  auto* theory_cmd = app.add_subcommand("theory", "Probability and gradient experiments");
  theory_cmd->require_subcommand(1);
  double curve_alpha = 0.5, curve_beta = 0.5;
  std::size_t max_dim = 400;
  std::string theory_out;
  auto* curve_cmd = theory_cmd->add_subcommand("prob-curve", "Pr(subspace useful) against dimensionality");
  curve_cmd->add_option("--alpha", curve_alpha, "Minimum effective fraction");
  curve_cmd->add_option("--beta", curve_beta, "Effective feature fraction");
  curve_cmd->add_option("--max-dim", max_dim, "Largest feature count (<= 400)");
  curve_cmd->add_option("--out", theory_out, "CSV output (default stdout)");

  std::size_t pu_c = 10;
  double pu_alpha = 0.5;
  auto* pu_cmd = theory_cmd->add_subcommand("pr-u", "Pr(U useful) for c sub-vectors");
  pu_cmd->add_option("--c", pu_c, "Sub-vectors per sample");
  pu_cmd->add_option("--alpha", pu_alpha, "Minimum effective fraction");

  std::size_t mc_queries = 20, mc_max = 50, mc_trials = 1000000;
  std::uint64_t mc_seed = 0;
  auto* mc_cmd = theory_cmd->add_subcommand("mc-check", "Closed form against Monte-Carlo oracle");
  mc_cmd->add_option("--queries", mc_queries, "Random queries");
  mc_cmd->add_option("--max-features", mc_max, "Largest F");
  mc_cmd->add_option("--trials", mc_trials, "Monte-Carlo trials per query");
  mc_cmd->add_option("--seed", mc_seed, "Random seed");

  theory::InlierPriorityConfig ip;
  std::vector<double> ip_grid;
  auto* ip_cmd = theory_cmd->add_subcommand("inlier-priority", "Squared gradient norm ratio inliers/anomalies");
  ip_cmd->add_option("--n-in", ip.n_inlier, "Inlier group size");
  ip_cmd->add_option("--n-anom", ip.n_anomaly, "Anomaly group size");
  ip_cmd->add_option("--trials", ip.trials, "Monte-Carlo trials");
  ip_cmd->add_option("--units", ip.penultimate_units, "Penultimate units u");
  ip_cmd->add_option("--c", ip.classes, "Softmax nodes c");
  ip_cmd->add_option("--seed", ip.seed, "Random seed");
  ip_cmd->add_option("--grid", ip_grid, "Population ratios; runs a grid with a log-log fit")->delimiter(',');

  // make-synthetic
  SyntheticSpec syn;
  std::string syn_out;
  auto* syn_cmd = app.add_subcommand("make-synthetic", "Write the planted-outlier benchmark CSV");
  syn_cmd->add_option("--n", syn.n, "Rows");
  syn_cmd->add_option("--seed", syn.seed, "Random seed");
  syn_cmd->add_option("--informative", syn.informative, "Informative dimensions");
  syn_cmd->add_option("--noise", syn.noise, "Noise dimensions");
  syn_cmd->add_option("--outlier-fraction", syn.outlier_fraction, "Fraction of planted outliers");
  syn_cmd->add_option("--out", syn_out, "Output CSV")->required();

  // config
  TrainingOptions config_opts;
  auto* config_cmd = app.add_subcommand("config", "Print the resolved run configuration");
  add_training_options(config_cmd, config_opts);
  config_cmd->add_option("--out", config_opts.flags.out, "Output path recorded in the config");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train_opts, summary_path, loss_report_path, no_split, out);
    if (*score_cmd) {
      return cmd_score(model_path, score_data, score_label, score_seed, r_eval, score_threads, score_out, out);
    }
    if (*eval_cmd) return cmd_eval(eval_opts, scores_path, eval_seeds, eval_loss_report, out);
    if (*ablate_cmd) return cmd_ablate(ablate_opts, variant, ablate_seeds, !no_baseline, out);
    if (*config_cmd) {
      out << to_json(resolve(config_opts)).dump(2) << "\n";
      return kExitOk;
    }
    if (*syn_cmd) {
      write_csv(syn_out, make_synthetic(syn));
      return kExitOk;
    }
    if (*curve_cmd) {
      check_ratio(curve_alpha, "--alpha");
      check_ratio(curve_beta, "--beta");
      if (max_dim < 1 || max_dim > 400) throw UsageError("--max-dim must lie in [1, 400]");
      emit(theory_out, theory::curve_to_csv(theory::prob_curve(curve_alpha, curve_beta, max_dim), curve_alpha, curve_beta),
           out);
      return kExitOk;
    }
    if (*pu_cmd) {
      check_ratio(pu_alpha, "--alpha");
      if (pu_c < 1) throw UsageError("--c must be at least 1");
      const auto r = theory::pr_U_useful(pu_c, pu_alpha);
      out << json{{"c", pu_c}, {"alpha", pu_alpha}, {"probability", r.closed_form}, {"sum_form", r.sum_form}}.dump(2)
          << "\n";
      return kExitOk;
    }
    if (*mc_cmd) {
      if (mc_max < 2 || mc_max > theory::kMaxClosedFormFeatures) throw UsageError("--max-features must lie in [2, 2000]");
      if (mc_trials < 10000) throw UsageError("--trials must be at least 10000");
      const auto rows = theory::mc_check(mc_queries, mc_max, mc_trials, mc_seed);
      json list = json::array();
      bool all = true;
      double worst = 0.0;
      for (const auto& r : rows) {
        all = all && r.within_tolerance;
        worst = std::max(worst, std::abs(r.delta));
        list.push_back({{"F", r.query.features},
                        {"G", r.query.effective},
                        {"q", r.query.min_effective},
                        {"closed_form", r.closed_form},
                        {"monte_carlo", r.estimate.mean},
                        {"std_error", r.estimate.std_error},
                        {"delta", r.delta},
                        {"pass", r.within_tolerance}});
      }
      out << json{{"queries", list}, {"max_abs_delta", worst}, {"all_pass", all}}.dump(2) << "\n";
      return all ? kExitOk : kExitRuntime;
    }
    if (*ip_cmd) {
      try {
        ip.validate();
      } catch (const InvalidInput& e) {
        throw UsageError(e.what());
      }
      auto result_json = [](const theory::InlierPriorityResult& r) {
        return json{{"ratio", r.ratio},
                    {"ratio_std_error", r.ratio_std_error},
                    {"mean_sq_norm_inlier", r.mean_sq_norm_inlier},
                    {"mean_sq_norm_anomaly", r.mean_sq_norm_anomaly},
                    {"moment_hh", r.moment_hh},
                    {"moment_h2h2", r.moment_h2h2},
                    {"moment_h3h", r.moment_h3h}};
      };
      if (ip_grid.empty()) {
        out << result_json(theory::inlier_priority_experiment(ip)).dump(2) << "\n";
        return kExitOk;
      }
      const auto grid = theory::inlier_priority_grid(ip, ip_grid);
      json points = json::array();
      for (std::size_t i = 0; i < grid.results.size(); ++i) {
        auto p = result_json(grid.results[i]);
        p["population_ratio"] = grid.population_ratios[i];
        points.push_back(p);
      }
      out << json{{"points", points},
                  {"slope", grid.fit.slope},
                  {"slope_ci", {grid.fit.ci_low, grid.fit.ci_high}},
                  {"intercept", grid.fit.intercept}}
                 .dump(2)
          << "\n";
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace slad::cli
