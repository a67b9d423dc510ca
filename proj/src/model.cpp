#include "slad/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "slad/error.hpp"
#include "slad/parallel.hpp"
#include "slad/rng.hpp"

namespace slad {

namespace {

constexpr std::uint64_t kPhiTag = 0x504849u;
constexpr std::uint64_t kShuffleTag = 0x534855u;
constexpr std::uint64_t kResampleTag = 0x525350u;
constexpr std::uint64_t kScoreTag = 0x53434fu;

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) throw InvalidInput("invalid config field '" + field + "': " + why);
}

}  // namespace

std::string_view to_string(LossVariant v) {
  switch (v) {
    case LossVariant::jsd: return "jsd";
    case LossVariant::mse: return "mse";
    case LossVariant::ce: return "ce";
  }
  return "jsd";
}

LossVariant loss_variant_from_string(std::string_view s) {
  if (s == "jsd") return LossVariant::jsd;
  if (s == "mse") return LossVariant::mse;
  if (s == "ce") return LossVariant::ce;
  throw InvalidInput("unknown loss variant '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  require(c >= 2, "c", "must be at least 2");
  require(r >= 1, "r", "must be at least 1");
  require(h >= 1, "h", "must be at least 1");
  require(gamma > 0.0 && std::isfinite(gamma), "gamma", "must be positive");
  require(hidden_units >= 1, "hidden_units", "must be at least 1");
  require(lr > 0.0 && std::isfinite(lr), "lr", "must be positive");
  require(batch_size >= 1, "batch_size", "must be at least 1");
  require(epochs >= 1, "epochs", "must be at least 1");
  require(threads >= 1, "threads", "must be at least 1");
}

MlpNet make_phi(std::size_t h, std::size_t hidden, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {kPhiTag}));
  MlpNet net;
  net.layers.push_back(DenseLayer::random(h, hidden, Activation::leaky_relu, rng));
  net.layers.push_back(DenseLayer::random(hidden, 1, Activation::identity, rng));
  return net;
}

std::vector<double> phi_forward(const MlpNet& phi, const Matrix& u) {
  if (phi.out_dim() != 1) throw InvalidInput("scoring head must produce one logit per row");
  if (u.cols() != phi.in_dim()) {
    throw InvalidInput("U has " + std::to_string(u.cols()) + " columns, phi expects " +
                       std::to_string(phi.in_dim()));
  }
  const Matrix out = mlp_predict(phi, u);
  return {out.data().begin(), out.data().end()};
}

LossAndGrad scale_loss(std::span<const double> logits, std::span<const double> y, LossVariant variant) {
  if (logits.size() != y.size() || logits.empty()) {
    throw InvalidInput("logits and labels must have the same nonzero length");
  }
  const std::size_t c = logits.size();
  LossAndGrad out;
  switch (variant) {
    case LossVariant::jsd: {
      const auto target = softmax(y);
      out.loss = jsd(softmax(logits), target);
      out.grad = jsd_softmax_grad(logits, target);
      break;
    }
    case LossVariant::mse: {
      out.grad.resize(c);
      for (std::size_t i = 0; i < c; ++i) {
        const double d = logits[i] - y[i];
        out.loss += d * d;
        out.grad[i] = 2.0 * d / static_cast<double>(c);
      }
      out.loss /= static_cast<double>(c);
      break;
    }
    case LossVariant::ce: {
      // ties resolve to the lowest index
      const auto target = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
      out.grad = softmax(logits);
      out.loss = -std::log(std::max(out.grad[target], kJsdFloor));
      out.grad[target] -= 1.0;
      break;
    }
  }
  return out;
}

double scale_loss_value(std::span<const double> logits, std::span<const double> y, LossVariant variant) {
  switch (variant) {
    case LossVariant::jsd: return jsd(softmax(logits), softmax(y));
    case LossVariant::mse: {
      double s = 0.0;
      for (std::size_t i = 0; i < logits.size(); ++i) s += (logits[i] - y[i]) * (logits[i] - y[i]);
      return s / static_cast<double>(logits.size());
    }
    case LossVariant::ce: {
      const auto target = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
      return -std::log(std::max(softmax(logits)[target], kJsdFloor));
    }
  }
  return 0.0;
}

namespace {

// Mean loss over a list of plans, optionally applying one Adam step per batch.
struct BatchRunner {
  const Matrix& x;  // standardized training features
  const TransformBank& bank;
  const TrainConfig& cfg;

  double mean_loss(const MlpNet& phi, const std::vector<SamplePlan>& plans) const {
    double total = 0.0;
    const std::size_t c = cfg.c;
    for (std::size_t start = 0; start < plans.size(); start += cfg.batch_size) {
      const std::size_t b = std::min(cfg.batch_size, plans.size() - start);
      Matrix u(b * c, cfg.h);
      for (std::size_t k = 0; k < b; ++k) {
        const auto& p = plans[start + k];
        materialize_into(p, x.row(p.instance), bank, u, k * c);
      }
      const auto logits = phi_forward(phi, u);
      for (std::size_t k = 0; k < b; ++k) {
        total += scale_loss_value(std::span(logits).subspan(k * c, c), plans[start + k].y, cfg.loss_variant);
      }
    }
    return total / static_cast<double>(plans.size());
  }

  // Buffers reused across batches.
  mutable Matrix u{};
  mutable ForwardResult fwd{};
  mutable Matrix out_grad{};
  mutable NetGradients grads{};
  mutable BackwardWorkspace work{};

  double epoch(MlpNet& phi, AdamState& adam, const std::vector<SamplePlan>& plans,
               const std::vector<std::size_t>& order, std::size_t epoch_index) const {
    const std::size_t c = cfg.c;
    double total = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t b = std::min(cfg.batch_size, order.size() - start);
      u.reshape(b * c, cfg.h);
      for (std::size_t k = 0; k < b; ++k) {
        const auto& p = plans[order[start + k]];
        materialize_into(p, x.row(p.instance), bank, u, k * c);
      }
      mlp_forward_into(phi, u, fwd);
      out_grad.reshape(b * c, 1);
      double batch_loss = 0.0;
      const double inv_b = 1.0 / static_cast<double>(b);
      for (std::size_t k = 0; k < b; ++k) {
        const auto logits = std::span<const double>(fwd.output.values()).subspan(k * c, c);
        const auto lg = scale_loss(logits, plans[order[start + k]].y, cfg.loss_variant);
        batch_loss += lg.loss;
        for (std::size_t i = 0; i < c; ++i) out_grad(k * c + i, 0) = lg.grad[i] * inv_b;
      }
      if (!std::isfinite(batch_loss)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch_index + 1 << ", batch " << batch_index + 1;
        throw TrainingError(msg.str());
      }
      total += batch_loss;
      mlp_backward_into(phi, fwd.cache, out_grad, grads, work);
      try {
        adam_step(phi, grads, adam, cfg.lr);
      } catch (const TrainingError& e) {
        std::ostringstream msg;
        msg << "epoch " << epoch_index + 1 << ", batch " << batch_index + 1 << ": " << e.what();
        throw TrainingError(msg.str());
      }
    }
    return total / static_cast<double>(order.size());
  }
};

}  // namespace

SladModel train(const Dataset& data, const TrainConfig& config, TrainHistory* history, const EpochHook& on_epoch) {
  config.validate();
  if (data.size() == 0 || data.dims() == 0) throw InvalidInput("training data is empty");
  if (!data.features.all_finite()) throw InvalidInput("training data contains non-finite values");

  const std::size_t d = data.dims();
  Standardizer standardizer = Standardizer::fit(data.features);
  const Matrix x = standardizer.apply(data.features);
  FeatureWeights weights = config.use_feature_weights ? compute_feature_weights(x, config.delta) : uniform_weights(d);

  SladModel model{config,
                  data.feature_names,
                  std::move(standardizer),
                  std::move(weights),
                  TransformBank(config.transform_variant, d, config.h, config.seed),
                  make_phi(config.h, config.hidden_units, config.seed)};

  const auto params = config.scale_params();
  auto plans = plan_supervision(data.size(), d, model.feature_weights, params, config.r, config.seed, config.threads);

  BatchRunner runner{x, model.bank, model.config};
  if (history) {
    model.bank.instantiate_all();
    history->bank_fingerprint_before = model.bank.fingerprint();
    history->initial_loss = runner.mean_loss(model.phi, plans);
    history->epoch_losses.clear();
  }

  AdamState adam(model.phi.parameter_count());
  std::vector<std::size_t> order(plans.size());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.resample_per_epoch && epoch > 0) {
      plans = plan_supervision(data.size(), d, model.feature_weights, params, config.r,
                               derive_seed(config.seed, {kResampleTag, epoch}), config.threads);
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, {kShuffleTag, epoch}));
    shuffle_rng.shuffle(order);
    const double loss = runner.epoch(model.phi, adam, plans, order, epoch);
    if (history) history->epoch_losses.push_back(loss);
    if (on_epoch) on_epoch(epoch, model, loss);
  }
  if (history) history->bank_fingerprint_after = model.bank.fingerprint();
  return model;
}

double score(const SladModel& model, std::span<const double> x, std::size_t r_eval, std::uint64_t seed) {
  if (x.size() != model.dims()) {
    throw InvalidInput("instance has " + std::to_string(x.size()) + " features, model expects " +
                       std::to_string(model.dims()));
  }
  if (r_eval == 0) throw InvalidInput("r_eval must be at least 1");
  std::vector<double> z(x.begin(), x.end());
  model.standardizer.apply_inplace(z);

  const auto& cfg = model.config;
  const auto params = cfg.scale_params();
  const std::uint64_t instance_seed = derive_seed(seed, {kScoreTag, hash_values(x)});
  std::vector<SamplePlan> plans;
  plans.reserve(r_eval);
  Matrix u(r_eval * cfg.c, cfg.h);
  for (std::size_t j = 0; j < r_eval; ++j) {
    Rng rng(derive_seed(instance_seed, {j}));
    plans.push_back(plan_scale_sample(z.size(), model.feature_weights, params, rng));
    materialize_into(plans.back(), z, model.bank, u, j * cfg.c);
  }
  const auto logits = phi_forward(model.phi, u);
  double total = 0.0;
  for (std::size_t j = 0; j < r_eval; ++j) {
    total += scale_loss_value(std::span(logits).subspan(j * cfg.c, cfg.c), plans[j].y, cfg.loss_variant);
  }
  return total;
}

double score(const SladModel& model, std::span<const double> x, std::uint64_t seed) {
  return score(model, x, model.config.r, seed);
}

std::vector<double> score_batch(const SladModel& model, const Matrix& features, std::uint64_t seed,
                                std::size_t r_eval, unsigned threads) {
  if (features.cols() != model.dims()) {
    throw InvalidInput("data has " + std::to_string(features.cols()) + " features, model expects D = " +
                       std::to_string(model.dims()));
  }
  const std::size_t r = r_eval == 0 ? model.config.r : r_eval;
  std::vector<double> scores(features.rows());
  parallel_for(features.rows(), threads, [&](std::size_t i) { scores[i] = score(model, features.row(i), r, seed); });
  return scores;
}

}  // namespace slad
