#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "slad/data.hpp"
#include "slad/nn.hpp"
#include "slad/supervision.hpp"

namespace slad {

enum class LossVariant { jsd, mse, ce };

std::string_view to_string(LossVariant v);
LossVariant loss_variant_from_string(std::string_view s);

struct TrainConfig {
  std::size_t c = 10;
  std::size_t r = 20;
  std::size_t h = 128;
  double gamma = 200.0;
  std::size_t delta = kDefaultDelta;
  std::size_t hidden_units = 100;
  double lr = 1e-3;
  std::size_t batch_size = 128;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
  LossVariant loss_variant = LossVariant::jsd;
  TransformVariant transform_variant = TransformVariant::affine;
  bool use_feature_weights = true;
  // Draw fresh subspaces every epoch instead of once up front.
  bool resample_per_epoch = false;
  unsigned threads = 1;

  // Throws InvalidInput naming the offending field.
  void validate() const;
  ScaleParams scale_params() const { return {c, h, gamma}; }
};

nlohmann::json config_to_json(const TrainConfig& c);
// All fields except resample_per_epoch are required; unknown loss or
// transform names throw InvalidInput.
TrainConfig config_from_json(const nlohmann::json& j);

inline constexpr int kModelFormatVersion = 1;

struct SladModel {
  TrainConfig config;
  std::vector<std::string> feature_names;
  Standardizer standardizer;
  FeatureWeights feature_weights;
  TransformBank bank;
  MlpNet phi;

  std::size_t dims() const { return standardizer.mean.size(); }
};

// Phi: the same h -> hidden -> 1 scoring head (LeakyReLU hidden layer)
// applied to every row of U.
MlpNet make_phi(std::size_t h, std::size_t hidden, std::uint64_t seed);
std::vector<double> phi_forward(const MlpNet& phi, const Matrix& u);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d logits
};

LossAndGrad scale_loss(std::span<const double> logits, std::span<const double> y, LossVariant variant);
double scale_loss_value(std::span<const double> logits, std::span<const double> y, LossVariant variant);

struct TrainHistory {
  double initial_loss = 0.0;          // mean sample loss before the first update
  std::vector<double> epoch_losses;   // mean sample loss over each epoch's batches
  std::uint64_t bank_fingerprint_before = 0;
  std::uint64_t bank_fingerprint_after = 0;
};

using EpochHook = std::function<void(std::size_t epoch, const SladModel& model, double epoch_loss)>;

// Trains on every row of `train` (raw, unstandardized features).
SladModel train(const Dataset& train, const TrainConfig& config, TrainHistory* history = nullptr,
                const EpochHook& on_epoch = {});

// Sum of the losses of r_eval fresh scale samples of x (raw features). The
// subspaces are drawn from a stream keyed by (seed, content of x), so equal
// rows always receive equal scores.
double score(const SladModel& model, std::span<const double> x, std::size_t r_eval, std::uint64_t seed);
double score(const SladModel& model, std::span<const double> x, std::uint64_t seed);

std::vector<double> score_batch(const SladModel& model, const Matrix& features, std::uint64_t seed,
                                std::size_t r_eval = 0, unsigned threads = 1);

void save_model(const SladModel& model, const std::filesystem::path& path);
SladModel load_model(const std::filesystem::path& path);
std::string serialize_model(const SladModel& model);
SladModel deserialize_model(const std::string& text);

}  // namespace slad
