#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slad/matrix.hpp"

namespace slad {

class Rng;

inline constexpr double kLeakySlope = 0.01;
inline constexpr double kJsdFloor = 1e-12;

enum class Activation { identity, leaky_relu, sigmoid };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view s);

struct DenseLayer {
  Matrix weights;  // out x in
  std::vector<double> bias;
  Activation activation = Activation::identity;

  std::size_t in_dim() const { return weights.cols(); }
  std::size_t out_dim() const { return weights.rows(); }

  // Weights and bias drawn uniform in [-1/sqrt(in), 1/sqrt(in)].
  static DenseLayer random(std::size_t in, std::size_t out, Activation act, Rng& rng);
};

struct MlpNet {
  std::vector<DenseLayer> layers;

  // Throws InvalidInput when adjacent layer dimensions do not chain.
  void validate() const;
  std::size_t in_dim() const;
  std::size_t out_dim() const;
  std::size_t parameter_count() const;
  // FNV hash over every weight and bias; changes iff some parameter changes.
  std::uint64_t fingerprint() const;
};

// Per-layer inputs and pre-activations recorded during a forward pass.
struct ForwardCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> preactivations;
};

struct LayerGrad {
  Matrix weights;
  std::vector<double> bias;
};

using NetGradients = std::vector<LayerGrad>;

std::vector<double> softmax(std::span<const double> v);

// Jensen-Shannon divergence (natural log) between two distributions.
double jsd(std::span<const double> p, std::span<const double> y);

// d jsd(softmax(logits), y) / d logits.
std::vector<double> jsd_softmax_grad(std::span<const double> logits, std::span<const double> y);

double apply_activation(Activation a, double x);
double activation_derivative(Activation a, double pre);

struct ForwardResult {
  Matrix output;
  ForwardCache cache;
};

ForwardResult mlp_forward(const MlpNet& net, const Matrix& batch);
// Same as mlp_forward, reusing the buffers already held by `result`.
void mlp_forward_into(const MlpNet& net, const Matrix& batch, ForwardResult& result);
// Forward pass without keeping the cache.
Matrix mlp_predict(const MlpNet& net, const Matrix& batch);

// Gradient of sum(output_grad .* output) with respect to every parameter.
NetGradients mlp_backward(const MlpNet& net, const ForwardCache& cache, const Matrix& output_grad);

struct BackwardWorkspace {
  Matrix delta;
  Matrix next;
};

// Same as mlp_backward, overwriting `grads` (shaped like zero_gradients(net)).
void mlp_backward_into(const MlpNet& net, const ForwardCache& cache, const Matrix& output_grad, NetGradients& grads,
                       BackwardWorkspace& work);

NetGradients zero_gradients(const MlpNet& net);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

// Bias-corrected Adam update on a flat parameter vector. Throws TrainingError
// naming the first non-finite gradient entry.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr);

// Same update applied layer by layer; state is sized to net.parameter_count().
void adam_step(MlpNet& net, const NetGradients& grads, AdamState& state, double lr);

// Flattened views in the canonical order: layer 0 weights, layer 0 bias, ...
std::vector<double> flatten_parameters(const MlpNet& net);
std::vector<double> flatten_gradients(const NetGradients& grads);
void assign_parameters(MlpNet& net, std::span<const double> flat);

// Loss closure for the gradient checker: returns the loss of `net` and, when
// `grads` is non-null, writes the analytic gradient into it.
using LossClosure = std::function<double(const MlpNet& net, NetGradients* grads)>;

// Max over all parameters of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
// with central differences of step eps.
double finite_diff_check(const MlpNet& net, const LossClosure& loss, double eps);

}  // namespace slad
