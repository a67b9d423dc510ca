#include "slad/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "slad/error.hpp"
#include "slad/rng.hpp"

namespace slad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using CMapVec = Eigen::Map<const Eigen::RowVectorXd>;

MapMat view(Matrix& m) { return MapMat(m.values().data(), m.rows(), m.cols()); }
CMapMat view(const Matrix& m) { return CMapMat(m.values().data(), m.rows(), m.cols()); }

std::string dims(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::sigmoid: return "sigmoid";
  }
  return "identity";
}

Activation activation_from_string(std::string_view s) {
  if (s == "identity") return Activation::identity;
  if (s == "leaky_relu") return Activation::leaky_relu;
  if (s == "sigmoid") return Activation::sigmoid;
  throw InvalidInput("unknown activation '" + std::string(s) + "'");
}

DenseLayer DenseLayer::random(std::size_t in, std::size_t out, Activation act, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  DenseLayer layer{Matrix(out, in), std::vector<double>(out), act};
  for (double& w : layer.weights.values()) w = rng.uniform(-bound, bound);
  for (double& b : layer.bias) b = rng.uniform(-bound, bound);
  return layer;
}

void MlpNet::validate() const {
  if (layers.empty()) throw InvalidInput("network has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.bias.size() != l.weights.rows()) {
      throw InvalidInput("layer " + std::to_string(i) + ": bias length " +
                         std::to_string(l.bias.size()) + " != " + std::to_string(l.weights.rows()));
    }
    if (i + 1 < layers.size() && l.out_dim() != layers[i + 1].in_dim()) {
      throw InvalidInput("layer " + std::to_string(i) + " output " + std::to_string(l.out_dim()) +
                         " does not chain into input " + std::to_string(layers[i + 1].in_dim()));
    }
  }
}

std::size_t MlpNet::in_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
std::size_t MlpNet::out_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }

std::size_t MlpNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

std::uint64_t MlpNet::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& l : layers) {
    h = hash_values(l.weights.values(), h);
    h = hash_values(l.bias, h);
  }
  return h;
}

std::vector<double> softmax(std::span<const double> v) {
  if (v.empty()) throw InvalidInput("softmax of an empty vector");
  const double mx = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    sum += out[i];
  }
  for (double& o : out) o /= sum;
  return out;
}

double jsd(std::span<const double> p, std::span<const double> y) {
  if (p.size() != y.size()) {
    throw InvalidInput("jsd length mismatch: " + std::to_string(p.size()) + " vs " +
                       std::to_string(y.size()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double a = std::max(p[i], kJsdFloor);
    const double b = std::max(y[i], kJsdFloor);
    const double m = 0.5 * (a + b);
    total += 0.5 * (a * std::log(a / m) + b * std::log(b / m));
  }
  return std::max(total, 0.0);
}

std::vector<double> jsd_softmax_grad(std::span<const double> logits, std::span<const double> y) {
  if (logits.size() != y.size()) {
    throw InvalidInput("jsd length mismatch: " + std::to_string(logits.size()) + " vs " +
                       std::to_string(y.size()));
  }
  const auto p = softmax(logits);
  // d jsd / d p_i = 0.5 * log(p_i / m_i)
  std::vector<double> d(p.size());
  double dot = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double a = std::max(p[i], kJsdFloor);
    const double b = std::max(y[i], kJsdFloor);
    d[i] = 0.5 * std::log(2.0 * a / (a + b));
    dot += p[i] * d[i];
  }
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) g[i] = p[i] * (d[i] - dot);
  return g;
}

double apply_activation(Activation a, double x) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::leaky_relu: return x >= 0.0 ? x : kLeakySlope * x;
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
  }
  return x;
}

double activation_derivative(Activation a, double pre) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::leaky_relu: return pre >= 0.0 ? 1.0 : kLeakySlope;
    case Activation::sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-pre));
      return s * (1.0 - s);
    }
  }
  return 1.0;
}

namespace {

void dense_forward(const DenseLayer& layer, const Matrix& x, Matrix& pre, Matrix& out) {
  pre.reshape(x.rows(), layer.out_dim());
  auto z = view(pre);
  z.noalias() = view(x) * view(layer.weights).transpose();
  z.rowwise() += CMapVec(layer.bias.data(), static_cast<Eigen::Index>(layer.bias.size()));
  out = pre;
  if (layer.activation == Activation::leaky_relu) {
    for (double& v : out.values()) v = v >= 0.0 ? v : kLeakySlope * v;
  } else if (layer.activation != Activation::identity) {
    for (double& v : out.values()) v = apply_activation(layer.activation, v);
  }
}

void check_input(const MlpNet& net, const Matrix& batch) {
  net.validate();
  if (batch.cols() != net.in_dim()) {
    throw InvalidInput("batch has " + std::to_string(batch.cols()) + " columns, network expects " +
                       std::to_string(net.in_dim()));
  }
}

}  // namespace

void mlp_forward_into(const MlpNet& net, const Matrix& batch, ForwardResult& result) {
  check_input(net, batch);
  const std::size_t n = net.layers.size();
  auto& cache = result.cache;
  cache.inputs.resize(n);
  cache.preactivations.resize(n);
  cache.inputs[0] = batch;
  for (std::size_t i = 0; i < n; ++i) {
    Matrix& out = i + 1 < n ? cache.inputs[i + 1] : result.output;
    dense_forward(net.layers[i], cache.inputs[i], cache.preactivations[i], out);
  }
}

ForwardResult mlp_forward(const MlpNet& net, const Matrix& batch) {
  ForwardResult result;
  mlp_forward_into(net, batch, result);
  return result;
}

Matrix mlp_predict(const MlpNet& net, const Matrix& batch) {
  check_input(net, batch);
  Matrix current = batch, pre, out;
  for (const auto& layer : net.layers) {
    dense_forward(layer, current, pre, out);
    std::swap(current, out);
  }
  return current;
}

NetGradients zero_gradients(const MlpNet& net) {
  NetGradients g;
  g.reserve(net.layers.size());
  for (const auto& l : net.layers) {
    g.push_back({Matrix(l.weights.rows(), l.weights.cols()), std::vector<double>(l.bias.size(), 0.0)});
  }
  return g;
}

void mlp_backward_into(const MlpNet& net, const ForwardCache& cache, const Matrix& output_grad, NetGradients& grads,
                       BackwardWorkspace& work) {
  const std::size_t n_layers = net.layers.size();
  if (cache.inputs.size() != n_layers || cache.preactivations.size() != n_layers) {
    throw InvalidState("forward cache holds " + std::to_string(cache.inputs.size()) +
                       " layers, network has " + std::to_string(n_layers));
  }
  const std::size_t rows = cache.inputs.front().rows();
  for (std::size_t i = 0; i < n_layers; ++i) {
    const auto& l = net.layers[i];
    if (cache.inputs[i].cols() != l.in_dim() || cache.inputs[i].rows() != rows ||
        cache.preactivations[i].cols() != l.out_dim() || cache.preactivations[i].rows() != rows) {
      throw InvalidState("forward cache does not match layer " + std::to_string(i));
    }
  }
  if (output_grad.rows() != rows || output_grad.cols() != net.out_dim()) {
    throw InvalidState("output gradient is " + dims(output_grad.rows(), output_grad.cols()) +
                       ", expected " + dims(rows, net.out_dim()));
  }
  if (grads.size() != n_layers) grads = zero_gradients(net);

  Matrix& delta = work.delta;
  delta = output_grad;
  for (std::size_t k = n_layers; k-- > 0;) {
    const auto& layer = net.layers[k];
    if (layer.activation != Activation::identity) {
      const auto pre = cache.preactivations[k].values();
      auto d = delta.values();
      if (layer.activation == Activation::leaky_relu) {
        for (std::size_t j = 0; j < d.size(); ++j) d[j] *= pre[j] >= 0.0 ? 1.0 : kLeakySlope;
      } else {
        for (std::size_t j = 0; j < d.size(); ++j) d[j] *= activation_derivative(layer.activation, pre[j]);
      }
    }
    auto dz = view(std::as_const(delta));
    grads[k].weights.reshape(layer.out_dim(), layer.in_dim());
    view(grads[k].weights).noalias() = dz.transpose() * view(cache.inputs[k]);
    auto& bias_grad = grads[k].bias;
    bias_grad.assign(layer.out_dim(), 0.0);
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      const auto row = delta.row(r);
      for (std::size_t j = 0; j < bias_grad.size(); ++j) bias_grad[j] += row[j];
    }
    if (k > 0) {
      work.next.reshape(delta.rows(), layer.in_dim());
      view(work.next).noalias() = dz * view(layer.weights);
      std::swap(delta, work.next);
    }
  }
}

NetGradients mlp_backward(const MlpNet& net, const ForwardCache& cache, const Matrix& output_grad) {
  NetGradients grads = zero_gradients(net);
  BackwardWorkspace work;
  mlp_backward_into(net, cache, output_grad, grads, work);
  return grads;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw InvalidInput("adam: parameter, gradient and state sizes differ (" +
                       std::to_string(params.size()) + ", " + std::to_string(grads.size()) + ", " +
                       std::to_string(state.m.size()) + ")");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      std::ostringstream msg;
      msg << "non-finite gradient " << grads[i] << " at parameter " << i << " (adam step "
          << state.step + 1 << ")";
      throw TrainingError(msg.str());
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

std::vector<double> flatten_parameters(const MlpNet& net) {
  std::vector<double> flat;
  flat.reserve(net.parameter_count());
  for (const auto& l : net.layers) {
    flat.insert(flat.end(), l.weights.data().begin(), l.weights.data().end());
    flat.insert(flat.end(), l.bias.begin(), l.bias.end());
  }
  return flat;
}

std::vector<double> flatten_gradients(const NetGradients& grads) {
  std::vector<double> flat;
  for (const auto& g : grads) {
    flat.insert(flat.end(), g.weights.data().begin(), g.weights.data().end());
    flat.insert(flat.end(), g.bias.begin(), g.bias.end());
  }
  return flat;
}

void assign_parameters(MlpNet& net, std::span<const double> flat) {
  if (flat.size() != net.parameter_count()) {
    throw InvalidInput("expected " + std::to_string(net.parameter_count()) + " parameters, got " +
                       std::to_string(flat.size()));
  }
  std::size_t pos = 0;
  for (auto& l : net.layers) {
    auto w = l.weights.values();
    std::copy_n(flat.begin() + pos, w.size(), w.begin());
    pos += w.size();
    std::copy_n(flat.begin() + pos, l.bias.size(), l.bias.begin());
    pos += l.bias.size();
  }
}

void adam_step(MlpNet& net, const NetGradients& grads, AdamState& state, double lr) {
  if (grads.size() != net.layers.size()) {
    throw InvalidInput("adam: gradient layer count differs from network");
  }
  if (state.m.empty() && state.step == 0) state = AdamState(net.parameter_count());
  auto params = flatten_parameters(net);
  const auto flat_grads = flatten_gradients(grads);
  adam_step(params, flat_grads, state, lr);
  assign_parameters(net, params);
}

double finite_diff_check(const MlpNet& net, const LossClosure& loss, double eps) {
  if (!(eps > 0.0 && eps <= 1e-2)) throw InvalidInput("finite-difference step must lie in (0, 1e-2]");
  NetGradients analytic_grads = zero_gradients(net);
  loss(net, &analytic_grads);
  const auto analytic = flatten_gradients(analytic_grads);

  MlpNet probe = net;
  auto params = flatten_parameters(net);
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + eps;
    assign_parameters(probe, params);
    const double up = loss(probe, nullptr);
    params[i] = saved - eps;
    assign_parameters(probe, params);
    const double down = loss(probe, nullptr);
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace slad
