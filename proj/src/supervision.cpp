#include "slad/supervision.hpp"

#include <algorithm>
#include <cmath>

#include "slad/error.hpp"
#include "slad/rng.hpp"

namespace slad {

namespace {

constexpr std::uint64_t kBankTag = 0x42414eu;
constexpr std::uint64_t kSupervisionTag = 0x535550u;

}  // namespace

SubspaceSpec sample_subspace(std::size_t dims, Rng& rng) {
  if (dims == 0) throw InvalidInput("cannot sample a subspace of a zero-dimensional space");
  const auto nu = static_cast<std::size_t>(rng.uniform_int(1, dims));
  SubspaceSpec s{rng.sample_without_replacement(dims, nu)};
  std::ranges::sort(s.indices);
  return s;
}

std::string_view to_string(TransformVariant v) {
  switch (v) {
    case TransformVariant::affine: return "affine";
    case TransformVariant::zero_pad: return "zero_pad";
    case TransformVariant::deep_mlp: return "deep_mlp";
  }
  return "affine";
}

TransformVariant transform_variant_from_string(std::string_view s) {
  if (s == "affine") return TransformVariant::affine;
  if (s == "zero_pad") return TransformVariant::zero_pad;
  if (s == "deep_mlp") return TransformVariant::deep_mlp;
  throw InvalidInput("unknown transform variant '" + std::string(s) + "'");
}

MlpNet make_affine_entry(std::size_t nu, std::size_t h, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {kBankTag, nu}));
  return MlpNet{{DenseLayer::random(nu, h, Activation::identity, rng)}};
}

MlpNet make_deep_entry(std::size_t nu, std::size_t h, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {kBankTag, nu, 2}));
  MlpNet net;
  net.layers.push_back(DenseLayer::random(nu, h, Activation::leaky_relu, rng));
  net.layers.push_back(DenseLayer::random(h, h, Activation::identity, rng));
  return net;
}

TransformBank::TransformBank(TransformVariant variant, std::size_t dims, std::size_t h, std::uint64_t seed)
    : variant_(variant), dims_(dims), h_(h), seed_(seed) {
  if (dims == 0 || h == 0) throw InvalidInput("transform bank needs dims >= 1 and h >= 1");
  if (variant == TransformVariant::zero_pad && dims > h) {
    throw AblationInapplicable("zero padding cannot embed up to " + std::to_string(dims) +
                               " features into h = " + std::to_string(h) + " dimensions");
  }
}

TransformBank::TransformBank(const TransformBank& other)
    : variant_(other.variant_), dims_(other.dims_), h_(other.h_), seed_(other.seed_) {
  std::lock_guard lock(other.mutex_);
  entries_ = other.entries_;
}

TransformBank& TransformBank::operator=(const TransformBank& other) {
  if (this == &other) return *this;
  TransformBank copy(other);
  std::scoped_lock lock(mutex_);
  variant_ = copy.variant_;
  dims_ = copy.dims_;
  h_ = copy.h_;
  seed_ = copy.seed_;
  entries_ = std::move(copy.entries_);
  return *this;
}

const TransformBank::Entry& TransformBank::entry_for(std::size_t nu) const {
  if (variant_ == TransformVariant::zero_pad) {
    throw InvalidState("zero-padding bank has no parametric entries");
  }
  if (nu == 0 || nu > dims_) {
    throw InvalidState("cardinality " + std::to_string(nu) + " outside bank range 1.." + std::to_string(dims_));
  }
  std::lock_guard lock(mutex_);
  auto it = entries_.find(nu);
  if (it == entries_.end()) {
    auto e = std::make_shared<Entry>();
    e->net = variant_ == TransformVariant::affine ? make_affine_entry(nu, h_, seed_) : make_deep_entry(nu, h_, seed_);
    for (const auto& layer : e->net.layers) {
      Matrix t(layer.in_dim(), layer.out_dim());
      for (std::size_t o = 0; o < layer.out_dim(); ++o)
        for (std::size_t j = 0; j < layer.in_dim(); ++j) t(j, o) = layer.weights(o, j);
      e->transposed.push_back(std::move(t));
    }
    it = entries_.emplace(nu, std::move(e)).first;
  }
  return *it->second;
}

const MlpNet& TransformBank::entry(std::size_t nu) const { return entry_for(nu).net; }

void TransformBank::instantiate_all() const {
  if (variant_ == TransformVariant::zero_pad) return;
  for (std::size_t nu = 1; nu <= dims_; ++nu) entry(nu);
}

std::size_t TransformBank::instantiated() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::uint64_t TransformBank::fingerprint() const {
  std::lock_guard lock(mutex_);
  std::uint64_t h = derive_seed(seed_, {static_cast<std::uint64_t>(variant_), dims_, h_});
  for (const auto& [nu, e] : entries_) h = derive_seed(h, {nu, e->net.fingerprint()});
  return h;
}

void TransformBank::transform_into(std::span<const double> x, const SubspaceSpec& s,
                                   std::span<double> out) const {
  const std::size_t nu = s.cardinality();
  if (x.size() != dims_) {
    throw InvalidInput("instance has " + std::to_string(x.size()) + " features, bank expects " +
                       std::to_string(dims_));
  }
  if (out.size() != h_) throw InvalidInput("output span must have length h");
  if (nu == 0) throw InvalidInput("empty subspace");
  for (std::size_t idx : s.indices) {
    if (idx >= dims_) throw InvalidInput("subspace index " + std::to_string(idx) + " out of range");
  }

  if (variant_ == TransformVariant::zero_pad) {
    if (nu > h_) {
      throw AblationInapplicable("zero padding cannot embed a " + std::to_string(nu) +
                                 "-dimensional sub-vector into h = " + std::to_string(h_));
    }
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t j = 0; j < nu; ++j) out[j] = x[s.indices[j]];
    return;
  }

  const Entry& e = entry_for(nu);
  if (e.net.layers.front().in_dim() != nu) throw InvalidState("bank entry width does not match subspace cardinality");

  thread_local std::vector<double> sub, hidden;
  sub.resize(nu);
  for (std::size_t j = 0; j < nu; ++j) sub[j] = x[s.indices[j]];

  // dst = act(b + sum_j in[j] * W[:, j]), accumulated column by column.
  auto affine = [](const DenseLayer& layer, const Matrix& wt, std::span<const double> in, std::span<double> dst) {
    std::ranges::copy(layer.bias, dst.begin());
    for (std::size_t j = 0; j < in.size(); ++j) {
      const double v = in[j];
      const auto col = wt.row(j);
      for (std::size_t o = 0; o < dst.size(); ++o) dst[o] += v * col[o];
    }
    if (layer.activation != Activation::identity)
      for (double& d : dst) d = apply_activation(layer.activation, d);
  };

  if (e.net.layers.size() == 1) {
    affine(e.net.layers[0], e.transposed[0], sub, out);
  } else {
    hidden.resize(e.net.layers[0].out_dim());
    affine(e.net.layers[0], e.transposed[0], sub, hidden);
    affine(e.net.layers[1], e.transposed[1], hidden, out);
  }
}

std::vector<double> TransformBank::transform(std::span<const double> x, const SubspaceSpec& s) const {
  std::vector<double> out(h_);
  transform_into(x, s, out);
  return out;
}

TransformBank deep_mlp_transform_bank(std::size_t dims, std::size_t h, std::uint64_t seed) {
  return TransformBank(TransformVariant::deep_mlp, dims, h, seed);
}

std::vector<double> zero_pad_transform(std::span<const double> x, const SubspaceSpec& s, std::size_t h) {
  if (s.cardinality() > h) {
    throw AblationInapplicable("zero padding cannot embed a " + std::to_string(s.cardinality()) +
                               "-dimensional sub-vector into h = " + std::to_string(h));
  }
  std::vector<double> out(h, 0.0);
  for (std::size_t j = 0; j < s.cardinality(); ++j) {
    if (s.indices[j] >= x.size()) throw InvalidInput("subspace index out of range");
    out[j] = x[s.indices[j]];
  }
  return out;
}

double scale_label(const SubspaceSpec& s, const FeatureWeights& w, std::size_t h, double gamma) {
  double sum = 0.0;
  for (std::size_t k : s.indices) sum += w.values.at(k);
  return gamma * sum / static_cast<double>(h);
}

SamplePlan plan_scale_sample(std::size_t dims, const FeatureWeights& w, const ScaleParams& params, Rng& rng) {
  if (params.c < 2) throw InvalidInput("a scale sample needs c >= 2");
  SamplePlan plan;
  plan.subspaces.reserve(params.c);
  plan.y.reserve(params.c);
  for (std::size_t i = 0; i < params.c; ++i) {
    plan.subspaces.push_back(sample_subspace(dims, rng));
    plan.y.push_back(scale_label(plan.subspaces.back(), w, params.h, params.gamma));
  }
  return plan;
}

void materialize_into(const SamplePlan& plan, std::span<const double> x, const TransformBank& bank,
                      Matrix& out, std::size_t row0) {
  for (std::size_t i = 0; i < plan.subspaces.size(); ++i) {
    bank.transform_into(x, plan.subspaces[i], out.row(row0 + i));
  }
}

ScaleSample make_scale_sample(std::span<const double> x, const TransformBank& bank, const FeatureWeights& w,
                              const ScaleParams& params, Rng& rng) {
  if (bank.h() != params.h) throw InvalidInput("bank dimension differs from h");
  auto plan = plan_scale_sample(x.size(), w, params, rng);
  ScaleSample sample{Matrix(params.c, params.h), std::move(plan.y), std::move(plan.subspaces)};
  for (std::size_t i = 0; i < params.c; ++i) bank.transform_into(x, sample.subspaces[i], sample.u.row(i));
  return sample;
}

std::uint64_t supervision_stream(std::uint64_t seed, std::size_t repeat, std::size_t instance) {
  return derive_seed(seed, {kSupervisionTag, repeat, instance});
}

std::vector<SamplePlan> plan_supervision(std::size_t n, std::size_t dims, const FeatureWeights& w,
                                         const ScaleParams& params, std::size_t repeats,
                                         std::uint64_t seed, unsigned threads) {
  if (n == 0) throw InvalidInput("supervision needs a nonempty dataset");
  std::vector<SamplePlan> plans(n * repeats);
  parallel_for(plans.size(), threads, [&](std::size_t k) {
    const std::size_t j = k / n;
    const std::size_t i = k % n;
    Rng rng(supervision_stream(seed, j, i));
    plans[k] = plan_scale_sample(dims, w, params, rng);
    plans[k].instance = i;
    plans[k].repeat = j;
  });
  return plans;
}

std::vector<LabeledSample> generate_supervision(const Matrix& features, const TransformBank& bank,
                                                const FeatureWeights& w, const ScaleParams& params,
                                                std::size_t repeats, std::uint64_t seed) {
  const auto plans = plan_supervision(features.rows(), features.cols(), w, params, repeats, seed);
  std::vector<LabeledSample> out;
  out.reserve(plans.size());
  for (const auto& p : plans) {
    LabeledSample ls{p.instance, p.repeat, ScaleSample{Matrix(params.c, params.h), p.y, p.subspaces}};
    materialize_into(p, features.row(p.instance), bank, ls.sample.u, 0);
    out.push_back(std::move(ls));
  }
  return out;
}

}  // namespace slad
