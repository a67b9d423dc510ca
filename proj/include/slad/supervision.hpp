#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string_view>
#include <vector>

#include "slad/data.hpp"
#include "slad/matrix.hpp"
#include "slad/nn.hpp"
#include "slad/parallel.hpp"

namespace slad {

class Rng;

struct SubspaceSpec {
  std::vector<std::size_t> indices;  // sorted, distinct

  std::size_t cardinality() const { return indices.size(); }
  friend bool operator==(const SubspaceSpec&, const SubspaceSpec&) = default;
};

// Uniform cardinality in {1..dims}, then that many distinct features.
SubspaceSpec sample_subspace(std::size_t dims, Rng& rng);

enum class TransformVariant { affine, zero_pad, deep_mlp };

std::string_view to_string(TransformVariant v);
TransformVariant transform_variant_from_string(std::string_view s);

// Frozen random maps from a nu-dimensional sub-vector to R^h, one per
// cardinality nu. Entries are created on first use from (seed, nu) and never
// modified afterwards, so any two banks with the same (variant, seed, h) agree
// bit for bit. Safe for concurrent use.
class TransformBank {
 public:
  TransformBank(TransformVariant variant, std::size_t dims, std::size_t h, std::uint64_t seed);
  TransformBank(const TransformBank& other);
  TransformBank& operator=(const TransformBank& other);

  TransformVariant variant() const { return variant_; }
  std::size_t dims() const { return dims_; }
  std::size_t h() const { return h_; }
  std::uint64_t seed() const { return seed_; }

  // Writes T(x restricted to s) into out (length h).
  void transform_into(std::span<const double> x, const SubspaceSpec& s, std::span<double> out) const;
  std::vector<double> transform(std::span<const double> x, const SubspaceSpec& s) const;

  // The map used for cardinality nu (absent for zero padding).
  const MlpNet& entry(std::size_t nu) const;
  void instantiate_all() const;
  std::size_t instantiated() const;
  // Hash of every instantiated entry, keyed by cardinality.
  std::uint64_t fingerprint() const;

 private:
  TransformVariant variant_;
  std::size_t dims_;
  std::size_t h_;
  std::uint64_t seed_;
  struct Entry {
    MlpNet net;
    std::vector<Matrix> transposed;  // per layer, in x out
  };

  const Entry& entry_for(std::size_t nu) const;

  mutable std::mutex mutex_;
  // Entries are immutable once created, so copies of the bank share them.
  mutable std::map<std::size_t, std::shared_ptr<const Entry>> entries_;
};

// Affine bank entry for cardinality nu, W and b uniform in [-1/sqrt(nu), 1/sqrt(nu)].
MlpNet make_affine_entry(std::size_t nu, std::size_t h, std::uint64_t seed);
// Frozen nu -> h -> h map with LeakyReLU between the two layers.
MlpNet make_deep_entry(std::size_t nu, std::size_t h, std::uint64_t seed);
TransformBank deep_mlp_transform_bank(std::size_t dims, std::size_t h, std::uint64_t seed);

// Sub-vector copied into the leading positions, zeros elsewhere.
std::vector<double> zero_pad_transform(std::span<const double> x, const SubspaceSpec& s, std::size_t h);

double scale_label(const SubspaceSpec& s, const FeatureWeights& w, std::size_t h, double gamma);

struct ScaleSample {
  Matrix u;  // c x h
  std::vector<double> y;
  std::vector<SubspaceSpec> subspaces;
};

struct ScaleParams {
  std::size_t c = 10;
  std::size_t h = 128;
  double gamma = 200.0;
};

ScaleSample make_scale_sample(std::span<const double> x, const TransformBank& bank,
                              const FeatureWeights& w, const ScaleParams& params, Rng& rng);

// Subspaces and labels of one scale sample, without the transformed matrix.
struct SamplePlan {
  std::size_t instance = 0;
  std::size_t repeat = 0;
  std::vector<SubspaceSpec> subspaces;
  std::vector<double> y;
};

// Draws the subspaces and labels of make_scale_sample; the same rng state
// yields the same subspaces in both.
SamplePlan plan_scale_sample(std::size_t dims, const FeatureWeights& w, const ScaleParams& params, Rng& rng);

// r x N plans in repeat-major order. Plan (j, i) draws from its own stream
// derived from (seed, j, i), so the result is independent of threading.
std::vector<SamplePlan> plan_supervision(std::size_t n, std::size_t dims, const FeatureWeights& w,
                                         const ScaleParams& params, std::size_t repeats,
                                         std::uint64_t seed, unsigned threads = 1);

// Fills `out` rows [row0, row0 + c) with the transformed sub-vectors of plan.
void materialize_into(const SamplePlan& plan, std::span<const double> x, const TransformBank& bank,
                      Matrix& out, std::size_t row0);

struct LabeledSample {
  std::size_t instance = 0;
  std::size_t repeat = 0;
  ScaleSample sample;
};

// Fully materialized supervision (r x N samples) for the rows of `features`.
std::vector<LabeledSample> generate_supervision(const Matrix& features, const TransformBank& bank,
                                                const FeatureWeights& w, const ScaleParams& params,
                                                std::size_t repeats, std::uint64_t seed);

std::uint64_t supervision_stream(std::uint64_t seed, std::size_t repeat, std::size_t instance);

}  // namespace slad
