#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace slad {

// Mixes a base seed with a list of integer tags (splitmix64 chain). Used to
// derive independent, order-free streams keyed by e.g. (repeat, instance).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags);

// FNV-1a over raw bytes of a double span; stable content key for instances.
std::uint64_t hash_values(std::span<const double> values, std::uint64_t seed = 0xcbf29ce484222325ULL);

// Thin wrapper over mt19937_64 with distributions written out explicitly so
// that streams are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [lo, hi], inclusive, unbiased.
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_int(0, i - 1);
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct values from {0..n-1}, in draw order (partial Fisher-Yates).
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
};

}  // namespace slad
