#include "slad/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "slad/error.hpp"
#include "slad/rng.hpp"

namespace slad {

Dataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.n < 2 || spec.informative < 1) throw InvalidInput("synthetic data needs n >= 2 and informative >= 1");
  if (!(spec.outlier_fraction > 0.0 && spec.outlier_fraction < 0.5)) {
    throw InvalidInput("outlier fraction must lie in (0, 0.5)");
  }
  if (!(std::abs(spec.correlation) < 1.0)) throw InvalidInput("correlation must lie in (-1, 1)");
  const std::size_t d = spec.informative + spec.noise;
  const auto n_out = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(spec.outlier_fraction * static_cast<double>(spec.n))));
  const std::size_t n_in = spec.n - n_out;
  Rng rng(derive_seed(spec.seed, {0x53594eu}));

  Matrix x(spec.n, d);
  const double rho = spec.correlation;
  const double resid = std::sqrt(1.0 - rho * rho);
  for (std::size_t i = 0; i < n_in; ++i) {
    double prev = rng.normal();
    x(i, 0) = prev;
    for (std::size_t k = 1; k < spec.informative; ++k) {
      prev = rho * prev + resid * rng.normal();
      x(i, k) = prev;
    }
    for (std::size_t k = spec.informative; k < d; ++k) x(i, k) = rng.normal();
  }

  std::vector<double> lo(spec.informative), hi(spec.informative);
  for (std::size_t k = 0; k < spec.informative; ++k) {
    lo[k] = hi[k] = x(0, k);
    for (std::size_t i = 1; i < n_in; ++i) {
      lo[k] = std::min(lo[k], x(i, k));
      hi[k] = std::max(hi[k], x(i, k));
    }
    const double mid = 0.5 * (lo[k] + hi[k]);
    const double half = 0.5 * (hi[k] - lo[k]) * spec.box_expansion;
    lo[k] = mid - half;
    hi[k] = mid + half;
  }
  for (std::size_t i = n_in; i < spec.n; ++i) {
    for (std::size_t k = 0; k < spec.informative; ++k) x(i, k) = rng.uniform(lo[k], hi[k]);
    for (std::size_t k = spec.informative; k < d; ++k) x(i, k) = rng.normal();
  }

  std::vector<std::size_t> order(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) order[i] = i;
  rng.shuffle(order);

  Dataset data;
  data.features = Matrix(spec.n, d);
  data.labels.emplace(spec.n, 0);
  for (std::size_t i = 0; i < spec.n; ++i) {
    std::ranges::copy(x.row(order[i]), data.features.row(i).begin());
    (*data.labels)[i] = order[i] >= n_in ? 1 : 0;
  }
  for (std::size_t k = 0; k < d; ++k) data.feature_names.push_back("x" + std::to_string(k));
  return data;
}

}  // namespace slad
