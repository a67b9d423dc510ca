#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "slad/data.hpp"
#include "slad/error.hpp"
#include "slad/rng.hpp"
#include "slad/supervision.hpp"

using namespace slad;

namespace {

std::vector<double> random_row(std::size_t d, Rng& rng) {
  std::vector<double> x(d);
  for (double& v : x) v = rng.normal();
  return x;
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("sampled subspaces are sorted, distinct and cover every cardinality") {
  Rng rng(1);
  std::map<std::size_t, int> counts;
  const int draws = 40000;
  for (int t = 0; t < draws; ++t) {
    const auto s = sample_subspace(8, rng);
    CHECK(std::ranges::is_sorted(s.indices));
    CHECK(std::ranges::adjacent_find(s.indices) == s.indices.end());
    CHECK(s.indices.back() < 8);
    counts[s.cardinality()]++;
  }
  CHECK(counts.size() == 8);
  for (auto [nu, c] : counts) CHECK(std::abs(c / static_cast<double>(draws) - 0.125) < 0.01);
}

TEST_CASE("full-cardinality subspace is the whole feature set") {
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const auto s = sample_subspace(3, rng);
    if (s.cardinality() == 3) CHECK(s.indices == std::vector<std::size_t>{0, 1, 2});
  }
  CHECK_THROWS_AS(sample_subspace(0, rng), InvalidInput);
}

TEST_CASE("affine bank is affine and frozen") {
  const TransformBank bank(TransformVariant::affine, 6, 16, 7);
  Rng rng(3);
  const SubspaceSpec s{{0, 2, 5}};
  const auto a = random_row(6, rng), b = random_row(6, rng);
  std::vector<double> sum(6), zero(6, 0.0);
  for (std::size_t k = 0; k < 6; ++k) sum[k] = a[k] + b[k];
  const auto ta = bank.transform(a, s), tb = bank.transform(b, s), ts = bank.transform(sum, s), t0 = bank.transform(zero, s);
  for (std::size_t o = 0; o < 16; ++o) CHECK(ts[o] - t0[o] == doctest::Approx(ta[o] - t0[o] + tb[o] - t0[o]));

  const double bound = 1.0 / std::sqrt(3.0);
  for (double w : bank.entry(3).layers[0].weights.values()) CHECK(std::abs(w) <= bound);

  bank.instantiate_all();
  CHECK(bank.instantiated() == 6);
  const auto fp = bank.fingerprint();
  (void)bank.transform(a, SubspaceSpec{{1}});
  CHECK(bank.fingerprint() == fp);
  const TransformBank twin(TransformVariant::affine, 6, 16, 7);
  twin.instantiate_all();
  CHECK(twin.fingerprint() == fp);
  const TransformBank other(TransformVariant::affine, 6, 16, 8);
  other.instantiate_all();
  CHECK(other.fingerprint() != fp);
}

TEST_CASE("bank entries do not depend on creation order") {
  const TransformBank a(TransformVariant::affine, 5, 8, 1), b(TransformVariant::affine, 5, 8, 1);
  (void)a.entry(4);
  (void)a.entry(2);
  (void)b.entry(2);
  CHECK(flatten_parameters(a.entry(2)) == flatten_parameters(b.entry(2)));
  const TransformBank copy = a;
  CHECK(copy.fingerprint() == a.fingerprint());
}

TEST_CASE("affine bank golden values") {
  const auto e = make_affine_entry(2, 3, 11);
  const auto w = e.layers[0].weights.values();
  CHECK(w[0] == doctest::Approx(0.39938493775488909).epsilon(1e-12));
  CHECK(e.layers[0].bias[2] == doctest::Approx(0.25894381397019262).epsilon(1e-12));
}

TEST_CASE("deep bank is nonlinear, frozen and pinned") {
  const TransformBank bank = deep_mlp_transform_bank(4, 8, 5);
  CHECK(bank.variant() == TransformVariant::deep_mlp);
  CHECK(bank.entry(2).layers.size() == 2);
  const SubspaceSpec s{{1, 3}};
  Rng rng(6);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const auto a = random_row(4, rng), b = random_row(4, rng);
    std::vector<double> sum(4), zero(4, 0.0);
    for (std::size_t k = 0; k < 4; ++k) sum[k] = a[k] + b[k];
    const auto ta = bank.transform(a, s), tb = bank.transform(b, s), ts = bank.transform(sum, s), t0 = bank.transform(zero, s);
    for (std::size_t o = 0; o < 8; ++o) worst = std::max(worst, std::abs((ts[o] - t0[o]) - (ta[o] - t0[o] + tb[o] - t0[o])));
  }
  CHECK(worst > 1e-3);
  const auto x = std::vector<double>{0.5, -1.0, 2.0, 0.25};
  const auto out = bank.transform(x, s);
  CHECK(out[0] == doctest::Approx(-0.41814310805798366).epsilon(1e-12));
  CHECK(out[7] == doctest::Approx(-0.5459534828292093).epsilon(1e-12));
}

TEST_CASE("zero padding") {
  const std::vector<double> x{3.0, -4.0, 9.0};
  const auto out = zero_pad_transform(x, SubspaceSpec{{0, 1}}, 4);
  CHECK(out == std::vector<double>{3.0, -4.0, 0.0, 0.0});
  CHECK(norm(out) == doctest::Approx(5.0));
  CHECK(zero_pad_transform(x, SubspaceSpec{{0, 1, 2}}, 3) == x);
  CHECK_THROWS_AS(zero_pad_transform(x, SubspaceSpec{{0, 1, 2}}, 2), AblationInapplicable);
  CHECK_THROWS_AS(TransformBank(TransformVariant::zero_pad, 5, 4, 0), AblationInapplicable);
  const TransformBank bank(TransformVariant::zero_pad, 3, 4, 0);
  CHECK(bank.transform(x, SubspaceSpec{{1, 2}}) == std::vector<double>{-4.0, 9.0, 0.0, 0.0});
  CHECK_THROWS_AS(bank.entry(1), InvalidState);
}

TEST_CASE("transform input checks") {
  const TransformBank bank(TransformVariant::affine, 3, 4, 0);
  const std::vector<double> x{1.0, 2.0, 3.0};
  CHECK_THROWS_AS(bank.transform(std::vector<double>{1.0}, SubspaceSpec{{0}}), InvalidInput);
  CHECK_THROWS_AS(bank.transform(x, SubspaceSpec{{5}}), InvalidInput);
  CHECK_THROWS_AS(bank.transform(x, SubspaceSpec{}), InvalidInput);
  CHECK(to_string(TransformVariant::deep_mlp) == "deep_mlp");
  CHECK(transform_variant_from_string("zero_pad") == TransformVariant::zero_pad);
  CHECK_THROWS_AS(transform_variant_from_string("conv"), InvalidInput);
}

TEST_CASE("scale labels") {
  const auto uniform = uniform_weights(10);
  CHECK(scale_label(SubspaceSpec{{0, 1, 2, 3}}, uniform, 128, 200.0) == doctest::Approx(200.0 * 4.0 / 128.0));
  const FeatureWeights w{{0.5, 0.25, 1.0}, WeightMode::correlation};
  CHECK(scale_label(SubspaceSpec{{0, 2}}, w, 10, 2.0) == doctest::Approx(0.3));
}

TEST_CASE("a larger subspace never gets a smaller label") {
  Rng rng(4);
  const FeatureWeights w{{0.2, 0.7, 0.4, 0.9, 0.1}, WeightMode::correlation};
  for (int t = 0; t < 100; ++t) {
    auto s = sample_subspace(5, rng);
    const double y = scale_label(s, w, 16, 50.0);
    if (s.cardinality() < 5) {
      for (std::size_t k = 0; k < 5; ++k) {
        if (std::ranges::find(s.indices, k) != s.indices.end()) continue;
        SubspaceSpec bigger = s;
        bigger.indices.push_back(k);
        std::ranges::sort(bigger.indices);
        CHECK(scale_label(bigger, w, 16, 50.0) >= y);
        break;
      }
    }
  }
}

TEST_CASE("scale samples match their plans") {
  const TransformBank bank(TransformVariant::affine, 5, 8, 2);
  const auto w = uniform_weights(5);
  const ScaleParams params{4, 8, 20.0};
  Rng rng(9);
  const auto x = random_row(5, rng);
  Rng r1(77), r2(77);
  const auto sample = make_scale_sample(x, bank, w, params, r1);
  const auto plan = plan_scale_sample(5, w, params, r2);
  CHECK(sample.subspaces == plan.subspaces);
  CHECK(sample.y == plan.y);
  CHECK(sample.u.rows() == 4);
  Matrix u(4, 8);
  materialize_into(plan, x, bank, u, 0);
  CHECK(u == sample.u);
  for (std::size_t i = 0; i < 4; ++i) CHECK(plan.y[i] == scale_label(plan.subspaces[i], w, 8, 20.0));
  Rng r3(1);
  CHECK_THROWS_AS(plan_scale_sample(5, w, ScaleParams{1, 8, 20.0}, r3), InvalidInput);
}

TEST_CASE("supervision plans are independent of the thread count") {
  const auto w = uniform_weights(7);
  const ScaleParams params{5, 16, 100.0};
  const auto a = plan_supervision(30, 7, w, params, 3, 12, 1);
  const auto b = plan_supervision(30, 7, w, params, 3, 12, 4);
  REQUIRE(a.size() == 90);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].subspaces == b[i].subspaces);
    CHECK(a[i].instance == i % 30);
    CHECK(a[i].repeat == i / 30);
  }
  const auto c = plan_supervision(30, 7, w, params, 3, 13, 1);
  CHECK_FALSE(c[0].subspaces == a[0].subspaces);
}

TEST_CASE("generate_supervision produces r x N labelled samples") {
  Rng rng(5);
  Matrix x(6, 4);
  for (double& v : x.values()) v = rng.normal();
  const TransformBank bank(TransformVariant::affine, 4, 8, 3);
  const auto samples = generate_supervision(x, bank, uniform_weights(4), ScaleParams{3, 8, 10.0}, 2, 5);
  CHECK(samples.size() == 12);
  for (const auto& s : samples) {
    CHECK(s.sample.u.rows() == 3);
    CHECK(s.sample.u.cols() == 8);
    CHECK(s.sample.y.size() == 3);
  }
}
