#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "slad/error.hpp"
#include "slad/model.hpp"
#include "slad/rng.hpp"
#include "slad/synthetic.hpp"

using namespace slad;

namespace {

TrainConfig small_config(std::uint64_t seed = 1) {
  TrainConfig c;
  c.c = 4;
  c.r = 4;
  c.h = 16;
  c.gamma = 20.0;
  c.hidden_units = 8;
  c.batch_size = 16;
  c.epochs = 2;
  c.seed = seed;
  return c;
}

Dataset small_data(std::uint64_t seed = 3, std::size_t n = 200) {
  SyntheticSpec spec;
  spec.n = n;
  spec.noise = 3;
  spec.seed = seed;
  return make_synthetic(spec);
}

}  // namespace

TEST_CASE("loss variants on trivial inputs") {
  const std::vector<double> p{0.3, -0.2, 1.1}, shifted{1.3, 0.8, 2.1};
  CHECK(scale_loss(p, p, LossVariant::jsd).loss == 0.0);
  CHECK(scale_loss(p, p, LossVariant::mse).loss == 0.0);
  CHECK(scale_loss(shifted, p, LossVariant::mse).loss == doctest::Approx(1.0));
  // jsd compares softmax distributions, so a constant shift costs nothing.
  CHECK(scale_loss(shifted, p, LossVariant::jsd).loss == doctest::Approx(0.0).scale(1e-15));
}

TEST_CASE("jsd loss golden value") {
  const std::vector<double> logits{std::log(0.8), std::log(0.2)}, y{0.0, 0.0};
  CHECK(scale_loss(logits, y, LossVariant::jsd).loss == doctest::Approx(0.05067183698556586).epsilon(1e-12));
}

TEST_CASE("cross-entropy targets the largest scale with lowest-index ties") {
  const std::vector<double> logits{0.0, 0.0, 0.0};
  const auto a = scale_loss(logits, std::vector<double>{1.0, 3.0, 2.0}, LossVariant::ce);
  CHECK(a.loss == doctest::Approx(std::log(3.0)));
  CHECK(a.grad[1] == doctest::Approx(1.0 / 3.0 - 1.0));
  CHECK(a.grad[0] == doctest::Approx(1.0 / 3.0));
  const auto tie = scale_loss(logits, std::vector<double>{2.0, 2.0, 1.0}, LossVariant::ce);
  CHECK(tie.grad[0] < 0.0);
  CHECK(tie.grad[1] > 0.0);
}

TEST_CASE("loss gradients match finite differences for every variant") {
  Rng rng(8);
  for (auto variant : {LossVariant::jsd, LossVariant::mse, LossVariant::ce}) {
    std::vector<double> p(6), y(6);
    for (auto& v : p) v = rng.normal();
    for (auto& v : y) v = rng.uniform(0.0, 5.0);
    const auto g = scale_loss(p, y, variant).grad;
    for (std::size_t i = 0; i < 6; ++i) {
      auto up = p, down = p;
      up[i] += 1e-6;
      down[i] -= 1e-6;
      const double num = (scale_loss_value(up, y, variant) - scale_loss_value(down, y, variant)) / 2e-6;
      CHECK(g[i] == doctest::Approx(num).epsilon(1e-5).scale(1e-6));
    }
    CHECK(scale_loss(p, y, variant).loss == scale_loss_value(p, y, variant));
  }
  CHECK_THROWS_AS(scale_loss(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}, LossVariant::jsd), InvalidInput);
  CHECK(loss_variant_from_string("mse") == LossVariant::mse);
  CHECK_THROWS_AS(loss_variant_from_string("hinge"), InvalidInput);
}

TEST_CASE("phi is row-permutation equivariant and the jsd loss invariant") {
  const MlpNet phi = make_phi(6, 5, 2);
  Rng rng(4);
  Matrix u(4, 6);
  for (double& v : u.values()) v = rng.normal();
  const std::vector<double> y{1.0, 4.0, 2.0, 3.0};
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  Matrix pu(4, 6);
  std::vector<double> py(4);
  for (std::size_t i = 0; i < 4; ++i) {
    std::ranges::copy(u.row(perm[i]), pu.row(i).begin());
    py[i] = y[perm[i]];
  }
  const auto a = phi_forward(phi, u), b = phi_forward(phi, pu);
  for (std::size_t i = 0; i < 4; ++i) CHECK(b[i] == a[perm[i]]);
  CHECK(scale_loss_value(a, y, LossVariant::jsd) == doctest::Approx(scale_loss_value(b, py, LossVariant::jsd)));
  CHECK_THROWS_AS(phi_forward(phi, Matrix(2, 5)), InvalidInput);
}

TEST_CASE("config validation names the field") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.c = 1;
  try {
    c.validate();
    FAIL("expected InvalidInput");
  } catch (const InvalidInput& e) {
    CHECK(std::string(e.what()).find("c") != std::string::npos);
  }
  c = TrainConfig{};
  c.lr = -1.0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("lr"), InvalidInput);
  c = TrainConfig{};
  c.epochs = 0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("epochs"), InvalidInput);
}

TEST_CASE("config json round trip") {
  TrainConfig c = small_config(9);
  c.loss_variant = LossVariant::ce;
  c.transform_variant = TransformVariant::deep_mlp;
  c.use_feature_weights = false;
  const TrainConfig back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
  auto j = config_to_json(c);
  j["loss_variant"] = "nope";
  CHECK_THROWS_AS(config_from_json(j), InvalidInput);
}

TEST_CASE("one epoch lowers the training loss on average") {
  double before = 0.0, after = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrainConfig c = small_config(seed);
    c.epochs = 1;
    TrainHistory h;
    train(small_data(seed), c, &h);
    before += h.initial_loss;
    after += h.epoch_losses.back();
  }
  CHECK(after < before);
}

TEST_CASE("training leaves the bank untouched and is deterministic") {
  const Dataset d = small_data();
  TrainHistory h1, h2;
  const SladModel a = train(d, small_config(), &h1);
  const SladModel b = train(d, small_config(), &h2);
  CHECK(h1.bank_fingerprint_before == h1.bank_fingerprint_after);
  CHECK(h1.epoch_losses.size() == 2);
  CHECK(flatten_parameters(a.phi) == flatten_parameters(b.phi));
  CHECK(h1.epoch_losses == h2.epoch_losses);
  const SladModel c = train(d, small_config(2));
  CHECK(flatten_parameters(c.phi) != flatten_parameters(a.phi));
}

TEST_CASE("training with a history matches training without one") {
  const Dataset d = small_data();
  TrainHistory h;
  const SladModel a = train(d, small_config(), &h);
  const SladModel b = train(d, small_config());
  CHECK(flatten_parameters(a.phi) == flatten_parameters(b.phi));
}

TEST_CASE("training does not depend on the thread count") {
  const Dataset d = small_data();
  auto cfg = small_config();
  cfg.resample_per_epoch = true;
  const SladModel one = train(d, cfg);
  cfg.threads = 3;
  const SladModel three = train(d, cfg);
  CHECK(flatten_parameters(one.phi) == flatten_parameters(three.phi));
}

TEST_CASE("every variant trains end to end") {
  const Dataset d = small_data();
  for (auto lv : {LossVariant::jsd, LossVariant::mse, LossVariant::ce}) {
    for (auto tv : {TransformVariant::affine, TransformVariant::zero_pad, TransformVariant::deep_mlp}) {
      TrainConfig c = small_config();
      c.epochs = 1;
      c.loss_variant = lv;
      c.transform_variant = tv;
      const SladModel m = train(d, c);
      for (double s : score_batch(m, d.subset({0, 1, 2}).features, 1)) CHECK(std::isfinite(s));
    }
  }
  TrainConfig c = small_config();
  c.resample_per_epoch = true;
  TrainHistory h;
  train(d, c, &h);
  CHECK(h.epoch_losses.size() == 2);
}

TEST_CASE("training input errors") {
  Dataset d = small_data();
  TrainConfig bad = small_config();
  bad.batch_size = 0;
  CHECK_THROWS_AS(train(d, bad), InvalidInput);
  d.features(0, 0) = std::nan("");
  CHECK_THROWS_AS(train(d, small_config()), InvalidInput);
}

TEST_CASE("epoch hook sees every epoch") {
  std::vector<std::size_t> seen;
  TrainConfig c = small_config();
  c.epochs = 3;
  train(small_data(), c, nullptr, [&](std::size_t e, const SladModel&, double loss) {
    seen.push_back(e);
    CHECK(std::isfinite(loss));
  });
  CHECK(seen == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("scores are nonnegative, deterministic and order independent") {
  const Dataset d = small_data();
  const SladModel m = train(d, small_config());
  const auto s = score_batch(m, d.features, 5);
  for (double v : s) CHECK(v >= 0.0);
  CHECK(score_batch(m, d.features, 5) == s);
  CHECK(score_batch(m, d.features, 5, 0, 3) == s);
  CHECK(score_batch(m, d.features, 6) != s);
  CHECK(score(m, d.features.row(7), 5) == s[7]);
  CHECK(score_batch(m, d.subset({7}).features, 5)[0] == s[7]);
  const auto rev = score_batch(m, d.subset({9, 8, 7}).features, 5);
  CHECK(rev == std::vector<double>{s[9], s[8], s[7]});
  // Default r_eval is the training r; the score is a sum over samples.
  CHECK(score(m, d.features.row(0), m.config.r, 5) == s[0]);
}

TEST_CASE("scoring golden value") {
  const SladModel m = train(small_data(), small_config());
  const std::vector<double> x{0.1, -0.3, 1.2, 0.0, 0.7};
  CHECK(score(m, x, 8, 3) == doctest::Approx(0.10172646164146908).epsilon(1e-9));
}

TEST_CASE("scoring rejects mismatched dimensions") {
  const SladModel m = train(small_data(), small_config());
  CHECK_THROWS_WITH_AS(score(m, std::vector<double>{1.0, 2.0}, 3), doctest::Contains("5"), InvalidInput);
  CHECK_THROWS_AS(score_batch(m, Matrix(2, 4), 3), InvalidInput);
  CHECK_THROWS_AS(score(m, std::vector<double>(5, 0.0), 0, 3), InvalidInput);
}

TEST_CASE("planted outliers outscore inliers after training") {
  SyntheticSpec spec;
  spec.n = 600;
  spec.seed = 21;
  const Dataset d = make_synthetic(spec);
  std::vector<std::size_t> inliers, outliers;
  for (std::size_t i = 0; i < d.size(); ++i) ((*d.labels)[i] ? outliers : inliers).push_back(i);
  const std::vector<std::size_t> train_rows(inliers.begin(), inliers.begin() + 300);
  TrainConfig c;
  c.epochs = 5;
  c.seed = 2;
  const SladModel m = train(d.subset(train_rows), c);
  const std::vector<std::size_t> held(inliers.begin() + 300, inliers.end());
  const auto si = score_batch(m, d.subset(held).features, 1);
  const auto so = score_batch(m, d.subset(outliers).features, 1);
  const double mean_in = std::accumulate(si.begin(), si.end(), 0.0) / static_cast<double>(si.size());
  const double mean_out = std::accumulate(so.begin(), so.end(), 0.0) / static_cast<double>(so.size());
  CHECK(mean_out > mean_in);
}

TEST_CASE("save and load reproduce scores bit for bit") {
  const Dataset d = small_data();
  for (auto tv : {TransformVariant::affine, TransformVariant::deep_mlp}) {
    TrainConfig c = small_config();
    c.transform_variant = tv;
    const SladModel m = train(d, c);
    const auto path = std::filesystem::temp_directory_path() / "slad_model_test.slad";
    save_model(m, path);
    const SladModel back = load_model(path);
    CHECK(score_batch(back, d.features, 4) == score_batch(m, d.features, 4));
    CHECK(back.feature_names == m.feature_names);
    CHECK(back.feature_weights.values == m.feature_weights.values);
    CHECK(serialize_model(back) == serialize_model(m));
  }
}

TEST_CASE("corrupt or mismatched model files fail cleanly") {
  const SladModel m = train(small_data(), small_config());
  const std::string text = serialize_model(m);
  CHECK_THROWS_AS(deserialize_model(text.substr(0, text.size() / 2)), LoadError);
  CHECK_THROWS_AS(deserialize_model(""), LoadError);
  auto j = nlohmann::json::parse(text);
  CHECK(j.at("version") == kModelFormatVersion);
  j["version"] = kModelFormatVersion + 1;
  CHECK_THROWS_WITH_AS(deserialize_model(j.dump()), doctest::Contains("version"), LoadError);
  j = nlohmann::json::parse(text);
  j.erase("phi");
  CHECK_THROWS_AS(deserialize_model(j.dump()), LoadError);
  CHECK_THROWS_AS(load_model("/nonexistent/model.slad"), LoadError);
}
