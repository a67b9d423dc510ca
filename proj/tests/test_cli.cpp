#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "slad/cli.hpp"

using namespace slad::cli;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result call(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path tmp(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "slad_cli_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::filesystem::path write_text(const std::string& name, const std::string& text) {
  const auto p = tmp(name);
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_CASE("flags override the file, which overrides defaults") {
  const json file{{"c", 6}, {"gamma", 50.0}, {"loss_variant", "mse"}};
  FlagOverrides flags;
  flags.gamma = 75.0;
  flags.epochs = 3;
  const RunConfig rc = resolve_run_config(&file, flags);
  CHECK(rc.train.c == 6);
  CHECK(rc.train.gamma == 75.0);
  CHECK(rc.train.epochs == 3);
  CHECK(rc.train.r == 20);
  CHECK(rc.train.h == 128);
  CHECK(to_json(rc)["loss_variant"] == "mse");
  const RunConfig plain = resolve_run_config(nullptr, {});
  CHECK(plain.train.c == 10);
  CHECK(plain.train.epochs == 50);
}

TEST_CASE("bad config files are usage errors naming the key") {
  const json unknown{{"colour", 1}};
  try {
    resolve_run_config(&unknown, {});
    FAIL("expected UsageError");
  } catch (const UsageError& e) {
    CHECK(std::string(e.what()).find("colour") != std::string::npos);
  }
  const json mistyped{{"gamma", "big"}};
  CHECK_THROWS_AS(resolve_run_config(&mistyped, {}), UsageError);
  const json negative{{"c", -1}};
  CHECK_THROWS_AS(resolve_run_config(&negative, {}), UsageError);
  FlagOverrides flags;
  flags.contamination = 0.2;
  CHECK_THROWS_AS(resolve_run_config(nullptr, flags), UsageError);

  const auto path = write_text("unknown.json", R"({"colour": 1})");
  const auto r = call({"config", "--config", path.string()});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("colour") != std::string::npos);
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(call({}).code == kExitUsage);
  CHECK(call({"frobnicate"}).code == kExitUsage);
  CHECK(call({"train", "--out", tmp("m.json").string()}).code == kExitUsage);
  CHECK(call({"train", "--data", "x.csv", "--c", "many"}).code == kExitUsage);
  CHECK(call({"theory", "pr-u", "--alpha", "1.5"}).code == kExitUsage);
  CHECK(call({"--help"}).code == kExitOk);
}

TEST_CASE("config subcommand prints the resolved configuration") {
  const auto r = call({"config", "--h", "64", "--no-feature-weights", "--data", "d.csv"});
  REQUIRE(r.code == kExitOk);
  const auto j = json::parse(r.out);
  CHECK(j["h"] == 64);
  CHECK(j["use_feature_weights"] == false);
  CHECK(j["data"] == "d.csv");
}

TEST_CASE("thread count falls back to SLAD_THREADS") {
  setenv("SLAD_THREADS", "3", 1);
  CHECK(resolve_run_config(nullptr, {}).train.threads == 3);
  FlagOverrides flags;
  flags.threads = 2;
  CHECK(resolve_run_config(nullptr, flags).train.threads == 2);
  unsetenv("SLAD_THREADS");
  CHECK(resolve_run_config(nullptr, {}).train.threads == 1);
}

TEST_CASE("theory subcommands") {
  const auto pu = call({"theory", "pr-u", "--c", "10", "--alpha", "0.5"});
  REQUIRE(pu.code == kExitOk);
  CHECK(json::parse(pu.out)["probability"].get<double>() == doctest::Approx(0.9990234375));
  const auto curve = call({"theory", "prob-curve", "--alpha", "0.5", "--beta", "0.5", "--max-dim", "10"});
  REQUIRE(curve.code == kExitOk);
  CHECK(curve.out.rfind("alpha,beta,F,", 0) == 0);
  CHECK(std::count(curve.out.begin(), curve.out.end(), '\n') == 11);
  CHECK(call({"theory", "prob-curve", "--max-dim", "500"}).code == kExitUsage);
}

TEST_CASE("make-synthetic, train and score round trip") {
  const auto data = tmp("syn.csv"), model = tmp("model.json"), s1 = tmp("s1.csv"), s2 = tmp("s2.csv");
  REQUIRE(call({"make-synthetic", "--n", "120", "--noise", "3", "--seed", "4", "--out", data.string()}).code == kExitOk);
  const auto trained = call({"train", "--data", data.string(), "--out", model.string(), "--epochs", "2", "--c", "4",
                             "--r", "3", "--h", "16", "--hidden-units", "8", "--batch-size", "16", "--seed", "5"});
  REQUIRE(trained.code == kExitOk);
  const auto summary = json::parse(trained.out);
  CHECK(summary["epoch_losses"].size() == 2);
  CHECK(summary["config"]["c"] == 4);
  CHECK(summary["split"]["n_train"] == 57);

  REQUIRE(call({"score", "--model", model.string(), "--data", data.string(), "--out", s1.string()}).code == kExitOk);
  REQUIRE(call({"score", "--model", model.string(), "--data", data.string(), "--out", s2.string()}).code == kExitOk);
  const auto text = slurp(s1);
  CHECK(text == slurp(s2));
  CHECK(text.rfind("index,score\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 121);

  const auto narrow = write_text("narrow.csv", "a,b\n1,2\n3,4\n");
  const auto mismatch = call({"score", "--model", model.string(), "--data", narrow.string()});
  CHECK(mismatch.code == kExitRuntime);
  CHECK(mismatch.err.find("D = 5") != std::string::npos);
  CHECK(call({"score", "--model", tmp("missing.json").string(), "--data", data.string()}).code == kExitRuntime);
}

TEST_CASE("eval on precomputed scores") {
  const auto data = write_text("labeled.csv", "x,label\n0.1,0\n0.2,0\n5.0,1\n0.3,0\n");
  const auto scores = write_text("scores.csv", "index,score\n0,0.1\n1,0.2\n2,9.0\n3,0.3\n");
  const auto r = call({"eval", "--data", data.string(), "--scores", scores.string(), "--seed", "3"});
  REQUIRE(r.code == kExitOk);
  const auto j = json::parse(r.out);
  CHECK(j["auc_roc"] == 1.0);
  CHECK(j["auc_pr"] == 1.0);
  CHECK(j["seed"] == 3);
  CHECK(j["config"]["c"] == 10);
  const auto short_scores = write_text("short.csv", "index,score\n0,0.1\n");
  CHECK(call({"eval", "--data", data.string(), "--scores", short_scores.string()}).code == kExitRuntime);
}
