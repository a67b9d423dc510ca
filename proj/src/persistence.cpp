#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "slad/error.hpp"
#include "slad/model.hpp"

namespace slad {

namespace {

using nlohmann::json;

constexpr std::string_view kFormatName = "slad-model";
constexpr char kHex[] = "0123456789abcdef";

// 16 lowercase hex digits per value, little-endian IEEE-754 byte order.
std::string encode_doubles(std::span<const double> values) {
  std::string out;
  out.reserve(values.size() * 16);
  for (double v : values) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      const auto byte = static_cast<unsigned>((bits >> (8 * b)) & 0xffu);
      out.push_back(kHex[byte >> 4]);
      out.push_back(kHex[byte & 0xfu]);
    }
  }
  return out;
}

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::vector<double> decode_doubles(const std::string& text, std::size_t expected, const std::string& what) {
  if (text.size() != expected * 16) {
    throw LoadError(what + ": expected " + std::to_string(expected) + " values, block holds " +
                    std::to_string(text.size()) + " hex digits");
  }
  std::vector<double> out(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      const int hi = hex_digit(text[i * 16 + 2 * b]);
      const int lo = hex_digit(text[i * 16 + 2 * b + 1]);
      if (hi < 0 || lo < 0) throw LoadError(what + ": invalid hex digit");
      bits |= static_cast<std::uint64_t>((hi << 4) | lo) << (8 * b);
    }
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

}  // namespace

nlohmann::json config_to_json(const TrainConfig& c) {
  return json{{"c", c.c},
              {"r", c.r},
              {"h", c.h},
              {"gamma", c.gamma},
              {"delta", c.delta},
              {"hidden_units", c.hidden_units},
              {"lr", c.lr},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"seed", c.seed},
              {"loss_variant", std::string(to_string(c.loss_variant))},
              {"transform_variant", std::string(to_string(c.transform_variant))},
              {"use_feature_weights", c.use_feature_weights},
              {"resample_per_epoch", c.resample_per_epoch}};
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.c = j.at("c").get<std::size_t>();
  c.r = j.at("r").get<std::size_t>();
  c.h = j.at("h").get<std::size_t>();
  c.gamma = j.at("gamma").get<double>();
  c.delta = j.at("delta").get<std::size_t>();
  c.hidden_units = j.at("hidden_units").get<std::size_t>();
  c.lr = j.at("lr").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.loss_variant = loss_variant_from_string(j.at("loss_variant").get<std::string>());
  c.transform_variant = transform_variant_from_string(j.at("transform_variant").get<std::string>());
  c.use_feature_weights = j.at("use_feature_weights").get<bool>();
  c.resample_per_epoch = j.value("resample_per_epoch", false);
  return c;
}

std::string serialize_model(const SladModel& model) {
  json layers = json::array();
  for (const auto& l : model.phi.layers) {
    layers.push_back({{"in", l.in_dim()},
                      {"out", l.out_dim()},
                      {"activation", std::string(to_string(l.activation))},
                      {"weights", encode_doubles(l.weights.values())},
                      {"bias", encode_doubles(l.bias)}});
  }
  json doc{{"format", kFormatName},
           {"version", kModelFormatVersion},
           {"dims", model.dims()},
           {"config", config_to_json(model.config)},
           {"feature_names", model.feature_names},
           {"standardization",
            {{"mean", encode_doubles(model.standardizer.mean)},
             {"deviation", encode_doubles(model.standardizer.deviation)}}},
           {"feature_weights",
            {{"mode", model.feature_weights.mode == WeightMode::uniform ? "uniform" : "correlation"},
             {"values", encode_doubles(model.feature_weights.values)}}},
           {"bank",
            {{"variant", std::string(to_string(model.bank.variant()))},
             {"seed", model.bank.seed()},
             {"h", model.bank.h()}}},
           {"phi", {{"layers", layers}}}};
  return doc.dump(1) + "\n";
}

SladModel deserialize_model(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw LoadError(std::string("model file is not valid JSON (truncated or corrupt): ") + e.what());
  }
  try {
    if (!doc.is_object() || doc.value("format", std::string()) != kFormatName) {
      throw LoadError("not a slad model file (missing format tag)");
    }
    if (!doc.contains("version")) throw LoadError("model file has no version field");
    const int version = doc.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw LoadError("unsupported model format version " + std::to_string(version) + " (expected " +
                      std::to_string(kModelFormatVersion) + ")");
    }
    const auto dims = doc.at("dims").get<std::size_t>();
    TrainConfig config = config_from_json(doc.at("config"));

    Standardizer st{decode_doubles(doc.at("standardization").at("mean").get<std::string>(), dims, "mean"),
                    decode_doubles(doc.at("standardization").at("deviation").get<std::string>(), dims, "deviation")};
    const auto& fw = doc.at("feature_weights");
    const auto mode_name = fw.at("mode").get<std::string>();
    if (mode_name != "uniform" && mode_name != "correlation") throw LoadError("unknown feature weight mode");
    FeatureWeights weights{decode_doubles(fw.at("values").get<std::string>(), dims, "feature weights"),
                           mode_name == "uniform" ? WeightMode::uniform : WeightMode::correlation};

    const auto& bank = doc.at("bank");
    const auto variant = transform_variant_from_string(bank.at("variant").get<std::string>());
    if (bank.at("h").get<std::size_t>() != config.h) throw LoadError("bank dimension differs from config h");

    MlpNet phi;
    for (const auto& l : doc.at("phi").at("layers")) {
      const auto in = l.at("in").get<std::size_t>();
      const auto out = l.at("out").get<std::size_t>();
      DenseLayer layer{Matrix(out, in, decode_doubles(l.at("weights").get<std::string>(), in * out, "phi weights")),
                       decode_doubles(l.at("bias").get<std::string>(), out, "phi bias"),
                       activation_from_string(l.at("activation").get<std::string>())};
      phi.layers.push_back(std::move(layer));
    }
    phi.validate();
    if (phi.in_dim() != config.h || phi.out_dim() != 1) throw LoadError("phi shape does not match config");

    return SladModel{config,
                     doc.at("feature_names").get<std::vector<std::string>>(),
                     std::move(st),
                     std::move(weights),
                     TransformBank(variant, dims, config.h, bank.at("seed").get<std::uint64_t>()),
                     std::move(phi)};
  } catch (const LoadError&) {
    throw;
  } catch (const std::exception& e) {
    throw LoadError(std::string("corrupt model file: ") + e.what());
  }
}

void save_model(const SladModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model file '" + path.string() + "'");
  out << serialize_model(model);
  if (!out) throw Error("failed writing model file '" + path.string() + "'");
}

SladModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open model file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_model(buf.str());
}

}  // namespace slad
