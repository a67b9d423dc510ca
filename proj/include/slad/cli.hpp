#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "slad/model.hpp"

namespace slad::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  TrainConfig train;
  std::string data;
  std::string label_column = "label";
  std::string out;
  double contamination = 0.0;
};

// Command-line values; unset fields fall through to the config file and then
// to the built-in defaults.
struct FlagOverrides {
  std::optional<std::size_t> c, r, h, delta, hidden_units, batch_size, epochs;
  std::optional<double> gamma, lr, contamination;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> loss_variant, transform_variant, data, label_column, out;
  std::optional<bool> use_feature_weights, resample_per_epoch;
  std::optional<unsigned> threads;
};

// defaults < file < flags. Unknown or mistyped file keys raise UsageError
// naming the key.
RunConfig resolve_run_config(const nlohmann::json* file, const FlagOverrides& flags);
nlohmann::json to_json(const RunConfig& c);

// Entry point behind the `slad` binary. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace slad::cli
