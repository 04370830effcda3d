#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cyclesr/degrade.hpp"
#include "cyclesr/imagecore.hpp"
#include "cyclesr/nets.hpp"
#include "cyclesr/trainer.hpp"

namespace cyclesr {

/// Malformed configuration text, unknown key or invalid value.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Everything a run needs. Serialized as `key = value` lines; `#` starts a
/// comment. The `scale` key sets the model, training and degradation scale
/// together.
struct RunConfig {
  ModelSpec model;
  TrainConfig train;
  DegradationSpec degradation;
  ShiftProtocol eval{40, 4, std::nullopt};
  std::string manifest;
  std::string val_manifest;
  std::string runs_dir = "runs";
  std::string name = "run";
};

struct ConfigKey {
  std::string name;
  std::string doc;
};

/// All recognised keys in file order.
const std::vector<ConfigKey>& config_keys();

void set_config_value(RunConfig& config, std::string_view key, std::string_view value);
std::string get_config_value(const RunConfig& config, std::string_view key);

/// Applies the document on top of `base`. Errors name the offending line.
RunConfig parse_run_config(std::string_view text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

/// Every key with its documentation and current value; parsing the result
/// reproduces `config` exactly.
std::string format_run_config(const RunConfig& config);

/// Cross-field checks on top of the per-type validators.
void validate(const RunConfig& config);

}  // namespace cyclesr
