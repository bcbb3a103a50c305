#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rsesf/io.hpp"
#include "rsesf/net.hpp"
#include "rsesf/train.hpp"

namespace rsesf {

/// Everything a training run needs. Parsed from key=value text; unknown keys
/// are rejected. Relative paths resolve against the config file's directory.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  fs::path train_data;  ///< manifest
  fs::path test_data;   ///< manifest (optional for `train`)
  fs::path output_dir;

  void validate() const;
};

/// Model initialization seed; batch order uses train.seed itself.
std::uint64_t init_seed(const TrainConfig& train);

void apply_setting(RunConfig& config, const std::string& key, const std::string& value,
                   const fs::path& base_dir);
RunConfig parse_run_config(const KeyValues& kv, const fs::path& base_dir);
/// Reads `path` (may be empty for pure defaults) then applies "key=value" overrides.
RunConfig load_run_config(const fs::path& path, const std::vector<std::string>& overrides);
KeyValues resolved(const RunConfig& config);

OptimizerKind parse_optimizer(const std::string& name);
std::string to_string(OptimizerKind kind);

}  // namespace rsesf
