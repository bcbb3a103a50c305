#include "rsesf/config.hpp"

#include <sstream>

#include "rsesf/data.hpp"
#include "rsesf/error.hpp"

namespace rsesf {

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (model.r_train != 1) throw ArgumentError("training runs with r_train = 1");
}

std::uint64_t init_seed(const TrainConfig& train) { return derive_seed(train.seed, 0); }

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "momentum") return OptimizerKind::momentum;
  throw ArgumentError("unknown optimizer '" + name + "' (expected sgd|momentum)");
}

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::sgd ? "sgd" : "momentum";
}

namespace {

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ArgumentError(key + " must be true or false");
}

fs::path resolve(const std::string& value, const fs::path& base_dir) {
  if (value.empty()) return {};
  const fs::path p(value);
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

}  // namespace

void apply_setting(RunConfig& config, const std::string& key, const std::string& value,
                   const fs::path& base_dir) {
  if (assign_model_config(config.model, key, value)) return;
  auto& t = config.train;
  if (key == "step_size") {
    t.step_size = parse_double(value);
  } else if (key == "steps") {
    t.steps = parse_size(value);
  } else if (key == "batch_size") {
    t.batch_size = parse_size(value);
  } else if (key == "seed") {
    t.seed = parse_size(value);
  } else if (key == "optimizer") {
    t.optimizer = parse_optimizer(value);
  } else if (key == "momentum") {
    t.momentum = parse_double(value);
  } else if (key == "freeze_alpha") {
    t.freeze.alpha = parse_bool(key, value);
  } else if (key == "freeze_sigma") {
    t.freeze.sigma = parse_bool(key, value);
  } else if (key == "freeze_head") {
    t.freeze.head = parse_bool(key, value);
  } else if (key == "freeze_eta") {
    t.freeze.eta = parse_bool(key, value);
  } else if (key == "train_data") {
    config.train_data = resolve(value, base_dir);
  } else if (key == "test_data") {
    config.test_data = resolve(value, base_dir);
  } else if (key == "output_dir") {
    config.output_dir = resolve(value, base_dir);
  } else {
    throw ArgumentError("unknown config key '" + key + "'");
  }
}

RunConfig parse_run_config(const KeyValues& kv, const fs::path& base_dir) {
  RunConfig config;
  for (const auto& [key, value] : kv) apply_setting(config, key, value, base_dir);
  return config;
}

RunConfig load_run_config(const fs::path& path, const std::vector<std::string>& overrides) {
  RunConfig config;
  if (!path.empty()) config = parse_run_config(read_key_values(path), path.parent_path());
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ArgumentError("override must be key=value: '" + item + "'");
    }
    apply_setting(config, item.substr(0, eq), item.substr(eq + 1), fs::current_path());
  }
  config.validate();
  return config;
}

KeyValues resolved(const RunConfig& config) {
  KeyValues kv;
  write_model_config(kv, config.model);
  const auto& t = config.train;
  kv["step_size"] = format_double(t.step_size);
  kv["steps"] = std::to_string(t.steps);
  kv["batch_size"] = std::to_string(t.batch_size);
  kv["seed"] = std::to_string(t.seed);
  kv["optimizer"] = to_string(t.optimizer);
  kv["momentum"] = format_double(t.momentum);
  kv["freeze_alpha"] = t.freeze.alpha ? "true" : "false";
  kv["freeze_sigma"] = t.freeze.sigma ? "true" : "false";
  kv["freeze_head"] = t.freeze.head ? "true" : "false";
  kv["freeze_eta"] = t.freeze.eta ? "true" : "false";
  if (!config.train_data.empty()) kv["train_data"] = fs::absolute(config.train_data).string();
  if (!config.test_data.empty()) kv["test_data"] = fs::absolute(config.test_data).string();
  if (!config.output_dir.empty()) kv["output_dir"] = fs::absolute(config.output_dir).string();
  return kv;
}

}  // namespace rsesf
