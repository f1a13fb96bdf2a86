#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tdhk/agent.hpp"
#include "tdhk/replay.hpp"

namespace tdhk {

// Full description of one training run. Everything the loop does is a pure
// function of this struct, so (config, seed) reproduces a run exactly.
struct TrainConfig {
  int epochs = 50;
  int cycles_per_epoch = 10;
  int episodes_per_cycle = 16;
  int optimizer_steps_per_cycle = 40;
  int eval_episodes = 50;
  uint64_t seed = 1;
  std::string out_dir = "runs/latest";
  // > 0: stop once eval_success_rate reaches this value (the row is still
  // written); 0 disables.
  double early_stop_success = 0.0;

  std::string env_name = "point_reach";
  int env_n = 8;

  AgentConfig agent;
  ReplayConfig replay;

  void validate() const {
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (cycles_per_epoch < 1) throw ConfigError("train.cycles_per_epoch must be >= 1");
    if (episodes_per_cycle < 1) throw ConfigError("train.episodes_per_cycle must be >= 1");
    if (optimizer_steps_per_cycle < 1)
      throw ConfigError("train.optimizer_steps_per_cycle must be >= 1");
    if (eval_episodes < 1) throw ConfigError("train.eval_episodes must be >= 1");
    if (early_stop_success < 0.0 || early_stop_success > 1.0)
      throw ConfigError("train.early_stop_success must be in [0,1]");
    if (out_dir.empty()) throw ConfigError("train.out_dir must not be empty");
    agent.validate();
    replay.validate();
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as a number");
  }
}

inline long long parse_int(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as an integer");
  }
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "on" || value == "1") return true;
  if (value == "false" || value == "off" || value == "0") return false;
  throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as a bool");
}

}  // namespace detail

// Applies one dotted.key = value pair. Unknown keys are hard errors so sweep
// typos surface before any run starts.
inline void apply_config_kv(TrainConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_bool;
  using detail::parse_double;
  using detail::parse_int;

  if (key == "train.epochs") cfg.epochs = static_cast<int>(parse_int(key, value));
  else if (key == "train.cycles_per_epoch") cfg.cycles_per_epoch = static_cast<int>(parse_int(key, value));
  else if (key == "train.episodes_per_cycle") cfg.episodes_per_cycle = static_cast<int>(parse_int(key, value));
  else if (key == "train.optimizer_steps_per_cycle") cfg.optimizer_steps_per_cycle = static_cast<int>(parse_int(key, value));
  else if (key == "train.eval_episodes") cfg.eval_episodes = static_cast<int>(parse_int(key, value));
  else if (key == "train.seed") cfg.seed = static_cast<uint64_t>(parse_int(key, value));
  else if (key == "train.out_dir") cfg.out_dir = value;
  else if (key == "train.early_stop_success") cfg.early_stop_success = parse_double(key, value);
  else if (key == "env.name") cfg.env_name = value;
  else if (key == "env.n") cfg.env_n = static_cast<int>(parse_int(key, value));
  else if (key == "agent.algorithm") cfg.agent.algorithm = parse_algorithm(value);
  else if (key == "agent.optimizer") cfg.agent.optimizer = parse_optimizer(value);
  else if (key == "agent.gamma") cfg.agent.gamma = parse_double(key, value);
  else if (key == "agent.tau") cfg.agent.tau = parse_double(key, value);
  else if (key == "agent.explore_noise_std") cfg.agent.explore_noise_std = parse_double(key, value);
  else if (key == "agent.target_noise_std") cfg.agent.target_noise_std = parse_double(key, value);
  else if (key == "agent.target_noise_clip") cfg.agent.target_noise_clip = parse_double(key, value);
  else if (key == "agent.policy_delay") cfg.agent.policy_delay = static_cast<int>(parse_int(key, value));
  else if (key == "agent.batch_size") cfg.agent.batch_size = static_cast<int>(parse_int(key, value));
  else if (key == "agent.clip_targets") cfg.agent.clip_targets = parse_bool(key, value);
  else if (key == "agent.random_action_prob") cfg.agent.random_action_prob = parse_double(key, value);
  else if (key == "agent.adam_lr") cfg.agent.adam_lr = parse_double(key, value);
  else if (key == "kfac.damping") cfg.agent.kfac.damping = parse_double(key, value);
  else if (key == "kfac.momentum") cfg.agent.kfac.momentum = parse_double(key, value);
  else if (key == "kfac.stat_decay") cfg.agent.kfac.stat_decay = parse_double(key, value);
  else if (key == "kfac.learning_rate") cfg.agent.kfac.learning_rate = parse_double(key, value);
  else if (key == "kfac.inversion_interval") cfg.agent.kfac.inversion_interval = static_cast<int>(parse_int(key, value));
  else if (key == "kfac.fisher_noise_std") cfg.agent.kfac.fisher_noise_std = parse_double(key, value);
  else if (key == "kfac.max_update_norm") cfg.agent.kfac.max_update_norm = parse_double(key, value);
  else if (key == "replay.capacity") cfg.replay.capacity = static_cast<int>(parse_int(key, value));
  else if (key == "replay.strategy") cfg.replay.strategy = parse_strategy(value);
  else if (key == "replay.relabel_mode") cfg.replay.relabel_mode = parse_relabel_mode(value);
  else if (key == "replay.future_k") cfg.replay.future_k = static_cast<int>(parse_int(key, value));
  else throw ConfigError("unknown config key '" + key + "'");
}

// Flat UTF-8 config: one `dotted.key = value` per line, '#' starts a comment.
inline TrainConfig parse_config_text(std::istream& in, const std::string& origin) {
  TrainConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    apply_config_kv(cfg, key, value);
  }
  return cfg;
}

inline TrainConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config_text(in, path);
}

}  // namespace tdhk
