#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "tdhk/tdhk.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

int run_train(const std::string& config_path, int64_t seed_override,
              const std::string& out_override) {
  tdhk::TrainConfig cfg = tdhk::parse_config_file(config_path);
  if (seed_override >= 0) cfg.seed = static_cast<uint64_t>(seed_override);
  if (!out_override.empty()) cfg.out_dir = out_override;
  tdhk::TrainResult res = tdhk::train(cfg);
  const tdhk::MetricsRow& last = res.metrics.back();
  std::cout << "trained " << last.epoch + 1 << " epochs, final eval success rate "
            << last.eval_success_rate << "\n"
            << "metrics: " << cfg.out_dir << "/metrics.csv\n"
            << "checkpoint: " << cfg.out_dir << "/checkpoint.bin\n";
  return kExitOk;
}

int run_eval(const std::string& checkpoint_path, const std::string& env_name, int env_n,
             int episodes, int64_t seed) {
  tdhk::Agent agent = tdhk::load_checkpoint(checkpoint_path);
  if (env_n <= 0) env_n = agent.env_spec().goal_dim;  // infer for the sized envs
  auto env = tdhk::make_env(env_name, env_n);
  if (env->spec().obs_dim != agent.env_spec().obs_dim ||
      env->spec().goal_dim != agent.env_spec().goal_dim ||
      env->spec().action_dim != agent.env_spec().action_dim)
    throw tdhk::ConfigError("environment '" + env_name +
                            "' does not match the checkpointed agent's dimensions");
  const double rate = tdhk::evaluate(agent, *env, episodes, static_cast<uint64_t>(seed));
  std::cout << "success rate " << rate << " over " << episodes << " episodes\n";
  return kExitOk;
}

int run_plot(const std::string& metrics, const std::string& out) {
  tdhk::emit_plot(split_csv_list(metrics), out);
  std::cout << "wrote " << out << "\n";
  return kExitOk;
}

int run_sweep(const std::string& config_path, const std::vector<std::string>& grid_args,
              const std::string& out_dir) {
  tdhk::TrainConfig base = tdhk::parse_config_file(config_path);
  std::vector<std::pair<std::string, std::vector<std::string>>> grid;
  for (const auto& g : grid_args) {
    const auto eq = g.find('=');
    if (eq == std::string::npos)
      throw tdhk::ConfigError("--grid expects key=v1,v2,... got '" + g + "'");
    grid.emplace_back(g.substr(0, eq), split_csv_list(g.substr(eq + 1)));
  }
  auto cells = tdhk::sweep(base, grid, out_dir);
  std::cout << cells.size() << " runs complete, summary: " << out_dir << "/summary.csv\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Goal-conditioned DDPG/TD3 + HER training with a K-FAC natural-gradient optimizer"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint_path, env_name, metrics_list, plot_out;
  int64_t seed = -1;
  int episodes = 50, env_n = -1;
  std::vector<std::string> grid_args;

  auto* train_cmd = app.add_subcommand("train", "Run a training job from a config file");
  train_cmd->add_option("--config", config_path, "Config file path")->required();
  train_cmd->add_option("--seed", seed, "Override train.seed");
  train_cmd->add_option("--out", out_dir, "Override train.out_dir");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  eval_cmd->add_option("--env", env_name, "Environment name")->required();
  eval_cmd->add_option("--n", env_n, "Environment size parameter (default: infer)");
  eval_cmd->add_option("--episodes", episodes, "Number of evaluation episodes")->required();
  eval_cmd->add_option("--seed", seed, "Base episode seed")->required();

  auto* plot_cmd = app.add_subcommand("plot", "Render metrics CSVs to an SVG chart");
  plot_cmd->add_option("--metrics", metrics_list, "Comma-separated metrics CSV paths")->required();
  plot_cmd->add_option("--out", plot_out, "Output SVG path")->required();

  auto* sweep_cmd = app.add_subcommand("sweep", "Grid sweep over config keys");
  sweep_cmd->add_option("--config", config_path, "Base config file")->required();
  sweep_cmd->add_option("--grid", grid_args, "key=v1,v2 (repeatable)");
  sweep_cmd->add_option("--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (train_cmd->parsed()) return run_train(config_path, seed, out_dir);
    if (eval_cmd->parsed()) return run_eval(checkpoint_path, env_name, env_n, episodes, seed);
    if (plot_cmd->parsed()) return run_plot(metrics_list, plot_out);
    if (sweep_cmd->parsed()) return run_sweep(config_path, grid_args, out_dir);
  } catch (const tdhk::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const tdhk::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const tdhk::CurvatureError& e) {
    std::cerr << "curvature error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const tdhk::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitIo;
  } catch (const tdhk::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
