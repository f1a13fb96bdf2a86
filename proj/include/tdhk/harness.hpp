#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tdhk/agent.hpp"
#include "tdhk/checkpoint.hpp"
#include "tdhk/config.hpp"
#include "tdhk/env.hpp"
#include "tdhk/replay.hpp"
#include "tdhk/rng.hpp"

namespace tdhk {

struct MetricsRow {
  int epoch = 0;
  long env_steps = 0;
  double train_success_rate = 0.0;
  double eval_success_rate = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double q_mean = 0.0;
  double wall_time_s = 0.0;
};

inline const char* metrics_csv_header() {
  return "epoch,env_steps,train_success_rate,eval_success_rate,actor_loss,critic_loss,q_mean,wall_time_s";
}

namespace detail {

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace detail

inline std::string metrics_csv_row(const MetricsRow& r) {
  std::ostringstream os;
  os << r.epoch << ',' << r.env_steps << ',' << detail::format_double(r.train_success_rate) << ','
     << detail::format_double(r.eval_success_rate) << ',' << detail::format_double(r.actor_loss)
     << ',' << detail::format_double(r.critic_loss) << ',' << detail::format_double(r.q_mean)
     << ',' << detail::format_double(r.wall_time_s);
  return os.str();
}

// Mean final-step success over n episodes run with the deterministic policy
// (no exploration noise); episodes are seeded seed .. seed+n-1.
inline double evaluate(const Agent& agent, GoalEnv& env, int n, uint64_t seed) {
  if (n < 1) throw ConfigError("evaluate: n must be >= 1");
  std::mt19937_64 rng(0);  // never drawn from: explore = false
  int successes = 0;
  for (int i = 0; i < n; ++i) {
    GoalObservation obs = env.reset(seed + static_cast<uint64_t>(i));
    bool success = false;
    for (int t = 0; t < env.spec().horizon; ++t) {
      const auto action = agent.select_action(obs, /*explore=*/false, rng);
      StepResult res = env.step(action);
      obs = std::move(res.obs);
      if (res.done) success = res.is_success;
    }
    successes += success ? 1 : 0;
  }
  return static_cast<double>(successes) / n;
}

struct TrainResult {
  Agent agent;
  std::vector<MetricsRow> metrics;
};

// Runs the full epoch/cycle/episode loop and writes metrics.csv (one row per
// epoch, flushed as it goes) plus periodic checkpoints under cfg.out_dir.
//
// Randomness is a single mt19937_64 stream seeded with cfg.seed; draw order:
// agent init seed, then per episode its env seed followed by the per-step
// exploration draws, then the per-optimizer-step draws (batch sampling,
// target smoothing, curvature-sampling seeds), then one eval seed per epoch.
// Every value in the CSV except wall_time_s is reproduced exactly by a rerun
// with the same config and seed.
inline TrainResult train(const TrainConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);

  std::mt19937_64 master(cfg.seed);
  auto env = make_env(cfg.env_name, cfg.env_n);
  auto eval_env = make_env(cfg.env_name, cfg.env_n);
  const int horizon = env->spec().horizon;

  Agent agent(env->spec(), cfg.agent, master());
  HerBuffer buffer(cfg.replay, env->spec().success_tol);

  const std::string csv_path = cfg.out_dir + "/metrics.csv";
  std::ofstream csv(csv_path, std::ios::trunc);
  if (!csv) throw CheckpointError("cannot open '" + csv_path + "' for writing");
  csv << metrics_csv_header() << '\n';
  csv.flush();

  std::vector<MetricsRow> rows;
  long env_steps = 0;
  const auto t_start = std::chrono::steady_clock::now();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    int train_episodes = 0, train_successes = 0;
    double critic_loss_sum = 0.0, actor_loss_sum = 0.0, q_mean_sum = 0.0;
    long critic_steps = 0, actor_steps = 0;

    for (int cycle = 0; cycle < cfg.cycles_per_epoch; ++cycle) {
      for (int ep = 0; ep < cfg.episodes_per_cycle; ++ep) {
        const uint64_t ep_seed = master();
        GoalObservation obs = env->reset(ep_seed);
        Episode episode;
        episode.steps.reserve(horizon);
        bool success = false;
        for (int t = 0; t < horizon; ++t) {
          const auto action = agent.select_action(obs, /*explore=*/true, master);
          StepResult res = env->step(action);
          Transition tr;
          tr.state = obs.observation;
          tr.action = action;
          tr.next_state = res.obs.observation;
          tr.goal = obs.desired_goal;
          tr.achieved_goal = obs.achieved_goal;
          tr.next_achieved_goal = res.obs.achieved_goal;
          tr.reward = res.reward;
          tr.done = res.done;
          episode.steps.push_back(std::move(tr));
          obs = std::move(res.obs);
          env_steps += 1;
          if (res.done) success = res.is_success;
        }
        buffer.store_episode(episode);
        train_episodes += 1;
        train_successes += success ? 1 : 0;
      }
      for (int step = 0; step < cfg.optimizer_steps_per_cycle; ++step) {
        StepMetrics m = agent.train_step(buffer, master);
        critic_loss_sum += m.critic_loss;
        q_mean_sum += m.q_mean;
        critic_steps += 1;
        if (m.actor_loss) {
          actor_loss_sum += *m.actor_loss;
          actor_steps += 1;
        }
      }
    }

    const uint64_t eval_seed = master();
    const double eval_rate = evaluate(agent, *eval_env, cfg.eval_episodes, eval_seed);

    MetricsRow row;
    row.epoch = epoch;
    row.env_steps = env_steps;
    row.train_success_rate = static_cast<double>(train_successes) / train_episodes;
    row.eval_success_rate = eval_rate;
    row.actor_loss = actor_steps > 0 ? actor_loss_sum / actor_steps : 0.0;
    row.critic_loss = critic_steps > 0 ? critic_loss_sum / critic_steps : 0.0;
    row.q_mean = critic_steps > 0 ? q_mean_sum / critic_steps : 0.0;
    row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    rows.push_back(row);
    csv << metrics_csv_row(row) << '\n';
    csv.flush();

    if ((epoch + 1) % 10 == 0)
      save_checkpoint(agent, cfg.out_dir + "/checkpoint_epoch_" + std::to_string(epoch + 1) + ".bin");
    if (cfg.early_stop_success > 0.0 && eval_rate >= cfg.early_stop_success) break;
  }

  save_checkpoint(agent, cfg.out_dir + "/checkpoint.bin");
  return TrainResult{std::move(agent), std::move(rows)};
}

// ---------------------------------------------------------------------------
// Plot emission: a static SVG line chart of eval success rate vs epoch, one
// polyline per metrics CSV.

namespace detail {

struct Series {
  std::string label;
  std::vector<double> epochs;
  std::vector<double> values;
};

inline Series load_series(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw FormatError("plot: cannot open '" + csv_path + "'");
  std::string header;
  if (!std::getline(in, header)) throw FormatError("plot: '" + csv_path + "' is empty");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  if (header != metrics_csv_header())
    throw FormatError("plot: '" + csv_path + "' does not match the metrics CSV schema");

  Series s;
  s.label = std::filesystem::path(csv_path).stem().string();
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 8)
      throw FormatError("plot: '" + csv_path + "' has a row with " +
                        std::to_string(fields.size()) + " fields, expected 8");
    try {
      s.epochs.push_back(std::stod(fields[0]));
      s.values.push_back(std::stod(fields[3]));
    } catch (const std::exception&) {
      throw FormatError("plot: '" + csv_path + "' has a non-numeric row");
    }
  }
  if (s.epochs.empty()) throw FormatError("plot: '" + csv_path + "' has no data rows");
  return s;
}

inline const char* kPlotPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                     "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

}  // namespace detail

inline void emit_plot(const std::vector<std::string>& metric_csv_paths,
                      const std::string& out_path) {
  if (metric_csv_paths.empty()) throw FormatError("plot: no input CSVs");
  std::vector<detail::Series> series;
  series.reserve(metric_csv_paths.size());
  for (const auto& p : metric_csv_paths) series.push_back(detail::load_series(p));

  double x_min = series[0].epochs.front(), x_max = series[0].epochs.front();
  for (const auto& s : series)
    for (double e : s.epochs) {
      x_min = std::min(x_min, e);
      x_max = std::max(x_max, e);
    }
  if (x_max == x_min) x_max = x_min + 1.0;

  const double width = 640, height = 420;
  const double left = 60, right = 20, top = 20, bottom = 45;
  const double pw = width - left - right, ph = height - top - bottom;
  const auto x_of = [&](double e) { return left + (e - x_min) / (x_max - x_min) * pw; };
  const auto y_of = [&](double v) { return top + (1.0 - v) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";

  // Axes with y ticks every 0.25 and five x ticks.
  svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << top + ph << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\""
      << top + ph << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = i * 0.25;
    svg << "<line x1=\"" << left - 4 << "\" y1=\"" << y_of(v) << "\" x2=\"" << left << "\" y2=\""
        << y_of(v) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << left - 8 << "\" y=\"" << y_of(v) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << v << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double e = x_min + (x_max - x_min) * i / 4.0;
    svg << "<line x1=\"" << x_of(e) << "\" y1=\"" << top + ph << "\" x2=\"" << x_of(e)
        << "\" y2=\"" << top + ph + 4 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << x_of(e) << "\" y=\"" << top + ph + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << std::fixed << std::setprecision(0)
        << e << "</text>\n";
    svg.unsetf(std::ios_base::fixed);
    svg << std::setprecision(6);
  }
  svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 8
      << "\" text-anchor=\"middle\" font-size=\"13\">epoch</text>\n";
  svg << "<text x=\"16\" y=\"" << top + ph / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 " << top + ph / 2
      << ")\">eval success rate</text>\n";

  for (size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = detail::kPlotPalette[i % std::size(detail::kPlotPalette)];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
    for (size_t k = 0; k < s.epochs.size(); ++k)
      svg << x_of(s.epochs[k]) << ',' << y_of(s.values[k]) << ' ';
    svg << "\"/>\n";
    const double ly = top + 14 + 16 * static_cast<double>(i);
    svg << "<line x1=\"" << left + pw - 150 << "\" y1=\"" << ly << "\" x2=\"" << left + pw - 130
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"1.6\"/>\n";
    svg << "<text x=\"" << left + pw - 124 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">"
        << s.label << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw CheckpointError("plot: cannot open '" + out_path + "' for writing");
  out << svg.str();
}

// ---------------------------------------------------------------------------
// Hyperparameter sweep: Cartesian product of the grid values, one train()
// per combination in its own subdirectory, plus a summary CSV whose rows
// repeat each run's final metrics row.

struct SweepCell {
  std::vector<std::pair<std::string, std::string>> overrides;
  std::string run_dir;
  MetricsRow final_row;
};

inline std::vector<SweepCell> sweep(
    const TrainConfig& base,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& grid,
    const std::string& out_dir) {
  // Validate every key/value against a scratch copy before any run starts.
  for (const auto& [key, values] : grid) {
    if (values.empty()) throw ConfigError("sweep: grid key '" + key + "' has no values");
    for (const auto& v : values) {
      TrainConfig scratch = base;
      apply_config_kv(scratch, key, v);
    }
  }

  std::vector<std::vector<size_t>> combos{{}};
  for (const auto& [key, values] : grid) {
    std::vector<std::vector<size_t>> next;
    for (const auto& c : combos)
      for (size_t i = 0; i < values.size(); ++i) {
        auto e = c;
        e.push_back(i);
        next.push_back(std::move(e));
      }
    combos = std::move(next);
  }

  std::filesystem::create_directories(out_dir);
  std::vector<SweepCell> cells;
  for (const auto& combo : combos) {
    SweepCell cell;
    TrainConfig cfg = base;
    std::string dir_name;
    for (size_t g = 0; g < grid.size(); ++g) {
      const auto& [key, values] = grid[g];
      const std::string& value = values[combo[g]];
      apply_config_kv(cfg, key, value);
      cell.overrides.emplace_back(key, value);
      if (!dir_name.empty()) dir_name += "__";
      dir_name += key + "=" + value;
    }
    if (dir_name.empty()) dir_name = "baseline";
    cfg.out_dir = out_dir + "/" + dir_name;
    cell.run_dir = cfg.out_dir;
    TrainResult res = train(cfg);
    cell.final_row = res.metrics.back();
    cells.push_back(std::move(cell));
  }

  const std::string summary_path = out_dir + "/summary.csv";
  std::ofstream summary(summary_path, std::ios::trunc);
  if (!summary) throw CheckpointError("sweep: cannot open '" + summary_path + "' for writing");
  summary << "run";
  for (const auto& [key, values] : grid) summary << ',' << key;
  summary << ',' << metrics_csv_header() << '\n';
  for (const auto& cell : cells) {
    summary << std::filesystem::path(cell.run_dir).filename().string();
    for (const auto& [key, value] : cell.overrides) summary << ',' << value;
    summary << ',' << metrics_csv_row(cell.final_row) << '\n';
  }
  return cells;
}

}  // namespace tdhk
