#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tdhk/tdhk.hpp"

using namespace tdhk;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("tdhk_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TrainConfig quick_cfg(const std::string& name) {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.cycles_per_epoch = 2;
  cfg.episodes_per_cycle = 2;
  cfg.optimizer_steps_per_cycle = 4;
  cfg.eval_episodes = 3;
  cfg.seed = 7;
  cfg.env_name = "point_reach";
  cfg.env_n = 2;
  cfg.out_dir = fresh_dir(name).string();
  cfg.agent.optimizer = OptimizerKind::adam;
  cfg.agent.batch_size = 16;
  cfg.agent.hidden = {16, 16};
  cfg.replay.capacity = 64;
  return cfg;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Drops the wall_time_s column (the one field real time leaks into).
std::string strip_wall_time(const std::string& csv) {
  std::stringstream in(csv), out;
  std::string line;
  while (std::getline(in, line)) {
    const auto last_comma = line.rfind(',');
    out << line.substr(0, last_comma) << '\n';
  }
  return out.str();
}

int count_occurrences(const std::string& hay, const std::string& needle) {
  int n = 0;
  for (size_t pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1))
    ++n;
  return n;
}

// Proportional controller for point_reach wired into the standard actor
// architecture: hidden relu pair per dim encodes g - x, the tanh head
// saturates it. Drives every episode to the goal well inside the horizon.
Agent scripted_point_reach_agent(const EnvSpec& spec) {
  const int n = spec.goal_dim;
  AgentConfig cfg;
  cfg.hidden = {2 * n};
  cfg.algorithm = Algorithm::ddpg;
  cfg.optimizer = OptimizerKind::adam;
  Agent agent(spec, cfg, 1);
  Mlp& actor = agent.actor();
  for (auto& l : actor.layers) {
    for (double& v : l.weight.data) v = 0.0;
    for (double& v : l.bias) v = 0.0;
  }
  for (int i = 0; i < n; ++i) {
    actor.layers[0].weight(i, i) = -1.0;          // -x_i
    actor.layers[0].weight(i, n + i) = 1.0;       // +g_i
    actor.layers[0].weight(n + i, i) = 1.0;       // +x_i
    actor.layers[0].weight(n + i, n + i) = -1.0;  // -g_i
    actor.layers[1].weight(i, i) = 10.0;
    actor.layers[1].weight(i, n + i) = -10.0;
  }
  return agent;
}

}  // namespace

TEST_CASE("config file parsing: comments, whitespace, unknown keys, bad values") {
  fs::path dir = fresh_dir("config");
  fs::path cfg_path = dir / "run.cfg";
  {
    std::ofstream out(cfg_path);
    out << "# full line comment\n";
    out << "train.epochs = 3   # trailing comment\n";
    out << "env.name=bit_flip\n";
    out << "  env.n =  6\n";
    out << "agent.algorithm = ddpg\n";
    out << "kfac.damping = 0.4\n";
    out << "replay.strategy = final\n";
    out << "\n";
  }
  TrainConfig cfg = parse_config_file(cfg_path.string());
  CHECK(cfg.epochs == 3);
  CHECK(cfg.env_name == "bit_flip");
  CHECK(cfg.env_n == 6);
  CHECK(cfg.agent.algorithm == Algorithm::ddpg);
  CHECK(cfg.agent.kfac.damping == 0.4);
  CHECK(cfg.replay.strategy == RelabelStrategy::final);

  TrainConfig scratch;
  CHECK_THROWS_AS(apply_config_kv(scratch, "kfac.dampign", "0.4"), ConfigError);
  CHECK_THROWS_AS(apply_config_kv(scratch, "train.epochs", "three"), ConfigError);
  CHECK_THROWS_AS(apply_config_kv(scratch, "agent.clip_targets", "maybe"), ConfigError);
  CHECK_THROWS_AS(parse_config_file((dir / "missing.cfg").string()), ConfigError);

  {
    std::ofstream out(dir / "noeq.cfg");
    out << "train.epochs 3\n";
  }
  CHECK_THROWS_AS(parse_config_file((dir / "noeq.cfg").string()), ConfigError);
}

TEST_CASE("a minimal run emits exactly one metrics row plus the header") {
  TrainConfig cfg = quick_cfg("minimal");
  cfg.epochs = 1;
  TrainResult res = train(cfg);
  CHECK(res.metrics.size() == 1);

  const std::string csv = read_file(fs::path(cfg.out_dir) / "metrics.csv");
  std::stringstream ss(csv);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(ss, line)) lines.push_back(line);
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] == metrics_csv_header());
  CHECK(fs::exists(fs::path(cfg.out_dir) / "checkpoint.bin"));
}

TEST_CASE("reruns with the same seed reproduce the metrics byte for byte") {
  TrainConfig a = quick_cfg("det_a");
  TrainConfig b = quick_cfg("det_b");
  b.seed = a.seed;
  TrainResult ra = train(a);
  TrainResult rb = train(b);

  const std::string csv_a = read_file(fs::path(a.out_dir) / "metrics.csv");
  const std::string csv_b = read_file(fs::path(b.out_dir) / "metrics.csv");
  CHECK(strip_wall_time(csv_a) == strip_wall_time(csv_b));

  // The in-memory rows agree on every seed-derived field too.
  REQUIRE(ra.metrics.size() == rb.metrics.size());
  for (size_t i = 0; i < ra.metrics.size(); ++i) {
    CHECK(ra.metrics[i].eval_success_rate == rb.metrics[i].eval_success_rate);
    CHECK(ra.metrics[i].critic_loss == rb.metrics[i].critic_loss);
    CHECK(ra.metrics[i].actor_loss == rb.metrics[i].actor_loss);
    CHECK(ra.metrics[i].q_mean == rb.metrics[i].q_mean);
  }

  TrainConfig c = quick_cfg("det_c");
  c.seed = a.seed + 1;
  TrainResult rc = train(c);
  CHECK(strip_wall_time(read_file(fs::path(c.out_dir) / "metrics.csv")) !=
        strip_wall_time(csv_a));
}

TEST_CASE("env_steps bookkeeping is exact") {
  TrainConfig cfg = quick_cfg("steps");
  cfg.epochs = 3;
  TrainResult res = train(cfg);
  const long per_epoch = static_cast<long>(cfg.cycles_per_epoch) * cfg.episodes_per_cycle * 50;
  for (size_t i = 0; i < res.metrics.size(); ++i)
    CHECK(res.metrics[i].env_steps == static_cast<long>(i + 1) * per_epoch);
}

TEST_CASE("checkpoint round trip is byte-identical and behavior-preserving") {
  TrainConfig cfg = quick_cfg("ckpt");
  TrainResult res = train(cfg);
  const fs::path first = fs::path(cfg.out_dir) / "checkpoint.bin";
  const fs::path second = fs::path(cfg.out_dir) / "resaved.bin";

  Agent loaded = load_checkpoint(first.string());
  save_checkpoint(loaded, second.string());
  CHECK(read_file(first) == read_file(second));

  auto env1 = make_env(cfg.env_name, cfg.env_n);
  auto env2 = make_env(cfg.env_name, cfg.env_n);
  CHECK(evaluate(res.agent, *env1, 20, 555) == evaluate(loaded, *env2, 20, 555));
}

TEST_CASE("corrupted checkpoints are rejected with no partial agent") {
  TrainConfig cfg = quick_cfg("ckpt_bad");
  train(cfg);
  const fs::path good = fs::path(cfg.out_dir) / "checkpoint.bin";

  std::string bytes = read_file(good);
  bytes[0] = 'X';
  const fs::path bad_magic = fs::path(cfg.out_dir) / "bad_magic.bin";
  {
    std::ofstream out(bad_magic, std::ios::binary);
    out << bytes;
  }
  CHECK_THROWS_AS(load_checkpoint(bad_magic.string()), CheckpointError);

  const fs::path truncated = fs::path(cfg.out_dir) / "truncated.bin";
  {
    std::ofstream out(truncated, std::ios::binary);
    out << read_file(good).substr(0, 64);
  }
  CHECK_THROWS_AS(load_checkpoint(truncated.string()), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint((fs::path(cfg.out_dir) / "nope.bin").string()),
                  CheckpointError);
}

TEST_CASE("evaluate: scripted controller saturates, random agent does not") {
  auto env = make_env("point_reach", 2);
  Agent scripted = scripted_point_reach_agent(env->spec());
  CHECK(evaluate(scripted, *env, 50, 123) == 1.0);

  // n = 1 has single-sample support.
  const double single = evaluate(scripted, *env, 1, 9);
  CHECK((single == 0.0 || single == 1.0));

  auto box = make_env("push_box", 0);
  AgentConfig cfg;
  cfg.hidden = {16, 16};
  Agent untrained(box->spec(), cfg, 77);
  CHECK(evaluate(untrained, *box, 100, 1000) < 0.05);
}

TEST_CASE("emit_plot renders one polyline per CSV with a legend") {
  fs::path dir = fresh_dir("plot");
  const auto write_csv = [&](const std::string& name, int rows) {
    std::ofstream out(dir / name);
    out << metrics_csv_header() << '\n';
    for (int i = 0; i < rows; ++i) {
      MetricsRow r;
      r.epoch = i;
      r.env_steps = (i + 1) * 100;
      r.eval_success_rate = 0.25 * i;
      out << metrics_csv_row(r) << '\n';
    }
  };
  write_csv("alpha.csv", 3);
  write_csv("beta.csv", 4);

  const fs::path one = dir / "one.svg";
  emit_plot({(dir / "alpha.csv").string()}, one.string());
  const std::string svg1 = read_file(one);
  CHECK(count_occurrences(svg1, "<polyline") == 1);
  // 3 points = 3 "x,y" pairs inside the points attribute.
  const auto points_pos = svg1.find("points=\"");
  const auto points_end = svg1.find('"', points_pos + 8);
  CHECK(count_occurrences(svg1.substr(points_pos, points_end - points_pos), ",") == 3);
  CHECK(svg1.find("eval success rate") != std::string::npos);
  CHECK(svg1.find("epoch") != std::string::npos);

  const fs::path two = dir / "two.svg";
  emit_plot({(dir / "alpha.csv").string(), (dir / "beta.csv").string()}, two.string());
  const std::string svg2 = read_file(two);
  CHECK(count_occurrences(svg2, "<polyline") == 2);
  CHECK(svg2.find("alpha") != std::string::npos);
  CHECK(svg2.find("beta") != std::string::npos);

  // Header-only CSV is a format error naming the file.
  {
    std::ofstream out(dir / "empty.csv");
    out << metrics_csv_header() << '\n';
  }
  try {
    emit_plot({(dir / "empty.csv").string()}, (dir / "bad.svg").string());
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("empty.csv") != std::string::npos);
  }

  {
    std::ofstream out(dir / "schema.csv");
    out << "epoch,foo\n0,1\n";
  }
  CHECK_THROWS_AS(emit_plot({(dir / "schema.csv").string()}, (dir / "bad2.svg").string()),
                  FormatError);
}

TEST_CASE("sweep runs the Cartesian product and summarizes final rows") {
  TrainConfig base = quick_cfg("sweep_base");
  base.epochs = 1;
  fs::path out = fresh_dir("sweep_out");

  auto cells = sweep(base, {{"kfac.damping", {"0.4", "0.8"}}}, out.string());
  CHECK(cells.size() == 2);
  const std::string summary = read_file(out / "summary.csv");
  std::stringstream ss(summary);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(ss, line)) lines.push_back(line);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == std::string("run,kfac.damping,") + metrics_csv_header());

  // Summary rows repeat each run's final metrics row.
  for (const auto& cell : cells) {
    const std::string run_csv = read_file(fs::path(cell.run_dir) / "metrics.csv");
    std::stringstream rs(run_csv);
    std::string run_line, last;
    std::getline(rs, run_line);  // header
    while (std::getline(rs, run_line))
      if (!run_line.empty()) last = run_line;
    CHECK(strip_wall_time(last + "\n") ==
          strip_wall_time(metrics_csv_row(cell.final_row) + "\n"));
  }

  // Empty grid: one baseline run.
  fs::path out2 = fresh_dir("sweep_baseline");
  TrainConfig base2 = quick_cfg("sweep_base2");
  base2.epochs = 1;
  auto baseline = sweep(base2, {}, out2.string());
  CHECK(baseline.size() == 1);
  CHECK(fs::exists(out2 / "baseline" / "metrics.csv"));

  // Invalid keys fail before any run starts.
  fs::path out3 = fresh_dir("sweep_invalid");
  CHECK_THROWS_AS(sweep(base2, {{"kfac.dampign", {"0.4"}}}, out3.string()), ConfigError);
  CHECK_FALSE(fs::exists(out3 / "kfac.dampign=0.4"));
}

TEST_CASE("CLI subcommands round-trip and map errors to exit codes") {
  const std::string cli = TDHK_CLI_PATH;
  fs::path dir = fresh_dir("cli");
  fs::path cfg_path = dir / "run.cfg";
  {
    std::ofstream out(cfg_path);
    out << "train.epochs = 1\n"
        << "train.cycles_per_epoch = 2\n"
        << "train.episodes_per_cycle = 2\n"
        << "train.optimizer_steps_per_cycle = 4\n"
        << "train.eval_episodes = 3\n"
        << "env.name = point_reach\n"
        << "env.n = 2\n"
        << "agent.optimizer = adam\n"
        << "agent.batch_size = 16\n";
  }
  const auto run = [](const std::string& cmd) {
    const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
  };

  const std::string out_dir = (dir / "run1").string();
  CHECK(run(cli + " train --config " + cfg_path.string() + " --seed 3 --out " + out_dir) == 0);
  CHECK(fs::exists(fs::path(out_dir) / "metrics.csv"));
  CHECK(fs::exists(fs::path(out_dir) / "checkpoint.bin"));

  CHECK(run(cli + " eval --checkpoint " + out_dir + "/checkpoint.bin --env point_reach" +
            " --episodes 5 --seed 1") == 0);
  CHECK(run(cli + " plot --metrics " + out_dir + "/metrics.csv --out " + (dir / "p.svg").string()) ==
        0);
  CHECK(fs::exists(dir / "p.svg"));

  // Exit codes: 2 config, 4 I/O.
  {
    std::ofstream out(dir / "bad.cfg");
    out << "bogus.key = 1\n";
  }
  CHECK(run(cli + " train --config " + (dir / "bad.cfg").string()) == 2);
  CHECK(run(cli + " eval --checkpoint " + (dir / "nope.bin").string() +
            " --env point_reach --episodes 1 --seed 1") == 4);
  {
    std::ofstream out(dir / "empty.csv");
    out << metrics_csv_header() << '\n';
  }
  CHECK(run(cli + " plot --metrics " + (dir / "empty.csv").string() + " --out " +
            (dir / "q.svg").string()) == 4);

  const std::string sweep_out = (dir / "sweep").string();
  CHECK(run(cli + " sweep --config " + cfg_path.string() + " --grid kfac.damping=0.4,0.8 --out " +
            sweep_out) == 0);
  CHECK(fs::exists(fs::path(sweep_out) / "summary.csv"));
}
