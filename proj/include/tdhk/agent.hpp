#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tdhk/env.hpp"
#include "tdhk/kfac.hpp"
#include "tdhk/mlp.hpp"
#include "tdhk/replay.hpp"
#include "tdhk/rng.hpp"

namespace tdhk {

enum class Algorithm : uint8_t { ddpg = 0, td3 = 1 };
enum class OptimizerKind : uint8_t { kfac = 0, adam = 1 };

inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "ddpg") return Algorithm::ddpg;
  if (s == "td3") return Algorithm::td3;
  throw ConfigError("unknown algorithm '" + s + "' (expected ddpg or td3)");
}

inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "kfac") return OptimizerKind::kfac;
  if (s == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + s + "' (expected kfac or adam)");
}

struct AgentConfig {
  Algorithm algorithm = Algorithm::td3;
  OptimizerKind optimizer = OptimizerKind::kfac;
  double gamma = 0.98;
  double tau = 0.05;
  double explore_noise_std = 0.1;   // in action units
  double target_noise_std = 0.2;    // TD3 target policy smoothing
  double target_noise_clip = 0.5;
  int policy_delay = 2;             // TD3: critic updates per actor update
  int batch_size = 128;
  bool clip_targets = true;         // clamp y to [-1/(1-gamma), 0]
  double random_action_prob = 0.2;  // epsilon-greedy overlay during rollouts
  double adam_lr = 1e-3;
  std::vector<int> hidden = {64, 64, 64};
  KfacConfig kfac;

  void validate() const {
    if (gamma <= 0.0 || gamma > 1.0) throw ConfigError("agent.gamma must be in (0,1]");
    if (tau <= 0.0 || tau > 1.0) throw ConfigError("agent.tau must be in (0,1]");
    if (explore_noise_std <= 0.0) throw ConfigError("agent.explore_noise_std must be > 0");
    if (target_noise_std <= 0.0) throw ConfigError("agent.target_noise_std must be > 0");
    if (target_noise_clip <= 0.0) throw ConfigError("agent.target_noise_clip must be > 0");
    if (policy_delay < 1) throw ConfigError("agent.policy_delay must be >= 1");
    if (batch_size < 1) throw ConfigError("agent.batch_size must be >= 1");
    if (random_action_prob < 0.0 || random_action_prob > 1.0)
      throw ConfigError("agent.random_action_prob must be in [0,1]");
    if (adam_lr <= 0.0) throw ConfigError("agent.adam_lr must be > 0");
    if (hidden.empty()) throw ConfigError("agent: at least one hidden layer required");
    for (int h : hidden)
      if (h < 1) throw ConfigError("agent: hidden layer sizes must be >= 1");
    kfac.validate();
  }
};

struct StepMetrics {
  double critic_loss = 0.0;
  std::optional<double> actor_loss;  // set only on steps that update the actor
  double q_mean = 0.0;
  bool actor_updated = false;
};

// Goal-conditioned deterministic actor-critic agent. algorithm = ddpg runs
// one critic and updates the actor every step; td3 runs twin critics,
// delayed policy updates and target policy smoothing. A single agent is one
// mutable unit; train_step calls must be serialized.
class Agent {
 public:
  Agent(EnvSpec env_spec, AgentConfig cfg, uint64_t seed)
      : cfg_(std::move(cfg)), env_(std::move(env_spec)) {
    cfg_.validate();
    if (env_.obs_dim < 1 || env_.goal_dim < 1 || env_.action_dim < 1)
      throw ConfigError("agent: environment dims must be positive");

    const int sg_dim = env_.obs_dim + env_.goal_dim;
    std::vector<LayerSpec> actor_spec = hidden_chain(sg_dim);
    actor_spec.push_back({cfg_.hidden.back(), env_.action_dim, Activation::tanh});
    std::vector<LayerSpec> critic_spec = hidden_chain(sg_dim + env_.action_dim);
    critic_spec.push_back({cfg_.hidden.back(), 1, Activation::identity});

    actor_ = init_mlp(actor_spec, mix_seed(seed, 0));
    target_actor_ = actor_;
    const int n_critics = cfg_.algorithm == Algorithm::td3 ? 2 : 1;
    for (int i = 0; i < n_critics; ++i) {
      critics_.push_back(init_mlp(critic_spec, mix_seed(seed, 1 + i)));
      target_critics_.push_back(critics_.back());
    }
    init_optimizers();
  }

  // a = actor(s || g), optionally perturbed for exploration, clipped to the
  // action bounds. Exploration adds mean-zero Gaussian noise, overlaid with
  // a uniformly random action with probability random_action_prob.
  std::vector<double> select_action(const GoalObservation& obs, bool explore,
                                    std::mt19937_64& rng) const {
    Matrix in = obs_goal_row(obs);
    Matrix out = forward(actor_, in);
    std::vector<double> action(env_.action_dim);
    for (int j = 0; j < env_.action_dim; ++j) action[j] = scale_to_env(out(0, j), j);
    if (explore) {
      std::uniform_real_distribution<double> coin(0.0, 1.0);
      if (cfg_.random_action_prob > 0.0 && coin(rng) < cfg_.random_action_prob) {
        for (int j = 0; j < env_.action_dim; ++j) {
          std::uniform_real_distribution<double> uni(env_.action_low[j], env_.action_high[j]);
          action[j] = uni(rng);
        }
      } else {
        std::normal_distribution<double> noise(0.0, cfg_.explore_noise_std);
        for (double& a : action) a += noise(rng);
      }
    }
    clip_to_bounds(action);
    return action;
  }

  // y = r + gamma * (1 - done) * Q_target(s', P_target(s')).
  std::vector<double> td_target_ddpg(const std::vector<Transition>& batch) const {
    Matrix next_sg = next_obs_goal_matrix(batch);
    Matrix next_a = scale_matrix_to_env(forward(target_actor_, next_sg));
    Matrix q = forward(target_critics_[0], hconcat(next_sg, next_a));
    return assemble_targets(batch, [&](int b) { return q(b, 0); });
  }

  // TD3 targets: smoothed target action, min over the twin target critics.
  std::vector<double> td_target_td3(const std::vector<Transition>& batch,
                                    std::mt19937_64& rng) const {
    Matrix next_sg = next_obs_goal_matrix(batch);
    Matrix next_a = scale_matrix_to_env(forward(target_actor_, next_sg));
    std::normal_distribution<double> noise(0.0, cfg_.target_noise_std);
    const double c = cfg_.target_noise_clip;
    for (int b = 0; b < next_a.rows; ++b)
      for (int j = 0; j < next_a.cols; ++j) {
        const double eps = std::clamp(noise(rng), -c, c);
        next_a(b, j) = std::clamp(next_a(b, j) + eps, env_.action_low[j], env_.action_high[j]);
      }
    Matrix x = hconcat(next_sg, next_a);
    Matrix q_min = forward(target_critics_[0], x);
    for (size_t i = 1; i < target_critics_.size(); ++i) {
      Matrix qi = forward(target_critics_[i], x);
      for (int b = 0; b < q_min.rows; ++b) q_min(b, 0) = std::min(q_min(b, 0), qi(b, 0));
    }
    return assemble_targets(batch, [&](int b) { return q_min(b, 0); });
  }

  std::vector<double> td_target(const std::vector<Transition>& batch, std::mt19937_64& rng) const {
    return cfg_.algorithm == Algorithm::td3 ? td_target_td3(batch, rng) : td_target_ddpg(batch);
  }

  // Regresses every critic onto the shared targets and applies one optimizer
  // step per critic. Returns the pre-update loss (summed over critics).
  double critic_update(const std::vector<Transition>& batch, std::mt19937_64& rng) {
    if (batch.empty()) throw StateError("critic_update: empty batch");
    const std::vector<double> y = td_target(batch, rng);
    Matrix sg = obs_goal_matrix(batch);
    Matrix x = hconcat(sg, action_matrix(batch));
    const int b_size = static_cast<int>(batch.size());

    double total_loss = 0.0;
    std::vector<ForwardCache> caches(critics_.size());
    std::vector<Matrix> output_grads(critics_.size());
    for (size_t i = 0; i < critics_.size(); ++i) {
      Matrix q = forward(critics_[i], x, &caches[i]);
      double loss = 0.0;
      Matrix og(b_size, 1);
      for (int b = 0; b < b_size; ++b) {
        const double err = q(b, 0) - y[b];
        loss += err * err;
        og(b, 0) = 2.0 * err;
      }
      loss /= b_size;
      if (!std::isfinite(loss))
        throw NumericError("critic_update: non-finite loss, parameters untouched");
      total_loss += loss;
      output_grads[i] = std::move(og);
      if (i == 0) {
        double qs = 0.0;
        for (int b = 0; b < b_size; ++b) qs += q(b, 0);
        last_q_mean_ = qs / b_size;
      }
    }

    for (size_t i = 0; i < critics_.size(); ++i) {
      auto bw = backward(critics_[i], caches[i], output_grads[i]);
      if (cfg_.optimizer == OptimizerKind::kfac) {
        critic_kfac_[i].refresh_stats(critics_[i], x, rng());
        critic_kfac_[i].step(critics_[i], bw.grads);
      } else {
        adam_step(critics_[i], critic_adam_[i], bw.grads, cfg_.adam_lr);
      }
    }
    critic_update_count_ += 1;
    return total_loss;
  }

  // Ascends Q1(s||g, P(s||g)) through the frozen critic: the loss gradient
  // flows output -> action -> actor parameters.
  double actor_update(const std::vector<Transition>& batch, std::mt19937_64& rng) {
    if (batch.empty()) throw StateError("actor_update: empty batch");
    Matrix sg = obs_goal_matrix(batch);
    const int b_size = static_cast<int>(batch.size());

    ForwardCache actor_cache;
    Matrix a_raw = forward(actor_, sg, &actor_cache);
    Matrix a_env = scale_matrix_to_env(a_raw);
    ForwardCache critic_cache;
    Matrix q = forward(critics_[0], hconcat(sg, a_env), &critic_cache);

    double loss = 0.0;
    for (int b = 0; b < b_size; ++b) loss -= q(b, 0);
    loss /= b_size;
    if (!std::isfinite(loss)) throw NumericError("actor_update: non-finite loss");

    Matrix og(b_size, 1);
    for (double& v : og.data) v = -1.0;  // per-sample d(-q)/dq
    Matrix input_grad = grad_through_input(critics_[0], critic_cache, og);
    const int sg_dim = env_.obs_dim + env_.goal_dim;
    Matrix action_grad(b_size, env_.action_dim);
    for (int b = 0; b < b_size; ++b)
      for (int j = 0; j < env_.action_dim; ++j)
        action_grad(b, j) = input_grad(b, sg_dim + j) * half_range(j);

    auto bw = backward(actor_, actor_cache, action_grad);
    if (cfg_.optimizer == OptimizerKind::kfac) {
      actor_kfac_->refresh_stats(actor_, sg, rng());
      actor_kfac_->step(actor_, bw.grads);
    } else {
      adam_step(actor_, actor_adam_, bw.grads, cfg_.adam_lr);
    }
    actor_update_count_ += 1;
    return loss;
  }

  // One optimizer iteration: always a critic update; the actor and all
  // target networks follow on the delayed schedule (every policy_delay-th
  // critic update for TD3, every step for DDPG).
  StepMetrics train_step(const HerBuffer& buf, std::mt19937_64& rng) {
    if (buf.empty()) throw StateError("train_step: replay buffer is empty");
    auto batch = buf.sample(cfg_.batch_size, rng);
    StepMetrics m;
    m.critic_loss = critic_update(batch, rng);
    m.q_mean = last_q_mean_;
    const bool update_actor =
        cfg_.algorithm == Algorithm::ddpg || critic_update_count_ % cfg_.policy_delay == 0;
    if (update_actor) {
      m.actor_loss = actor_update(batch, rng);
      m.actor_updated = true;
      polyak_update(target_actor_, actor_, cfg_.tau);
      for (size_t i = 0; i < critics_.size(); ++i)
        polyak_update(target_critics_[i], critics_[i], cfg_.tau);
    }
    return m;
  }

  const AgentConfig& config() const { return cfg_; }
  const EnvSpec& env_spec() const { return env_; }
  long critic_update_count() const { return critic_update_count_; }
  long actor_update_count() const { return actor_update_count_; }

  Mlp& actor() { return actor_; }
  const Mlp& actor() const { return actor_; }
  Mlp& target_actor() { return target_actor_; }
  const Mlp& target_actor() const { return target_actor_; }
  std::vector<Mlp>& critics() { return critics_; }
  const std::vector<Mlp>& critics() const { return critics_; }
  std::vector<Mlp>& target_critics() { return target_critics_; }
  const std::vector<Mlp>& target_critics() const { return target_critics_; }

 private:
  std::vector<LayerSpec> hidden_chain(int in_dim) const {
    std::vector<LayerSpec> spec;
    int prev = in_dim;
    for (int h : cfg_.hidden) {
      spec.push_back({prev, h, Activation::relu});
      prev = h;
    }
    return spec;
  }

  void init_optimizers() {
    if (cfg_.optimizer == OptimizerKind::kfac) {
      actor_kfac_.emplace(actor_, cfg_.kfac);
      for (const auto& c : critics_) critic_kfac_.emplace_back(c, cfg_.kfac);
    } else {
      actor_adam_ = AdamState::for_net(actor_);
      for (const auto& c : critics_) critic_adam_.push_back(AdamState::for_net(c));
    }
  }

  double center(int j) const { return 0.5 * (env_.action_low[j] + env_.action_high[j]); }
  double half_range(int j) const { return 0.5 * (env_.action_high[j] - env_.action_low[j]); }
  double scale_to_env(double tanh_out, int j) const { return center(j) + half_range(j) * tanh_out; }

  Matrix scale_matrix_to_env(Matrix a) const {
    for (int b = 0; b < a.rows; ++b)
      for (int j = 0; j < a.cols; ++j) a(b, j) = scale_to_env(a(b, j), j);
    return a;
  }

  void clip_to_bounds(std::vector<double>& a) const {
    for (int j = 0; j < env_.action_dim; ++j)
      a[j] = std::clamp(a[j], env_.action_low[j], env_.action_high[j]);
  }

  Matrix obs_goal_row(const GoalObservation& obs) const {
    if (static_cast<int>(obs.observation.size()) != env_.obs_dim ||
        static_cast<int>(obs.desired_goal.size()) != env_.goal_dim)
      throw ShapeError("select_action: observation dims do not match the environment spec");
    Matrix in(1, env_.obs_dim + env_.goal_dim);
    int k = 0;
    for (double v : obs.observation) in(0, k++) = v;
    for (double v : obs.desired_goal) in(0, k++) = v;
    return in;
  }

  Matrix obs_goal_matrix(const std::vector<Transition>& batch) const {
    return stack(batch, [&](const Transition& t) { return std::pair{&t.state, &t.goal}; });
  }

  Matrix next_obs_goal_matrix(const std::vector<Transition>& batch) const {
    return stack(batch, [&](const Transition& t) { return std::pair{&t.next_state, &t.goal}; });
  }

  template <typename F>
  Matrix stack(const std::vector<Transition>& batch, F&& select) const {
    Matrix out(static_cast<int>(batch.size()), env_.obs_dim + env_.goal_dim);
    for (size_t b = 0; b < batch.size(); ++b) {
      auto [state, goal] = select(batch[b]);
      if (static_cast<int>(state->size()) != env_.obs_dim ||
          static_cast<int>(goal->size()) != env_.goal_dim)
        throw ShapeError("batch transition dims do not match the environment spec");
      int k = 0;
      for (double v : *state) out(static_cast<int>(b), k++) = v;
      for (double v : *goal) out(static_cast<int>(b), k++) = v;
    }
    return out;
  }

  Matrix action_matrix(const std::vector<Transition>& batch) const {
    Matrix out(static_cast<int>(batch.size()), env_.action_dim);
    for (size_t b = 0; b < batch.size(); ++b) {
      if (static_cast<int>(batch[b].action.size()) != env_.action_dim)
        throw ShapeError("batch action dims do not match the environment spec");
      for (int j = 0; j < env_.action_dim; ++j) out(static_cast<int>(b), j) = batch[b].action[j];
    }
    return out;
  }

  static Matrix hconcat(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows) throw ShapeError("hconcat: row mismatch");
    Matrix out(a.rows, a.cols + b.cols);
    for (int r = 0; r < a.rows; ++r) {
      for (int c = 0; c < a.cols; ++c) out(r, c) = a(r, c);
      for (int c = 0; c < b.cols; ++c) out(r, a.cols + c) = b(r, c);
    }
    return out;
  }

  template <typename QFn>
  std::vector<double> assemble_targets(const std::vector<Transition>& batch, QFn&& q) const {
    std::vector<double> y(batch.size());
    // Valid value range for {-1, 0} rewards; unbounded below when gamma = 1.
    const double y_min =
        cfg_.gamma < 1.0 ? -1.0 / (1.0 - cfg_.gamma) : -std::numeric_limits<double>::infinity();
    for (size_t b = 0; b < batch.size(); ++b) {
      const Transition& t = batch[b];
      double v = t.reward;
      if (!t.done) v += cfg_.gamma * q(static_cast<int>(b));
      if (cfg_.clip_targets) v = std::clamp(v, y_min, 0.0);
      y[b] = v;
    }
    return y;
  }

  AgentConfig cfg_;
  EnvSpec env_;
  Mlp actor_, target_actor_;
  std::vector<Mlp> critics_, target_critics_;
  std::optional<KfacOptimizer> actor_kfac_;
  std::vector<KfacOptimizer> critic_kfac_;
  AdamState actor_adam_;
  std::vector<AdamState> critic_adam_;
  long critic_update_count_ = 0;
  long actor_update_count_ = 0;
  double last_q_mean_ = 0.0;
};

}  // namespace tdhk
