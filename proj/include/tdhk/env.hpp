#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tdhk/errors.hpp"

namespace tdhk {

struct GoalObservation {
  std::vector<double> observation;
  std::vector<double> achieved_goal;
  std::vector<double> desired_goal;
};

struct EnvSpec {
  int obs_dim = 0;
  int goal_dim = 0;
  int action_dim = 0;
  std::vector<double> action_low;   // per dim
  std::vector<double> action_high;  // per dim
  int horizon = 0;                  // T
  double success_tol = 0.0;         // epsilon
};

struct StepResult {
  GoalObservation obs;
  double reward = -1.0;
  bool done = false;
  bool is_success = false;
};

// Sparse binary reward: 0 inside the tolerance ball (strict inequality),
// -1 outside. Pure function of its arguments; this purity is what makes
// hindsight relabeling of stored transitions valid.
inline double compute_reward(std::span<const double> achieved, std::span<const double> desired,
                             double tol) {
  if (achieved.size() != desired.size())
    throw ShapeError("compute_reward: goal dims differ (" + std::to_string(achieved.size()) +
                     " vs " + std::to_string(desired.size()) + ")");
  double sq = 0.0;
  for (size_t i = 0; i < achieved.size(); ++i) {
    const double d = achieved[i] - desired[i];
    sq += d * d;
  }
  return std::sqrt(sq) < tol ? 0.0 : -1.0;
}

// Goal-conditioned episodic environment. Deterministic dynamics; all
// randomness enters through the reset seed. Instances are single-threaded.
class GoalEnv {
 public:
  virtual ~GoalEnv() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual const char* name() const = 0;
  virtual GoalObservation reset(uint64_t seed) = 0;
  virtual StepResult step(std::span<const double> action) = 0;
};

namespace detail {

inline std::vector<double> clip_action(std::span<const double> action, const EnvSpec& spec) {
  if (static_cast<int>(action.size()) != spec.action_dim)
    throw ShapeError("step: action has " + std::to_string(action.size()) + " dims, expected " +
                     std::to_string(spec.action_dim));
  std::vector<double> a(action.begin(), action.end());
  for (int i = 0; i < spec.action_dim; ++i)
    a[i] = std::clamp(a[i], spec.action_low[i], spec.action_high[i]);
  return a;
}

}  // namespace detail

// n-dimensional point mass: x <- clip(x + 0.1 * clip(a, -1, 1)). The goal is
// a position sampled outside the success ball of the start position.
class PointReachEnv final : public GoalEnv {
 public:
  explicit PointReachEnv(int n) {
    if (n < 1) throw ConfigError("point_reach: n must be >= 1");
    spec_.obs_dim = n;
    spec_.goal_dim = n;
    spec_.action_dim = n;
    spec_.action_low.assign(n, -1.0);
    spec_.action_high.assign(n, 1.0);
    spec_.horizon = 50;
    spec_.success_tol = 0.05;
  }

  const EnvSpec& spec() const override { return spec_; }
  const char* name() const override { return "point_reach"; }

  GoalObservation reset(uint64_t seed) override {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    pos_.resize(spec_.goal_dim);
    goal_.resize(spec_.goal_dim);
    for (double& v : pos_) v = unit(rng);
    do {
      for (double& v : goal_) v = unit(rng);
    } while (distance(pos_, goal_) < 2.0 * spec_.success_tol);
    t_ = 0;
    done_ = false;
    return observe();
  }

  StepResult step(std::span<const double> action) override {
    if (done_) throw StateError("point_reach: step after episode end");
    const auto a = detail::clip_action(action, spec_);
    for (int i = 0; i < spec_.goal_dim; ++i)
      pos_[i] = std::clamp(pos_[i] + kDt * a[i], -kBound, kBound);
    t_ += 1;
    StepResult res;
    res.obs = observe();
    res.reward = compute_reward(pos_, goal_, spec_.success_tol);
    res.is_success = res.reward == 0.0;
    res.done = t_ >= spec_.horizon;
    done_ = res.done;
    return res;
  }

  static constexpr double kDt = 0.1;
  static constexpr double kBound = 1.5;

 private:
  GoalObservation observe() const { return {pos_, pos_, goal_}; }

  static double distance(const std::vector<double>& a, const std::vector<double>& b) {
    double sq = 0.0;
    for (size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(sq);
  }

  EnvSpec spec_;
  std::vector<double> pos_, goal_;
  int t_ = 0;
  bool done_ = false;
};

// 2-D agent must first reach an axis-aligned square box and then shove it to
// a target spot. The box slides along the axis of least penetration when the
// agent walks into it; it never rotates. Two-phase credit structure: failed
// episodes split into "never reached the box" and "pushed it the wrong way".
class PushBoxEnv final : public GoalEnv {
 public:
  PushBoxEnv() {
    spec_.obs_dim = 6;  // agent (2), box (2), box - agent (2)
    spec_.goal_dim = 2;
    spec_.action_dim = 2;
    spec_.action_low.assign(2, -1.0);
    spec_.action_high.assign(2, 1.0);
    spec_.horizon = 60;
    spec_.success_tol = 0.05;
  }

  const EnvSpec& spec() const override { return spec_; }
  const char* name() const override { return "push_box"; }

  GoalObservation reset(uint64_t seed) override {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> agent_dist(-1.0, 1.0);
    std::uniform_real_distribution<double> box_dist(-0.6, 0.6);
    std::uniform_real_distribution<double> goal_dist(-0.8, 0.8);
    do {
      agent_ = {agent_dist(rng), agent_dist(rng)};
      box_ = {box_dist(rng), box_dist(rng)};
    } while (inside_box(agent_));
    do {
      goal_ = {goal_dist(rng), goal_dist(rng)};
    } while (distance(box_, goal_) < 0.2);
    t_ = 0;
    done_ = false;
    return observe();
  }

  StepResult step(std::span<const double> action) override {
    if (done_) throw StateError("push_box: step after episode end");
    const auto a = detail::clip_action(action, spec_);
    agent_[0] = std::clamp(agent_[0] + kDt * a[0], -kBound, kBound);
    agent_[1] = std::clamp(agent_[1] + kDt * a[1], -kBound, kBound);
    if (inside_box(agent_)) {
      // Resolve the overlap by sliding the box along the axis the agent
      // penetrated least, away from the agent.
      const double dx = agent_[0] - box_[0];
      const double dy = agent_[1] - box_[1];
      const double pen_x = kBoxHalf - std::abs(dx);
      const double pen_y = kBoxHalf - std::abs(dy);
      if (pen_x <= pen_y)
        box_[0] = std::clamp(box_[0] + (dx > 0 ? -pen_x : pen_x), -kBound, kBound);
      else
        box_[1] = std::clamp(box_[1] + (dy > 0 ? -pen_y : pen_y), -kBound, kBound);
    }
    t_ += 1;
    StepResult res;
    res.obs = observe();
    res.reward = compute_reward(box_, goal_, spec_.success_tol);
    res.is_success = res.reward == 0.0;
    res.done = t_ >= spec_.horizon;
    done_ = res.done;
    return res;
  }

  static constexpr double kDt = 0.1;
  static constexpr double kBound = 1.2;
  static constexpr double kBoxHalf = 0.1;

 private:
  bool inside_box(const std::array<double, 2>& p) const {
    return std::abs(p[0] - box_[0]) < kBoxHalf && std::abs(p[1] - box_[1]) < kBoxHalf;
  }

  static double distance(const std::array<double, 2>& a, const std::array<double, 2>& b) {
    return std::hypot(a[0] - b[0], a[1] - b[1]);
  }

  GoalObservation observe() const {
    GoalObservation o;
    o.observation = {agent_[0], agent_[1], box_[0], box_[1], box_[0] - agent_[0],
                     box_[1] - agent_[1]};
    o.achieved_goal = {box_[0], box_[1]};
    o.desired_goal = {goal_[0], goal_[1]};
    return o;
  }

  EnvSpec spec_;
  std::array<double, 2> agent_{}, box_{}, goal_{};
  int t_ = 0;
  bool done_ = false;
};

// Classic HER sanity task: n bits, the argmax coordinate of a continuous
// action picks the bit to flip, the goal is a target bit string.
class BitFlipEnv final : public GoalEnv {
 public:
  explicit BitFlipEnv(int n) {
    if (n < 1) throw ConfigError("bit_flip: n must be >= 1");
    spec_.obs_dim = n;
    spec_.goal_dim = n;
    spec_.action_dim = n;
    spec_.action_low.assign(n, -1.0);
    spec_.action_high.assign(n, 1.0);
    spec_.horizon = n;
    spec_.success_tol = 0.5;  // bit strings match exactly iff distance < 0.5
  }

  const EnvSpec& spec() const override { return spec_; }
  const char* name() const override { return "bit_flip"; }

  GoalObservation reset(uint64_t seed) override {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    bits_.resize(spec_.goal_dim);
    goal_.resize(spec_.goal_dim);
    for (double& b : bits_) b = coin(rng) ? 1.0 : 0.0;
    do {
      for (double& g : goal_) g = coin(rng) ? 1.0 : 0.0;
    } while (goal_ == bits_);
    t_ = 0;
    done_ = false;
    return observe();
  }

  StepResult step(std::span<const double> action) override {
    if (done_) throw StateError("bit_flip: step after episode end");
    const auto a = detail::clip_action(action, spec_);
    const int idx = static_cast<int>(std::max_element(a.begin(), a.end()) - a.begin());
    bits_[idx] = 1.0 - bits_[idx];
    t_ += 1;
    StepResult res;
    res.obs = observe();
    res.reward = compute_reward(bits_, goal_, spec_.success_tol);
    res.is_success = res.reward == 0.0;
    res.done = t_ >= spec_.horizon;
    done_ = res.done;
    return res;
  }

 private:
  GoalObservation observe() const { return {bits_, bits_, goal_}; }

  EnvSpec spec_;
  std::vector<double> bits_, goal_;
  int t_ = 0;
  bool done_ = false;
};

inline std::unique_ptr<GoalEnv> make_env(const std::string& name, int n = 8) {
  if (name == "point_reach") return std::make_unique<PointReachEnv>(n);
  if (name == "push_box") return std::make_unique<PushBoxEnv>();
  if (name == "bit_flip") return std::make_unique<BitFlipEnv>(n);
  throw ConfigError("unknown environment '" + name +
                    "' (expected point_reach, push_box or bit_flip)");
}

}  // namespace tdhk
