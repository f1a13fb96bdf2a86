#pragma once

#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <vector>

#include "tdhk/env.hpp"
#include "tdhk/errors.hpp"

namespace tdhk {

struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  std::vector<double> next_state;
  std::vector<double> goal;
  std::vector<double> achieved_goal;
  std::vector<double> next_achieved_goal;
  double reward = -1.0;
  bool done = false;
};

struct Episode {
  std::vector<Transition> steps;
};

enum class RelabelStrategy {
  final,    // terminal achieved goal
  future,   // achieved goal of a uniformly chosen later step
  episode,  // achieved goal of any step of the same episode
  random,   // achieved goal of any stored transition
  none,     // hindsight disabled (vanilla replay)
};

enum class RelabelMode {
  insert,  // synthetic goal-rewritten episodes stored alongside the real one
  sample,  // goals rewritten on the fly when minibatches are drawn
};

inline RelabelStrategy parse_strategy(const std::string& s) {
  if (s == "final") return RelabelStrategy::final;
  if (s == "future") return RelabelStrategy::future;
  if (s == "episode") return RelabelStrategy::episode;
  if (s == "random") return RelabelStrategy::random;
  if (s == "none") return RelabelStrategy::none;
  throw ConfigError("unknown relabel strategy '" + s + "'");
}

inline RelabelMode parse_relabel_mode(const std::string& s) {
  if (s == "insert") return RelabelMode::insert;
  if (s == "sample") return RelabelMode::sample;
  throw ConfigError("unknown relabel mode '" + s + "'");
}

struct ReplayConfig {
  int capacity = 2000;  // episodes
  RelabelStrategy strategy = RelabelStrategy::future;
  RelabelMode relabel_mode = RelabelMode::sample;
  int future_k = 4;

  void validate() const {
    if (capacity < 1) throw ConfigError("replay.capacity must be >= 1");
    if (future_k < 1) throw ConfigError("replay.future_k must be >= 1");
    if (relabel_mode == RelabelMode::insert && strategy != RelabelStrategy::final &&
        strategy != RelabelStrategy::none)
      throw ConfigError("replay: insert mode supports only the final strategy (or none)");
  }
};

// Episodic FIFO replay buffer with hindsight goal relabeling. Single writer,
// single reader, externally serialized.
class HerBuffer {
 public:
  HerBuffer(ReplayConfig cfg, double success_tol) : cfg_(cfg), tol_(success_tol) {
    cfg_.validate();
  }

  // Stores the episode; in insert mode with strategy final an additional
  // synthetic copy is stored whose goal is the terminal achieved goal, with
  // rewards recomputed. Oldest episodes are evicted at capacity.
  void store_episode(const Episode& ep) {
    validate_episode(ep);
    push(ep);
    if (cfg_.relabel_mode == RelabelMode::insert && cfg_.strategy == RelabelStrategy::final) {
      Episode synthetic = ep;
      const auto& terminal = ep.steps.back().next_achieved_goal;
      for (Transition& t : synthetic.steps) {
        t.goal = terminal;
        t.reward = compute_reward(t.next_achieved_goal, t.goal, tol_);
      }
      push(synthetic);
    }
  }

  // Uniform episode+timestep sampling. In sample mode each drawn transition
  // is relabeled with probability 1 - 1/(1 + future_k); the replacement goal
  // is an achieved goal picked per the strategy and the reward is recomputed.
  // Done flags are horizon markers and stay untouched.
  std::vector<Transition> sample(int batch_size, std::mt19937_64& rng) const {
    if (episodes_.empty()) throw StateError("sample: replay buffer is empty");
    if (batch_size < 1) throw ConfigError("sample: batch_size must be >= 1");

    std::uniform_int_distribution<size_t> ep_dist(0, episodes_.size() - 1);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    const double relabel_prob = 1.0 - 1.0 / (1.0 + static_cast<double>(cfg_.future_k));
    const bool relabel = cfg_.relabel_mode == RelabelMode::sample &&
                         cfg_.strategy != RelabelStrategy::none;

    std::vector<Transition> batch;
    batch.reserve(batch_size);
    for (int i = 0; i < batch_size; ++i) {
      const Episode& ep = episodes_[ep_dist(rng)];
      std::uniform_int_distribution<size_t> t_dist(0, ep.steps.size() - 1);
      const size_t t = t_dist(rng);
      Transition tr = ep.steps[t];
      if (relabel && coin(rng) < relabel_prob) {
        tr.goal = pick_goal(ep, t, rng);
        tr.reward = compute_reward(tr.next_achieved_goal, tr.goal, tol_);
      }
      batch.push_back(std::move(tr));
    }
    return batch;
  }

  std::vector<Transition> sample(int batch_size, uint64_t rng_seed) const {
    std::mt19937_64 rng(rng_seed);
    return sample(batch_size, rng);
  }

  size_t size() const { return episodes_.size(); }
  bool empty() const { return episodes_.empty(); }
  const ReplayConfig& config() const { return cfg_; }
  const Episode& episode(size_t i) const { return episodes_[i]; }

 private:
  void push(const Episode& ep) {
    episodes_.push_back(ep);
    while (episodes_.size() > static_cast<size_t>(cfg_.capacity)) episodes_.pop_front();
  }

  void validate_episode(const Episode& ep) const {
    if (ep.steps.empty()) throw ValidationError("store_episode: empty episode");
    for (size_t k = 0; k < ep.steps.size(); ++k) {
      const Transition& t = ep.steps[k];
      if (t.reward != 0.0 && t.reward != -1.0)
        throw ValidationError("store_episode: reward outside {-1, 0} at step " + std::to_string(k));
      if (t.reward != compute_reward(t.next_achieved_goal, t.goal, tol_))
        throw ValidationError("store_episode: reward inconsistent with goals at step " +
                              std::to_string(k));
      if (k + 1 < ep.steps.size()) {
        if (t.next_state != ep.steps[k + 1].state)
          throw ValidationError("store_episode: broken state chain at step " + std::to_string(k));
        if (t.next_achieved_goal != ep.steps[k + 1].achieved_goal)
          throw ValidationError("store_episode: broken achieved-goal chain at step " +
                                std::to_string(k));
      }
    }
  }

  std::vector<double> pick_goal(const Episode& ep, size_t t, std::mt19937_64& rng) const {
    switch (cfg_.strategy) {
      case RelabelStrategy::final:
        return ep.steps.back().next_achieved_goal;
      case RelabelStrategy::future: {
        std::uniform_int_distribution<size_t> dist(t, ep.steps.size() - 1);
        return ep.steps[dist(rng)].next_achieved_goal;
      }
      case RelabelStrategy::episode: {
        std::uniform_int_distribution<size_t> dist(0, ep.steps.size() - 1);
        return ep.steps[dist(rng)].next_achieved_goal;
      }
      case RelabelStrategy::random: {
        std::uniform_int_distribution<size_t> ep_dist(0, episodes_.size() - 1);
        const Episode& other = episodes_[ep_dist(rng)];
        std::uniform_int_distribution<size_t> t_dist(0, other.steps.size() - 1);
        return other.steps[t_dist(rng)].next_achieved_goal;
      }
      case RelabelStrategy::none:
        break;
    }
    throw StateError("pick_goal: no relabel strategy");
  }

  ReplayConfig cfg_;
  double tol_;
  std::deque<Episode> episodes_;
};

}  // namespace tdhk
