#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "tdhk/agent.hpp"

namespace tdhk {

// Checkpoint layout, all integers and floats little-endian:
//   magic "TDHK", format version u16,
//   algorithm u8, optimizer u8,
//   agent scalars (gamma, tau, explore/target noise, clip, delay, batch,
//   clip_targets, random_action_prob, adam_lr),
//   environment spec snapshot (dims, bounds, horizon, tolerance),
//   manifest: per network its name, layer dims and activation ids,
//   parameter arrays as f64 in layer order, weights before biases.
// Optimizer state is excluded: resuming restarts curvature/moment statistics.
inline constexpr char kCheckpointMagic[4] = {'T', 'D', 'H', 'K'};
inline constexpr uint16_t kCheckpointVersion = 1;

namespace detail {

class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(uint16_t v) {
    for (int i = 0; i < 2; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }
  void str(const std::string& s) {
    u16(static_cast<uint16_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  const std::vector<char>& bytes() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> bytes) : buf_(std::move(bytes)) {}

  uint8_t u8() {
    need(1);
    return static_cast<uint8_t>(buf_[pos_++]);
  }
  uint16_t u16() {
    need(2);
    uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<uint16_t>(static_cast<uint8_t>(buf_[pos_++])) << (8 * i);
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf_[pos_++])) << (8 * i);
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(buf_[pos_++])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const uint16_t n = u16();
    need(n);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  size_t position() const { return pos_; }
  bool exhausted() const { return pos_ == buf_.size(); }

 private:
  void need(size_t n) {
    if (pos_ + n > buf_.size())
      throw CheckpointError("checkpoint truncated", static_cast<long long>(pos_));
  }
  std::vector<char> buf_;
  size_t pos_ = 0;
};

inline void write_net(ByteWriter& w, const std::string& name, const Mlp& net) {
  w.str(name);
  w.u32(static_cast<uint32_t>(net.layers.size()));
  for (const auto& l : net.layers) {
    w.u32(static_cast<uint32_t>(l.in_dim()));
    w.u32(static_cast<uint32_t>(l.out_dim()));
    w.u8(static_cast<uint8_t>(l.activation));
  }
}

inline void write_params(ByteWriter& w, const Mlp& net) {
  for (const auto& l : net.layers) {
    for (double v : l.weight.data) w.f64(v);
    for (double v : l.bias) w.f64(v);
  }
}

inline Mlp read_net_manifest(ByteReader& r, std::string& name) {
  name = r.str();
  const uint32_t n_layers = r.u32();
  if (n_layers == 0 || n_layers > 1024)
    throw CheckpointError("checkpoint manifest: implausible layer count " + std::to_string(n_layers),
                          static_cast<long long>(r.position()));
  Mlp net;
  for (uint32_t l = 0; l < n_layers; ++l) {
    const uint32_t in = r.u32();
    const uint32_t out = r.u32();
    const uint8_t act = r.u8();
    if (in == 0 || out == 0 || act > 2)
      throw CheckpointError("checkpoint manifest: bad layer entry",
                            static_cast<long long>(r.position()));
    DenseLayer layer;
    layer.activation = static_cast<Activation>(act);
    layer.weight = Matrix(static_cast<int>(out), static_cast<int>(in));
    layer.bias.assign(out, 0.0);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

inline void read_params(ByteReader& r, Mlp& net) {
  for (auto& l : net.layers) {
    for (double& v : l.weight.data) v = r.f64();
    for (double& v : l.bias) v = r.f64();
  }
}

}  // namespace detail

inline void save_checkpoint(const Agent& agent, const std::string& path) {
  detail::ByteWriter w;
  for (char c : kCheckpointMagic) w.u8(static_cast<uint8_t>(c));
  w.u16(kCheckpointVersion);

  const AgentConfig& cfg = agent.config();
  w.u8(static_cast<uint8_t>(cfg.algorithm));
  w.u8(static_cast<uint8_t>(cfg.optimizer));
  w.f64(cfg.gamma);
  w.f64(cfg.tau);
  w.f64(cfg.explore_noise_std);
  w.f64(cfg.target_noise_std);
  w.f64(cfg.target_noise_clip);
  w.u32(static_cast<uint32_t>(cfg.policy_delay));
  w.u32(static_cast<uint32_t>(cfg.batch_size));
  w.u8(cfg.clip_targets ? 1 : 0);
  w.f64(cfg.random_action_prob);
  w.f64(cfg.adam_lr);

  const EnvSpec& env = agent.env_spec();
  w.u32(static_cast<uint32_t>(env.obs_dim));
  w.u32(static_cast<uint32_t>(env.goal_dim));
  w.u32(static_cast<uint32_t>(env.action_dim));
  w.u32(static_cast<uint32_t>(env.horizon));
  w.f64(env.success_tol);
  for (double v : env.action_low) w.f64(v);
  for (double v : env.action_high) w.f64(v);

  std::vector<std::pair<std::string, const Mlp*>> nets;
  nets.emplace_back("actor", &agent.actor());
  nets.emplace_back("target_actor", &agent.target_actor());
  for (size_t i = 0; i < agent.critics().size(); ++i)
    nets.emplace_back("critic" + std::to_string(i + 1), &agent.critics()[i]);
  for (size_t i = 0; i < agent.target_critics().size(); ++i)
    nets.emplace_back("target_critic" + std::to_string(i + 1), &agent.target_critics()[i]);

  w.u32(static_cast<uint32_t>(nets.size()));
  for (const auto& [name, net] : nets) detail::write_net(w, name, *net);
  for (const auto& [name, net] : nets) detail::write_params(w, *net);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open '" + path + "' for writing");
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw CheckpointError("short write to '" + path + "'");
}

inline Agent load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  detail::ByteReader r(std::move(bytes));

  for (int i = 0; i < 4; ++i)
    if (static_cast<char>(r.u8()) != kCheckpointMagic[i])
      throw CheckpointError("bad checkpoint magic", static_cast<long long>(i));
  const uint16_t version = r.u16();
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version), 4);

  AgentConfig cfg;
  const uint8_t algorithm = r.u8();
  const uint8_t optimizer = r.u8();
  if (algorithm > 1 || optimizer > 1)
    throw CheckpointError("bad algorithm/optimizer id", static_cast<long long>(r.position()));
  cfg.algorithm = static_cast<Algorithm>(algorithm);
  cfg.optimizer = static_cast<OptimizerKind>(optimizer);
  cfg.gamma = r.f64();
  cfg.tau = r.f64();
  cfg.explore_noise_std = r.f64();
  cfg.target_noise_std = r.f64();
  cfg.target_noise_clip = r.f64();
  cfg.policy_delay = static_cast<int>(r.u32());
  cfg.batch_size = static_cast<int>(r.u32());
  cfg.clip_targets = r.u8() != 0;
  cfg.random_action_prob = r.f64();
  cfg.adam_lr = r.f64();

  EnvSpec env;
  env.obs_dim = static_cast<int>(r.u32());
  env.goal_dim = static_cast<int>(r.u32());
  env.action_dim = static_cast<int>(r.u32());
  env.horizon = static_cast<int>(r.u32());
  env.success_tol = r.f64();
  env.action_low.resize(env.action_dim);
  env.action_high.resize(env.action_dim);
  for (double& v : env.action_low) v = r.f64();
  for (double& v : env.action_high) v = r.f64();

  const uint32_t n_nets = r.u32();
  const uint32_t expected = cfg.algorithm == Algorithm::td3 ? 6 : 4;
  if (n_nets != expected)
    throw CheckpointError("checkpoint holds " + std::to_string(n_nets) + " networks, expected " +
                              std::to_string(expected),
                          static_cast<long long>(r.position()));

  std::vector<std::string> names(n_nets);
  std::vector<Mlp> nets(n_nets);
  for (uint32_t i = 0; i < n_nets; ++i) nets[i] = detail::read_net_manifest(r, names[i]);
  for (uint32_t i = 0; i < n_nets; ++i) detail::read_params(r, nets[i]);
  if (!r.exhausted())
    throw CheckpointError("trailing bytes after parameters", static_cast<long long>(r.position()));

  // Recover the hidden sizes from the actor manifest so the rebuilt agent
  // matches exactly.
  cfg.hidden.clear();
  for (size_t l = 0; l + 1 < nets[0].layers.size(); ++l)
    cfg.hidden.push_back(nets[0].layers[l].out_dim());

  Agent agent(env, cfg, /*seed=*/0);
  agent.actor() = std::move(nets[0]);
  agent.target_actor() = std::move(nets[1]);
  const size_t n_critics = cfg.algorithm == Algorithm::td3 ? 2 : 1;
  for (size_t i = 0; i < n_critics; ++i) agent.critics()[i] = std::move(nets[2 + i]);
  for (size_t i = 0; i < n_critics; ++i)
    agent.target_critics()[i] = std::move(nets[2 + n_critics + i]);
  return agent;
}

}  // namespace tdhk
