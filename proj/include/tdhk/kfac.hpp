#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "tdhk/matrix.hpp"
#include "tdhk/mlp.hpp"

namespace tdhk {

struct KfacConfig {
  double damping = 0.8;          // factored Tikhonov strength (lambda)
  double momentum = 0.8;         // applied to the preconditioned update
  double stat_decay = 0.95;      // running-average rate for the factors
  double learning_rate = 1e-3;
  int inversion_interval = 20;   // steps between factor inversions
  double fisher_noise_std = 1.0; // std of the sampled-loss noise
  double max_update_norm = 10.0; // global Frobenius clip; <= 0 disables

  void validate() const {
    if (damping < 0.0) throw ConfigError("kfac.damping must be >= 0");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("kfac.momentum must be in [0,1)");
    if (stat_decay <= 0.0 || stat_decay >= 1.0)
      throw ConfigError("kfac.stat_decay must be in (0,1)");
    if (learning_rate <= 0.0) throw ConfigError("kfac.learning_rate must be > 0");
    if (inversion_interval < 1) throw ConfigError("kfac.inversion_interval must be >= 1");
    if (fisher_noise_std <= 0.0) throw ConfigError("kfac.fisher_noise_std must be > 0");
  }
};

// Running curvature state for one dense layer: the two Kronecker factors,
// their damped inverses, and the momentum buffer. The layer's Fisher block
// is represented only implicitly as act_factor kron grad_factor.
struct KfacLayerState {
  Matrix act_factor;    // (in+1) x (in+1), running E[a a^T] with bias coord
  Matrix grad_factor;   // out x out, running E[g g^T]
  Matrix inv_act;       // damped inverse of act_factor
  Matrix inv_grad;      // damped inverse of grad_factor
  bool has_inverses = false;
  Matrix momentum_buf;  // out x (in+1)
  long step_count = 0;  // number of factor updates absorbed
  int layer_index = 0;

  static KfacLayerState for_layer(const DenseLayer& layer, int index) {
    KfacLayerState s;
    s.act_factor = Matrix(layer.in_dim() + 1, layer.in_dim() + 1);
    s.grad_factor = Matrix(layer.out_dim(), layer.out_dim());
    s.momentum_buf = Matrix(layer.out_dim(), layer.in_dim() + 1);
    s.layer_index = index;
    return s;
  }
};

// Draws the curvature statistics for one minibatch: runs the net forward,
// samples targets y~ = output + N(0, noise_std^2) per element, and
// backpropagates the gradient of 0.5*||output - y~||^2 (which is just the
// negated noise). This realizes the Fisher/Gauss-Newton expectation under
// the model's own output distribution rather than the data labels.
inline std::vector<LayerStats> sample_fisher_stats(const Mlp& net, const Matrix& input,
                                                   uint64_t noise_seed, double noise_std) {
  ForwardCache cache;
  Matrix output = forward(net, input, &cache);

  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> noise(0.0, noise_std);
  Matrix output_grad(output.rows, output.cols);
  for (double& v : output_grad.data) v = -noise(rng);  // output - y~

  return detail::backward_impl(net, cache, output_grad, /*params=*/false, /*input=*/false).stats;
}

// A-hat <- rho*A-hat + (1-rho)*(a^T a / batch), same for G-hat. Factors
// start at zero; the damping floor keeps early inverses bounded.
inline void update_factors(KfacLayerState& state, const LayerStats& stats, double stat_decay) {
  if (stats.act.cols != state.act_factor.rows || stats.grad.cols != state.grad_factor.rows)
    throw ShapeError("update_factors: stats shape does not match factors at layer " +
                     std::to_string(state.layer_index));
  if (stats.act.rows != stats.grad.rows)
    throw ShapeError("update_factors: act/grad batch mismatch");
  const double inv_batch = 1.0 / static_cast<double>(stats.act.rows);

  Matrix a_moment = matmul_tn(stats.act, stats.act);
  Matrix g_moment = matmul_tn(stats.grad, stats.grad);
  detail::emap(state.act_factor) =
      stat_decay * detail::emap(state.act_factor) + (1.0 - stat_decay) * inv_batch * detail::emap(a_moment);
  detail::emap(state.grad_factor) =
      stat_decay * detail::emap(state.grad_factor) + (1.0 - stat_decay) * inv_batch * detail::emap(g_moment);
  state.step_count += 1;
}

// Factored Tikhonov damping: pi balances the two factors by their average
// eigenvalues so that (A + pi*sqrt(l)*I) kron (G + sqrt(l)/pi*I) still
// inverts factor-wise.
inline void compute_damped_inverses(KfacLayerState& state, double damping) {
  if (state.step_count < 1)
    throw StateError("compute_damped_inverses: factors not populated at layer " +
                     std::to_string(state.layer_index));
  const double tr_a = [&] {
    double t = 0.0;
    for (int i = 0; i < state.act_factor.rows; ++i) t += state.act_factor(i, i);
    return t;
  }();
  const double tr_g = [&] {
    double t = 0.0;
    for (int i = 0; i < state.grad_factor.rows; ++i) t += state.grad_factor(i, i);
    return t;
  }();
  const double mean_a = tr_a / state.act_factor.rows;
  const double mean_g = tr_g / state.grad_factor.rows;
  double pi = 1.0;
  if (tr_a > 1e-12 && tr_g > 1e-12) pi = std::sqrt(mean_a / mean_g);

  const double sqrt_damping = std::sqrt(damping);
  try {
    state.inv_act = sym_inverse(state.act_factor, pi * sqrt_damping);
    state.inv_grad = sym_inverse(state.grad_factor, sqrt_damping / pi);
  } catch (const CurvatureError& e) {
    throw CurvatureError(std::string(e.what()) + " (layer " + std::to_string(state.layer_index) + ")",
                         state.layer_index);
  }
  state.has_inverses = true;
}

// Natural-gradient direction for one layer under the column-stacking vec
// convention: inv_grad * grad * inv_act == unvec((A kron G)^-1 vec(grad)).
inline Matrix precondition(const KfacLayerState& state, const Matrix& grad_wbar) {
  if (!state.has_inverses)
    throw StateError("precondition: inverses not computed at layer " +
                     std::to_string(state.layer_index));
  if (grad_wbar.rows != state.grad_factor.rows || grad_wbar.cols != state.act_factor.rows)
    throw ShapeError("precondition: gradient is " + detail::shape_str(grad_wbar) + ", expected " +
                     std::to_string(state.grad_factor.rows) + "x" +
                     std::to_string(state.act_factor.rows));
  return matmul(matmul(state.inv_grad, grad_wbar), state.inv_act);
}

// One preconditioned, momentum-accumulated, norm-clipped descent step over
// every layer. Non-finite gradients abort before any parameter changes.
inline void apply_step(Mlp& net, std::vector<KfacLayerState>& states,
                       const std::vector<ParamGrad>& grads, const KfacConfig& cfg) {
  const size_t n = net.layers.size();
  if (states.size() != n || grads.size() != n)
    throw ShapeError("apply_step: expected one state and gradient per layer");
  for (const auto& g : grads)
    if (!is_finite(g.wbar)) throw NumericError("apply_step: non-finite gradient, step aborted");

  std::vector<Matrix> updates(n);
  double total_sq = 0.0;
  for (size_t l = 0; l < n; ++l) {
    Matrix direction = precondition(states[l], grads[l].wbar);
    detail::emap(states[l].momentum_buf) =
        cfg.momentum * detail::emap(states[l].momentum_buf) + detail::emap(direction);
    updates[l] = states[l].momentum_buf;
    detail::emap(updates[l]) *= cfg.learning_rate;
    for (double v : updates[l].data) total_sq += v * v;
  }
  const double total_norm = std::sqrt(total_sq);
  if (cfg.max_update_norm > 0.0 && total_norm > cfg.max_update_norm) {
    const double scale = cfg.max_update_norm / total_norm;
    for (auto& u : updates) detail::emap(u) *= scale;
  }

  for (size_t l = 0; l < n; ++l) {
    DenseLayer& layer = net.layers[l];
    const Matrix& u = updates[l];
    const int in = layer.in_dim();
    for (int r = 0; r < layer.out_dim(); ++r) {
      for (int c = 0; c < in; ++c) layer.weight(r, c) -= u(r, c);
      layer.bias[r] -= u(r, in);
    }
  }
  if (!params_finite(net)) throw NumericError("apply_step: parameters non-finite after update");
}

// Ties the pieces together for one network: refresh statistics on the
// minibatch, invert on schedule, precondition and step.
class KfacOptimizer {
 public:
  KfacOptimizer(const Mlp& net, KfacConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    states_.reserve(net.layers.size());
    for (size_t l = 0; l < net.layers.size(); ++l)
      states_.push_back(KfacLayerState::for_layer(net.layers[l], static_cast<int>(l)));
  }

  // Absorbs one minibatch of sampled-loss statistics into the factors.
  void refresh_stats(const Mlp& net, const Matrix& input, uint64_t noise_seed) {
    auto stats = sample_fisher_stats(net, input, noise_seed, cfg_.fisher_noise_std);
    for (size_t l = 0; l < states_.size(); ++l)
      update_factors(states_[l], stats[l], cfg_.stat_decay);
  }

  void step(Mlp& net, const std::vector<ParamGrad>& grads) {
    if (steps_applied_ % cfg_.inversion_interval == 0 || !states_.front().has_inverses)
      for (auto& s : states_) compute_damped_inverses(s, cfg_.damping);
    apply_step(net, states_, grads, cfg_);
    steps_applied_ += 1;
  }

  const KfacConfig& config() const { return cfg_; }
  std::vector<KfacLayerState>& states() { return states_; }
  const std::vector<KfacLayerState>& states() const { return states_; }

 private:
  KfacConfig cfg_;
  std::vector<KfacLayerState> states_;
  long steps_applied_ = 0;
};

// ---------------------------------------------------------------------------
// Adam baseline (the optimizer vanilla HER setups use), operating on the same
// combined weight-and-bias gradients as the K-FAC path.

struct AdamState {
  std::vector<Matrix> m;  // first moments, out x (in+1) per layer
  std::vector<Matrix> v;  // second moments
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_net(const Mlp& net) {
    AdamState s;
    for (const auto& l : net.layers) {
      s.m.emplace_back(l.out_dim(), l.in_dim() + 1);
      s.v.emplace_back(l.out_dim(), l.in_dim() + 1);
    }
    return s;
  }
};

inline void adam_step(Mlp& net, AdamState& state, const std::vector<ParamGrad>& grads, double lr) {
  const size_t n = net.layers.size();
  if (state.m.size() != n || grads.size() != n)
    throw ShapeError("adam_step: expected one moment buffer and gradient per layer");
  for (const auto& g : grads)
    if (!is_finite(g.wbar)) throw NumericError("adam_step: non-finite gradient, step aborted");

  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t l = 0; l < n; ++l) {
    DenseLayer& layer = net.layers[l];
    Matrix& m = state.m[l];
    Matrix& v = state.v[l];
    const Matrix& g = grads[l].wbar;
    if (g.rows != m.rows || g.cols != m.cols)
      throw ShapeError("adam_step: gradient shape mismatch at layer " + std::to_string(l));
    const int in = layer.in_dim();
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c) {
        double& mi = m(r, c);
        double& vi = v(r, c);
        const double gi = g(r, c);
        mi = state.beta1 * mi + (1.0 - state.beta1) * gi;
        vi = state.beta2 * vi + (1.0 - state.beta2) * gi * gi;
        const double update = lr * (mi / bc1) / (std::sqrt(vi / bc2) + state.eps);
        if (c < in)
          layer.weight(r, c) -= update;
        else
          layer.bias[r] -= update;
      }
  }
  if (!params_finite(net)) throw NumericError("adam_step: parameters non-finite after update");
}

}  // namespace tdhk
