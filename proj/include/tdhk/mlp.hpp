#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tdhk/matrix.hpp"

namespace tdhk {

enum class Activation : uint8_t { relu = 0, tanh = 1, identity = 2 };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    default: return "identity";
  }
}

struct LayerSpec {
  int in_dim = 0;
  int out_dim = 0;
  Activation activation = Activation::identity;
};

struct DenseLayer {
  Matrix weight;             // out_dim x in_dim
  std::vector<double> bias;  // out_dim
  Activation activation = Activation::identity;

  int in_dim() const { return weight.cols; }
  int out_dim() const { return weight.rows; }
};

// Small dense multilayer perceptron. Forward/backward are pure given the
// parameters; mutation (optimizer steps, polyak sync) must be serialized
// externally.
struct Mlp {
  std::vector<DenseLayer> layers;

  int input_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
  int output_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }

  std::vector<LayerSpec> spec() const {
    std::vector<LayerSpec> s;
    s.reserve(layers.size());
    for (const auto& l : layers) s.push_back({l.in_dim(), l.out_dim(), l.activation});
    return s;
  }
};

// Per-layer values captured on the forward pass. act_in carries the layer
// input with an appended constant-1 coordinate so bias and weights share one
// Kronecker block downstream.
struct ForwardCache {
  std::vector<Matrix> act_in;  // batch x (in_dim + 1)
  std::vector<Matrix> preact;  // batch x out_dim
  int batch = 0;
};

// Statistics feeding the Kronecker factors: layer inputs (with the bias
// coordinate) and per-sample pre-activation gradients, both unscaled by the
// batch size.
struct LayerStats {
  Matrix act;   // batch x (in + 1)
  Matrix grad;  // batch x out
};

// Gradient of one layer's parameters in combined form: out x (in + 1), the
// last column being the bias gradient. Averaged over the batch.
struct ParamGrad {
  Matrix wbar;

  Matrix weight_part() const {
    Matrix w(wbar.rows, wbar.cols - 1);
    for (int r = 0; r < w.rows; ++r)
      for (int c = 0; c < w.cols; ++c) w(r, c) = wbar(r, c);
    return w;
  }

  std::vector<double> bias_part() const {
    std::vector<double> b(wbar.rows);
    for (int r = 0; r < wbar.rows; ++r) b[r] = wbar(r, wbar.cols - 1);
    return b;
  }
};

struct BackwardResult {
  std::vector<ParamGrad> grads;
  std::vector<LayerStats> stats;
  Matrix input_grad;  // filled only when requested
};

inline Mlp init_mlp(const std::vector<LayerSpec>& spec, uint64_t seed) {
  if (spec.empty()) throw ShapeError("init_mlp: empty layer spec");
  for (size_t i = 0; i + 1 < spec.size(); ++i)
    if (spec[i].out_dim != spec[i + 1].in_dim)
      throw ShapeError("init_mlp: layer " + std::to_string(i) + " out_dim " +
                       std::to_string(spec[i].out_dim) + " does not chain into layer " +
                       std::to_string(i + 1) + " in_dim " + std::to_string(spec[i + 1].in_dim));

  std::mt19937_64 rng(seed);
  Mlp net;
  net.layers.reserve(spec.size());
  for (const auto& ls : spec) {
    if (ls.in_dim <= 0 || ls.out_dim <= 0) throw ShapeError("init_mlp: non-positive layer dim");
    DenseLayer layer;
    layer.activation = ls.activation;
    layer.weight = Matrix(ls.out_dim, ls.in_dim);
    const double bound = 1.0 / std::sqrt(static_cast<double>(ls.in_dim));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& w : layer.weight.data) w = dist(rng);
    layer.bias.assign(ls.out_dim, 0.0);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

namespace detail {

inline void apply_activation(Matrix& m, Activation a) {
  switch (a) {
    case Activation::relu:
      for (double& v : m.data) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::tanh:
      for (double& v : m.data) v = std::tanh(v);
      break;
    case Activation::identity:
      break;
  }
}

// delta <- delta .* act'(preact), evaluated from the pre-activation values.
inline void apply_activation_grad(Matrix& delta, const Matrix& preact, Activation a) {
  switch (a) {
    case Activation::relu:
      for (size_t i = 0; i < delta.data.size(); ++i)
        if (preact.data[i] <= 0.0) delta.data[i] = 0.0;
      break;
    case Activation::tanh:
      for (size_t i = 0; i < delta.data.size(); ++i) {
        const double t = std::tanh(preact.data[i]);
        delta.data[i] *= 1.0 - t * t;
      }
      break;
    case Activation::identity:
      break;
  }
}

inline Matrix append_ones_column(const Matrix& m) {
  Matrix out(m.rows, m.cols + 1);
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) out(r, c) = m(r, c);
    out(r, m.cols) = 1.0;
  }
  return out;
}

}  // namespace detail

// Runs the net on a batch (rows = samples). When cache is non-null it is
// filled with the per-layer inputs and pre-activations needed by backward().
inline Matrix forward(const Mlp& net, const Matrix& input, ForwardCache* cache = nullptr) {
  if (net.layers.empty()) throw StateError("forward: empty network");
  if (input.cols != net.input_dim())
    throw ShapeError("forward: input has " + std::to_string(input.cols) + " cols, net expects " +
                     std::to_string(net.input_dim()));
  if (cache) {
    cache->act_in.clear();
    cache->preact.clear();
    cache->batch = input.rows;
  }
  Matrix x = input;
  for (const auto& layer : net.layers) {
    Matrix preact = matmul_nt(x, layer.weight);  // batch x out
    for (int r = 0; r < preact.rows; ++r)
      for (int c = 0; c < preact.cols; ++c) preact(r, c) += layer.bias[c];
    if (cache) {
      cache->act_in.push_back(detail::append_ones_column(x));
      cache->preact.push_back(preact);
    }
    detail::apply_activation(preact, layer.activation);
    x = std::move(preact);
  }
  return x;
}

namespace detail {

inline BackwardResult backward_impl(const Mlp& net, const ForwardCache& cache,
                                    const Matrix& output_grad, bool want_param_grads,
                                    bool want_input_grad) {
  const int n_layers = static_cast<int>(net.layers.size());
  if (static_cast<int>(cache.preact.size()) != n_layers)
    throw StateError("backward: cache has " + std::to_string(cache.preact.size()) +
                     " layers, net has " + std::to_string(n_layers));
  if (output_grad.rows != cache.batch || output_grad.cols != net.output_dim())
    throw ShapeError("backward: output_grad is " + shape_str(output_grad) + ", expected " +
                     std::to_string(cache.batch) + "x" + std::to_string(net.output_dim()));

  const double inv_batch = 1.0 / static_cast<double>(cache.batch);
  BackwardResult res;
  res.grads.resize(n_layers);
  res.stats.resize(n_layers);

  // output_grad holds per-sample dLoss_i/dOutput_i; the 1/batch of the
  // batch-mean loss convention is applied to the parameter gradients here.
  Matrix delta = output_grad;
  for (int l = n_layers - 1; l >= 0; --l) {
    const DenseLayer& layer = net.layers[l];
    apply_activation_grad(delta, cache.preact[l], layer.activation);
    res.stats[l] = LayerStats{cache.act_in[l], delta};
    if (want_param_grads) {
      ParamGrad pg;
      pg.wbar = matmul_tn(delta, cache.act_in[l]);  // out x (in+1)
      emap(pg.wbar) *= inv_batch;
      res.grads[l] = std::move(pg);
    }
    if (l > 0 || want_input_grad) {
      delta = matmul(delta, layer.weight);  // batch x in
    }
  }
  if (want_input_grad) res.input_grad = std::move(delta);
  return res;
}

}  // namespace detail

// Gradients of the batch-mean loss whose per-sample output gradient is
// output_grad, plus the activation/gradient statistics per layer.
inline BackwardResult backward(const Mlp& net, const ForwardCache& cache,
                               const Matrix& output_grad) {
  return detail::backward_impl(net, cache, output_grad, /*params=*/true, /*input=*/false);
}

// Per-sample gradient of the loss w.r.t. the network input (chain rule
// through every layer), e.g. the gradient of Q w.r.t. the action.
inline Matrix grad_through_input(const Mlp& net, const ForwardCache& cache,
                                 const Matrix& output_grad) {
  return detail::backward_impl(net, cache, output_grad, /*params=*/false, /*input=*/true)
      .input_grad;
}

// target <- tau * online + (1 - tau) * target, elementwise over all
// parameters. tau = 1 copies, tau = 0 is a no-op.
inline void polyak_update(Mlp& target, const Mlp& online, double tau) {
  if (target.layers.size() != online.layers.size())
    throw ShapeError("polyak_update: layer count mismatch");
  for (size_t l = 0; l < target.layers.size(); ++l) {
    DenseLayer& t = target.layers[l];
    const DenseLayer& o = online.layers[l];
    if (t.weight.rows != o.weight.rows || t.weight.cols != o.weight.cols)
      throw ShapeError("polyak_update: weight shape mismatch at layer " + std::to_string(l));
    for (size_t i = 0; i < t.weight.data.size(); ++i)
      t.weight.data[i] = tau * o.weight.data[i] + (1.0 - tau) * t.weight.data[i];
    for (size_t i = 0; i < t.bias.size(); ++i)
      t.bias[i] = tau * o.bias[i] + (1.0 - tau) * t.bias[i];
  }
}

inline bool params_finite(const Mlp& net) {
  for (const auto& l : net.layers) {
    if (!is_finite(l.weight)) return false;
    for (double b : l.bias)
      if (!std::isfinite(b)) return false;
  }
  return true;
}

}  // namespace tdhk
