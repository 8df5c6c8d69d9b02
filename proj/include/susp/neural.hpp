#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "susp/errors.hpp"

#include "json.hpp"

namespace susp {

enum class Activation { ReLU, Tanh, Linear };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> w;  // row-major [out][in]
  std::vector<double> b;  // [out]
  Activation act = Activation::Linear;
};

struct Mlp {
  std::vector<Layer> layers;

  std::size_t input_dim() const { return layers.front().in; }
  std::size_t output_dim() const { return layers.back().out; }
  std::vector<std::size_t> layer_sizes() const;
  bool same_architecture(const Mlp& other) const;
};

// Intermediate values of one forward pass, reusable across calls to avoid
// reallocation in training loops.
struct ForwardCache {
  std::vector<double> input;
  std::vector<std::vector<double>> pre;   // z_l = W_l a_{l-1} + b_l
  std::vector<std::vector<double>> post;  // a_l = act(z_l); back() is the output
};

struct Gradients {
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> b;
  std::vector<double> input;  // gradient w.r.t. the network input

  void zero();
  void scale(double factor);
};

// Weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero.
Mlp init_mlp(const std::vector<std::size_t>& layer_sizes,
             const std::vector<Activation>& activations, std::uint64_t seed);

Gradients make_gradients(const Mlp& net);

// Affine-then-activation composition; fills `cache` and returns the output
// (a reference into the cache).
const std::vector<double>& forward(const Mlp& net, std::span<const double> x,
                                   ForwardCache& cache);
std::vector<double> forward(const Mlp& net, std::span<const double> x);

// Exact reverse-mode gradients of dot(upstream, output) with respect to every
// parameter and the input. Accumulates into `grads` (callers zero it first
// when they want a fresh gradient).
void backward_accumulate(const Mlp& net, const ForwardCache& cache,
                         std::span<const double> upstream, Gradients& grads);
Gradients backward(const Mlp& net, const ForwardCache& cache,
                   std::span<const double> upstream);

// Gradient of dot(upstream, output) with respect to the input only; skips the
// parameter gradients.
void input_gradient(const Mlp& net, const ForwardCache& cache,
                    std::span<const double> upstream, std::span<double> out);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step_count = 0;
  std::vector<std::vector<double>> m_w, v_w;
  std::vector<std::vector<double>> m_b, v_b;
};

AdamState make_adam(const Mlp& net, double lr);

// One Adam update with bias correction; increments step_count.
void adam_step(Mlp& net, const Gradients& grads, AdamState& opt);

// target <- tau * target + (1 - tau) * main, parameter-wise.
void soft_update(Mlp& target, const Mlp& main, double tau);

nlohmann::json mlp_to_json(const Mlp& net);
Mlp mlp_from_json(const nlohmann::json& j);

}  // namespace susp
