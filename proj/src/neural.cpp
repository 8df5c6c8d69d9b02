#include "susp/neural.hpp"

#include <algorithm>
#include <cmath>

#include "susp/rng.hpp"

namespace susp {

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "tanh") return Activation::Tanh;
  if (s == "linear") return Activation::Linear;
  throw SpecError("unknown activation '" + s + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Linear: return "linear";
  }
  return "?";
}

std::vector<std::size_t> Mlp::layer_sizes() const {
  std::vector<std::size_t> sizes;
  sizes.push_back(layers.front().in);
  for (const Layer& l : layers) sizes.push_back(l.out);
  return sizes;
}

bool Mlp::same_architecture(const Mlp& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].in != other.layers[i].in ||
        layers[i].out != other.layers[i].out ||
        layers[i].act != other.layers[i].act) {
      return false;
    }
  }
  return true;
}

void Gradients::zero() {
  for (auto& g : w) std::fill(g.begin(), g.end(), 0.0);
  for (auto& g : b) std::fill(g.begin(), g.end(), 0.0);
  std::fill(input.begin(), input.end(), 0.0);
}

void Gradients::scale(double factor) {
  for (auto& g : w)
    for (double& x : g) x *= factor;
  for (auto& g : b)
    for (double& x : g) x *= factor;
  for (double& x : input) x *= factor;
}

Mlp init_mlp(const std::vector<std::size_t>& layer_sizes,
             const std::vector<Activation>& activations, std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw SpecError("MLP needs at least one layer");
  if (activations.size() != layer_sizes.size() - 1) {
    throw SpecError("one activation per layer required");
  }
  for (std::size_t s : layer_sizes) {
    if (s == 0) throw SpecError("zero layer dimension");
  }
  Mlp net;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    Layer layer;
    layer.in = layer_sizes[l];
    layer.out = layer_sizes[l + 1];
    layer.act = activations[l];
    layer.w.resize(layer.in * layer.out);
    layer.b.assign(layer.out, 0.0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    for (double& w : layer.w) w = rng.uniform(-bound, bound);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

Gradients make_gradients(const Mlp& net) {
  Gradients g;
  for (const Layer& l : net.layers) {
    g.w.emplace_back(l.w.size(), 0.0);
    g.b.emplace_back(l.b.size(), 0.0);
  }
  g.input.assign(net.input_dim(), 0.0);
  return g;
}

namespace {

inline double apply_act(Activation a, double z) {
  switch (a) {
    case Activation::ReLU: return z > 0.0 ? z : 0.0;
    case Activation::Tanh: return std::tanh(z);
    case Activation::Linear: return z;
  }
  return z;
}

// Derivative in terms of pre-activation z and activation value a.
inline double act_grad(Activation act, double z, double a) {
  switch (act) {
    case Activation::ReLU: return z > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: return 1.0 - a * a;
    case Activation::Linear: return 1.0;
  }
  return 1.0;
}

}  // namespace

const std::vector<double>& forward(const Mlp& net, std::span<const double> x,
                                   ForwardCache& cache) {
  if (x.size() != net.input_dim()) {
    throw ShapeMismatch("forward: input size " + std::to_string(x.size()) +
                        " != " + std::to_string(net.input_dim()));
  }
  const std::size_t depth = net.layers.size();
  cache.input.assign(x.begin(), x.end());
  cache.pre.resize(depth);
  cache.post.resize(depth);

  const std::vector<double>* in = &cache.input;
  for (std::size_t l = 0; l < depth; ++l) {
    const Layer& layer = net.layers[l];
    std::vector<double>& z = cache.pre[l];
    std::vector<double>& a = cache.post[l];
    z.resize(layer.out);
    a.resize(layer.out);
    const double* w = layer.w.data();
    const double* xi = in->data();
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double* wo = w + o * layer.in;
      double acc = layer.b[o];
      for (std::size_t i = 0; i < layer.in; ++i) acc += wo[i] * xi[i];
      z[o] = acc;
      a[o] = apply_act(layer.act, acc);
    }
    in = &a;
  }
  return cache.post.back();
}

std::vector<double> forward(const Mlp& net, std::span<const double> x) {
  ForwardCache cache;
  return forward(net, x, cache);
}

void backward_accumulate(const Mlp& net, const ForwardCache& cache,
                         std::span<const double> upstream, Gradients& grads) {
  const std::size_t depth = net.layers.size();
  if (upstream.size() != net.output_dim()) {
    throw ShapeMismatch("backward: upstream size mismatch");
  }
  if (grads.w.size() != depth) {
    throw ShapeMismatch("backward: gradient shape mismatch");
  }

  // delta for the top layer: upstream through the output activation.
  static thread_local std::vector<double> delta, delta_prev;
  delta.resize(net.output_dim());
  {
    const Layer& top = net.layers.back();
    for (std::size_t o = 0; o < top.out; ++o) {
      delta[o] =
          upstream[o] * act_grad(top.act, cache.pre[depth - 1][o],
                                 cache.post[depth - 1][o]);
    }
  }

  for (std::size_t l = depth; l-- > 0;) {
    const Layer& layer = net.layers[l];
    const std::vector<double>& below =
        (l == 0) ? cache.input : cache.post[l - 1];
    double* gw = grads.w[l].data();
    double* gb = grads.b[l].data();
    delta_prev.assign(layer.in, 0.0);
    const double* w = layer.w.data();
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double d = delta[o];
      gb[o] += d;
      double* gwo = gw + o * layer.in;
      const double* wo = w + o * layer.in;
      const double* bi = below.data();
      for (std::size_t i = 0; i < layer.in; ++i) {
        gwo[i] += d * bi[i];
        delta_prev[i] += d * wo[i];
      }
    }
    if (l == 0) {
      for (std::size_t i = 0; i < layer.in; ++i) grads.input[i] += delta_prev[i];
    } else {
      const Layer& lower = net.layers[l - 1];
      for (std::size_t i = 0; i < layer.in; ++i) {
        delta_prev[i] *=
            act_grad(lower.act, cache.pre[l - 1][i], cache.post[l - 1][i]);
      }
      std::swap(delta, delta_prev);
    }
  }
}

Gradients backward(const Mlp& net, const ForwardCache& cache,
                   std::span<const double> upstream) {
  Gradients grads = make_gradients(net);
  backward_accumulate(net, cache, upstream, grads);
  return grads;
}

void input_gradient(const Mlp& net, const ForwardCache& cache,
                    std::span<const double> upstream, std::span<double> out) {
  const std::size_t depth = net.layers.size();
  if (upstream.size() != net.output_dim() || out.size() != net.input_dim()) {
    throw ShapeMismatch("input_gradient: size mismatch");
  }
  static thread_local std::vector<double> delta, delta_prev;
  delta.resize(net.output_dim());
  {
    const Layer& top = net.layers.back();
    for (std::size_t o = 0; o < top.out; ++o) {
      delta[o] = upstream[o] * act_grad(top.act, cache.pre[depth - 1][o],
                                        cache.post[depth - 1][o]);
    }
  }
  for (std::size_t l = depth; l-- > 0;) {
    const Layer& layer = net.layers[l];
    delta_prev.assign(layer.in, 0.0);
    const double* w = layer.w.data();
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double d = delta[o];
      const double* wo = w + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) delta_prev[i] += d * wo[i];
    }
    if (l == 0) {
      std::copy(delta_prev.begin(), delta_prev.end(), out.begin());
    } else {
      const Layer& lower = net.layers[l - 1];
      for (std::size_t i = 0; i < layer.in; ++i) {
        delta_prev[i] *=
            act_grad(lower.act, cache.pre[l - 1][i], cache.post[l - 1][i]);
      }
      std::swap(delta, delta_prev);
    }
  }
}

AdamState make_adam(const Mlp& net, double lr) {
  AdamState opt;
  opt.lr = lr;
  for (const Layer& l : net.layers) {
    opt.m_w.emplace_back(l.w.size(), 0.0);
    opt.v_w.emplace_back(l.w.size(), 0.0);
    opt.m_b.emplace_back(l.b.size(), 0.0);
    opt.v_b.emplace_back(l.b.size(), 0.0);
  }
  return opt;
}

namespace {

void adam_update(std::span<double> theta, std::span<const double> g,
                 std::span<double> m, std::span<double> v,
                 const AdamState& opt, double bc1, double bc2) {
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
    v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    theta[i] -= opt.lr * m_hat / (std::sqrt(v_hat) + opt.epsilon);
  }
}

}  // namespace

void adam_step(Mlp& net, const Gradients& grads, AdamState& opt) {
  if (grads.w.size() != net.layers.size() ||
      opt.m_w.size() != net.layers.size()) {
    throw ShapeMismatch("adam_step: shape mismatch");
  }
  opt.step_count += 1;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step_count));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step_count));
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    adam_update(net.layers[l].w, grads.w[l], opt.m_w[l], opt.v_w[l], opt, bc1, bc2);
    adam_update(net.layers[l].b, grads.b[l], opt.m_b[l], opt.v_b[l], opt, bc1, bc2);
  }
}

void soft_update(Mlp& target, const Mlp& main, double tau) {
  if (!target.same_architecture(main)) {
    throw ShapeMismatch("soft_update: architectures differ");
  }
  for (std::size_t l = 0; l < target.layers.size(); ++l) {
    Layer& t = target.layers[l];
    const Layer& m = main.layers[l];
    for (std::size_t i = 0; i < t.w.size(); ++i) {
      t.w[i] = tau * t.w[i] + (1.0 - tau) * m.w[i];
    }
    for (std::size_t i = 0; i < t.b.size(); ++i) {
      t.b[i] = tau * t.b[i] + (1.0 - tau) * m.b[i];
    }
  }
}

nlohmann::json mlp_to_json(const Mlp& net) {
  nlohmann::json arch;
  arch["layer_sizes"] = net.layer_sizes();
  std::vector<std::string> acts;
  for (const Layer& l : net.layers) acts.push_back(to_string(l.act));
  arch["activations"] = acts;

  nlohmann::json layers = nlohmann::json::array();
  for (const Layer& l : net.layers) {
    layers.push_back({{"w", l.w}, {"b", l.b}});
  }
  return {{"architecture", arch}, {"layers", layers}};
}

Mlp mlp_from_json(const nlohmann::json& j) {
  const auto sizes = j.at("architecture").at("layer_sizes").get<std::vector<std::size_t>>();
  const auto act_names =
      j.at("architecture").at("activations").get<std::vector<std::string>>();
  if (sizes.size() < 2 || act_names.size() != sizes.size() - 1) {
    throw ShapeMismatch("mlp_from_json: inconsistent architecture");
  }
  Mlp net;
  const auto& layers = j.at("layers");
  if (layers.size() != act_names.size()) {
    throw ShapeMismatch("mlp_from_json: layer count mismatch");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Layer layer;
    layer.in = sizes[l];
    layer.out = sizes[l + 1];
    layer.act = activation_from_string(act_names[l]);
    layer.w = layers[l].at("w").get<std::vector<double>>();
    layer.b = layers[l].at("b").get<std::vector<double>>();
    if (layer.w.size() != layer.in * layer.out ||
        layer.b.size() != layer.out) {
      throw ShapeMismatch("mlp_from_json: layer " + std::to_string(l) +
                          " does not match declared architecture");
    }
    net.layers.push_back(std::move(layer));
  }
  return net;
}

}  // namespace susp
