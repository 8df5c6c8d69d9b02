#include <cmath>
#include <thread>
#include <vector>

#include "doctest.h"
#include "susp/neural.hpp"
#include "susp/rng.hpp"

using namespace susp;

namespace {

std::vector<double> random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-scale, scale);
  return v;
}

// Straight-line re-evaluation of the affine/activation composition, kept
// independent of the library's forward pass.
std::vector<double> oracle_forward(const Mlp& net, const std::vector<double>& x) {
  std::vector<double> a = x;
  for (const Layer& layer : net.layers) {
    std::vector<double> z(layer.out, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      double acc = layer.b[o];
      for (std::size_t i = 0; i < layer.in; ++i) {
        acc += layer.w[o * layer.in + i] * a[i];
      }
      switch (layer.act) {
        case Activation::ReLU: z[o] = acc > 0.0 ? acc : 0.0; break;
        case Activation::Tanh: z[o] = std::tanh(acc); break;
        case Activation::Linear: z[o] = acc; break;
      }
    }
    a = std::move(z);
  }
  return a;
}

double scalar_objective(const Mlp& net, const std::vector<double>& x,
                        const std::vector<double>& upstream) {
  const std::vector<double> y = oracle_forward(net, x);
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += upstream[i] * y[i];
  return acc;
}

bool close_rel(double a, double b, double tol) {
  const double mag = std::max({std::fabs(a), std::fabs(b), 1e-6});
  return std::fabs(a - b) / mag < tol;
}

// Central finite differences over every parameter and input of the net.
void check_gradients_fd(Mlp net, const std::vector<double>& x, Rng& rng,
                        double tol) {
  const std::vector<double> upstream = random_vector(net.output_dim(), rng);
  ForwardCache cache;
  forward(net, x, cache);
  const Gradients grads = backward(net, cache, upstream);

  const double h = 1e-5;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    for (std::size_t i = 0; i < net.layers[l].w.size(); ++i) {
      double& theta = net.layers[l].w[i];
      const double saved = theta;
      theta = saved + h;
      const double plus = scalar_objective(net, x, upstream);
      theta = saved - h;
      const double minus = scalar_objective(net, x, upstream);
      theta = saved;
      CHECK(close_rel((plus - minus) / (2.0 * h), grads.w[l][i], tol));
    }
    for (std::size_t i = 0; i < net.layers[l].b.size(); ++i) {
      double& theta = net.layers[l].b[i];
      const double saved = theta;
      theta = saved + h;
      const double plus = scalar_objective(net, x, upstream);
      theta = saved - h;
      const double minus = scalar_objective(net, x, upstream);
      theta = saved;
      CHECK(close_rel((plus - minus) / (2.0 * h), grads.b[l][i], tol));
    }
  }
  std::vector<double> input = x;
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double saved = input[i];
    input[i] = saved + h;
    const double plus = scalar_objective(net, input, upstream);
    input[i] = saved - h;
    const double minus = scalar_objective(net, input, upstream);
    input[i] = saved;
    CHECK(close_rel((plus - minus) / (2.0 * h), grads.input[i], tol));
  }
}

}  // namespace

TEST_CASE("init_mlp: determinism, zero biases, weight variance") {
  const std::vector<std::size_t> sizes{32, 32, 1};
  const std::vector<Activation> acts{Activation::ReLU, Activation::Linear};

  const Mlp a = init_mlp(sizes, acts, 42);
  const Mlp b = init_mlp(sizes, acts, 42);
  const Mlp c = init_mlp(sizes, acts, 43);

  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    CHECK(a.layers[l].w == b.layers[l].w);
    for (double bias : a.layers[l].b) CHECK(bias == 0.0);
  }
  CHECK(a.layers[0].w != c.layers[0].w);

  // Var(U(-k, k)) = k^2/3 with k = 1/sqrt(fan_in); 32x32 = 1024 samples.
  const Layer& big = a.layers[0];
  double acc = 0.0;
  for (double w : big.w) acc += w * w;
  const double var = acc / static_cast<double>(big.w.size());
  const double expected = 1.0 / (3.0 * static_cast<double>(big.in));
  CHECK(std::fabs(var - expected) / expected < 0.20);

  CHECK_THROWS_AS(init_mlp({6, 0, 2}, acts, 1), SpecError);
  CHECK_THROWS_AS(init_mlp({6}, {}, 1), SpecError);
}

TEST_CASE("forward: degenerate and oracle cases") {
  SUBCASE("zero weights and biases give zero output") {
    Mlp net = init_mlp({4, 3, 2}, {Activation::Linear, Activation::Linear}, 1);
    for (Layer& l : net.layers) std::fill(l.w.begin(), l.w.end(), 0.0);
    Rng rng(2);
    const auto y = forward(net, random_vector(4, rng));
    CHECK(y == std::vector<double>{0.0, 0.0});
  }

  SUBCASE("identity single layer passes the input through") {
    Mlp net = init_mlp({3, 3}, {Activation::Linear}, 1);
    std::fill(net.layers[0].w.begin(), net.layers[0].w.end(), 0.0);
    for (std::size_t i = 0; i < 3; ++i) net.layers[0].w[i * 3 + i] = 1.0;
    const std::vector<double> x{0.5, -1.25, 3.0};
    CHECK(forward(net, x) == x);
  }

  SUBCASE("random nets match the straight-line oracle") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      const Mlp net = init_mlp(
          {6, 16, 16, 2},
          {Activation::ReLU, Activation::ReLU, Activation::Tanh},
          1000 + trial);
      const std::vector<double> x = random_vector(6, rng, 2.0);
      const std::vector<double> got = forward(net, x);
      const std::vector<double> want = oracle_forward(net, x);
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
      }
    }
  }

  SUBCASE("input size mismatch is rejected") {
    const Mlp net = init_mlp({4, 2}, {Activation::Linear}, 1);
    CHECK_THROWS_AS(forward(net, std::vector<double>{1.0}), ShapeMismatch);
  }
}

TEST_CASE("backward: closed forms and finite differences") {
  SUBCASE("zero upstream gives zero gradients") {
    const Mlp net = init_mlp({5, 8, 3},
                             {Activation::ReLU, Activation::Tanh}, 7);
    Rng rng(8);
    ForwardCache cache;
    forward(net, random_vector(5, rng), cache);
    const std::vector<double> zero(3, 0.0);
    const Gradients grads = backward(net, cache, zero);
    for (const auto& g : grads.w) {
      for (double v : g) CHECK(v == 0.0);
    }
    for (double v : grads.input) CHECK(v == 0.0);
  }

  SUBCASE("single linear layer has the outer-product closed form") {
    const Mlp net = init_mlp({3, 2}, {Activation::Linear}, 9);
    Rng rng(10);
    const std::vector<double> x = random_vector(3, rng);
    const std::vector<double> u = random_vector(2, rng);
    ForwardCache cache;
    forward(net, x, cache);
    const Gradients grads = backward(net, cache, u);
    for (std::size_t o = 0; o < 2; ++o) {
      for (std::size_t i = 0; i < 3; ++i) {
        CHECK(grads.w[0][o * 3 + i] ==
              doctest::Approx(u[o] * x[i]).epsilon(1e-14));
      }
      CHECK(grads.b[0][o] == u[o]);
    }
    for (std::size_t i = 0; i < 3; ++i) {
      double expect = 0.0;
      for (std::size_t o = 0; o < 2; ++o) {
        expect += net.layers[0].w[o * 3 + i] * u[o];
      }
      CHECK(grads.input[i] == doctest::Approx(expect).epsilon(1e-14));
    }
  }

  SUBCASE("finite differences on the critic architecture") {
    Rng rng(11);
    for (int trial = 0; trial < 5; ++trial) {
      const Mlp net = init_mlp(
          {8, 32, 32, 1},
          {Activation::ReLU, Activation::ReLU, Activation::Linear},
          2000 + trial);
      check_gradients_fd(net, random_vector(8, rng, 1.5), rng, 1e-4);
    }
  }

  SUBCASE("finite differences on the policy architecture") {
    Rng rng(12);
    for (int trial = 0; trial < 5; ++trial) {
      const Mlp net = init_mlp(
          {6, 16, 16, 2},
          {Activation::ReLU, Activation::ReLU, Activation::Tanh},
          3000 + trial);
      check_gradients_fd(net, random_vector(6, rng, 1.5), rng, 1e-4);
    }
  }

  SUBCASE("input_gradient agrees with the full backward pass") {
    Rng rng(13);
    const Mlp net = init_mlp(
        {8, 32, 32, 1},
        {Activation::ReLU, Activation::ReLU, Activation::Linear}, 77);
    const std::vector<double> x = random_vector(8, rng);
    const std::vector<double> u = random_vector(1, rng);
    ForwardCache cache;
    forward(net, x, cache);
    const Gradients grads = backward(net, cache, u);
    std::vector<double> only(8);
    input_gradient(net, cache, u, only);
    for (std::size_t i = 0; i < 8; ++i) CHECK(only[i] == grads.input[i]);
  }
}

TEST_CASE("adam: hand-unrolled recurrence") {
  const auto scalar_net = [] {
    Mlp net = init_mlp({1, 1}, {Activation::Linear}, 1);
    net.layers[0].w[0] = 0.25;
    return net;
  };

  SUBCASE("zero gradient leaves parameters unchanged") {
    Mlp net = scalar_net();
    AdamState opt = make_adam(net, 1e-3);
    Gradients g = make_gradients(net);
    adam_step(net, g, opt);
    CHECK(net.layers[0].w[0] == 0.25);
    CHECK(opt.step_count == 1);
  }

  SUBCASE("one unit-gradient step moves by about -lr") {
    Mlp net = scalar_net();
    AdamState opt = make_adam(net, 1e-3);
    Gradients g = make_gradients(net);
    g.w[0][0] = 1.0;
    adam_step(net, g, opt);
    // m_hat = 1, v_hat = 1 -> delta = -lr / (1 + eps)
    CHECK(net.layers[0].w[0] ==
          doctest::Approx(0.25 - 1e-3 / (1.0 + 1e-8)).epsilon(1e-12));
  }

  SUBCASE("two constant-gradient steps match the unrolled recurrence") {
    Mlp net = scalar_net();
    AdamState opt = make_adam(net, 1e-3);
    Gradients g = make_gradients(net);
    const double grad = -0.7;
    g.w[0][0] = grad;
    adam_step(net, g, opt);
    adam_step(net, g, opt);

    double theta = 0.25, m = 0.0, v = 0.0;
    for (int t = 1; t <= 2; ++t) {
      m = 0.9 * m + 0.1 * grad;
      v = 0.999 * v + 0.001 * grad * grad;
      const double m_hat = m / (1.0 - std::pow(0.9, t));
      const double v_hat = v / (1.0 - std::pow(0.999, t));
      theta -= 1e-3 * m_hat / (std::sqrt(v_hat) + 1e-8);
    }
    CHECK(net.layers[0].w[0] == doctest::Approx(theta).epsilon(1e-12));
  }

  SUBCASE("lr = 0 never changes parameters") {
    Mlp net = init_mlp({4, 8, 2}, {Activation::ReLU, Activation::Tanh}, 5);
    const Mlp before = net;
    AdamState opt = make_adam(net, 0.0);
    Rng rng(6);
    for (int step = 0; step < 10; ++step) {
      Gradients g = make_gradients(net);
      for (auto& layer : g.w) {
        for (double& x : layer) x = rng.uniform(-1.0, 1.0);
      }
      adam_step(net, g, opt);
    }
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      CHECK(net.layers[l].w == before.layers[l].w);
    }
  }
}

TEST_CASE("soft update: exact algebra and contraction") {
  const std::vector<std::size_t> sizes{3, 4, 2};
  const std::vector<Activation> acts{Activation::ReLU, Activation::Linear};
  const Mlp main = init_mlp(sizes, acts, 21);

  SUBCASE("tau = 1 leaves the target unchanged") {
    Mlp target = init_mlp(sizes, acts, 22);
    const Mlp before = target;
    soft_update(target, main, 1.0);
    for (std::size_t l = 0; l < target.layers.size(); ++l) {
      CHECK(target.layers[l].w == before.layers[l].w);
    }
  }

  SUBCASE("tau = 0 copies the main network") {
    Mlp target = init_mlp(sizes, acts, 22);
    soft_update(target, main, 0.0);
    for (std::size_t l = 0; l < target.layers.size(); ++l) {
      CHECK(target.layers[l].w == main.layers[l].w);
    }
  }

  SUBCASE("tau = 0.99 moves one percent of the way") {
    Mlp target = init_mlp(sizes, acts, 22);
    target.layers[0].w[0] = 1.0;
    Mlp frozen = main;
    frozen.layers[0].w[0] = 0.0;
    soft_update(target, frozen, 0.99);
    CHECK(target.layers[0].w[0] == doctest::Approx(0.99).epsilon(1e-14));
  }

  SUBCASE("repeated updates contract geometrically at rate tau") {
    Mlp target = init_mlp(sizes, acts, 22);
    const double tau = 0.99;
    double prev_gap = 0.0;
    for (std::size_t i = 0; i < target.layers[0].w.size(); ++i) {
      prev_gap = std::max(
          prev_gap, std::fabs(target.layers[0].w[i] - main.layers[0].w[i]));
    }
    const double initial_gap = prev_gap;
    for (int step = 1; step <= 50; ++step) {
      soft_update(target, main, tau);
      double gap = 0.0;
      for (std::size_t i = 0; i < target.layers[0].w.size(); ++i) {
        gap = std::max(gap,
                       std::fabs(target.layers[0].w[i] - main.layers[0].w[i]));
      }
      CHECK(gap <= std::pow(tau, step) * initial_gap * (1.0 + 1e-12));
      CHECK(gap == doctest::Approx(prev_gap * tau).epsilon(1e-12));
      prev_gap = gap;
    }
  }

  SUBCASE("architecture mismatch is rejected") {
    Mlp target = init_mlp({3, 5, 2}, acts, 23);
    CHECK_THROWS_AS(soft_update(target, main, 0.5), ShapeMismatch);
  }
}

TEST_CASE("forward is safe under concurrent read-only access") {
  const Mlp net = init_mlp(
      {6, 16, 16, 2}, {Activation::ReLU, Activation::ReLU, Activation::Tanh},
      99);
  Rng rng(100);
  const std::vector<double> x = random_vector(6, rng);
  const std::vector<double> expected = forward(net, x);

  std::vector<std::vector<double>> results(8);
  std::vector<std::thread> threads;
  for (auto& slot : results) {
    threads.emplace_back([&net, &x, &slot] {
      for (int i = 0; i < 500; ++i) slot = forward(net, x);
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& r : results) CHECK(r == expected);
}

TEST_CASE("weight serialization round trip") {
  const Mlp net = init_mlp(
      {8, 32, 32, 1}, {Activation::ReLU, Activation::ReLU, Activation::Linear},
      1234);
  const nlohmann::json j = mlp_to_json(net);
  const Mlp restored = mlp_from_json(j);
  REQUIRE(restored.same_architecture(net));
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    CHECK(restored.layers[l].w == net.layers[l].w);
    CHECK(restored.layers[l].b == net.layers[l].b);
  }

  SUBCASE("shape validation on load") {
    nlohmann::json bad = j;
    bad["layers"][0]["w"] = std::vector<double>{1.0, 2.0};
    CHECK_THROWS_AS(mlp_from_json(bad), ShapeMismatch);
  }
}
