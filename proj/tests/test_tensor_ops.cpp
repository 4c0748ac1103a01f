#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "viol/adam.hpp"
#include "viol/conv.hpp"
#include "viol/graph.hpp"
#include "viol/rng.hpp"
#include "viol/trainer.hpp"

using namespace viol;

namespace {
ConvLayer fill_layer(ParamStore& store, const std::string& name, int ci, int co, int kh, int kw,
                     int sh, int sw, int ph, int pw, Rng* rng = nullptr) {
  ConvLayer layer = make_conv_layer_pad(store, name, ci, co, kh, kw, sh, sw, ph, pw);
  if (rng)
    for (double& v : layer.kernel->value.data) v = rng->uniform(-1.0, 1.0);
  return layer;
}
}  // namespace

TEST_CASE("conv2d: all-ones 3x3 against a 3x3 ones kernel sums to 9") {
  ParamStore store;
  ConvLayer layer = fill_layer(store, "c", 1, 1, 3, 3, 1, 1, 0, 0);
  std::fill(layer.kernel->value.data.begin(), layer.kernel->value.data.end(), 1.0);
  Tensor input = Tensor::full({1, 1, 3, 3}, 1.0);
  Tensor out = conv2d_forward(input, layer);
  REQUIRE(out.shape == std::vector<int>{1, 1, 1, 1});
  CHECK(out.data[0] == 9.0);
}

TEST_CASE("conv2d: zero kernel gives a constant-bias output") {
  ParamStore store;
  ConvLayer layer = fill_layer(store, "c", 2, 3, 3, 3, 1, 1, 1, 1);
  layer.bias->value.data = {0.5, -1.25, 2.0};
  Rng rng(7);
  Tensor input({1, 2, 4, 5});
  for (double& v : input.data) v = rng.uniform(-2.0, 2.0);
  Tensor out = conv2d_forward(input, layer);
  for (int oc = 0; oc < 3; ++oc)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 5; ++x)
        CHECK(out.at({0, oc, y, x}) == layer.bias->value.data[static_cast<std::size_t>(oc)]);
}

TEST_CASE("conv2d: strided padded case matches the nested-loop oracle") {
  ParamStore store;
  Rng rng(123);
  ConvLayer layer = fill_layer(store, "c", 2, 3, 3, 3, 2, 2, 1, 1, &rng);
  for (double& v : layer.bias->value.data) v = rng.uniform(-1.0, 1.0);
  Tensor input({1, 2, 5, 5});
  for (double& v : input.data) v = rng.uniform(-1.0, 1.0);

  Tensor got = conv2d_forward(input, layer);
  Tensor want = oracles::naive_conv2d(input, layer.kernel->value, layer.bias->value, 2, 2, 1, 1);
  REQUIRE(got.shape == want.shape);
  for (std::size_t i = 0; i < got.size(); ++i)
    CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));
}

TEST_CASE("conv2d: rejects mismatched input channels naming the dimension") {
  ParamStore store;
  ConvLayer layer = fill_layer(store, "c", 3, 1, 3, 3, 1, 1, 1, 1);
  Tensor input({1, 2, 4, 4});
  CHECK_THROWS_WITH_AS(conv2d_forward(input, layer),
                       doctest::Contains("input channel count 2"), std::invalid_argument);
}

TEST_CASE("conv2d backward: zero upstream leaves gradients untouched") {
  ParamStore store;
  Rng rng(5);
  ConvLayer layer = fill_layer(store, "c", 1, 2, 3, 3, 1, 1, 1, 1, &rng);
  Tensor input({1, 1, 4, 4});
  for (double& v : input.data) v = rng.uniform(-1.0, 1.0);
  Conv2dContext ctx;
  Tensor out = conv2d_forward(input, layer, &ctx);
  Tensor upstream(out.shape);
  Tensor input_grad;
  conv2d_backward(ctx, layer, upstream, &input_grad);
  for (double g : layer.kernel->value.grad) CHECK(g == 0.0);
  for (double g : layer.bias->value.grad) CHECK(g == 0.0);
  for (double g : input_grad.data) CHECK(g == 0.0);
}

TEST_CASE("conv2d backward: scalar-output gradients match finite differences") {
  ParamStore store;
  Rng rng(11);
  ConvLayer layer = fill_layer(store, "c", 2, 1, 3, 3, 1, 1, 0, 0, &rng);
  Tensor input({1, 2, 3, 3});
  for (double& v : input.data) v = rng.uniform(-1.0, 1.0);

  auto forward = [&]() {
    return conv2d_forward(input, layer).data[0];
  };
  Conv2dContext ctx;
  Tensor out = conv2d_forward(input, layer, &ctx);
  REQUIRE(out.size() == 1);
  Tensor upstream = Tensor::scalar(1.0);
  upstream.shape = out.shape;
  Tensor input_grad;
  conv2d_backward(ctx, layer, upstream, &input_grad);

  for (std::size_t i = 0; i < input.size(); ++i)
    CHECK(oracles::rel_err(input_grad.data[i], oracles::central_diff(forward, &input.data[i])) <
          1e-6);
  for (std::size_t i = 0; i < layer.kernel->value.size(); ++i)
    CHECK(oracles::rel_err(layer.kernel->value.grad[i],
                           oracles::central_diff(forward, &layer.kernel->value.data[i])) < 1e-6);
  CHECK(oracles::rel_err(layer.bias->value.grad[0],
                         oracles::central_diff(forward, &layer.bias->value.data[0])) < 1e-6);
}

TEST_CASE("conv2d backward: calling twice doubles the accumulated gradients") {
  ParamStore store;
  Rng rng(17);
  ConvLayer layer = fill_layer(store, "c", 1, 2, 3, 3, 2, 2, 1, 1, &rng);
  Tensor input({1, 1, 5, 5});
  for (double& v : input.data) v = rng.uniform(-1.0, 1.0);
  Conv2dContext ctx;
  Tensor out = conv2d_forward(input, layer, &ctx);
  Tensor upstream(out.shape);
  for (double& v : upstream.data) v = rng.uniform(-1.0, 1.0);

  conv2d_backward(ctx, layer, upstream, nullptr);
  const std::vector<double> once = layer.kernel->value.grad;
  conv2d_backward(ctx, layer, upstream, nullptr);
  for (std::size_t i = 0; i < once.size(); ++i)
    CHECK(layer.kernel->value.grad[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-15));
}

TEST_CASE("conv2d backward: requires a recorded forward pass") {
  ParamStore store;
  ConvLayer layer = fill_layer(store, "c", 1, 1, 1, 1, 1, 1, 0, 0);
  Conv2dContext ctx;  // never recorded
  Tensor upstream({1, 1, 1, 1});
  CHECK_THROWS_AS(conv2d_backward(ctx, layer, upstream, nullptr), std::logic_error);
}

TEST_CASE("conv2d backward: linear in the upstream gradient") {
  ParamStore store;
  Rng rng(23);
  ConvLayer layer = fill_layer(store, "c", 2, 2, 3, 3, 1, 1, 1, 1, &rng);
  Tensor input({1, 2, 4, 4});
  for (double& v : input.data) v = rng.uniform(-1.0, 1.0);
  Conv2dContext ctx;
  Tensor out = conv2d_forward(input, layer, &ctx);

  Tensor g1(out.shape), g2(out.shape), gmix(out.shape);
  const double a = 1.75, b = -0.5;
  for (std::size_t i = 0; i < out.size(); ++i) {
    g1.data[i] = rng.uniform(-1.0, 1.0);
    g2.data[i] = rng.uniform(-1.0, 1.0);
    gmix.data[i] = a * g1.data[i] + b * g2.data[i];
  }
  auto input_grad_for = [&](const Tensor& up) {
    layer.kernel->value.zero_grad();
    layer.bias->value.zero_grad();
    Tensor gi;
    conv2d_backward(ctx, layer, up, &gi);
    return gi;
  };
  Tensor r1 = input_grad_for(g1), r2 = input_grad_for(g2), rmix = input_grad_for(gmix);
  for (std::size_t i = 0; i < rmix.size(); ++i)
    CHECK(rmix.data[i] ==
          doctest::Approx(a * r1.data[i] + b * r2.data[i]).epsilon(1e-12));
}

TEST_CASE("relu: forward cases and gradient routing") {
  Graph g;
  VarId x = g.leaf(Tensor({3}, {-1.0, 0.0, 2.0}));
  VarId y = g.relu(x);
  CHECK(g.value(y).data == std::vector<double>{0.0, 0.0, 2.0});

  VarId s = g.weighted_sum(y, {1.0, 1.0, 1.0});
  g.backward(s);
  // Zero at the kink, pass-through above it.
  CHECK(g.grad(x) == std::vector<double>{0.0, 0.0, 1.0});
}

TEST_CASE("relu: all-negative input gives zero output and zero gradient") {
  Graph g;
  VarId x = g.leaf(Tensor({4}, {-3.0, -0.1, -7.0, -0.5}));
  VarId y = g.relu(x);
  for (double v : g.value(y).data) CHECK(v == 0.0);
  g.backward(g.weighted_sum(y, {1.0, 1.0, 1.0, 1.0}));
  for (double v : g.grad(x)) CHECK(v == 0.0);
}

TEST_CASE("relu: gradient matches finite differences away from the kink") {
  Rng rng(31);
  Tensor input({16});
  for (double& v : input.data) {
    v = rng.uniform(-1.0, 1.0);
    if (std::abs(v) < 1e-3) v = 0.25;
  }
  std::vector<double> w(input.size());
  for (double& v : w) v = rng.uniform(-1.0, 1.0);

  auto forward = [&]() {
    Graph g;
    return g.value(g.weighted_sum(g.relu(g.leaf(input)), w)).data[0];
  };
  Graph g;
  VarId x = g.leaf(input);
  g.backward(g.weighted_sum(g.relu(x), w));
  const auto grad = g.grad(x);
  for (std::size_t i = 0; i < input.size(); ++i)
    CHECK(oracles::rel_err(grad[i], oracles::central_diff(forward, &input.data[i])) < 1e-6);
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
  ParamStore store;
  Parameter& p = store.create("p", {4});
  p.value.data = {1.0, -2.0, 3.0, 0.5};
  const std::vector<double> before = p.value.data;
  AdamState adam;
  for (int i = 0; i < 10; ++i) adam.step(store);
  CHECK(p.value.data == before);
}

TEST_CASE("adam: first step matches the hand-evaluated update") {
  ParamStore store;
  Parameter& p = store.create("p", {1});
  p.value.data[0] = 1.0;
  p.value.grad[0] = 1.0;
  AdamConfig cfg;
  cfg.lr = 2e-4;
  AdamState adam(cfg);
  adam.step(store);

  const double m = (1.0 - 0.9) * 1.0;
  const double v = (1.0 - 0.99) * 1.0;
  const double mhat = m / (1.0 - 0.9);
  const double vhat = v / (1.0 - 0.99);
  const double want = 1.0 - 2e-4 * mhat / (std::sqrt(vhat) + 1e-8);
  CHECK(p.value.data[0] == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("adam: stepwise-exponential learning rate decay") {
  AdamConfig cfg;
  cfg.lr = 2e-4;
  cfg.gamma = 0.5;
  cfg.decay_interval = 100;
  AdamState adam(cfg);
  CHECK(adam.effective_lr(1) == 2e-4);
  CHECK(adam.effective_lr(250) == 2e-4 * 0.25);
  CHECK(adam.effective_lr(99) == 2e-4);
}

TEST_CASE("adam: non-finite gradient raises naming the parameter") {
  ParamStore store;
  store.create("fine", {2});
  Parameter& bad = store.create("model.broken.bias", {1});
  bad.value.grad[0] = std::nan("");
  AdamState adam;
  CHECK_THROWS_WITH_AS(adam.step(store), doctest::Contains("model.broken.bias"),
                       std::runtime_error);
}

TEST_CASE("checkpoint: round-trip preserves names, shapes and bits") {
  ParamStore store;
  Rng rng(41);
  Parameter& a = store.create("net.conv1.kernel", {2, 1, 3, 3});
  Parameter& b = store.create("net.conv1.bias", {2});
  for (double& v : a.value.data) v = rng.uniform(-1.0, 1.0);
  for (double& v : b.value.data) v = rng.uniform(-1.0, 1.0);
  b.value.grad[0] = 1.0;  // gradients are not persisted

  AdamState adam;
  adam.step(store);
  const std::string path = "ckpt_roundtrip_test.bin";
  save_training_checkpoint(path, store, &adam);

  const auto entries = read_checkpoint(path);
  bool saw_m1 = false, saw_m2 = false, saw_step = false;
  for (const auto& e : entries) {
    if (e.name == "net.conv1.bias.m1") saw_m1 = true;
    if (e.name == "net.conv1.bias.m2") saw_m2 = true;
    if (e.name == "adam.step") saw_step = true;
  }
  CHECK(saw_m1);
  CHECK(saw_m2);
  CHECK(saw_step);

  ParamStore store2;
  Parameter& a2 = store2.create("net.conv1.kernel", {2, 1, 3, 3});
  Parameter& b2 = store2.create("net.conv1.bias", {2});
  AdamState adam2;
  const std::int64_t step = load_training_checkpoint(path, store2, &adam2);
  CHECK(step == 1);
  CHECK(a2.value.data == a.value.data);
  CHECK(b2.value.data == b.value.data);
  std::remove(path.c_str());
}

TEST_CASE("determinism: identical seeds give bit-identical weights") {
  auto build = [](std::uint64_t seed) {
    ParamStore store;
    Rng rng(substream_seed(seed, "init/x"));
    ConvLayer layer = make_conv_layer(store, "x", 3, 8, 3, 3);
    init_xavier_uniform(layer, rng);
    return layer.kernel->value.data;
  };
  CHECK(build(7) == build(7));
  CHECK(build(7) != build(8));
}

TEST_CASE("xavier init: bounds follow fan-in/fan-out") {
  ParamStore store;
  Rng rng(3);
  ConvLayer layer = make_conv_layer(store, "x", 4, 8, 3, 3);
  init_xavier_uniform(layer, rng);
  const double bound = std::sqrt(6.0 / (4 * 9 + 8 * 9));
  for (double v : layer.kernel->value.data) {
    CHECK(v <= bound);
    CHECK(v >= -bound);
  }
  for (double v : layer.bias->value.data) CHECK(v == 0.0);
}
