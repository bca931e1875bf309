#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "v2a/error.hpp"
#include "v2a/grad_check.hpp"
#include "v2a/ops.hpp"
#include "v2a/optimizer.hpp"
#include "v2a/random.hpp"

using namespace v2a;

namespace {

template <typename T>
std::vector<double> as_doubles(const BasicTensor<T>& t) {
  return {t.data().begin(), t.data().end()};
}

Conv3dOptions opts(std::size_t s, std::size_t p) { return {{s, s, s}, {p, p, p}}; }

}  // namespace

TEST_SUITE("linear") {
  TEST_CASE("identity weight") {
    Tensor x({1, 2}, {1, 2});
    Tensor w({2, 2}, {1, 0, 0, 1});
    Tensor b({2}, {0, 0});
    const auto y = linear(x, w, b);
    CHECK(y.shape() == Shape{1, 2});
    CHECK(y.data()[0] == 1.0f);
    CHECK(y.data()[1] == 2.0f);
  }

  TEST_CASE("zero input passes bias") {
    Rng rng(3);
    auto w = rng.uniform_tensor<float>({2, 2}, 1.0);
    const auto y = linear(Tensor::zeros({1, 2}), w, Tensor({2}, {3, -1}));
    CHECK(y.data()[0] == 3.0f);
    CHECK(y.data()[1] == -1.0f);
  }

  TEST_CASE("random instance matches nested-loop oracle") {
    Rng rng(11);
    auto x = rng.uniform_tensor<float>({3, 5}, 1.0);
    auto w = rng.uniform_tensor<float>({4, 5}, 1.0);
    auto b = rng.uniform_tensor<float>({4}, 1.0);
    const auto y = linear(x, w, b);
    const auto ref = oracle::matmul(as_doubles(x), 3, 5, as_doubles(w), 4, as_doubles(b));
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(y.data()[i] - ref[i]) < 1e-5);
  }

  TEST_CASE("shape mismatch names the axes") {
    CHECK_THROWS_WITH_AS(linear(Tensor::zeros({1, 3}), Tensor::zeros({2, 2}), Tensor::zeros({2})),
                         doctest::Contains("axis 1"), DimensionError);
    CHECK_THROWS_AS(linear(Tensor::zeros({1, 2}), Tensor::zeros({2, 2}), Tensor::zeros({3})),
                    DimensionError);
  }
}

TEST_SUITE("conv3d") {
  TEST_CASE("scalar case") {
    const auto y = conv3d(Tensor({1, 1, 1, 1, 1}, {3}), Tensor({1, 1, 1, 1, 1}, {-2}),
                          Tensor({1}, {0}), opts(1, 0));
    CHECK(y.shape() == Shape{1, 1, 1, 1, 1});
    CHECK(y.item() == -6.0f);
  }

  TEST_CASE("centred unit kernel with same padding is the identity") {
    Rng rng(5);
    auto x = rng.uniform_tensor<float>({1, 1, 4, 5, 6}, 1.0);
    std::vector<float> k(27, 0.0f);
    k[13] = 1.0f;
    const auto y = conv3d(x, Tensor({1, 1, 3, 3, 3}, k), Tensor({1}, {0}), opts(1, 1));
    REQUIRE(y.shape() == x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == x.data()[i]);
  }

  TEST_CASE("random strided instance matches direct summation") {
    Rng rng(17);
    auto x = rng.uniform_tensor<float>({1, 2, 5, 5, 5}, 1.0);
    auto k = rng.uniform_tensor<float>({2, 2, 3, 3, 3}, 1.0);
    auto b = rng.uniform_tensor<float>({2}, 1.0);
    const auto y = conv3d(x, k, b, opts(2, 1));
    oracle::Volume yv{};
    const auto ref = oracle::conv3d(as_doubles(x), {1, 2, 5, 5, 5}, as_doubles(k), 2, {3, 3, 3},
                                    as_doubles(b), {2, 2, 2}, {1, 1, 1}, &yv);
    REQUIRE(y.shape() == Shape{yv.b, yv.c, yv.t, yv.h, yv.w});
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(y.data()[i] - ref[i]) < 1e-4);
  }

  TEST_CASE("non-positive output extent is a configuration error") {
    CHECK_THROWS_AS(conv3d(Tensor::zeros({1, 1, 2, 8, 8}), Tensor::zeros({1, 1, 4, 4, 4}),
                           Tensor::zeros({1}), opts(1, 0)),
                    ConfigError);
  }

  TEST_CASE("conv then transpose with k=4 s=2 p=1 restores the shape") {
    for (std::size_t extent : {4u, 6u, 8u, 12u}) {
      const auto x = Tensor::zeros({1, 2, extent, extent + 2, 2 * extent});
      const auto down = conv3d(x, Tensor::zeros({3, 2, 4, 4, 4}), Tensor::zeros({3}), opts(2, 1));
      const auto up = conv3d_transpose(down, Tensor::zeros({3, 2, 4, 4, 4}), Tensor::zeros({2}),
                                       opts(2, 1));
      CHECK(up.shape() == x.shape());
    }
  }
}

TEST_SUITE("conv3d_transpose") {
  TEST_CASE("scalar case") {
    const auto y = conv3d_transpose(Tensor({1, 1, 1, 1, 1}, {1.5f}), Tensor({1, 1, 1, 1, 1}, {4}),
                                    Tensor({1}, {0}), opts(1, 0));
    CHECK(y.item() == 6.0f);
  }

  TEST_CASE("full-scale latent grid doubles every extent") {
    const auto y = conv3d_transpose(Tensor::zeros({1, 2, 2, 36, 64}),
                                    Tensor::zeros({2, 5, 4, 4, 4}), Tensor::zeros({5}),
                                    opts(2, 1));
    CHECK(y.shape() == Shape{1, 5, 4, 72, 128});
  }

  TEST_CASE("random instance matches zero-stuffing oracle") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      Rng rng(100 + seed);
      const std::size_t s = 1 + seed % 2, p = seed % 2, kk = 3 + seed % 2;
      auto x = rng.uniform_tensor<float>({2, 2, 3, 4, 3}, 1.0);
      auto k = rng.uniform_tensor<float>({2, 3, kk, kk, kk}, 1.0);
      auto b = rng.uniform_tensor<float>({3}, 1.0);
      const auto y = conv3d_transpose(x, k, b, opts(s, p));
      oracle::Volume yv{};
      const auto ref = oracle::conv3d_transpose(as_doubles(x), {2, 2, 3, 4, 3}, as_doubles(k), 3,
                                                {kk, kk, kk}, as_doubles(b), {s, s, s},
                                                {p, p, p}, &yv);
      REQUIRE(y.shape() == Shape{yv.b, yv.c, yv.t, yv.h, yv.w});
      for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(y.data()[i] - ref[i]) < 1e-4);
    }
  }
}

TEST_CASE("activations") {
  const auto r = relu(Tensor({3}, {-1, 0, 2}));
  CHECK(r.data()[0] == 0.0f);
  CHECK(r.data()[1] == 0.0f);
  CHECK(r.data()[2] == 2.0f);
  CHECK(activation(Tensor({1}, {0}), Activation::tanh).item() == 0.0f);
  CHECK(sigmoid(Tensor({1}, {0})).item() == 0.5f);

  // Saturated inputs stay strictly inside the open ranges.
  const auto s = sigmoid(Tensor({2}, {-200, 200}));
  CHECK(s.data()[0] > 0.0f);
  CHECK(s.data()[1] < 1.0f);
  const auto t = activation(Tensor({2}, {-50, 50}), Activation::tanh);
  CHECK(t.data()[0] > -1.0f);
  CHECK(t.data()[1] < 1.0f);
}

TEST_SUITE("mse") {
  TEST_CASE("examples") {
    Rng rng(2);
    auto x = rng.uniform_tensor<float>({7}, 3.0);
    CHECK(mse(x, x.detach()).item() == 0.0f);
    CHECK(mse(Tensor({2}, {0, 0}), Tensor({2}, {1, -1})).item() == 1.0f);
    CHECK_THROWS_AS(mse(Tensor::zeros({2}), Tensor::zeros({3})), DimensionError);
  }

  TEST_CASE("random pair matches loop-and-divide oracle") {
    Rng rng(8);
    auto p = rng.uniform_tensor<float>({100}, 2.0);
    auto t = rng.uniform_tensor<float>({100}, 2.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < 100; ++i) {
      const double d = double(p.data()[i]) - double(t.data()[i]);
      acc += d * d;
    }
    const double ref = acc / 100.0;
    CHECK(std::abs(mse(p, t).item() - ref) <= 1e-6 * ref);
  }

  TEST_CASE("target requiring grad is rejected") {
    CHECK_THROWS_AS(mse(Tensor::zeros({2}), Tensor::zeros({2}, true)), ContractError);
  }

  TEST_CASE("non-negative on random inputs") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed);
      auto a = rng.uniform_tensor<float>({13}, 5.0);
      auto b = rng.uniform_tensor<float>({13}, 5.0);
      CHECK(mse(a, b).item() >= 0.0f);
    }
  }
}

TEST_SUITE("backward") {
  TEST_CASE("d/dx of mse(x, 0) at x=3 is 6") {
    Tensor x({1}, {3}, true);
    backward(mse(x, Tensor::zeros({1})));
    CHECK(x.grad()[0] == 6.0f);
  }

  TEST_CASE("disconnected leaf receives zeros") {
    Tensor x({2}, {1, 2}, true);
    Tensor y({2}, {3, 4}, true);
    auto unused = relu(x);
    backward(mse(y, Tensor::zeros({2})));
    REQUIRE(x.has_grad());
    CHECK(x.grad()[0] == 0.0f);
    CHECK(x.grad()[1] == 0.0f);
    CHECK(y.has_grad());
  }

  TEST_CASE("non-scalar loss is a contract error") {
    Tensor x({2}, {1, 2}, true);
    auto y = relu(x);
    CHECK_THROWS_AS(backward(y), ContractError);
    Tape<float>::current().clear();
  }

  TEST_CASE("loss from a foreign tape is rejected") {
    Tensor x({2}, {1, 2}, true);
    auto loss = sum(x);
    Tape<float>::current().clear();
    CHECK_THROWS_AS(backward(loss), ContractError);
  }

  TEST_CASE("tape is discarded after backward") {
    Tensor x({2}, {1, 2}, true);
    backward(sum(relu(x)));
    CHECK(Tape<float>::current().size() == 0);
  }

  TEST_CASE("no-grad guard suppresses recording") {
    Tensor x({2}, {1, 2}, true);
    {
      NoGradGuard<float> guard;
      auto y = relu(x);
      CHECK(!y.requires_grad());
    }
    CHECK(Tape<float>::current().size() == 0);
  }

  TEST_CASE("detached value blocks gradient") {
    Tensor x({2}, {1, 2}, true);
    auto y = add(x, x.detach());
    backward(sum(y));
    CHECK(x.grad()[0] == 1.0f);
    CHECK(x.grad()[1] == 1.0f);
  }

  TEST_CASE("composite conv3d -> relu -> mse matches finite differences") {
    Rng rng(21);
    const auto x = rng.uniform_tensor<double>({1, 2, 4, 5, 5}, 1.0);
    const auto k = rng.uniform_tensor<double>({3, 2, 3, 3, 3}, 0.3);
    const auto b = rng.uniform_tensor<double>({3}, 0.1);
    const auto target = rng.uniform_tensor<double>({1, 3, 2, 3, 3}, 1.0);
    const ScalarFunction<double> f = [&](const TensorD& kernel) {
      return mse(relu(conv3d(x, kernel, b, opts(2, 1))), target);
    };
    CHECK(grad_check(f, k, 1e-3) < 1e-3);
  }

  TEST_CASE("backward is bitwise deterministic") {
    Rng rng(4);
    auto x = rng.uniform_tensor<float>({2, 2, 4, 4, 4}, 1.0);
    auto k = rng.uniform_tensor<float>({3, 2, 4, 4, 4}, 0.3, true);
    auto b = rng.uniform_tensor<float>({3}, 0.1, true);
    auto run = [&] {
      k.clear_grad();
      b.clear_grad();
      backward(mean(sigmoid(conv3d(x, k, b, opts(2, 1)))));
      return std::vector<float>(k.grad().begin(), k.grad().end());
    };
    const auto first = run();
    const auto second = run();
    CHECK(first == second);
  }
}

TEST_SUITE("grad_check") {
  TEST_CASE("sum of squares") {
    const ScalarFunction<float> f = [](const Tensor& x) { return sum(mul(x, x)); };
    CHECK(grad_check(f, Tensor({3}, {1, 2, 3}), 1e-3) < 1e-4);
  }

  TEST_CASE("linear layer") {
    Rng rng(9);
    const auto w = rng.uniform_tensor<double>({4, 5}, 0.5);
    const auto b = rng.uniform_tensor<double>({4}, 0.5);
    const auto cot = rng.uniform_tensor<double>({3, 4}, 1.0);
    const ScalarFunction<double> f = [&](const TensorD& x) {
      return sum(mul(linear(x, w, b), cot));
    };
    CHECK(grad_check(f, rng.uniform_tensor<double>({3, 5}, 1.0), 1e-3) < 1e-3);
  }

  TEST_CASE("rejects bad epsilon and non-finite values") {
    const ScalarFunction<double> f = [](const TensorD& x) { return sum(x); };
    CHECK_THROWS_AS(grad_check(f, TensorD({1}, {1.0}), 0.0), ContractError);
    const ScalarFunction<double> blow_up = [](const TensorD& x) {
      return sum(scale(x, 1e308));
    };
    CHECK_THROWS_AS(grad_check(blow_up, TensorD({1}, {10.0}), 1e-3), NumericError);
  }

  // Property: every differentiable op passes over 20 seeds.
  TEST_CASE("every op passes on randomized shapes") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(1000 + seed);
      const std::size_t n = 2 + seed % 4;
      const auto cot = rng.uniform_tensor<double>({n, 3}, 1.0);
      const auto other = rng.uniform_tensor<double>({n, 3}, 1.0);
      const auto x = rng.uniform_tensor<double>({n, 3}, 1.0);
      auto weighted = [&](const TensorD& y) { return sum(mul(y, cot)); };

      CHECK(grad_check<double>([&](const TensorD& v) { return weighted(relu(v)); }, x, 1e-5) < 1e-3);
      CHECK(grad_check<double>([&](const TensorD& v) { return weighted(sigmoid(v)); }, x, 1e-5) <
            1e-3);
      CHECK(grad_check<double>(
                [&](const TensorD& v) { return weighted(activation(v, Activation::tanh)); }, x,
                1e-5) < 1e-3);
      CHECK(grad_check<double>([&](const TensorD& v) { return mse(v, other); }, x, 1e-5) < 1e-3);
      CHECK(grad_check<double>([&](const TensorD& v) { return weighted(add(v, other)); }, x,
                               1e-5) < 1e-3);
      CHECK(grad_check<double>([&](const TensorD& v) { return weighted(sub(other, v)); }, x,
                               1e-5) < 1e-3);
      CHECK(grad_check<double>([&](const TensorD& v) { return weighted(mul(v, other)); }, x,
                               1e-5) < 1e-3);
      CHECK(grad_check<double>([&](const TensorD& v) { return weighted(scale(v, -1.7)); }, x,
                               1e-5) < 1e-3);
      CHECK(grad_check<double>([&](const TensorD& v) { return mean(mul(v, v)); }, x, 1e-5) <
            1e-3);
      const std::size_t axes[2] = {1, 0};
      const auto cot_t = rng.uniform_tensor<double>({3, n}, 1.0);
      CHECK(grad_check<double>(
                [&](const TensorD& v) { return sum(mul(permute(v, axes), cot_t)); }, x, 1e-5) <
            1e-3);
      CHECK(grad_check<double>(
                [&](const TensorD& v) { return sum(mul(reshape(v, {3, n}), cot_t)); }, x, 1e-5) <
            1e-3);
      const std::size_t rows[4] = {1, 0, 1, n - 1};
      const auto cot_g = rng.uniform_tensor<double>({4, 3}, 1.0);
      CHECK(grad_check<double>(
                [&](const TensorD& v) { return sum(mul(gather_rows(v, rows), cot_g)); }, x,
                1e-5) < 1e-3);

      const auto w = rng.uniform_tensor<double>({2, 3}, 1.0);
      const auto bias = rng.uniform_tensor<double>({2}, 1.0);
      const auto cot_l = rng.uniform_tensor<double>({n, 2}, 1.0);
      CHECK(grad_check<double>([&](const TensorD& v) { return sum(mul(linear(v, w, bias), cot_l)); },
                               x, 1e-5) < 1e-3);
      CHECK(grad_check<double>([&](const TensorD& v) { return sum(mul(linear(x, v, bias), cot_l)); },
                               w, 1e-5) < 1e-3);

      const auto vol = rng.uniform_tensor<double>({1 + seed % 2, 2, 4, 4, 5}, 1.0);
      const auto kern = rng.uniform_tensor<double>({3, 2, 3, 3, 3}, 0.5);
      const auto kb = rng.uniform_tensor<double>({3}, 0.5);
      const auto conv_o = opts(1 + seed % 2, 1);
      const auto probe = conv3d(vol, kern, kb, conv_o);
      const auto cot_c = rng.uniform_tensor<double>(probe.shape(), 1.0);
      CHECK(grad_check<double>(
                [&](const TensorD& v) { return sum(mul(conv3d(v, kern, kb, conv_o), cot_c)); },
                vol, 1e-5) < 1e-3);
      CHECK(grad_check<double>(
                [&](const TensorD& v) { return sum(mul(conv3d(vol, v, kb, conv_o), cot_c)); },
                kern, 1e-5) < 1e-3);
      CHECK(grad_check<double>(
                [&](const TensorD& v) { return sum(mul(conv3d(vol, kern, v, conv_o), cot_c)); },
                kb, 1e-5) < 1e-3);

      const auto tkern = rng.uniform_tensor<double>({2, 3, 4, 4, 4}, 0.5);
      const auto tb = rng.uniform_tensor<double>({3}, 0.5);
      const auto small = rng.uniform_tensor<double>({1, 2, 2, 3, 2}, 1.0);
      const auto tprobe = conv3d_transpose(small, tkern, tb, opts(2, 1));
      const auto cot_t2 = rng.uniform_tensor<double>(tprobe.shape(), 1.0);
      CHECK(grad_check<double>(
                [&](const TensorD& v) {
                  return sum(mul(conv3d_transpose(v, tkern, tb, opts(2, 1)), cot_t2));
                },
                small, 1e-5) < 1e-3);
      CHECK(grad_check<double>(
                [&](const TensorD& v) {
                  return sum(mul(conv3d_transpose(small, v, tb, opts(2, 1)), cot_t2));
                },
                tkern, 1e-5) < 1e-3);
      CHECK(grad_check<double>(
                [&](const TensorD& v) {
                  return sum(mul(conv3d_transpose(small, tkern, v, opts(2, 1)), cot_t2));
                },
                tb, 1e-5) < 1e-3);
    }
  }
}

TEST_SUITE("optimizer") {
  TEST_CASE("plain step") {
    std::vector<NamedTensor<float>> params{{"p", Tensor({1}, {1}, true)}};
    params[0].tensor.zero_grad();
    params[0].tensor.mutable_grad()[0] = 2.0f;
    Optimizer<float> opt({OptimizerMode::gradient_descent, 0.1});
    opt.step(params);
    CHECK(params[0].tensor.data()[0] == doctest::Approx(0.8f));
    CHECK(!params[0].tensor.has_grad());
    CHECK(opt.steps() == 1);
  }

  TEST_CASE("zero gradient leaves parameter unchanged") {
    for (auto mode : {OptimizerMode::gradient_descent, OptimizerMode::adaptive}) {
      std::vector<NamedTensor<float>> params{{"p", Tensor({2}, {1.25f, -3.5f}, true)}};
      params[0].tensor.zero_grad();
      Optimizer<float> opt({mode, 0.1});
      opt.step(params);
      CHECK(params[0].tensor.data()[0] == 1.25f);
      CHECK(params[0].tensor.data()[1] == -3.5f);
    }
  }

  TEST_CASE("adaptive mode matches a hand-rolled reference loop") {
    std::vector<NamedTensor<double>> params{{"p", TensorD({1}, {1.0}, true)}};
    Optimizer<double> opt({OptimizerMode::adaptive, 0.1, 0.9, 0.999, 1e-8});
    double p = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 3; ++t) {
      params[0].tensor.zero_grad();
      params[0].tensor.mutable_grad()[0] = 1.0;
      opt.step(params);
      m = 0.9 * m + 0.1 * 1.0;
      v = 0.999 * v + 0.001 * 1.0;
      const double mh = m / (1.0 - std::pow(0.9, t));
      const double vh = v / (1.0 - std::pow(0.999, t));
      p -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
      CHECK(std::abs(params[0].tensor.data()[0] - p) < 1e-6);
    }
    CHECK(opt.steps() == 3);
  }

  TEST_CASE("missing gradient names the parameter and changes nothing") {
    std::vector<NamedTensor<float>> params{{"ok", Tensor({1}, {1}, true)},
                                           {"encoder.conv1.weight", Tensor({1}, {2}, true)}};
    params[0].tensor.zero_grad();
    params[0].tensor.mutable_grad()[0] = 1.0f;
    Optimizer<float> opt({OptimizerMode::gradient_descent, 0.1});
    CHECK_THROWS_WITH_AS(opt.step(params), doctest::Contains("encoder.conv1.weight"),
                         ContractError);
    CHECK(params[0].tensor.data()[0] == 1.0f);
    CHECK(opt.steps() == 0);
  }

  TEST_CASE("plain mode strictly decreases a convex quadratic") {
    std::vector<NamedTensor<float>> params{{"p", Tensor({3}, {1.0f, -2.0f, 0.5f}, true)}};
    Optimizer<float> opt({OptimizerMode::gradient_descent, 0.1});
    double previous = INFINITY;
    for (int i = 0; i < 25; ++i) {
      auto loss = sum(mul(params[0].tensor, params[0].tensor));
      CHECK(loss.item() < previous);
      previous = loss.item();
      backward(loss);
      opt.step(params);
    }
  }
}
