#include <algorithm>

#include "v2a/audiodec.hpp"
#include "v2a/grad_check.hpp"
#include "v2a/ops.hpp"
#include "v2a/pipeline.hpp"
#include "v2a/random.hpp"
#include "v2a/vqvae.hpp"

namespace v2a {
namespace {

using TensorD = BasicTensor<double>;
constexpr double kEpsilon = 1e-5;

Conv3dOptions conv_options(std::size_t stride, std::size_t pad) {
  return {{stride, stride, stride}, {pad, pad, pad}};
}

class Suite {
 public:
  void check(const std::string& name, const ScalarFunction<double>& f, const TensorD& x) {
    const double err = grad_check(f, x, kEpsilon);
    auto it = std::find_if(entries_.begin(), entries_.end(), [&](const auto& e) { return e.name == name; });
    if (it == entries_.end()) {
      entries_.push_back({name, err});
    } else {
      it->max_relative_error = std::max(it->max_relative_error, err);
    }
  }
  std::vector<GradCheckEntry> take() { return std::move(entries_); }

 private:
  std::vector<GradCheckEntry> entries_;
};

void check_ops(Suite& suite, Rng& rng, std::uint64_t seed) {
  const std::size_t n = 2 + seed % 4;
  const auto x = rng.uniform_tensor<double>({n, 3}, 1.0);
  const auto other = rng.uniform_tensor<double>({n, 3}, 1.0);
  const auto cot = rng.uniform_tensor<double>({n, 3}, 1.0);
  auto weighted = [cot](const TensorD& y) { return sum(mul(y, cot)); };

  suite.check("relu", [&](const TensorD& v) { return weighted(relu(v)); }, x);
  suite.check("sigmoid", [&](const TensorD& v) { return weighted(sigmoid(v)); }, x);
  suite.check("tanh", [&](const TensorD& v) { return weighted(activation(v, Activation::tanh)); }, x);
  suite.check("mse", [&](const TensorD& v) { return mse(v, other); }, x);
  suite.check("add", [&](const TensorD& v) { return weighted(add(v, other)); }, x);
  suite.check("sub", [&](const TensorD& v) { return weighted(sub(other, v)); }, x);
  suite.check("mul", [&](const TensorD& v) { return weighted(mul(v, other)); }, x);
  suite.check("scale", [&](const TensorD& v) { return weighted(scale(v, -1.7)); }, x);
  suite.check("mean", [&](const TensorD& v) { return mean(mul(v, v)); }, x);

  const std::size_t axes[2] = {1, 0};
  const auto cot_t = rng.uniform_tensor<double>({3, n}, 1.0);
  suite.check("permute", [&](const TensorD& v) { return sum(mul(permute(v, axes), cot_t)); }, x);
  suite.check("reshape", [&](const TensorD& v) { return sum(mul(reshape(v, {3, n}), cot_t)); }, x);
  const std::size_t rows[4] = {1, 0, 1, n - 1};
  const auto cot_g = rng.uniform_tensor<double>({4, 3}, 1.0);
  suite.check("gather_rows", [&](const TensorD& v) { return sum(mul(gather_rows(v, rows), cot_g)); }, x);

  const auto w = rng.uniform_tensor<double>({2, 3}, 1.0);
  const auto b = rng.uniform_tensor<double>({2}, 1.0);
  const auto cot_l = rng.uniform_tensor<double>({n, 2}, 1.0);
  suite.check("linear.input", [&](const TensorD& v) { return sum(mul(linear(v, w, b), cot_l)); }, x);
  suite.check("linear.weight", [&](const TensorD& v) { return sum(mul(linear(x, v, b), cot_l)); }, w);
  suite.check("linear.bias", [&](const TensorD& v) { return sum(mul(linear(x, w, v), cot_l)); }, b);

  const auto vol = rng.uniform_tensor<double>({1 + seed % 2, 2, 4, 4, 5}, 1.0);
  const auto kern = rng.uniform_tensor<double>({3, 2, 3, 3, 3}, 0.5);
  const auto kb = rng.uniform_tensor<double>({3}, 0.5);
  const auto co = conv_options(1 + seed % 2, 1);
  const auto cot_c = rng.uniform_tensor<double>(conv3d(vol, kern, kb, co).shape(), 1.0);
  suite.check("conv3d.input", [&](const TensorD& v) { return sum(mul(conv3d(v, kern, kb, co), cot_c)); }, vol);
  suite.check("conv3d.kernel", [&](const TensorD& v) { return sum(mul(conv3d(vol, v, kb, co), cot_c)); }, kern);
  suite.check("conv3d.bias", [&](const TensorD& v) { return sum(mul(conv3d(vol, kern, v, co), cot_c)); }, kb);

  const auto tk = rng.uniform_tensor<double>({2, 3, 4, 4, 4}, 0.5);
  const auto tb = rng.uniform_tensor<double>({3}, 0.5);
  const auto small = rng.uniform_tensor<double>({1, 2, 2, 3, 2}, 1.0);
  const auto to = conv_options(2, 1);
  const auto cot_d = rng.uniform_tensor<double>(conv3d_transpose(small, tk, tb, to).shape(), 1.0);
  suite.check("conv3d_transpose.input",
              [&](const TensorD& v) { return sum(mul(conv3d_transpose(v, tk, tb, to), cot_d)); }, small);
  suite.check("conv3d_transpose.kernel",
              [&](const TensorD& v) { return sum(mul(conv3d_transpose(small, v, tb, to), cot_d)); }, tk);
  suite.check("conv3d_transpose.bias",
              [&](const TensorD& v) { return sum(mul(conv3d_transpose(small, tk, v, to), cot_d)); }, tb);
}

void check_vqvae(Suite& suite, std::uint64_t seed) {
  VqVaeConfig cfg;
  cfg.hidden_channels = 4;
  cfg.embedding_dim = 4;
  cfg.codebook_size = 8;
  auto model = VqVae<double>::create(cfg, seed);
  Rng rng(seed + 1000);
  std::vector<double> values(2 * 3 * 4 * 8 * 8);
  for (auto& v : values) v = rng.uniform(0.0, 1.0);
  const TensorD video({2, 3, 4, 8, 8}, std::move(values));
  const auto frozen = freeze_assignment(model, video);
  const auto names = model.parameters();
  const auto slots = model.parameter_slots();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    suite.check(
        "vqvae." + names[i].name,
        [&, i](const TensorD& x) {
          auto local = model;
          *local.parameter_slots()[i] = x;
          return vqvae_frozen_loss(local, video, frozen);
        },
        *slots[i]);
  }
}

void check_audio_decoder(Suite& suite, Rng& rng, std::uint64_t seed) {
  auto net = AudioDecoderNet<double>::create(2 * 2 * 2, {5}, 6, seed);
  const auto z = rng.uniform_tensor<double>({2, 2, 1, 2, 2}, 1.0);
  const auto target = rng.uniform_tensor<double>({2, 6}, 0.7);
  const auto names = net.parameters();
  const auto slots = net.parameter_slots();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    suite.check(
        names[i].name,
        [&, i](const TensorD& x) {
          auto local = net;
          *local.parameter_slots()[i] = x;
          return mse(synthesize(local, z), target);
        },
        *slots[i]);
  }
}

}  // namespace

std::vector<GradCheckEntry> run_grad_check_suite(std::uint64_t seed) {
  Suite suite;
  Rng rng(seed);
  check_ops(suite, rng, seed);
  check_vqvae(suite, seed);
  check_audio_decoder(suite, rng, seed);
  return suite.take();
}

}  // namespace v2a
