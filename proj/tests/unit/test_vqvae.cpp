#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "v2a/error.hpp"
#include "v2a/grad_check.hpp"
#include "v2a/vqvae.hpp"

using namespace v2a;

namespace {

// Exhaustive nearest neighbour over a [B, D, S] latent and [K, D] table.
std::vector<std::uint32_t> brute_force_codes(std::span<const double> z, std::size_t b, std::size_t d,
                                             std::size_t s, std::span<const double> e, std::size_t k) {
  std::vector<std::uint32_t> out;
  for (std::size_t n = 0; n < b; ++n)
    for (std::size_t site = 0; site < s; ++site) {
      std::vector<double> dist(k, 0.0);
      for (std::size_t j = 0; j < k; ++j)
        for (std::size_t c = 0; c < d; ++c) {
          const double diff = z[(n * d + c) * s + site] - e[j * d + c];
          dist[j] += diff * diff;
        }
      out.push_back(static_cast<std::uint32_t>(std::min_element(dist.begin(), dist.end()) - dist.begin()));
    }
  return out;
}

VqVaeConfig tiny_config(double beta = 0.25) {
  VqVaeConfig c;
  c.hidden_channels = 4;
  c.embedding_dim = 4;
  c.codebook_size = 8;
  c.beta = beta;
  return c;
}

template <typename T>
BasicTensor<T> random_video(std::uint64_t seed, Shape shape) {
  Rng rng(seed);
  std::vector<T> v(numel(shape));
  for (auto& x : v) x = static_cast<T>(rng.uniform(0.0, 1.0));
  return BasicTensor<T>(std::move(shape), std::move(v));
}

template <typename T>
std::vector<T> copy(const BasicTensor<T>& t) {
  return {t.data().begin(), t.data().end()};
}

}  // namespace

TEST_SUITE("encoder") {
  TEST_CASE("full-scale latent shape") {
    NoGradGuard<float> no_grad;
    auto model = VqVae<float>::create(VqVaeConfig{}, 1);
    const auto z = encode(model.encoder, Tensor::zeros({2, 3, 8, 144, 256}));
    CHECK(z.shape() == Shape{2, 64, 2, 36, 64});
  }

  TEST_CASE("zero video gives a constant interior field") {
    auto model = VqVae<float>::create(tiny_config(), 3);
    // Positive biases so the field is not trivially zero.
    for (auto& v : model.encoder.conv1_bias.mutable_data()) v = std::abs(v) + 0.1f;
    for (auto& v : model.encoder.conv2_bias.mutable_data()) v = std::abs(v) + 0.1f;
    const auto z = encode(model.encoder, Tensor::zeros({1, 3, 16, 16, 16}));
    REQUIRE(z.shape() == Shape{1, 4, 4, 4, 4});
    for (std::size_t c = 0; c < 4; ++c) {
      const float ref = z.data()[((c * 4 + 1) * 4 + 1) * 4 + 1];
      CHECK(ref > 0.0f);
      for (std::size_t t = 1; t < 3; ++t)
        for (std::size_t y = 1; y < 3; ++y)
          for (std::size_t x = 1; x < 3; ++x) CHECK(z.data()[((c * 4 + t) * 4 + y) * 4 + x] == ref);
    }
  }

  TEST_CASE("indivisible extents name the axis") {
    auto model = VqVae<float>::create(tiny_config(), 3);
    auto message = [&](Shape s) {
      try {
        encode(model.encoder, Tensor::zeros(s));
      } catch (const ConfigError& e) {
        return std::string(e.what());
      }
      return std::string();
    };
    CHECK(message({1, 3, 6, 8, 8}).find("axis T") != std::string::npos);
    CHECK(message({1, 3, 8, 10, 8}).find("axis H") != std::string::npos);
    CHECK(message({1, 3, 8, 8, 2}).find("axis W") != std::string::npos);
    CHECK_THROWS_AS(encode(model.encoder, Tensor::zeros({1, 1, 8, 8, 8})), DimensionError);
  }
}

TEST_SUITE("quantize") {
  Codebook<double> table(std::size_t k, std::size_t d, std::vector<double> v) {
    return {TensorD({k, d}, std::move(v))};
  }

  TEST_CASE("nearest and tie-break") {
    const auto cb = table(2, 2, {0, 0, 1, 1});
    CHECK(quantize(TensorD({1, 2, 1, 1, 1}, {0.2, 0.1}), cb).codes.indices[0] == 0);
    CHECK(quantize(TensorD({1, 2, 1, 1, 1}, {0.9, 0.7}), cb).codes.indices[0] == 1);
    CHECK(quantize(TensorD({1, 2, 1, 1, 1}, {0.5, 0.5}), cb).codes.indices[0] == 0);
    const auto dup = table(3, 2, {5, 5, 1, 1, 1, 1});
    CHECK(quantize(TensorD({1, 2, 1, 1, 1}, {1, 1}), dup).codes.indices[0] == 1);
  }

  TEST_CASE("z_q holds the chosen rows") {
    const auto cb = table(3, 2, {0, 0, 1, 2, -3, 4});
    const auto q = quantize(TensorD({1, 2, 1, 1, 2}, {0.9, -2.5, 2.1, 3.9}), cb);
    CHECK(q.codes.indices == std::vector<std::uint32_t>{1, 2});
    CHECK(copy(q.z_q) == std::vector<double>{1, -3, 2, 4});
  }

  TEST_CASE("matches exhaustive search on random instances") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed);
      const std::size_t k = 2 + rng.next() % 63, d = 1 + rng.next() % 16;
      const auto cb = Codebook<double>::init(rng, k, d);
      const auto z = rng.uniform_tensor<double>({2, d, 2, 5, 5}, 2.0 / k);
      const auto q = quantize(z, cb);
      CHECK(q.codes.indices == brute_force_codes(z.data(), 2, d, 50, cb.embeddings.data(), k));
      // Nearest property against every row.
      for (std::size_t s = 0; s < 100; ++s) {
        const std::size_t n = s / 50, site = s % 50;
        auto dist = [&](std::size_t j) {
          double acc = 0;
          for (std::size_t c = 0; c < d; ++c) {
            const double diff = z.data()[(n * d + c) * 50 + site] - cb.embeddings.data()[j * d + c];
            acc += diff * diff;
          }
          return acc;
        };
        for (std::size_t j = 0; j < k; ++j) CHECK(dist(q.codes.indices[s]) <= dist(j));
      }
    }
  }

  TEST_CASE("permuting the codebook permutes the indices") {
    Rng rng(77);
    const std::size_t k = 16, d = 3;
    const auto cb = Codebook<double>::init(rng, k, d);
    const auto z = rng.uniform_tensor<double>({1, d, 2, 4, 4}, 1.0 / k);
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937(5));
    std::vector<double> shuffled(k * d);
    for (std::size_t j = 0; j < k; ++j)
      std::copy_n(cb.embeddings.data().begin() + perm[j] * d, d, shuffled.begin() + j * d);
    const auto a = quantize(z, cb).codes.indices;
    const auto b = quantize(z, Codebook<double>{TensorD({k, d}, shuffled)}).codes.indices;
    for (std::size_t s = 0; s < a.size(); ++s) CHECK(perm[b[s]] == a[s]);
  }

  TEST_CASE("deterministic") {
    Rng rng(2);
    const auto cb = Codebook<float>::init(rng, 32, 8);
    const auto z = rng.uniform_tensor<float>({2, 8, 1, 3, 3}, 0.05);
    CHECK(quantize(z, cb).codes.indices == quantize(z, cb).codes.indices);
  }

  TEST_CASE("dimension mismatch") {
    Rng rng(2);
    const auto cb = Codebook<float>::init(rng, 4, 3);
    CHECK_THROWS_AS(quantize(Tensor::zeros({1, 2, 1, 1, 1}), cb), DimensionError);
  }
}

TEST_SUITE("vq losses") {
  TEST_CASE("identical inputs give zero") {
    const TensorD z({1, 2, 1, 1, 1}, {0.3, -0.2});
    const auto l = vq_losses(z, z.clone());
    CHECK(l.quantization.item() == 0.0);
    CHECK(l.commitment.item() == 0.0);
  }

  TEST_CASE("single site hand value") {
    const auto l = vq_losses(TensorD({1, 2, 1, 1, 1}, {1, 0}), TensorD({1, 2, 1, 1, 1}, {0, 0}));
    CHECK(l.quantization.item() == 0.5);
    CHECK(l.commitment.item() == 0.5);
  }

  TEST_CASE("loop oracle") {
    Rng rng(4);
    const auto a = rng.uniform_tensor<float>({2, 3, 2, 2, 2}, 1.0);
    const auto b = rng.uniform_tensor<float>({2, 3, 2, 2, 2}, 1.0);
    double acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::pow(double(a.data()[i]) - b.data()[i], 2);
    acc /= a.size();
    const auto l = vq_losses(a, b);
    CHECK(l.quantization.item() == doctest::Approx(acc).epsilon(1e-6));
    CHECK(l.commitment.item() == doctest::Approx(acc).epsilon(1e-6));
  }

  TEST_CASE("gradient routing") {
    TensorD z_e({1, 2, 1, 1, 1}, {1, 0}, true);
    TensorD z_q({1, 2, 1, 1, 1}, {0, 0}, true);
    auto l = vq_losses(z_e, z_q);
    backward(l.quantization);
    CHECK(z_q.grad()[0] == -1.0);
    for (double g : z_e.grad()) CHECK(g == 0.0);
    z_q.clear_grad();
    z_e.clear_grad();
    l = vq_losses(z_e, z_q);
    backward(l.commitment);
    CHECK(z_e.grad()[0] == 1.0);
    for (double g : z_q.grad()) CHECK(g == 0.0);
  }

  TEST_CASE("shape mismatch") {
    CHECK_THROWS_AS(vq_losses(TensorD::zeros({1, 2}), TensorD::zeros({2, 1})), DimensionError);
  }
}

TEST_SUITE("straight-through") {
  TEST_CASE("forward is z_q bit for bit, backward is identity") {
    Rng rng(9);
    auto cb = Codebook<float>::init(rng, 8, 4);
    auto z_e = rng.uniform_tensor<float>({1, 4, 2, 2, 2}, 0.2, true);
    const auto q = quantize(z_e, cb);
    const auto out = straight_through(z_e, q.z_q);
    CHECK(std::equal(out.data().begin(), out.data().end(), q.z_q.data().begin()));
    backward(sum(out));
    for (float g : z_e.grad()) CHECK(g == 1.0f);
    for (float g : cb.embeddings.grad()) CHECK(g == 0.0f);
  }

  TEST_CASE("random cotangents pass through unchanged") {
    Rng rng(10);
    auto z_e = rng.uniform_tensor<double>({2, 3, 1, 2, 2}, 1.0, true);
    const auto z_q = rng.uniform_tensor<double>({2, 3, 1, 2, 2}, 1.0);
    const auto w = rng.uniform_tensor<double>({2, 3, 1, 2, 2}, 1.0);
    backward(sum(mul(straight_through(z_e, z_q), w)));
    CHECK(copy(TensorD(z_e.shape(), std::vector<double>(z_e.grad().begin(), z_e.grad().end()))) == copy(w));
  }
}

TEST_SUITE("reconstruct") {
  TEST_CASE("full-scale output shape") {
    NoGradGuard<float> no_grad;
    auto model = VqVae<float>::create(VqVaeConfig{}, 1);
    const auto y = reconstruct(model.decoder, Tensor::zeros({1, 64, 2, 36, 64}));
    CHECK(y.shape() == Shape{1, 3, 8, 144, 256});
  }

  TEST_CASE("zero network outputs one half") {
    auto model = VqVae<float>::create(tiny_config(), 1);
    for (auto* p : model.parameter_slots()) std::fill(p->mutable_data().begin(), p->mutable_data().end(), 0.0f);
    Rng rng(1);
    const auto y = reconstruct(model.decoder, rng.uniform_tensor<float>({1, 4, 1, 2, 2}, 1.0));
    for (float v : y.data()) CHECK(v == 0.5f);
  }

  TEST_CASE("property: outputs stay inside (0, 1)") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto model = VqVae<float>::create(tiny_config(), seed);
      Rng rng(seed);
      const auto y = reconstruct(model.decoder, rng.uniform_tensor<float>({1, 4, 1, 2, 2}, 50.0));
      for (float v : y.data()) CHECK((v > 0.0f && v < 1.0f));
    }
  }

  TEST_CASE("channel mismatch") {
    auto model = VqVae<float>::create(tiny_config(), 1);
    CHECK_THROWS_AS(reconstruct(model.decoder, Tensor::zeros({1, 5, 1, 2, 2})), DimensionError);
  }
}

TEST_SUITE("vqvae gradients") {
  TEST_CASE("frozen-assignment loss matches finite differences for every parameter") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      auto model = VqVae<double>::create(tiny_config(), seed);
      const auto video = random_video<double>(seed + 1000, {2, 3, 4, 8, 8});
      const auto frozen = freeze_assignment(model, video);
      // At the base point the surrogate equals the real loss.
      CHECK(vqvae_frozen_loss(model, video, frozen).item() ==
            doctest::Approx(vqvae_forward(model, video).total.item()).epsilon(1e-12));
      const auto names = model.parameters();
      const auto slots = model.parameter_slots();
      for (std::size_t i = 0; i < slots.size(); ++i) {
        ScalarFunction<double> f = [&, i](const TensorD& x) {
          auto local = model;
          *local.parameter_slots()[i] = x;
          return vqvae_frozen_loss(local, video, frozen);
        };
        const auto report = grad_check_report(f, *slots[i], 1e-5);
        CHECK_MESSAGE(report.max_relative_error < 1e-3, names[i].name);
      }
    }
  }

  TEST_CASE("straight-through gradient equals the surrogate gradient") {
    auto model = VqVae<double>::create(tiny_config(), 8);
    const auto video = random_video<double>(8, {1, 3, 4, 8, 8});
    backward(vqvae_forward(model, video).total);
    std::vector<std::vector<double>> real;
    for (auto& p : model.parameters()) {
      real.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
      p.tensor.clear_grad();
    }
    backward(vqvae_frozen_loss(model, video, freeze_assignment(model, video)));
    std::size_t i = 0;
    for (auto& p : model.parameters()) {
      for (std::size_t j = 0; j < real[i].size(); ++j)
        CHECK(p.tensor.grad()[j] == doctest::Approx(real[i][j]).epsilon(1e-9).scale(1e-12));
      ++i;
    }
  }
}

TEST_SUITE("vqvae training") {
  TEST_CASE("two steps on a fixed batch descend in at least 18 of 20 seeds") {
    int descended = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      VqVaeConfig cfg;
      cfg.embedding_dim = 4;
      cfg.codebook_size = 8;
      auto model = VqVae<float>::create(cfg, seed);
      Optimizer<float> opt;
      const auto video = random_video<float>(seed + 500, {1, 3, 4, 8, 8});
      const auto first = vqvae_train_step(model, video, opt);
      const auto second = vqvae_train_step(model, video, opt);
      descended += second.total < first.total;
    }
    CHECK(descended >= 18);
  }

  TEST_CASE("reported total combines the parts") {
    auto model = VqVae<float>::create(tiny_config(0.25), 4);
    Optimizer<float> opt;
    const auto l = vqvae_train_step(model, random_video<float>(4, {2, 3, 4, 8, 8}), opt);
    CHECK(l.total == doctest::Approx(l.recon + l.quant + 0.25 * l.commit).epsilon(1e-6));
  }

  TEST_CASE("beta zero matches dropping the commitment term, bit for bit") {
    auto model = VqVae<float>::create(tiny_config(0.0), 6);
    const auto video = random_video<float>(6, {1, 3, 4, 8, 8});
    backward(vqvae_forward(model, video).total);
    std::vector<std::vector<float>> with_beta;
    for (auto& p : model.parameters()) {
      with_beta.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
      p.tensor.clear_grad();
    }
    const auto f = vqvae_forward(model, video);
    backward(add(f.recon_loss, f.quant_loss));
    std::size_t i = 0;
    for (auto& p : model.parameters()) {
      CHECK_MESSAGE(std::equal(with_beta[i].begin(), with_beta[i].end(), p.tensor.grad().begin()), p.name);
      ++i;
    }
  }

  TEST_CASE("codes stay in range across steps") {
    auto model = VqVae<float>::create(tiny_config(), 12);
    Optimizer<float> opt(OptimizerSettings{OptimizerMode::adaptive, 0.05});
    const auto video = random_video<float>(12, {2, 3, 4, 8, 8});
    for (int s = 0; s < 10; ++s) {
      vqvae_train_step(model, video, opt);
      NoGradGuard<float> no_grad;
      const auto q = quantize(encode(model.encoder, video), model.codebook);
      for (auto idx : q.codes.indices) CHECK(idx < 8);
    }
  }

  TEST_CASE("non-finite input aborts the step without touching parameters") {
    auto model = VqVae<float>::create(tiny_config(), 2);
    Optimizer<float> opt;
    auto video = random_video<float>(2, {1, 3, 4, 8, 8});
    video.mutable_data()[5] = std::numeric_limits<float>::quiet_NaN();
    std::vector<std::vector<float>> before;
    for (auto& p : model.parameters()) before.push_back(copy(p.tensor));
    CHECK_THROWS_AS(vqvae_train_step(model, video, opt), NumericError);
    std::size_t i = 0;
    for (auto& p : model.parameters()) CHECK(copy(p.tensor) == before[i++]);
    CHECK(Tape<float>::current().size() == 0);
    CHECK(opt.steps() == 0);
  }

  TEST_CASE("batch overload") {
    using namespace media;
    std::vector<SegmentPair> pairs;
    for (int i = 0; i < 2; ++i)
      pairs.push_back({VideoClip::filled(4, 8, 8, Fps{}, 0.25f * (i + 1)), std::nullopt, false, 4, 0});
    const Batch batch(std::move(pairs));
    const auto t = video_batch_tensor(batch);
    CHECK(t.shape() == Shape{2, 3, 4, 8, 8});
    CHECK(t.data()[0] == 0.25f);
    CHECK(t.data().back() == 0.5f);
    auto model = VqVae<float>::create(tiny_config(), 2);
    Optimizer<float> opt;
    CHECK(std::isfinite(vqvae_train_step(model, batch, opt).total));
  }
}

TEST_SUITE("loss directions") {
  TEST_CASE("a small step on quantization loss moves the codebook toward the encodings") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto model = VqVae<float>::create(tiny_config(), seed);
      const auto video = random_video<float>(seed + 40, {1, 3, 4, 8, 8});
      Tensor z_e;
      {
        NoGradGuard<float> no_grad;
        z_e = encode(model.encoder, video);
      }
      const auto codes = quantize(z_e, model.codebook).codes;
      const auto before = vq_losses(z_e, lookup(model.codebook, codes)).quantization;
      backward(before);
      std::vector<NamedTensor<float>> cb{{"codebook", model.codebook.embeddings}};
      Optimizer<float>(OptimizerSettings{OptimizerMode::gradient_descent, 1e-2}).step(cb);
      NoGradGuard<float> no_grad;
      const auto after = vq_losses(z_e, lookup(model.codebook, codes)).quantization;
      CHECK(after.item() < before.item());
    }
  }

  TEST_CASE("a small step on commitment loss moves the encoder toward its codes") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto model = VqVae<float>::create(tiny_config(), seed);
      const auto video = random_video<float>(seed + 80, {1, 3, 4, 8, 8});
      const auto z_e = encode(model.encoder, video);
      const auto z_q = quantize(z_e, model.codebook).z_q.detach();
      const auto before = vq_losses(z_e, z_q).commitment;
      backward(before);
      auto params = model.parameters();
      std::vector<NamedTensor<float>> enc(params.begin(), params.begin() + 4);
      Optimizer<float>(OptimizerSettings{OptimizerMode::gradient_descent, 1e-2}).step(enc);
      NoGradGuard<float> no_grad;
      const auto after = vq_losses(encode(model.encoder, video), z_q).commitment;
      CHECK(after.item() < before.item());
    }
  }
}
