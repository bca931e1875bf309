#include "v2a/vqvae.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "v2a/error.hpp"

namespace v2a {
namespace {

template <typename T>
BasicTensor<T> param(Rng& rng, Shape shape, double bound) {
  return rng.uniform_tensor<T>(std::move(shape), bound, true);
}

double fan_bound(std::size_t channels) {
  return 1.0 / std::sqrt(static_cast<double>(channels * kConvKernel * kConvKernel * kConvKernel));
}

Shape kernel_shape(std::size_t a, std::size_t b) { return {a, b, kConvKernel, kConvKernel, kConvKernel}; }

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* what) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(what) + ": shapes " + to_string(a.shape()) + " and " +
                         to_string(b.shape()) + " differ");
}

}  // namespace

void VqVaeConfig::validate() const {
  if (codebook_size < 2) throw ConfigError("codebook size must be at least 2");
  if (embedding_dim < 1) throw ConfigError("embedding dimension must be at least 1");
  if (hidden_channels < 1) throw ConfigError("hidden channel count must be at least 1");
  if (!std::isfinite(beta) || beta < 0) throw ConfigError("beta must be finite and non-negative");
}

template <typename T>
EncoderNet<T> EncoderNet<T>::init(Rng& rng, std::size_t hidden, std::size_t dim) {
  EncoderNet net;
  net.conv1_weight = param<T>(rng, kernel_shape(hidden, 3), fan_bound(3));
  net.conv1_bias = param<T>(rng, {hidden}, fan_bound(3));
  net.conv2_weight = param<T>(rng, kernel_shape(dim, hidden), fan_bound(hidden));
  net.conv2_bias = param<T>(rng, {dim}, fan_bound(hidden));
  return net;
}

template <typename T>
Codebook<T> Codebook<T>::init(Rng& rng, std::size_t size, std::size_t dim) {
  return Codebook{param<T>(rng, {size, dim}, 1.0 / static_cast<double>(size))};
}

template <typename T>
ReconDecoderNet<T> ReconDecoderNet<T>::init(Rng& rng, std::size_t dim, std::size_t hidden) {
  ReconDecoderNet net;
  net.deconv1_weight = param<T>(rng, kernel_shape(dim, hidden), fan_bound(dim));
  net.deconv1_bias = param<T>(rng, {hidden}, fan_bound(dim));
  net.deconv2_weight = param<T>(rng, kernel_shape(hidden, 3), fan_bound(hidden));
  net.deconv2_bias = param<T>(rng, {3}, fan_bound(hidden));
  return net;
}

template <typename T>
VqVae<T> VqVae<T>::create(const VqVaeConfig& config, std::uint64_t seed) {
  config.validate();
  auto enc = Rng::substream(seed, static_cast<std::uint64_t>(SeedStream::encoder));
  auto cb = Rng::substream(seed, static_cast<std::uint64_t>(SeedStream::codebook));
  auto dec = Rng::substream(seed, static_cast<std::uint64_t>(SeedStream::recon_decoder));
  return VqVae{config, EncoderNet<T>::init(enc, config.hidden_channels, config.embedding_dim),
               Codebook<T>::init(cb, config.codebook_size, config.embedding_dim),
               ReconDecoderNet<T>::init(dec, config.embedding_dim, config.hidden_channels)};
}

template <typename T>
std::vector<NamedTensor<T>> VqVae<T>::parameters() const {
  return {{"encoder.conv1.weight", encoder.conv1_weight},
          {"encoder.conv1.bias", encoder.conv1_bias},
          {"encoder.conv2.weight", encoder.conv2_weight},
          {"encoder.conv2.bias", encoder.conv2_bias},
          {"codebook.embeddings", codebook.embeddings},
          {"recon_decoder.deconv1.weight", decoder.deconv1_weight},
          {"recon_decoder.deconv1.bias", decoder.deconv1_bias},
          {"recon_decoder.deconv2.weight", decoder.deconv2_weight},
          {"recon_decoder.deconv2.bias", decoder.deconv2_bias}};
}

template <typename T>
std::vector<BasicTensor<T>*> VqVae<T>::parameter_slots() {
  return {&encoder.conv1_weight,   &encoder.conv1_bias,     &encoder.conv2_weight,
          &encoder.conv2_bias,     &codebook.embeddings,    &decoder.deconv1_weight,
          &decoder.deconv1_bias,   &decoder.deconv2_weight, &decoder.deconv2_bias};
}

template <typename T>
BasicTensor<T> encode(const EncoderNet<T>& net, const BasicTensor<T>& video) {
  if (video.rank() != 5 || video.dim(1) != 3)
    throw DimensionError("encode: expected video [B, 3, T, H, W], got " + to_string(video.shape()));
  static constexpr const char* kAxes[] = {"T", "H", "W"};
  for (std::size_t a = 0; a < 3; ++a) {
    const std::size_t extent = video.dim(2 + a);
    if (extent < kDownsample || extent % kDownsample != 0)
      throw ConfigError(std::string("encode: axis ") + kAxes[a] + " has extent " +
                        std::to_string(extent) + ", which is not a positive multiple of 4");
  }
  const auto h = relu(conv3d(video, net.conv1_weight, net.conv1_bias, block_options()));
  return relu(conv3d(h, net.conv2_weight, net.conv2_bias, block_options()));
}

template <typename T>
Quantized<T> quantize(const BasicTensor<T>& z_e, const Codebook<T>& codebook) {
  if (z_e.rank() != 5 || z_e.dim(1) != codebook.dim())
    throw DimensionError("quantize: latent " + to_string(z_e.shape()) +
                         " does not match codebook dimension " + std::to_string(codebook.dim()));
  const std::size_t b = z_e.dim(0), d = z_e.dim(1);
  const std::size_t spatial = z_e.dim(2) * z_e.dim(3) * z_e.dim(4);
  const std::size_t k = codebook.size();
  const auto z = z_e.data();
  const auto e = codebook.embeddings.data();

  CodeGrid codes{b, z_e.dim(2), z_e.dim(3), z_e.dim(4), k, std::vector<std::uint32_t>(b * spatial)};
  std::vector<double> site(d);
  for (std::size_t n = 0; n < b; ++n)
    for (std::size_t s = 0; s < spatial; ++s) {
      for (std::size_t c = 0; c < d; ++c) site[c] = z[(n * d + c) * spatial + s];
      double best = std::numeric_limits<double>::infinity();
      std::uint32_t best_k = 0;
      for (std::size_t j = 0; j < k; ++j) {
        double dist = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          const double diff = site[c] - static_cast<double>(e[j * d + c]);
          dist += diff * diff;
        }
        if (dist < best) {
          best = dist;
          best_k = static_cast<std::uint32_t>(j);
        }
      }
      codes.indices[n * spatial + s] = best_k;
    }
  auto z_q = lookup(codebook, codes);
  return {std::move(codes), std::move(z_q)};
}

template <typename T>
BasicTensor<T> lookup(const Codebook<T>& codebook, const CodeGrid& codes) {
  codes.validate();
  if (codes.codebook_size != codebook.size())
    throw ContractError("lookup: codes refer to a codebook of size " +
                        std::to_string(codes.codebook_size) + ", table has " +
                        std::to_string(codebook.size()));
  const std::vector<std::size_t> rows(codes.indices.begin(), codes.indices.end());
  const auto flat = gather_rows(codebook.embeddings, rows);
  const auto grid =
      reshape(flat, {codes.batch, codes.time, codes.height, codes.width, codebook.dim()});
  static constexpr std::size_t kToChannelsFirst[] = {0, 4, 1, 2, 3};
  return permute(grid, kToChannelsFirst);
}

template <typename T>
VqLosses<T> vq_losses(const BasicTensor<T>& z_e, const BasicTensor<T>& z_q) {
  require_same_shape(z_e, z_q, "vq_losses");
  return {mse(z_q, z_e.detach()), mse(z_e, z_q.detach())};
}

template <typename T>
BasicTensor<T> straight_through(const BasicTensor<T>& z_e, const BasicTensor<T>& z_q) {
  require_same_shape(z_e, z_q, "straight_through");
  BasicTensor<T> out(z_q.shape(), std::vector<T>(z_q.data().begin(), z_q.data().end()));
  auto& tape = Tape<T>::current();
  if (tape.wants({&z_e})) {
    tape.record(out, {z_e}, [](std::span<const T> g, std::span<std::span<T>> gi) {
      for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> reconstruct(const ReconDecoderNet<T>& net, const BasicTensor<T>& z_q) {
  if (z_q.rank() != 5 || z_q.dim(1) != net.deconv1_weight.dim(0))
    throw DimensionError("reconstruct: expected [B, " + std::to_string(net.deconv1_weight.dim(0)) +
                         ", T', H', W'], got " + to_string(z_q.shape()));
  const auto h = relu(conv3d_transpose(z_q, net.deconv1_weight, net.deconv1_bias, block_options()));
  return sigmoid(conv3d_transpose(h, net.deconv2_weight, net.deconv2_bias, block_options()));
}

template <typename T>
BasicTensor<T> combine_losses(const BasicTensor<T>& recon, const BasicTensor<T>& quant,
                              const BasicTensor<T>& commit, double beta) {
  auto total = add(recon, quant);
  if (beta != 0.0) total = add(total, scale(commit, beta));
  return total;
}

template <typename T>
VqVaeForward<T> vqvae_forward(const VqVae<T>& model, const BasicTensor<T>& video) {
  VqVaeForward<T> f;
  f.z_e = encode(model.encoder, video);
  f.quantized = quantize(f.z_e, model.codebook);
  const auto losses = vq_losses(f.z_e, f.quantized.z_q);
  f.reconstruction = reconstruct(model.decoder, straight_through(f.z_e, f.quantized.z_q));
  f.recon_loss = mse(f.reconstruction, video.detach());
  f.quant_loss = losses.quantization;
  f.commit_loss = losses.commitment;
  f.total = combine_losses(f.recon_loss, f.quant_loss, f.commit_loss, model.config.beta);
  return f;
}

template <typename T>
FrozenAssignment<T> freeze_assignment(const VqVae<T>& model, const BasicTensor<T>& video) {
  NoGradGuard<T> no_grad;
  const auto z_e = encode(model.encoder, video);
  auto q = quantize(z_e, model.codebook);
  auto offset = sub(q.z_q, z_e);
  return {std::move(q.codes), std::move(offset), z_e.detach(), q.z_q.detach()};
}

template <typename T>
BasicTensor<T> vqvae_frozen_loss(const VqVae<T>& model, const BasicTensor<T>& video,
                                 const FrozenAssignment<T>& frozen) {
  const auto z_e = encode(model.encoder, video);
  const auto z_q = lookup(model.codebook, frozen.codes);
  const auto quant = mse(z_q, frozen.z_e.detach());
  const auto commit = mse(z_e, frozen.z_q.detach());
  const auto recon = mse(reconstruct(model.decoder, add(z_e, frozen.offset.detach())), video.detach());
  return combine_losses(recon, quant, commit, model.config.beta);
}

template <typename T>
VqVaeLosses vqvae_train_step(VqVae<T>& model, const BasicTensor<T>& video, Optimizer<T>& optimizer) {
  auto& tape = Tape<T>::current();
  try {
    const auto f = vqvae_forward(model, video);
    VqVaeLosses out{f.recon_loss.item(), f.quant_loss.item(), f.commit_loss.item(), f.total.item()};
    backward(f.total);
    auto params = model.parameters();
    optimizer.step(params);
    return out;
  } catch (const NumericError& e) {
    tape.clear();
    for (auto& p : model.parameters()) p.tensor.clear_grad();
    throw NumericError(std::string("vqvae step aborted: ") + e.what());
  } catch (...) {
    tape.clear();
    for (auto& p : model.parameters()) p.tensor.clear_grad();
    throw;
  }
}

Tensor video_batch_tensor(const media::Batch& batch) {
  const auto& first = batch[0].video;
  const std::size_t t = first.frames(), h = first.height(), w = first.width();
  const std::size_t plane = h * w;
  std::vector<float> data(batch.size() * 3 * t * plane);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& clip = batch[b].video;
    for (std::size_t f = 0; f < t; ++f) {
      const auto frame = clip.frame(f);
      for (std::size_t c = 0; c < 3; ++c)
        std::copy_n(frame.begin() + static_cast<std::ptrdiff_t>(c * plane), plane,
                    data.begin() + static_cast<std::ptrdiff_t>(((b * 3 + c) * t + f) * plane));
    }
  }
  return Tensor({batch.size(), 3, t, h, w}, std::move(data));
}

#define V2A_INSTANTIATE_VQVAE(T)                                                                \
  template struct EncoderNet<T>;                                                               \
  template struct Codebook<T>;                                                                 \
  template struct ReconDecoderNet<T>;                                                          \
  template struct VqVae<T>;                                                                    \
  template BasicTensor<T> encode(const EncoderNet<T>&, const BasicTensor<T>&);                 \
  template Quantized<T> quantize(const BasicTensor<T>&, const Codebook<T>&);                   \
  template BasicTensor<T> lookup(const Codebook<T>&, const CodeGrid&);                         \
  template VqLosses<T> vq_losses(const BasicTensor<T>&, const BasicTensor<T>&);                \
  template BasicTensor<T> straight_through(const BasicTensor<T>&, const BasicTensor<T>&);      \
  template BasicTensor<T> reconstruct(const ReconDecoderNet<T>&, const BasicTensor<T>&);       \
  template VqVaeForward<T> vqvae_forward(const VqVae<T>&, const BasicTensor<T>&);              \
  template FrozenAssignment<T> freeze_assignment(const VqVae<T>&, const BasicTensor<T>&);      \
  template BasicTensor<T> vqvae_frozen_loss(const VqVae<T>&, const BasicTensor<T>&,            \
                                            const FrozenAssignment<T>&);                       \
  template VqVaeLosses vqvae_train_step(VqVae<T>&, const BasicTensor<T>&, Optimizer<T>&);

V2A_INSTANTIATE_VQVAE(float)
V2A_INSTANTIATE_VQVAE(double)

#undef V2A_INSTANTIATE_VQVAE

}  // namespace v2a
