#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "v2a/code_grid.hpp"
#include "v2a/media.hpp"
#include "v2a/ops.hpp"
#include "v2a/optimizer.hpp"
#include "v2a/random.hpp"
#include "v2a/tensor.hpp"

namespace v2a {

struct VqVaeConfig {
  std::size_t hidden_channels = 32;
  std::size_t embedding_dim = 64;   // D
  std::size_t codebook_size = 128;  // K
  double beta = 0.25;

  // Throws ConfigError on K < 2, D < 1, hidden < 1 or a negative / non-finite beta.
  void validate() const;
};

// Every conv block uses kernel 4, stride 2, padding 1, halving each extent.
inline constexpr std::size_t kConvKernel = 4;
inline constexpr std::size_t kDownsample = 4;  // two halvings
inline Conv3dOptions block_options() { return {{2, 2, 2}, {1, 1, 1}}; }

// conv(3 -> hidden) + ReLU, conv(hidden -> D) + ReLU.
template <typename T>
struct EncoderNet {
  BasicTensor<T> conv1_weight, conv1_bias, conv2_weight, conv2_bias;

  static EncoderNet init(Rng& rng, std::size_t hidden, std::size_t dim);
  std::size_t dim() const { return conv2_weight.dim(0); }
};

// K x D table of embedding vectors.
template <typename T>
struct Codebook {
  BasicTensor<T> embeddings;

  // Uniform in +/- 1/K.
  static Codebook init(Rng& rng, std::size_t size, std::size_t dim);
  std::size_t size() const { return embeddings.dim(0); }
  std::size_t dim() const { return embeddings.dim(1); }
};

// transposed conv(D -> hidden) + ReLU, transposed conv(hidden -> 3) + Sigmoid.
template <typename T>
struct ReconDecoderNet {
  BasicTensor<T> deconv1_weight, deconv1_bias, deconv2_weight, deconv2_bias;

  static ReconDecoderNet init(Rng& rng, std::size_t dim, std::size_t hidden);
};

template <typename T>
struct VqVae {
  VqVaeConfig config;
  EncoderNet<T> encoder;
  Codebook<T> codebook;
  ReconDecoderNet<T> decoder;

  // Each component draws from its own substream of `seed`.
  static VqVae create(const VqVaeConfig& config, std::uint64_t seed);

  // Stable order: encoder, codebook, decoder. Names are "encoder.conv1.weight"
  // and so on.
  std::vector<NamedTensor<T>> parameters() const;
  // Same order as parameters(); lets callers substitute a tensor.
  std::vector<BasicTensor<T>*> parameter_slots();
};

// video[B, 3, T, H, W] -> z_e[B, D, T/4, H/4, W/4]. T, H and W must be
// multiples of 4 (ConfigError naming the axis otherwise).
template <typename T>
BasicTensor<T> encode(const EncoderNet<T>& net, const BasicTensor<T>& video);

template <typename T>
struct Quantized {
  CodeGrid codes;
  BasicTensor<T> z_q;  // same shape as z_e; differentiable w.r.t. the codebook
};

// Nearest embedding per site by squared Euclidean distance; ties go to the
// lowest index.
template <typename T>
Quantized<T> quantize(const BasicTensor<T>& z_e, const Codebook<T>& codebook);

// z_q[B, D, T', H', W'] for given codes; gradient flows to the codebook.
template <typename T>
BasicTensor<T> lookup(const Codebook<T>& codebook, const CodeGrid& codes);

template <typename T>
struct VqLosses {
  BasicTensor<T> quantization;  // mse(z_q, detach(z_e)); reaches the codebook only
  BasicTensor<T> commitment;    // mse(z_e, detach(z_q)); reaches the encoder only
};

template <typename T>
VqLosses<T> vq_losses(const BasicTensor<T>& z_e, const BasicTensor<T>& z_q);

// Forward value is z_q, bit for bit. Backward hands the incoming gradient to
// z_e unchanged and nothing to z_q.
template <typename T>
BasicTensor<T> straight_through(const BasicTensor<T>& z_e, const BasicTensor<T>& z_q);

// z_q[B, D, T', H', W'] -> video[B, 3, 4T', 4H', 4W'] in (0, 1).
template <typename T>
BasicTensor<T> reconstruct(const ReconDecoderNet<T>& net, const BasicTensor<T>& z_q);

template <typename T>
struct VqVaeForward {
  BasicTensor<T> z_e;
  Quantized<T> quantized;
  BasicTensor<T> reconstruction;
  BasicTensor<T> recon_loss, quant_loss, commit_loss;
  BasicTensor<T> total;  // recon + quant + beta * commit (beta = 0 drops the term)
};

template <typename T>
VqVaeForward<T> vqvae_forward(const VqVae<T>& model, const BasicTensor<T>& video);

// Everything the quantizer and the stop-gradients contribute, captured as
// constants at the current parameters: the code assignment, the
// straight-through offset (z_q - z_e), and the detached z_e and z_q. With
// these fixed the loss is a smooth function of every parameter whose exact
// derivative is the training gradient, so it can be checked against finite
// differences.
template <typename T>
struct FrozenAssignment {
  CodeGrid codes;
  BasicTensor<T> offset;
  BasicTensor<T> z_e;
  BasicTensor<T> z_q;
};

template <typename T>
FrozenAssignment<T> freeze_assignment(const VqVae<T>& model, const BasicTensor<T>& video);

// recon(z_e + offset) + mse(lookup(codes), frozen z_e) + beta * mse(z_e, frozen z_q).
template <typename T>
BasicTensor<T> vqvae_frozen_loss(const VqVae<T>& model, const BasicTensor<T>& video,
                                 const FrozenAssignment<T>& frozen);

struct VqVaeLosses {
  double recon = 0, quant = 0, commit = 0, total = 0;
};

// One forward/backward/update over encoder, codebook and decoder. A
// non-finite value anywhere aborts the step (NumericError) with the
// parameters untouched.
template <typename T>
VqVaeLosses vqvae_train_step(VqVae<T>& model, const BasicTensor<T>& video, Optimizer<T>& optimizer);

// [B, 3, T, H, W] from the clips of a batch.
Tensor video_batch_tensor(const media::Batch& batch);

inline VqVaeLosses vqvae_train_step(VqVae<float>& model, const media::Batch& batch,
                                    Optimizer<float>& optimizer) {
  return vqvae_train_step(model, video_batch_tensor(batch), optimizer);
}

}  // namespace v2a
