#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "v2a/media.hpp"
#include "v2a/optimizer.hpp"
#include "v2a/random.hpp"
#include "v2a/tensor.hpp"
#include "v2a/vqvae.hpp"

namespace v2a {

// Fully connected stack: input N*D -> hidden... -> S, ReLU between layers,
// Tanh at the end.
template <typename T>
struct AudioDecoderNet {
  std::vector<BasicTensor<T>> weights;  // [out, in]
  std::vector<BasicTensor<T>> biases;   // [out]

  static AudioDecoderNet init(Rng& rng, std::size_t input_width,
                              const std::vector<std::size_t>& hidden, std::size_t output_width);
  static AudioDecoderNet create(std::size_t input_width, const std::vector<std::size_t>& hidden,
                                std::size_t output_width, std::uint64_t seed);

  std::size_t input_width() const { return weights.front().dim(1); }
  std::size_t output_width() const { return weights.back().dim(0); }
  std::vector<std::size_t> hidden_widths() const;

  // "audio_decoder.fc<i>.weight" / ".bias", layer order.
  std::vector<NamedTensor<T>> parameters() const;
  std::vector<BasicTensor<T>*> parameter_slots();
};

// [B, D, T', H', W'] -> [B, N*D]: site-major over (T', H', W'), each site's D
// values contiguous.
template <typename T>
BasicTensor<T> flatten_latent(const BasicTensor<T>& z_q);

// Inverse of flatten_latent for a grid of the given extents.
template <typename T>
BasicTensor<T> unflatten_latent(const BasicTensor<T>& flat, std::size_t dim, std::size_t time,
                                std::size_t height, std::size_t width);

// z_q[B, D, T', H', W'] -> waveform [B, S] in (-1, 1). ConfigError when N*D
// differs from the width the network was built for.
template <typename T>
BasicTensor<T> synthesize(const AudioDecoderNet<T>& net, const BasicTensor<T>& z_q);

// z_q of the frozen model for a video batch; no gradients recorded.
template <typename T>
BasicTensor<T> frozen_latent(const VqVae<T>& model, const BasicTensor<T>& video);

struct AudioDecLosses {
  double audio_mse = 0;
};

// One step on the decoder alone; encoder and codebook are not touched.
// AlignmentError when the target width is not S.
template <typename T>
AudioDecLosses audiodec_train_step(AudioDecoderNet<T>& net, const VqVae<T>& frozen,
                                   const BasicTensor<T>& video, const BasicTensor<T>& target,
                                   Optimizer<T>& optimizer);

// [B, S] from the audio of a batch. ContractError when a member lacks audio
// or has not been tanh-normalised.
Tensor audio_batch_tensor(const media::Batch& batch);

inline AudioDecLosses audiodec_train_step(AudioDecoderNet<float>& net, const VqVae<float>& frozen,
                                          const media::Batch& batch, Optimizer<float>& optimizer) {
  return audiodec_train_step(net, frozen, video_batch_tensor(batch), audio_batch_tensor(batch),
                             optimizer);
}

// Frame count padded to a multiple of 4 by repeating the last frame.
media::VideoClip pad_for_encoder(const media::VideoClip& clip);

// Full-length synthesis: the video (already at model resolution and frame
// rate) is cut into segment windows, the last one zero-padded; each window is
// encoded, quantised and synthesised on its own, denormalised, and the result
// trimmed to the video's duration at `sample_rate`.
media::AudioClip synthesize_long(const AudioDecoderNet<float>& net, const VqVae<float>& model,
                                 const media::VideoClip& video, std::size_t segment_seconds,
                                 std::uint32_t sample_rate);

}  // namespace v2a
