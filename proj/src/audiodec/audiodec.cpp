#include "v2a/audiodec.hpp"

#include <cmath>
#include <string>

#include "v2a/error.hpp"
#include "v2a/ops.hpp"

namespace v2a {

template <typename T>
AudioDecoderNet<T> AudioDecoderNet<T>::init(Rng& rng, std::size_t input_width,
                                            const std::vector<std::size_t>& hidden,
                                            std::size_t output_width) {
  if (input_width == 0 || output_width == 0) throw ConfigError("audio decoder widths must be positive");
  AudioDecoderNet net;
  std::size_t in = input_width;
  auto add_layer = [&](std::size_t out) {
    if (out == 0) throw ConfigError("audio decoder hidden widths must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    net.weights.push_back(rng.uniform_tensor<T>({out, in}, bound, true));
    net.biases.push_back(rng.uniform_tensor<T>({out}, bound, true));
    in = out;
  };
  for (auto h : hidden) add_layer(h);
  add_layer(output_width);
  return net;
}

template <typename T>
AudioDecoderNet<T> AudioDecoderNet<T>::create(std::size_t input_width,
                                              const std::vector<std::size_t>& hidden,
                                              std::size_t output_width, std::uint64_t seed) {
  auto rng = Rng::substream(seed, static_cast<std::uint64_t>(SeedStream::audio_decoder));
  return init(rng, input_width, hidden, output_width);
}

template <typename T>
std::vector<std::size_t> AudioDecoderNet<T>::hidden_widths() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) out.push_back(weights[i].dim(0));
  return out;
}

template <typename T>
std::vector<NamedTensor<T>> AudioDecoderNet<T>::parameters() const {
  std::vector<NamedTensor<T>> out;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const std::string stem = "audio_decoder.fc" + std::to_string(i + 1);
    out.push_back({stem + ".weight", weights[i]});
    out.push_back({stem + ".bias", biases[i]});
  }
  return out;
}

template <typename T>
std::vector<BasicTensor<T>*> AudioDecoderNet<T>::parameter_slots() {
  std::vector<BasicTensor<T>*> out;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out.push_back(&weights[i]);
    out.push_back(&biases[i]);
  }
  return out;
}

template <typename T>
BasicTensor<T> flatten_latent(const BasicTensor<T>& z_q) {
  if (z_q.rank() != 5)
    throw DimensionError("flatten_latent: expected [B, D, T', H', W'], got " + to_string(z_q.shape()));
  static constexpr std::size_t kSitesFirst[] = {0, 2, 3, 4, 1};
  const std::size_t b = z_q.dim(0);
  return reshape(permute(z_q, kSitesFirst), {b, z_q.size() / b});
}

template <typename T>
BasicTensor<T> unflatten_latent(const BasicTensor<T>& flat, std::size_t dim, std::size_t time,
                                std::size_t height, std::size_t width) {
  if (flat.rank() != 2 || flat.dim(1) != dim * time * height * width)
    throw DimensionError("unflatten_latent: " + to_string(flat.shape()) + " does not hold a " +
                         std::to_string(dim) + "x" + std::to_string(time) + "x" +
                         std::to_string(height) + "x" + std::to_string(width) + " grid");
  static constexpr std::size_t kChannelsFirst[] = {0, 4, 1, 2, 3};
  return permute(reshape(flat, {flat.dim(0), time, height, width, dim}), kChannelsFirst);
}

template <typename T>
BasicTensor<T> synthesize(const AudioDecoderNet<T>& net, const BasicTensor<T>& z_q) {
  auto x = flatten_latent(z_q);
  if (x.dim(1) != net.input_width())
    throw ConfigError("synthesize: decoder expects N*D = " + std::to_string(net.input_width()) +
                      " latent values per item, got " + std::to_string(x.dim(1)) + " from " +
                      to_string(z_q.shape()));
  const std::size_t layers = net.weights.size();
  for (std::size_t i = 0; i < layers; ++i) {
    x = linear(x, net.weights[i], net.biases[i]);
    x = activation(x, i + 1 < layers ? Activation::relu : Activation::tanh);
  }
  return x;
}

template <typename T>
BasicTensor<T> frozen_latent(const VqVae<T>& model, const BasicTensor<T>& video) {
  NoGradGuard<T> no_grad;
  return quantize(encode(model.encoder, video), model.codebook).z_q.detach();
}

template <typename T>
AudioDecLosses audiodec_train_step(AudioDecoderNet<T>& net, const VqVae<T>& frozen,
                                   const BasicTensor<T>& video, const BasicTensor<T>& target,
                                   Optimizer<T>& optimizer) {
  if (target.rank() != 2 || target.dim(1) != net.output_width() || target.dim(0) != video.dim(0))
    throw AlignmentError("audio target " + to_string(target.shape()) + " does not match " +
                         std::to_string(video.dim(0)) + " items of " +
                         std::to_string(net.output_width()) + " samples");
  const auto z_q = frozen_latent(frozen, video);
  auto& tape = Tape<T>::current();
  try {
    const auto loss = mse(synthesize(net, z_q), target.detach());
    const AudioDecLosses out{loss.item()};
    backward(loss);
    auto params = net.parameters();
    optimizer.step(params);
    return out;
  } catch (const NumericError& e) {
    tape.clear();
    for (auto& p : net.parameters()) p.tensor.clear_grad();
    throw NumericError(std::string("audio decoder step aborted: ") + e.what());
  } catch (...) {
    tape.clear();
    for (auto& p : net.parameters()) p.tensor.clear_grad();
    throw;
  }
}

Tensor audio_batch_tensor(const media::Batch& batch) {
  const std::size_t s = batch[0].audio ? batch[0].audio->size() : 0;
  std::vector<float> data;
  data.reserve(batch.size() * s);
  for (const auto& pair : batch.pairs()) {
    if (!pair.audio) throw ContractError("batch member has no audio track");
    if (!pair.normalized) throw ContractError("batch audio must be tanh-normalised before training");
    data.insert(data.end(), pair.audio->samples().begin(), pair.audio->samples().end());
  }
  return Tensor({batch.size(), s}, std::move(data));
}

media::VideoClip pad_for_encoder(const media::VideoClip& clip) {
  return media::pad_frames_to_multiple(clip, kDownsample);
}

media::AudioClip synthesize_long(const AudioDecoderNet<float>& net, const VqVae<float>& model,
                                 const media::VideoClip& video, std::size_t segment_seconds,
                                 std::uint32_t sample_rate) {
  if (net.output_width() != segment_seconds * sample_rate)
    throw ConfigError("decoder emits " + std::to_string(net.output_width()) + " samples, but a " +
                      std::to_string(segment_seconds) + " s window at " + std::to_string(sample_rate) +
                      " Hz needs " + std::to_string(segment_seconds * sample_rate));
  NoGradGuard<float> no_grad;
  const auto windows = media::segment(video, std::nullopt, segment_seconds, media::SegmentMode::infer);
  std::vector<float> wave;
  wave.reserve(windows.size() * net.output_width());
  for (const auto& w : windows) {
    const media::Batch one({media::SegmentPair{pad_for_encoder(w.video), std::nullopt, false, 0, 0}});
    const auto out = synthesize(net, frozen_latent(model, video_batch_tensor(one)));
    wave.insert(wave.end(), out.data().begin(), out.data().end());
  }
  const auto fps = video.fps();
  // round(T / fps * rate) in exact integer arithmetic.
  const std::uint64_t num = static_cast<std::uint64_t>(video.frames()) * fps.den * sample_rate;
  const std::uint64_t keep = std::max<std::uint64_t>(1, (2 * num + fps.num) / (2 * fps.num));
  wave.resize(std::min<std::uint64_t>(keep, wave.size()));
  return media::denormalize_audio(media::AudioClip(std::move(wave), sample_rate));
}

#define V2A_INSTANTIATE_AUDIODEC(T)                                                           \
  template struct AudioDecoderNet<T>;                                                        \
  template BasicTensor<T> flatten_latent(const BasicTensor<T>&);                             \
  template BasicTensor<T> unflatten_latent(const BasicTensor<T>&, std::size_t, std::size_t,  \
                                           std::size_t, std::size_t);                        \
  template BasicTensor<T> synthesize(const AudioDecoderNet<T>&, const BasicTensor<T>&);      \
  template BasicTensor<T> frozen_latent(const VqVae<T>&, const BasicTensor<T>&);             \
  template AudioDecLosses audiodec_train_step(AudioDecoderNet<T>&, const VqVae<T>&,          \
                                              const BasicTensor<T>&, const BasicTensor<T>&,  \
                                              Optimizer<T>&);

V2A_INSTANTIATE_AUDIODEC(float)
V2A_INSTANTIATE_AUDIODEC(double)

#undef V2A_INSTANTIATE_AUDIODEC

}  // namespace v2a
