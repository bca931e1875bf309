#include <algorithm>
#include <cmath>
#include <string>

#include "v2a/error.hpp"
#include "v2a/media.hpp"

namespace v2a {

void CodeGrid::validate() const {
  if (indices.size() != sites())
    throw ContractError("code grid holds " + std::to_string(indices.size()) + " indices for " +
                        std::to_string(sites()) + " sites");
  if (codebook_size == 0) throw ContractError("code grid has codebook size 0");
  for (auto index : indices)
    if (index >= codebook_size)
      throw ContractError("code index " + std::to_string(index) + " outside [0, " +
                          std::to_string(codebook_size) + ")");
}

}  // namespace v2a

namespace v2a::media {

VideoClip::VideoClip(std::size_t frames, std::size_t height, std::size_t width, Fps fps,
                     std::vector<float> samples)
    : frames_(frames), height_(height), width_(width), fps_(fps), samples_(std::move(samples)) {
  if (frames_ == 0) throw ContractError("video clip needs at least one frame");
  if (height_ == 0 || width_ == 0) throw ContractError("video clip has an empty frame");
  if (fps_.num == 0 || fps_.den == 0) throw ContractError("video frame rate must be positive");
  if (samples_.size() != frames_ * frame_size())
    throw ContractError("video clip payload has " + std::to_string(samples_.size()) +
                        " samples, expected " + std::to_string(frames_ * frame_size()));
  for (auto v : samples_)
    if (!(v >= 0.0f && v <= 1.0f)) throw ContractError("video sample outside [0, 1]");
}

VideoClip VideoClip::filled(std::size_t frames, std::size_t height, std::size_t width, Fps fps,
                            float value) {
  return VideoClip(frames, height, width, fps, std::vector<float>(frames * 3 * height * width, value));
}

AudioClip::AudioClip(std::vector<float> samples, std::uint32_t sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {
  if (samples_.empty()) throw ContractError("audio clip needs at least one sample");
  if (sample_rate_ == 0) throw ContractError("audio sample rate must be positive");
  for (auto v : samples_)
    if (!(v >= -1.0f && v <= 1.0f)) throw ContractError("audio sample outside [-1, 1]");
}

Batch::Batch(std::vector<SegmentPair> pairs) : pairs_(std::move(pairs)) {
  if (pairs_.empty() || pairs_.size() > kMaxSize)
    throw ContractError("batch size must be 1 or 2, got " + std::to_string(pairs_.size()));
  const auto& first = pairs_.front();
  for (const auto& p : pairs_) {
    const bool same_video = p.video.frames() == first.video.frames() &&
                            p.video.height() == first.video.height() &&
                            p.video.width() == first.video.width();
    const bool same_audio = p.audio.has_value() == first.audio.has_value() &&
                            (!p.audio || p.audio->size() == first.audio->size());
    if (!same_video || !same_audio)
      throw ContractError("batch members must have identical shapes");
  }
}

AudioClip normalize_audio(const AudioClip& clip) {
  std::vector<float> out(clip.size());
  std::transform(clip.samples().begin(), clip.samples().end(), out.begin(),
                 [](float v) { return static_cast<float>(std::tanh(static_cast<double>(v))); });
  return AudioClip(std::move(out), clip.sample_rate());
}

AudioClip denormalize_audio(const AudioClip& clip) {
  static constexpr double kLimit = 1.0 - 1e-6;
  std::vector<float> out(clip.size());
  std::transform(clip.samples().begin(), clip.samples().end(), out.begin(), [](float v) {
    const double x = std::clamp(static_cast<double>(v), -kLimit, kLimit);
    return static_cast<float>(std::clamp(std::atanh(x), -1.0, 1.0));
  });
  return AudioClip(std::move(out), clip.sample_rate());
}

}  // namespace v2a::media
