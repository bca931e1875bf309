#include <algorithm>
#include <cmath>
#include <string>

#include "v2a/error.hpp"
#include "v2a/media.hpp"

namespace v2a::media {

VideoClip resize_bilinear(const VideoClip& clip, std::size_t out_width, std::size_t out_height) {
  if (out_width == 0 || out_height == 0) throw ConfigError("resize target must be non-empty");
  const std::size_t in_w = clip.width(), in_h = clip.height();
  if (in_w == out_width && in_h == out_height) return clip;

  struct Tap {
    std::size_t lo, hi;
    double frac;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> result(out);
    const double scale = static_cast<double>(in) / out;
    for (std::size_t o = 0; o < out; ++o) {
      const double src = std::clamp((o + 0.5) * scale - 0.5, 0.0, static_cast<double>(in - 1));
      const auto lo = static_cast<std::size_t>(std::floor(src));
      result[o] = {lo, std::min(lo + 1, in - 1), src - lo};
    }
    return result;
  };
  const auto xs = taps(in_w, out_width);
  const auto ys = taps(in_h, out_height);

  std::vector<float> out(clip.frames() * 3 * out_width * out_height);
  float* dst = out.data();
  for (std::size_t t = 0; t < clip.frames(); ++t)
    for (std::size_t c = 0; c < 3; ++c) {
      const float* src = clip.frame(t).data() + c * in_w * in_h;
      for (const auto& ty : ys)
        for (const auto& tx : xs) {
          const double top = src[ty.lo * in_w + tx.lo] * (1.0 - tx.frac) + src[ty.lo * in_w + tx.hi] * tx.frac;
          const double bottom = src[ty.hi * in_w + tx.lo] * (1.0 - tx.frac) + src[ty.hi * in_w + tx.hi] * tx.frac;
          *dst++ = static_cast<float>(std::clamp(top * (1.0 - ty.frac) + bottom * ty.frac, 0.0, 1.0));
        }
    }
  return VideoClip(clip.frames(), out_height, out_width, clip.fps(), std::move(out));
}

VideoClip resample_fps(const VideoClip& clip, Fps target) {
  if (target.num == 0 || target.den == 0) throw ConfigError("target frame rate must be positive");
  const Fps src = clip.fps();
  if (static_cast<std::uint64_t>(src.num) * target.den ==
      static_cast<std::uint64_t>(target.num) * src.den)
    return VideoClip(clip.frames(), clip.height(), clip.width(), target,
                     std::vector<float>(clip.samples().begin(), clip.samples().end()));

  // Ratio src/target = (src.num * target.den) / (src.den * target.num).
  const std::uint64_t p = static_cast<std::uint64_t>(src.num) * target.den;
  const std::uint64_t q = static_cast<std::uint64_t>(src.den) * target.num;
  // n_out = round(T * q / p)
  const std::uint64_t n_out = std::max<std::uint64_t>(1, (2 * clip.frames() * q + p) / (2 * p));
  std::vector<float> out;
  out.reserve(n_out * clip.frame_size());
  for (std::uint64_t j = 0; j < n_out; ++j) {
    const std::uint64_t index = std::min<std::uint64_t>((2 * j * p + q) / (2 * q), clip.frames() - 1);
    const auto f = clip.frame(index);
    out.insert(out.end(), f.begin(), f.end());
  }
  return VideoClip(n_out, clip.height(), clip.width(), target, std::move(out));
}

VideoClip pad_frames_to_multiple(const VideoClip& clip, std::size_t multiple) {
  if (multiple == 0) throw ConfigError("frame multiple must be positive");
  const std::size_t target = (clip.frames() + multiple - 1) / multiple * multiple;
  if (target == clip.frames()) return clip;
  std::vector<float> out(clip.samples().begin(), clip.samples().end());
  const auto last = clip.frame(clip.frames() - 1);
  for (std::size_t t = clip.frames(); t < target; ++t) out.insert(out.end(), last.begin(), last.end());
  return VideoClip(target, clip.height(), clip.width(), clip.fps(), std::move(out));
}

AudioClip decimate_audio(const AudioClip& clip, std::uint32_t target_rate) {
  if (target_rate == 0) throw ConfigError("target sample rate must be positive");
  if (clip.sample_rate() == target_rate) return clip;
  if (clip.sample_rate() % target_rate != 0)
    throw ConfigError("cannot reduce " + std::to_string(clip.sample_rate()) + " Hz to " +
                      std::to_string(target_rate) + " Hz by integer sample extraction");
  const std::size_t step = clip.sample_rate() / target_rate;
  std::vector<float> out;
  out.reserve(clip.size() / step + 1);
  for (std::size_t i = 0; i < clip.size(); i += step) out.push_back(clip.samples()[i]);
  return AudioClip(std::move(out), target_rate);
}

std::vector<SegmentPair> segment(const VideoClip& video, const std::optional<AudioClip>& audio,
                                 std::size_t segment_seconds, SegmentMode mode) {
  if (segment_seconds == 0) throw ConfigError("segment length must be positive");
  const Fps fps = video.fps();
  if ((segment_seconds * fps.num) % fps.den != 0)
    throw ConfigError("segment of " + std::to_string(segment_seconds) + " s is not a whole number of frames");
  const std::size_t window_frames = segment_seconds * fps.num / fps.den;

  if (mode == SegmentMode::train && !audio)
    throw ContractError("training segments need an audio track");
  if (audio && mode == SegmentMode::train &&
      std::abs(video.duration_seconds() - audio->duration_seconds()) > 0.5)
    throw AlignmentError("video lasts " + std::to_string(video.duration_seconds()) +
                         " s but audio lasts " + std::to_string(audio->duration_seconds()) + " s");

  const std::size_t window_samples = audio ? segment_seconds * audio->sample_rate() : 0;
  std::size_t windows = 0;
  if (mode == SegmentMode::train) {
    windows = std::min(video.frames() / window_frames, audio->size() / window_samples);
  } else {
    windows = (video.frames() + window_frames - 1) / window_frames;
  }

  std::vector<SegmentPair> pairs;
  pairs.reserve(windows);
  const std::size_t frame_size = video.frame_size();
  for (std::size_t w = 0; w < windows; ++w) {
    const std::size_t f0 = w * window_frames;
    const std::size_t frames = std::min(window_frames, video.frames() - f0);
    std::vector<float> pixels(window_frames * frame_size, 0.0f);
    std::copy_n(video.samples().begin() + static_cast<std::ptrdiff_t>(f0 * frame_size),
                frames * frame_size, pixels.begin());
    SegmentPair pair{VideoClip(window_frames, video.height(), video.width(), fps, std::move(pixels)),
                     std::nullopt, false, frames, 0};
    if (audio) {
      const std::size_t s0 = w * window_samples;
      const std::size_t samples = s0 < audio->size() ? std::min(window_samples, audio->size() - s0) : 0;
      std::vector<float> wave(window_samples, 0.0f);
      std::copy_n(audio->samples().begin() + static_cast<std::ptrdiff_t>(std::min(s0, audio->size())),
                  samples, wave.begin());
      pair.audio.emplace(std::move(wave), audio->sample_rate());
      pair.valid_samples = samples;
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::vector<Batch> make_batches(std::vector<SegmentPair> pairs, std::size_t batch_max) {
  if (batch_max == 0 || batch_max > Batch::kMaxSize)
    throw ConfigError("batch size must be 1 or 2, got " + std::to_string(batch_max));
  std::vector<Batch> batches;
  for (std::size_t i = 0; i < pairs.size(); i += batch_max) {
    const std::size_t end = std::min(pairs.size(), i + batch_max);
    batches.emplace_back(std::vector<SegmentPair>(std::make_move_iterator(pairs.begin() + static_cast<std::ptrdiff_t>(i)),
                                                  std::make_move_iterator(pairs.begin() + static_cast<std::ptrdiff_t>(end))));
  }
  // Every pair must match the first regardless of how pairs fell into batches.
  for (std::size_t b = 1; b < batches.size(); ++b) {
    const auto& a = batches.front()[0];
    const auto& p = batches[b][0];
    if (a.video.frames() != p.video.frames() || a.video.height() != p.video.height() ||
        a.video.width() != p.video.width() || a.audio.has_value() != p.audio.has_value() ||
        (a.audio && a.audio->size() != p.audio->size()))
      throw ContractError("batch members must have identical shapes");
  }
  return batches;
}

}  // namespace v2a::media
