#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "v2a/code_grid.hpp"
#include "v2a/error.hpp"
#include "v2a/file_io.hpp"

namespace v2a::media {

// Frames per second as an exact rational.
struct Fps {
  std::uint32_t num = 10;
  std::uint32_t den = 1;

  double value() const { return static_cast<double>(num) / den; }
  friend bool operator==(const Fps&, const Fps&) = default;
};

// RGB frames stored [T, 3, H, W], every sample in [0, 1].
class VideoClip {
 public:
  VideoClip(std::size_t frames, std::size_t height, std::size_t width, Fps fps,
            std::vector<float> samples);

  static VideoClip filled(std::size_t frames, std::size_t height, std::size_t width, Fps fps,
                          float value);

  std::size_t frames() const { return frames_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  Fps fps() const { return fps_; }
  double duration_seconds() const { return static_cast<double>(frames_) / fps_.value(); }

  std::size_t frame_size() const { return 3 * height_ * width_; }
  std::span<const float> samples() const { return samples_; }
  std::span<const float> frame(std::size_t t) const {
    return std::span<const float>(samples_).subspan(t * frame_size(), frame_size());
  }
  float at(std::size_t t, std::size_t c, std::size_t y, std::size_t x) const {
    return samples_[((t * 3 + c) * height_ + y) * width_ + x];
  }

 private:
  std::size_t frames_, height_, width_;
  Fps fps_;
  std::vector<float> samples_;
};

// Mono waveform, samples in [-1, 1].
class AudioClip {
 public:
  AudioClip(std::vector<float> samples, std::uint32_t sample_rate);

  std::span<const float> samples() const { return samples_; }
  std::uint32_t sample_rate() const { return sample_rate_; }
  std::size_t size() const { return samples_.size(); }
  double duration_seconds() const { return static_cast<double>(samples_.size()) / sample_rate_; }

 private:
  std::vector<float> samples_;
  std::uint32_t sample_rate_;
};

enum class SegmentMode { train, infer };

// One fixed-length window. In infer mode the last window is zero-padded and
// valid_frames / valid_samples record how much of it is real.
struct SegmentPair {
  VideoClip video;
  std::optional<AudioClip> audio;
  bool normalized = false;
  std::size_t valid_frames = 0;
  std::size_t valid_samples = 0;
};

// One or two shape-identical segments.
class Batch {
 public:
  static constexpr std::size_t kMaxSize = 2;

  explicit Batch(std::vector<SegmentPair> pairs);

  std::size_t size() const { return pairs_.size(); }
  const std::vector<SegmentPair>& pairs() const { return pairs_; }
  const SegmentPair& operator[](std::size_t i) const { return pairs_[i]; }

 private:
  std::vector<SegmentPair> pairs_;
};

// --- containers -----------------------------------------------------------

// Runs a parser over the bytes of `path`; parse and format errors gain the
// path as context.
template <typename Parse>
auto parse_file(const std::filesystem::path& path, Parse parse) {
  const auto bytes = read_file(path);
  try {
    return parse(std::span<const std::uint8_t>(bytes));
  } catch (const ParseError& e) {
    throw e.in_context(path.string());
  } catch (const UnsupportedFormatError& e) {
    throw UnsupportedFormatError(path.string() + ": " + e.what());
  }
}

// YUV4MPEG2, 4:2:0 (any siting) or 4:4:4, 8-bit. BT.601, limited range unless
// the header carries XCOLORRANGE=FULL.
VideoClip parse_y4m(std::span<const std::uint8_t> bytes);
VideoClip read_y4m(const std::filesystem::path& path);
// Writes 4:4:4, BT.601 limited range.
Bytes encode_y4m(const VideoClip& clip);
void write_y4m(const VideoClip& clip, const std::filesystem::path& path);

// "RVID1 T H W FPS_NUM FPS_DEN\n" followed by T*H*W*3 bytes of RGB u8.
VideoClip parse_rawvideo(std::span<const std::uint8_t> bytes);
VideoClip read_rawvideo(const std::filesystem::path& path);
Bytes encode_rawvideo(const VideoClip& clip);
void write_rawvideo(const VideoClip& clip, const std::filesystem::path& path);

// Dispatches on extension: .y4m or .rvid.
VideoClip read_video(const std::filesystem::path& path);

// RIFF/WAVE PCM16. Multichannel input is averaged down to mono; int16 s maps
// to s / 32768.
AudioClip parse_wav(std::span<const std::uint8_t> bytes);
AudioClip read_wav(const std::filesystem::path& path);
// Mono PCM16; f maps to round(f * 32768) clamped to [-32768, 32767].
Bytes encode_wav(const AudioClip& clip);
void write_wav(const AudioClip& clip, const std::filesystem::path& path);

// Binary P5 / P6, maxval 255.
void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const std::uint8_t> gray);
void write_ppm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const std::uint8_t> rgb);
void write_frame_ppm(const VideoClip& clip, std::size_t t, const std::filesystem::path& path);

// --- preprocessing ---------------------------------------------------------

// Bilinear resampling with half-pixel centres, per frame and channel.
VideoClip resize_bilinear(const VideoClip& clip, std::size_t out_width, std::size_t out_height);

// Nearest-frame selection: output frame j shows source frame
// floor(j * src / target + 1/2), clamped to the last frame.
VideoClip resample_fps(const VideoClip& clip, Fps target);

// Repeats the last frame until the frame count is a multiple of `multiple`.
VideoClip pad_frames_to_multiple(const VideoClip& clip, std::size_t multiple);

// Keeps every k-th sample where k = source rate / target rate must be an
// integer.
AudioClip decimate_audio(const AudioClip& clip, std::uint32_t target_rate);

// Train: consecutive non-overlapping windows, trailing remainder dropped;
// needs audio whose duration agrees with the video within 0.5 s.
// Infer: windows cover the whole video, the last one zero-padded; audio is
// optional and, when present, padded the same way.
std::vector<SegmentPair> segment(const VideoClip& video, const std::optional<AudioClip>& audio,
                                 std::size_t segment_seconds, SegmentMode mode);

// Greedy in-order grouping into batches of at most `batch_max` (<= 2).
std::vector<Batch> make_batches(std::vector<SegmentPair> pairs,
                                std::size_t batch_max = Batch::kMaxSize);

// Elementwise tanh.
AudioClip normalize_audio(const AudioClip& clip);
// Clamp to +/-(1 - 1e-6), elementwise artanh, clamp to [-1, 1].
AudioClip denormalize_audio(const AudioClip& clip);

// One PGM per time slice of batch item `item`, written to
// <stem>_t<NNN>.pgm. Pixel = round(index * 255 / (K - 1)); K = 1 maps to 0.
std::vector<std::filesystem::path> export_code_image(const CodeGrid& codes, std::size_t item,
                                                     const std::filesystem::path& stem);

}  // namespace v2a::media
