#pragma once

// Synthetic paired clips for pipeline-level tests. Each clip shows a bright
// square drifting across a dark frame while a tone plays whose pitch follows
// the square's column.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "v2a/config.hpp"
#include "v2a/media.hpp"

namespace fixtures {

struct ClipSpec {
  std::size_t width = 16;
  std::size_t height = 16;
  std::uint32_t fps = 4;
  double seconds = 2;
  std::uint32_t sample_rate = 400;
};

inline v2a::media::VideoClip make_video(const ClipSpec& fx, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto frames = static_cast<std::size_t>(std::lround(fx.seconds * fx.fps));
  const std::size_t side = std::max<std::size_t>(2, fx.width / 4);
  const std::size_t x0 = rng() % fx.width, y0 = rng() % fx.height;
  const float tint[3] = {0.4f + 0.6f * static_cast<float>(rng() % 100) / 100.0f, 0.8f,
                         0.3f + 0.7f * static_cast<float>(rng() % 100) / 100.0f};
  std::vector<float> px(frames * 3 * fx.width * fx.height, 0.1f);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t x = (x0 + t) % fx.width, y = (y0 + t / 2) % fx.height;
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t dy = 0; dy < side; ++dy)
        for (std::size_t dx = 0; dx < side; ++dx) {
          const std::size_t yy = (y + dy) % fx.height, xx = (x + dx) % fx.width;
          px[((t * 3 + c) * fx.height + yy) * fx.width + xx] = tint[c];
        }
  }
  return v2a::media::VideoClip(frames, fx.height, fx.width, {fx.fps, 1}, std::move(px));
}

inline v2a::media::AudioClip make_audio(const ClipSpec& fx, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  const auto n = static_cast<std::size_t>(std::lround(fx.seconds * fx.sample_rate));
  const double base = 20.0 + static_cast<double>(rng() % 40);
  std::vector<float> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fx.sample_rate;
    s[i] = static_cast<float>(0.5 * std::sin(2 * M_PI * base * t * (1.0 + 0.1 * t)));
  }
  return v2a::media::AudioClip(std::move(s), fx.sample_rate);
}

// Writes <dir>/<stem>.rvid and, unless with_audio is false, <dir>/<stem>.wav.
inline void write_pair(const std::filesystem::path& dir, const std::string& stem,
                       const ClipSpec& fx, std::uint64_t seed, bool with_audio = true) {
  std::filesystem::create_directories(dir);
  v2a::media::write_rawvideo(make_video(fx, seed), dir / (stem + ".rvid"));
  if (with_audio) v2a::media::write_wav(make_audio(fx, seed), dir / (stem + ".wav"));
}

// Small run configuration matching ClipSpec's defaults.
inline v2a::Config desk_config() {
  v2a::Config c;
  c.width = 16;
  c.height = 16;
  c.fps = {4, 1};
  c.segment_seconds = 2;
  c.sample_rate = 400;
  c.codebook_size = 8;
  c.embedding_dim = 4;
  c.hidden_channels = 4;
  c.decoder_hidden = {16};
  return c;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("v2a_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
