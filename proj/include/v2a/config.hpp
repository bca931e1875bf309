#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "v2a/media.hpp"
#include "v2a/optimizer.hpp"
#include "v2a/vqvae.hpp"

namespace v2a {

// Run configuration. Text form: one `key = value` per line, `#` starts a
// comment. Keys: width height fps segment_seconds sample_rate batch_max K D
// hidden_channels decoder_hidden beta lr_encoder lr_decoder epochs seed
// optimizer.
struct Config {
  std::size_t width = 256;
  std::size_t height = 144;
  media::Fps fps{10, 1};
  std::size_t segment_seconds = 10;
  std::uint32_t sample_rate = 8000;
  std::size_t batch_max = 2;
  std::size_t codebook_size = 128;  // K
  std::size_t embedding_dim = 64;   // D
  std::size_t hidden_channels = 32;
  std::vector<std::size_t> decoder_hidden{512, 512};
  double beta = 0.25;
  double lr_encoder = 1e-3;
  double lr_decoder = 1e-3;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  OptimizerMode optimizer = OptimizerMode::adaptive;

  // Throws ValidationError naming the offending key.
  void validate() const;

  std::size_t segment_frames() const;   // segment_seconds * fps
  std::size_t segment_samples() const;  // segment_seconds * sample_rate
  // T' * H' * W' * D for one segment.
  std::size_t latent_width() const;
  VqVaeConfig vqvae() const;
  OptimizerSettings optimizer_settings(double learning_rate) const;

  // Canonical text form; parse_config(to_text()) reproduces the config.
  std::string to_text() const;

  friend bool operator==(const Config&, const Config&) = default;
};

// Unknown key -> UnknownKeyError; malformed line or value -> ValidationError
// with its line number; then validate().
Config parse_config(std::string_view text);
Config load_config(const std::filesystem::path& path);

}  // namespace v2a
