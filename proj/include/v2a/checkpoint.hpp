#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "v2a/audiodec.hpp"
#include "v2a/config.hpp"
#include "v2a/file_io.hpp"
#include "v2a/tensor.hpp"
#include "v2a/vqvae.hpp"

namespace v2a {

enum class Stage { encoder, decoder, full };

std::string to_string(Stage stage);

// File layout: "SSYN1\n", u64 LE header length, JSON header (format version,
// stage, config, tensor directory), little-endian float32 payloads in
// directory order, u32 LE CRC-32 of the payload bytes.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  Stage stage = Stage::encoder;
  Config config;
  std::vector<NamedTensor<float>> tensors;

  const Tensor& tensor(const std::string& name) const;
};

Bytes encode_checkpoint(const Checkpoint& checkpoint);
// VersionMismatchError, TruncationError, ChecksumError or CheckpointError for
// anything else malformed. Never returns a partial state.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Stage-aware assembly and extraction. Extraction throws StageError when the
// checkpoint's stage does not carry the requested networks.
Checkpoint make_checkpoint(const Config& config, const VqVae<float>* vqvae,
                           const AudioDecoderNet<float>* decoder);
VqVae<float> vqvae_from(const Checkpoint& checkpoint);
AudioDecoderNet<float> audio_decoder_from(const Checkpoint& checkpoint);

}  // namespace v2a
