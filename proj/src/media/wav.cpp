#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "v2a/error.hpp"
#include "v2a/media.hpp"

namespace v2a::media {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

bool tag_is(std::span<const std::uint8_t> bytes, std::size_t offset, const char* tag) {
  return std::memcmp(bytes.data() + offset, tag, 4) == 0;
}

}  // namespace

AudioClip parse_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE"))
    throw ParseError("wav: not a RIFF/WAVE file", 0);

  std::uint16_t channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  bool have_format = false;
  std::span<const std::uint8_t> payload;
  std::size_t payload_offset = 0;

  std::size_t offset = 12;
  while (offset + 8 <= bytes.size()) {
    const std::uint32_t size = get_u32(bytes, offset + 4);
    const std::size_t body = offset + 8;
    if (size > bytes.size() - body) throw ParseError("wav: truncated chunk", offset);
    if (tag_is(bytes, offset, "fmt ")) {
      if (size < 16) throw ParseError("wav: short fmt chunk", offset);
      std::uint16_t format = get_u16(bytes, body);
      channels = get_u16(bytes, body + 2);
      sample_rate = get_u32(bytes, body + 4);
      bits = get_u16(bytes, body + 14);
      if (format == kFormatExtensible && size >= 40) format = get_u16(bytes, body + 24);
      if (format != kFormatPcm)
        throw UnsupportedFormatError("wav: codec " + std::to_string(format) +
                                     " is not PCM");
      if (bits != 16)
        throw UnsupportedFormatError("wav: " + std::to_string(bits) +
                                     "-bit samples; only PCM16 is supported");
      have_format = true;
    } else if (tag_is(bytes, offset, "data")) {
      payload = bytes.subspan(body, size);
      payload_offset = body;
    }
    offset = body + size + (size & 1u);
  }
  if (!have_format) throw ParseError("wav: missing fmt chunk", 12);
  if (payload_offset == 0) throw ParseError("wav: missing data chunk", 12);
  if (channels == 0 || sample_rate == 0) throw ParseError("wav: invalid fmt values", 12);

  const std::size_t frame_bytes = 2u * channels;
  const std::size_t frames = payload.size() / frame_bytes;
  if (frames == 0) throw ParseError("wav: no samples", payload_offset);
  std::vector<float> samples(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const auto raw = static_cast<std::int16_t>(get_u16(payload, i * frame_bytes + 2 * c));
      acc += raw / 32768.0;
    }
    samples[i] = static_cast<float>(acc / channels);
  }
  return AudioClip(std::move(samples), sample_rate);
}

AudioClip read_wav(const std::filesystem::path& path) {
  return parse_file(path, [](std::span<const std::uint8_t> b) { return parse_wav(b); });
}

Bytes encode_wav(const AudioClip& clip) {
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(clip.size() * 2);
  Bytes out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, clip.sample_rate());
  put_u32(out, clip.sample_rate() * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_bytes);
  for (float f : clip.samples()) {
    const long q = std::lround(static_cast<double>(std::clamp(f, -1.0f, 1.0f)) * 32768.0);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(q, -32768L, 32767L))));
  }
  return out;
}

void write_wav(const AudioClip& clip, const std::filesystem::path& path) {
  write_file_atomic(path, encode_wav(clip));
}

}  // namespace v2a::media
