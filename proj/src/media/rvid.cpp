#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "v2a/error.hpp"
#include "v2a/media.hpp"

namespace v2a::media {
namespace {

constexpr std::string_view kMagic = "RVID1";

}  // namespace

VideoClip parse_rawvideo(std::span<const std::uint8_t> bytes) {
  const auto nl = std::find(bytes.begin(), bytes.end(), std::uint8_t{'\n'});
  if (nl == bytes.end()) throw ParseError("rvid: missing header line", 0);
  const std::string header(bytes.begin(), nl);
  const std::size_t payload_offset = static_cast<std::size_t>(nl - bytes.begin()) + 1;

  std::istringstream in(header);
  std::string magic;
  long long frames = -1, height = -1, width = -1, fps_num = -1, fps_den = -1;
  in >> magic >> frames >> height >> width >> fps_num >> fps_den;
  std::string trailing;
  if (magic != kMagic) throw ParseError("rvid: bad magic", 0);
  if (!in || (in >> trailing)) throw ParseError("rvid: malformed header '" + header + "'", 0);
  if (frames < 1) throw ParseError("rvid: frame count must be at least 1", 0);
  if (height < 1 || width < 1 || fps_num < 1 || fps_den < 1)
    throw ParseError("rvid: header values must be positive", 0);

  const std::size_t expected = static_cast<std::size_t>(frames * height * width * 3);
  const std::size_t actual = bytes.size() - payload_offset;
  if (actual != expected)
    throw ParseError("rvid: payload has " + std::to_string(actual) + " bytes, header implies " +
                         std::to_string(expected),
                     payload_offset + std::min(actual, expected));

  const std::size_t t_count = static_cast<std::size_t>(frames);
  const std::size_t h = static_cast<std::size_t>(height), w = static_cast<std::size_t>(width);
  const std::size_t plane = h * w;
  std::vector<float> samples(expected);
  const std::uint8_t* src = bytes.data() + payload_offset;
  for (std::size_t t = 0; t < t_count; ++t)
    for (std::size_t i = 0; i < plane; ++i)
      for (std::size_t c = 0; c < 3; ++c)
        samples[(t * 3 + c) * plane + i] = src[(t * plane + i) * 3 + c] / 255.0f;
  return VideoClip(t_count, h, w,
                   Fps{static_cast<std::uint32_t>(fps_num), static_cast<std::uint32_t>(fps_den)},
                   std::move(samples));
}

VideoClip read_rawvideo(const std::filesystem::path& path) {
  return parse_file(path, [](std::span<const std::uint8_t> b) { return parse_rawvideo(b); });
}

Bytes encode_rawvideo(const VideoClip& clip) {
  const std::string header = std::string(kMagic) + " " + std::to_string(clip.frames()) + " " +
                             std::to_string(clip.height()) + " " + std::to_string(clip.width()) +
                             " " + std::to_string(clip.fps().num) + " " +
                             std::to_string(clip.fps().den) + "\n";
  Bytes out(header.begin(), header.end());
  const std::size_t plane = clip.height() * clip.width();
  out.reserve(out.size() + clip.frames() * plane * 3);
  for (std::size_t t = 0; t < clip.frames(); ++t) {
    const auto f = clip.frame(t);
    for (std::size_t i = 0; i < plane; ++i)
      for (std::size_t c = 0; c < 3; ++c)
        out.push_back(static_cast<std::uint8_t>(std::lround(f[c * plane + i] * 255.0f)));
  }
  return out;
}

void write_rawvideo(const VideoClip& clip, const std::filesystem::path& path) {
  write_file_atomic(path, encode_rawvideo(clip));
}

}  // namespace v2a::media
