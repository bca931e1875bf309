#include <algorithm>
#include <cmath>
#include <string>

#include "v2a/error.hpp"
#include "v2a/media.hpp"

namespace v2a::media {
namespace {

constexpr std::string_view kMagic = "YUV4MPEG2";
constexpr std::string_view kFrameTag = "FRAME";

enum class Chroma { c420, c444 };

struct Header {
  std::size_t width = 0;
  std::size_t height = 0;
  Fps fps{0, 0};
  Chroma chroma = Chroma::c420;
  bool full_range = false;
};

// Reads up to (not including) the next '\n'; returns the offset after it.
std::size_t read_line(std::span<const std::uint8_t> bytes, std::size_t offset, std::string& line) {
  const auto begin = bytes.begin() + static_cast<std::ptrdiff_t>(offset);
  const auto nl = std::find(begin, bytes.end(), std::uint8_t{'\n'});
  if (nl == bytes.end()) throw ParseError("y4m: unterminated line", offset);
  line.assign(begin, nl);
  return static_cast<std::size_t>(nl - bytes.begin()) + 1;
}

std::size_t parse_positive(const std::string& text, std::size_t offset, const char* what) {
  std::size_t value = 0;
  try {
    std::size_t used = 0;
    value = std::stoul(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw ParseError(std::string("y4m: bad ") + what + " '" + text + "'", offset);
  }
  if (value == 0) throw ParseError(std::string("y4m: ") + what + " must be positive", offset);
  return value;
}

Header parse_header(const std::string& line) {
  if (line.compare(0, kMagic.size(), kMagic) != 0) throw ParseError("y4m: bad magic", 0);
  Header h;
  std::size_t pos = kMagic.size();
  while (pos < line.size()) {
    if (line[pos] == ' ') {
      ++pos;
      continue;
    }
    const std::size_t at = pos;
    const std::size_t end = std::min(line.find(' ', pos), line.size());
    const std::string token = line.substr(pos, end - pos);
    pos = end;
    const char tag = token[0];
    const std::string value = token.substr(1);
    switch (tag) {
      case 'W': h.width = parse_positive(value, at, "width"); break;
      case 'H': h.height = parse_positive(value, at, "height"); break;
      case 'F': {
        const auto colon = value.find(':');
        if (colon == std::string::npos) throw ParseError("y4m: bad frame rate '" + value + "'", at);
        h.fps.num = static_cast<std::uint32_t>(parse_positive(value.substr(0, colon), at, "fps"));
        h.fps.den = static_cast<std::uint32_t>(parse_positive(value.substr(colon + 1), at, "fps"));
        break;
      }
      case 'C':
        if (value == "444") {
          h.chroma = Chroma::c444;
        } else if (value == "420" || value == "420jpeg" || value == "420paldv" ||
                   value == "420mpeg2") {
          h.chroma = Chroma::c420;
        } else {
          throw UnsupportedFormatError("y4m: unsupported colour space C" + value);
        }
        break;
      case 'X':
        if (value == "COLORRANGE=FULL") h.full_range = true;
        if (value == "COLORRANGE=LIMITED") h.full_range = false;
        break;
      default:
        break;  // I (interlace) and A (aspect) do not affect decoding.
    }
  }
  if (h.width == 0 || h.height == 0) throw ParseError("y4m: header lacks W or H", 0);
  if (h.fps.num == 0) throw ParseError("y4m: header lacks F", 0);
  return h;
}

float to_unit(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

}  // namespace

VideoClip parse_y4m(std::span<const std::uint8_t> bytes) {
  std::string line;
  std::size_t offset = read_line(bytes, 0, line);
  const Header h = parse_header(line);

  const std::size_t cw = h.chroma == Chroma::c444 ? h.width : (h.width + 1) / 2;
  const std::size_t ch = h.chroma == Chroma::c444 ? h.height : (h.height + 1) / 2;
  const std::size_t luma = h.width * h.height;
  const std::size_t frame_bytes = luma + 2 * cw * ch;

  std::vector<float> samples;
  std::size_t frames = 0;
  while (offset < bytes.size()) {
    const std::size_t frame_start = offset;
    offset = read_line(bytes, offset, line);
    if (line.compare(0, kFrameTag.size(), kFrameTag) != 0)
      throw ParseError("y4m: expected FRAME marker", frame_start);
    if (bytes.size() - offset < frame_bytes)
      throw ParseError("y4m: truncated FRAME payload", offset);

    const std::uint8_t* y_plane = bytes.data() + offset;
    const std::uint8_t* u_plane = y_plane + luma;
    const std::uint8_t* v_plane = u_plane + cw * ch;
    const std::size_t base = samples.size();
    samples.resize(base + 3 * luma);
    float* r = samples.data() + base;
    float* g = r + luma;
    float* b = g + luma;
    const double y_off = h.full_range ? 0.0 : 16.0, y_scale = h.full_range ? 255.0 : 219.0;
    const double c_scale = h.full_range ? 255.0 : 224.0;
    for (std::size_t yy = 0; yy < h.height; ++yy)
      for (std::size_t xx = 0; xx < h.width; ++xx) {
        const std::size_t ci = h.chroma == Chroma::c444 ? yy * cw + xx : (yy / 2) * cw + xx / 2;
        const double luma_v = (y_plane[yy * h.width + xx] - y_off) / y_scale;
        const double cb = (u_plane[ci] - 128.0) / c_scale;
        const double cr = (v_plane[ci] - 128.0) / c_scale;
        const std::size_t i = yy * h.width + xx;
        r[i] = to_unit(luma_v + 1.402 * cr);
        g[i] = to_unit(luma_v - 0.344136 * cb - 0.714136 * cr);
        b[i] = to_unit(luma_v + 1.772 * cb);
      }
    offset += frame_bytes;
    ++frames;
  }
  if (frames == 0) throw ParseError("y4m: no frames", offset);
  return VideoClip(frames, h.height, h.width, h.fps, std::move(samples));
}

VideoClip read_y4m(const std::filesystem::path& path) {
  return parse_file(path, [](std::span<const std::uint8_t> b) { return parse_y4m(b); });
}

Bytes encode_y4m(const VideoClip& clip) {
  const std::string header = std::string(kMagic) + " W" + std::to_string(clip.width()) + " H" +
                             std::to_string(clip.height()) + " F" +
                             std::to_string(clip.fps().num) + ":" +
                             std::to_string(clip.fps().den) + " Ip A1:1 C444\n";
  Bytes out(header.begin(), header.end());
  const std::size_t plane = clip.width() * clip.height();
  auto quantize = [](double v, double lo, double hi) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), static_cast<long>(lo),
                                                static_cast<long>(hi)));
  };
  for (std::size_t t = 0; t < clip.frames(); ++t) {
    out.insert(out.end(), kFrameTag.begin(), kFrameTag.end());
    out.push_back('\n');
    const auto f = clip.frame(t);
    Bytes y(plane), u(plane), v(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      const double r = f[i], g = f[plane + i], b = f[2 * plane + i];
      const double luma = 0.299 * r + 0.587 * g + 0.114 * b;
      y[i] = quantize(16.0 + 219.0 * luma, 16, 235);
      u[i] = quantize(128.0 + 224.0 * (b - luma) / 1.772, 16, 240);
      v[i] = quantize(128.0 + 224.0 * (r - luma) / 1.402, 16, 240);
    }
    out.insert(out.end(), y.begin(), y.end());
    out.insert(out.end(), u.begin(), u.end());
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

void write_y4m(const VideoClip& clip, const std::filesystem::path& path) {
  write_file_atomic(path, encode_y4m(clip));
}

VideoClip read_video(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".y4m") return read_y4m(path);
  if (ext == ".rvid") return read_rawvideo(path);
  throw UnsupportedFormatError("unsupported video container '" + path.string() +
                               "'; transcode to .y4m first");
}

}  // namespace v2a::media
