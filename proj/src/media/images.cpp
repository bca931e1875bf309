#include <cstdio>
#include <cmath>
#include <string>

#include "v2a/error.hpp"
#include "v2a/media.hpp"

namespace v2a::media {
namespace {

void write_netpbm(const std::filesystem::path& path, const char* magic, std::size_t width,
                  std::size_t height, std::size_t channels, std::span<const std::uint8_t> pixels) {
  if (width == 0 || height == 0) throw ContractError("image must be non-empty");
  if (pixels.size() != width * height * channels)
    throw ContractError("image payload has " + std::to_string(pixels.size()) + " bytes, expected " +
                        std::to_string(width * height * channels));
  const std::string header = std::string(magic) + "\n" + std::to_string(width) + " " +
                             std::to_string(height) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.insert(out.end(), pixels.begin(), pixels.end());
  write_file_atomic(path, out);
}

}  // namespace

void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const std::uint8_t> gray) {
  write_netpbm(path, "P5", width, height, 1, gray);
}

void write_ppm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const std::uint8_t> rgb) {
  write_netpbm(path, "P6", width, height, 3, rgb);
}

void write_frame_ppm(const VideoClip& clip, std::size_t t, const std::filesystem::path& path) {
  if (t >= clip.frames())
    throw ContractError("frame " + std::to_string(t) + " outside clip of " +
                        std::to_string(clip.frames()) + " frames");
  const std::size_t plane = clip.height() * clip.width();
  const auto f = clip.frame(t);
  Bytes rgb(plane * 3);
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < 3; ++c)
      rgb[i * 3 + c] = static_cast<std::uint8_t>(std::lround(f[c * plane + i] * 255.0f));
  write_ppm(path, clip.width(), clip.height(), rgb);
}

std::vector<std::filesystem::path> export_code_image(const CodeGrid& codes, std::size_t item,
                                                     const std::filesystem::path& stem) {
  codes.validate();
  if (item >= codes.batch)
    throw ContractError("batch item " + std::to_string(item) + " outside code grid of " +
                        std::to_string(codes.batch));
  const std::size_t k = codes.codebook_size;
  std::vector<std::filesystem::path> written;
  Bytes gray(codes.height * codes.width);
  for (std::size_t t = 0; t < codes.time; ++t) {
    for (std::size_t y = 0; y < codes.height; ++y)
      for (std::size_t x = 0; x < codes.width; ++x) {
        const std::uint32_t index = codes.at(item, t, y, x);
        gray[y * codes.width + x] =
            k == 1 ? 0 : static_cast<std::uint8_t>((index * 255 * 2 + (k - 1)) / (2 * (k - 1)));
      }
    char suffix[16];
    std::snprintf(suffix, sizeof suffix, "_t%03zu.pgm", t);
    auto path = stem;
    path += suffix;
    write_pgm(path, codes.width, codes.height, gray);
    written.push_back(std::move(path));
  }
  return written;
}

}  // namespace v2a::media
