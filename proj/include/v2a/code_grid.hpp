#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace v2a {

// Codebook index per latent site, laid out [B, T', H', W'].
struct CodeGrid {
  std::size_t batch = 0;
  std::size_t time = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t codebook_size = 0;
  std::vector<std::uint32_t> indices;

  std::size_t sites() const { return batch * time * height * width; }
  std::uint32_t at(std::size_t b, std::size_t t, std::size_t h, std::size_t w) const {
    return indices[((b * time + t) * height + h) * width + w];
  }

  // Throws ContractError unless the layout is consistent and every index < K.
  void validate() const;
};

}  // namespace v2a
