#pragma once

#include <cstdint>
#include <random>

#include "v2a/tensor.hpp"

namespace v2a {

// Deterministic generator. One master seed fans out into independent
// substreams keyed by a small integer, so components can be seeded without
// depending on each other's draw counts.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng substream(std::uint64_t master, std::uint64_t stream);

  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  std::uint64_t next() { return engine_(); }

  template <typename T>
  BasicTensor<T> uniform_tensor(Shape shape, double bound, bool requires_grad = false) {
    std::vector<T> data(numel(shape));
    for (auto& v : data) v = static_cast<T>(uniform(-bound, bound));
    return BasicTensor<T>(std::move(shape), std::move(data), requires_grad);
  }

 private:
  std::mt19937_64 engine_;
};

// Stream ids used by the model builders.
enum class SeedStream : std::uint64_t {
  encoder = 1,
  codebook = 2,
  recon_decoder = 3,
  audio_decoder = 4,
  data = 5,
};

}  // namespace v2a
