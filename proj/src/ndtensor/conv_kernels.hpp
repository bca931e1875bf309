#pragma once

#include <array>
#include <cstddef>

namespace v2a::detail {

// Geometry of a strided, zero-padded 3D cross-correlation from an input
// space [B, Cin, in...] to an output space [B, Cout, out...]. The weight is
// laid out [Cout, Cin, kT, kH, kW]. All buffers are 64-bit.
struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::array<std::size_t, 3> in{};
  std::array<std::size_t, 3> out{};
  std::array<std::size_t, 3> kernel{};
  std::array<std::size_t, 3> stride{};
  std::array<std::size_t, 3> padding{};

  std::size_t in_volume() const { return in[0] * in[1] * in[2]; }
  std::size_t out_volume() const { return out[0] * out[1] * out[2]; }
  std::size_t kernel_volume() const { return kernel[0] * kernel[1] * kernel[2]; }
};

// output += conv(input, weight)
void conv_forward(const ConvGeometry& g, const double* input, const double* weight,
                  double* output);

// grad_input += conv^T(grad_output, weight)
void conv_backward_data(const ConvGeometry& g, const double* grad_output, const double* weight,
                        double* grad_input);

// grad_weight += d conv / d weight contracted with grad_output
void conv_backward_weight(const ConvGeometry& g, const double* input, const double* grad_output,
                          double* grad_weight);

}  // namespace v2a::detail
