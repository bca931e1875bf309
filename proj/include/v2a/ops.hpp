#pragma once

#include <array>
#include <cstddef>
#include <span>

#include "v2a/tensor.hpp"

namespace v2a {

enum class Activation { relu, sigmoid, tanh };

struct Conv3dOptions {
  std::array<std::size_t, 3> stride{1, 1, 1};
  std::array<std::size_t, 3> padding{0, 0, 0};
};

// floor((in + 2p - k) / s) + 1; throws ConfigError if that is < 1.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding);
// (in - 1) * s - 2p + k; throws ConfigError if that is < 1.
std::size_t conv_transpose_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                                         std::size_t padding);

// x[B, In], weight[Out, In], bias[Out] -> [B, Out]
template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias);

// Cross-correlation with zero padding.
// x[B, Cin, T, H, W], kernel[Cout, Cin, kT, kH, kW], bias[Cout]
template <typename T>
BasicTensor<T> conv3d(const BasicTensor<T>& x, const BasicTensor<T>& kernel,
                      const BasicTensor<T>& bias, const Conv3dOptions& options);

// Gradient-of-conv3d with respect to its input, plus bias.
// x[B, Cin, T, H, W], kernel[Cin, Cout, kT, kH, kW], bias[Cout]
template <typename T>
BasicTensor<T> conv3d_transpose(const BasicTensor<T>& x, const BasicTensor<T>& kernel,
                                const BasicTensor<T>& bias, const Conv3dOptions& options);

// Sigmoid and tanh outputs are clamped to the open intervals (0,1) and
// (-1,1) at the precision of T.
template <typename T>
BasicTensor<T> activation(const BasicTensor<T>& x, Activation kind);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  return activation(x, Activation::relu);
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
  return activation(x, Activation::sigmoid);
}

// Mean of squared differences. The target must not require grad.
template <typename T>
BasicTensor<T> mse(const BasicTensor<T>& pred, const BasicTensor<T>& target);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, double factor);
template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape);

// out.shape[i] == x.shape[axes[i]]
template <typename T>
BasicTensor<T> permute(const BasicTensor<T>& x, std::span<const std::size_t> axes);

// table[K, D], rows in [0, K) -> [rows.size(), D]; gradient scatters back.
template <typename T>
BasicTensor<T> gather_rows(const BasicTensor<T>& table, std::span<const std::size_t> rows);

// Same values in the other precision; a leaf with no tape history.
template <typename To, typename From>
BasicTensor<To> cast(const BasicTensor<From>& x) {
  std::vector<To> data(x.data().begin(), x.data().end());
  return BasicTensor<To>(x.shape(), std::move(data));
}

}  // namespace v2a
