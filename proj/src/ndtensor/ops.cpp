#include "v2a/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "conv_kernels.hpp"
#include "v2a/error.hpp"

namespace v2a {
namespace {

template <typename T>
void require_finite(const BasicTensor<T>& t, const char* op) {
  for (std::size_t i = 0; i < t.size(); ++i)
    if (!std::isfinite(t.data()[i]))
      throw NumericError(std::string(op) + " produced a non-finite value at element " +
                         std::to_string(i));
}

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shapes " + to_string(a.shape()) + " and " +
                         to_string(b.shape()) + " differ");
}

template <typename T>
std::vector<double> widen(std::span<const T> values) {
  return std::vector<double>(values.begin(), values.end());
}

template <typename T>
void accumulate(std::span<T> dst, const std::vector<double>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += static_cast<T>(src[i]);
}

template <typename T>
Tape<T>& tape() {
  return Tape<T>::current();
}

detail::ConvGeometry conv_geometry(const Shape& in, const Shape& kernel, std::size_t cout,
                                   const Conv3dOptions& o, const std::array<std::size_t, 3>& out) {
  detail::ConvGeometry g;
  g.batch = in[0];
  g.in_channels = in[1];
  g.out_channels = cout;
  g.in = {in[2], in[3], in[4]};
  g.out = out;
  g.kernel = {kernel[2], kernel[3], kernel[4]};
  g.stride = o.stride;
  g.padding = o.padding;
  return g;
}

void check_conv_ranks(const Shape& x, const Shape& k, const Shape& b, const char* op) {
  if (x.size() != 5)
    throw DimensionError(std::string(op) + ": input must be rank 5 (B, C, T, H, W), got " +
                         to_string(x));
  if (k.size() != 5)
    throw DimensionError(std::string(op) + ": kernel must be rank 5, got " + to_string(k));
  if (b.size() != 1) throw DimensionError(std::string(op) + ": bias must be rank 1");
}

const char* kAxisNames[3] = {"T", "H", "W"};

}  // namespace

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding) {
  if (stride == 0) throw ConfigError("conv stride must be positive");
  const long span = static_cast<long>(in + 2 * padding) - static_cast<long>(kernel);
  if (span < 0)
    throw ConfigError("conv output extent would be < 1 (in=" + std::to_string(in) +
                      ", k=" + std::to_string(kernel) + ", p=" + std::to_string(padding) + ")");
  return static_cast<std::size_t>(span) / stride + 1;
}

std::size_t conv_transpose_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                                         std::size_t padding) {
  if (stride == 0) throw ConfigError("conv stride must be positive");
  const long out = in == 0 ? 0
                           : static_cast<long>((in - 1) * stride + kernel) -
                                 2 * static_cast<long>(padding);
  if (out < 1)
    throw ConfigError("transposed conv output extent would be < 1 (in=" + std::to_string(in) +
                      ", k=" + std::to_string(kernel) + ", s=" + std::to_string(stride) +
                      ", p=" + std::to_string(padding) + ")");
  return static_cast<std::size_t>(out);
}

template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias) {
  if (x.rank() != 2 || weight.rank() != 2 || bias.rank() != 1)
    throw DimensionError("linear: expected x[B, In], weight[Out, In], bias[Out]; got " +
                         to_string(x.shape()) + ", " + to_string(weight.shape()) + ", " +
                         to_string(bias.shape()));
  const std::size_t batch = x.dim(0), in = x.dim(1), out = weight.dim(0);
  if (weight.dim(1) != in)
    throw DimensionError("linear: x axis 1 (" + std::to_string(in) +
                         ") does not match weight axis 1 (" + std::to_string(weight.dim(1)) + ")");
  if (bias.dim(0) != out)
    throw DimensionError("linear: bias axis 0 (" + std::to_string(bias.dim(0)) +
                         ") does not match weight axis 0 (" + std::to_string(out) + ")");

  const auto xs = x.data();
  const auto ws = weight.data();
  const auto bs = bias.data();
  std::vector<T> result(batch * out);
  for (std::size_t b = 0; b < batch; ++b) {
    const T* xr = xs.data() + b * in;
    for (std::size_t o = 0; o < out; ++o) {
      const T* wr = ws.data() + o * in;
      double acc[4] = {0, 0, 0, 0};
      std::size_t i = 0;
      for (; i + 4 <= in; i += 4) {
        acc[0] += static_cast<double>(xr[i]) * wr[i];
        acc[1] += static_cast<double>(xr[i + 1]) * wr[i + 1];
        acc[2] += static_cast<double>(xr[i + 2]) * wr[i + 2];
        acc[3] += static_cast<double>(xr[i + 3]) * wr[i + 3];
      }
      for (; i < in; ++i) acc[0] += static_cast<double>(xr[i]) * wr[i];
      result[b * out + o] = static_cast<T>(bs[o] + ((acc[0] + acc[1]) + (acc[2] + acc[3])));
    }
  }
  BasicTensor<T> y({batch, out}, std::move(result));
  require_finite(y, "linear");

  if (tape<T>().wants({&x, &weight, &bias})) {
    tape<T>().record(y, {x, weight, bias}, [x, weight, batch, in, out](
                                               std::span<const T> g, std::span<std::span<T>> gi) {
      const auto xs = x.data();
      const auto ws = weight.data();
      if (!gi[0].empty()) {
        std::vector<double> gx(batch * in, 0.0);
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t o = 0; o < out; ++o) {
            const double go = g[b * out + o];
            if (go == 0.0) continue;
            const T* wr = ws.data() + o * in;
            double* dst = gx.data() + b * in;
            for (std::size_t i = 0; i < in; ++i) dst[i] += go * wr[i];
          }
        accumulate(gi[0], gx);
      }
      if (!gi[1].empty()) {
        for (std::size_t o = 0; o < out; ++o) {
          T* dst = gi[1].data() + o * in;
          for (std::size_t i = 0; i < in; ++i) {
            double acc = 0.0;
            for (std::size_t b = 0; b < batch; ++b)
              acc += static_cast<double>(g[b * out + o]) * xs[b * in + i];
            dst[i] += static_cast<T>(acc);
          }
        }
      }
      if (!gi[2].empty()) {
        for (std::size_t o = 0; o < out; ++o) {
          double acc = 0.0;
          for (std::size_t b = 0; b < batch; ++b) acc += g[b * out + o];
          gi[2][o] += static_cast<T>(acc);
        }
      }
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> conv3d(const BasicTensor<T>& x, const BasicTensor<T>& kernel,
                      const BasicTensor<T>& bias, const Conv3dOptions& options) {
  check_conv_ranks(x.shape(), kernel.shape(), bias.shape(), "conv3d");
  if (kernel.dim(1) != x.dim(1))
    throw DimensionError("conv3d: input channels (axis 1 of x = " + std::to_string(x.dim(1)) +
                         ") differ from kernel axis 1 (" + std::to_string(kernel.dim(1)) + ")");
  if (bias.dim(0) != kernel.dim(0))
    throw DimensionError("conv3d: bias axis 0 does not match kernel axis 0");

  std::array<std::size_t, 3> out{};
  for (std::size_t a = 0; a < 3; ++a) {
    try {
      out[a] = conv_output_extent(x.dim(2 + a), kernel.dim(2 + a), options.stride[a],
                                  options.padding[a]);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("conv3d axis ") + kAxisNames[a] + ": " + e.what());
    }
  }
  const std::size_t cout = kernel.dim(0);
  const auto g = conv_geometry(x.shape(), kernel.shape(), cout, options, out);

  const auto xd = widen(x.data());
  const auto wd = widen(kernel.data());
  std::vector<double> yd(g.batch * cout * g.out_volume(), 0.0);
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t c = 0; c < cout; ++c)
      std::fill_n(yd.begin() + (b * cout + c) * g.out_volume(), g.out_volume(),
                  static_cast<double>(bias.data()[c]));
  detail::conv_forward(g, xd.data(), wd.data(), yd.data());

  BasicTensor<T> y({g.batch, cout, out[0], out[1], out[2]}, std::vector<T>(yd.begin(), yd.end()));
  require_finite(y, "conv3d");

  if (tape<T>().wants({&x, &kernel, &bias})) {
    tape<T>().record(y, {x, kernel, bias}, [x, kernel, g](std::span<const T> gy,
                                                          std::span<std::span<T>> gi) {
      const auto gyd = widen(gy);
      if (!gi[0].empty()) {
        std::vector<double> gx(x.size(), 0.0);
        const auto wd = widen(kernel.data());
        detail::conv_backward_data(g, gyd.data(), wd.data(), gx.data());
        accumulate(gi[0], gx);
      }
      if (!gi[1].empty()) {
        std::vector<double> gw(kernel.size(), 0.0);
        const auto xd = widen(x.data());
        detail::conv_backward_weight(g, xd.data(), gyd.data(), gw.data());
        accumulate(gi[1], gw);
      }
      if (!gi[2].empty()) {
        for (std::size_t c = 0; c < g.out_channels; ++c) {
          double acc = 0.0;
          for (std::size_t b = 0; b < g.batch; ++b) {
            const double* plane = gyd.data() + (b * g.out_channels + c) * g.out_volume();
            acc = std::accumulate(plane, plane + g.out_volume(), acc);
          }
          gi[2][c] += static_cast<T>(acc);
        }
      }
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> conv3d_transpose(const BasicTensor<T>& x, const BasicTensor<T>& kernel,
                                const BasicTensor<T>& bias, const Conv3dOptions& options) {
  check_conv_ranks(x.shape(), kernel.shape(), bias.shape(), "conv3d_transpose");
  if (kernel.dim(0) != x.dim(1))
    throw DimensionError("conv3d_transpose: input channels (axis 1 of x = " +
                         std::to_string(x.dim(1)) + ") differ from kernel axis 0 (" +
                         std::to_string(kernel.dim(0)) + ")");
  if (bias.dim(0) != kernel.dim(1))
    throw DimensionError("conv3d_transpose: bias axis 0 does not match kernel axis 1");

  std::array<std::size_t, 3> out{};
  for (std::size_t a = 0; a < 3; ++a) {
    try {
      out[a] = conv_transpose_output_extent(x.dim(2 + a), kernel.dim(2 + a), options.stride[a],
                                            options.padding[a]);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("conv3d_transpose axis ") + kAxisNames[a] + ": " + e.what());
    }
  }
  const std::size_t cout = kernel.dim(1);
  // Viewed as a convolution from the (larger) output grid onto x's grid.
  const Shape output_shape{x.dim(0), cout, out[0], out[1], out[2]};
  const auto g = conv_geometry(output_shape, Shape{kernel.dim(0), cout, kernel.dim(2),
                                                   kernel.dim(3), kernel.dim(4)},
                               kernel.dim(0), options, {x.dim(2), x.dim(3), x.dim(4)});
  for (std::size_t a = 0; a < 3; ++a)
    if (conv_output_extent(out[a], g.kernel[a], g.stride[a], g.padding[a]) != g.out[a])
      throw ConfigError(std::string("conv3d_transpose axis ") + kAxisNames[a] +
                        ": geometry is not invertible");

  const auto xd = widen(x.data());
  const auto wd = widen(kernel.data());
  std::vector<double> yd(numel(output_shape), 0.0);
  detail::conv_backward_data(g, xd.data(), wd.data(), yd.data());
  const std::size_t vol = g.in_volume();
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t c = 0; c < cout; ++c) {
      const double bc = bias.data()[c];
      double* plane = yd.data() + (b * cout + c) * vol;
      for (std::size_t i = 0; i < vol; ++i) plane[i] += bc;
    }

  BasicTensor<T> y(output_shape, std::vector<T>(yd.begin(), yd.end()));
  require_finite(y, "conv3d_transpose");

  if (tape<T>().wants({&x, &kernel, &bias})) {
    tape<T>().record(y, {x, kernel, bias}, [x, kernel, g](std::span<const T> gy,
                                                          std::span<std::span<T>> gi) {
      const auto gyd = widen(gy);
      if (!gi[0].empty()) {
        std::vector<double> gx(x.size(), 0.0);
        const auto wd = widen(kernel.data());
        detail::conv_forward(g, gyd.data(), wd.data(), gx.data());
        accumulate(gi[0], gx);
      }
      if (!gi[1].empty()) {
        std::vector<double> gw(kernel.size(), 0.0);
        const auto xd = widen(x.data());
        detail::conv_backward_weight(g, gyd.data(), xd.data(), gw.data());
        accumulate(gi[1], gw);
      }
      if (!gi[2].empty()) {
        const std::size_t vol = g.in_volume();
        for (std::size_t c = 0; c < g.in_channels; ++c) {
          double acc = 0.0;
          for (std::size_t b = 0; b < g.batch; ++b) {
            const double* plane = gyd.data() + (b * g.in_channels + c) * vol;
            acc = std::accumulate(plane, plane + vol, acc);
          }
          gi[2][c] += static_cast<T>(acc);
        }
      }
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> activation(const BasicTensor<T>& x, Activation kind) {
  const auto xs = x.data();
  std::vector<T> out(xs.size());
  const T one_below = std::nextafter(T{1}, T{0});
  switch (kind) {
    case Activation::relu:
      std::transform(xs.begin(), xs.end(), out.begin(), [](T v) { return v > T{0} ? v : T{0}; });
      break;
    case Activation::sigmoid:
      std::transform(xs.begin(), xs.end(), out.begin(), [one_below](T v) {
        const double s = 1.0 / (1.0 + std::exp(-static_cast<double>(v)));
        return std::clamp(static_cast<T>(s), std::numeric_limits<T>::min(), one_below);
      });
      break;
    case Activation::tanh:
      std::transform(xs.begin(), xs.end(), out.begin(), [one_below](T v) {
        return std::clamp(static_cast<T>(std::tanh(static_cast<double>(v))), -one_below,
                          one_below);
      });
      break;
  }
  BasicTensor<T> y(x.shape(), std::move(out));
  require_finite(y, "activation");

  if (tape<T>().wants({&x})) {
    tape<T>().record(y, {x}, [x, y, kind](std::span<const T> g,
                                                       std::span<std::span<T>> gi) {
      const auto xs = x.data();
      const auto ys = y.data();
      for (std::size_t i = 0; i < g.size(); ++i) {
        double d = 0.0;
        switch (kind) {
          case Activation::relu: d = xs[i] > T{0} ? 1.0 : 0.0; break;
          case Activation::sigmoid: d = static_cast<double>(ys[i]) * (1.0 - ys[i]); break;
          case Activation::tanh: d = 1.0 - static_cast<double>(ys[i]) * ys[i]; break;
        }
        gi[0][i] += static_cast<T>(g[i] * d);
      }
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> mse(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  require_same_shape(pred, target, "mse");
  if (target.requires_grad()) throw ContractError("mse: target must not require grad");
  const auto p = pred.data();
  const auto t = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - t[i];
    acc += d * d;
  }
  const double n = static_cast<double>(p.size());
  auto y = BasicTensor<T>::scalar(static_cast<T>(acc / n));
  require_finite(y, "mse");

  if (tape<T>().wants({&pred})) {
    tape<T>().record(y, {pred, target}, [pred, target, n](std::span<const T> g,
                                                          std::span<std::span<T>> gi) {
      const auto p = pred.data();
      const auto t = target.data();
      const double scale = 2.0 * g[0] / n;
      for (std::size_t i = 0; i < p.size(); ++i)
        gi[0][i] += static_cast<T>(scale * (static_cast<double>(p[i]) - t[i]));
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.size());
  std::transform(a.data().begin(), a.data().end(), b.data().begin(), out.begin(), std::plus<T>());
  BasicTensor<T> y(a.shape(), std::move(out));
  require_finite(y, "add");
  if (tape<T>().wants({&a, &b})) {
    tape<T>().record(y, {a, b}, [](std::span<const T> g, std::span<std::span<T>> gi) {
      for (auto& dst : gi)
        if (!dst.empty())
          for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "sub");
  std::vector<T> out(a.size());
  std::transform(a.data().begin(), a.data().end(), b.data().begin(), out.begin(),
                 std::minus<T>());
  BasicTensor<T> y(a.shape(), std::move(out));
  require_finite(y, "sub");
  if (tape<T>().wants({&a, &b})) {
    tape<T>().record(y, {a, b}, [](std::span<const T> g, std::span<std::span<T>> gi) {
      if (!gi[0].empty())
        for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
      if (!gi[1].empty())
        for (std::size_t i = 0; i < g.size(); ++i) gi[1][i] -= g[i];
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.size());
  std::transform(a.data().begin(), a.data().end(), b.data().begin(), out.begin(),
                 std::multiplies<T>());
  BasicTensor<T> y(a.shape(), std::move(out));
  require_finite(y, "mul");
  if (tape<T>().wants({&a, &b})) {
    tape<T>().record(y, {a, b}, [a, b](std::span<const T> g, std::span<std::span<T>> gi) {
      if (!gi[0].empty())
        for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i] * b.data()[i];
      if (!gi[1].empty())
        for (std::size_t i = 0; i < g.size(); ++i) gi[1][i] += g[i] * a.data()[i];
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, double factor) {
  std::vector<T> out(x.size());
  std::transform(x.data().begin(), x.data().end(), out.begin(),
                 [factor](T v) { return static_cast<T>(v * factor); });
  BasicTensor<T> y(x.shape(), std::move(out));
  require_finite(y, "scale");
  if (tape<T>().wants({&x})) {
    tape<T>().record(y, {x}, [factor](std::span<const T> g, std::span<std::span<T>> gi) {
      for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += static_cast<T>(g[i] * factor);
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
  const double acc = std::accumulate(x.data().begin(), x.data().end(), 0.0);
  auto y = BasicTensor<T>::scalar(static_cast<T>(acc));
  require_finite(y, "sum");
  if (tape<T>().wants({&x})) {
    tape<T>().record(y, {x}, [](std::span<const T> g, std::span<std::span<T>> gi) {
      for (auto& v : gi[0]) v += g[0];
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x) {
  const double n = static_cast<double>(x.size());
  const double acc = std::accumulate(x.data().begin(), x.data().end(), 0.0);
  auto y = BasicTensor<T>::scalar(static_cast<T>(acc / n));
  require_finite(y, "mean");
  if (tape<T>().wants({&x})) {
    tape<T>().record(y, {x}, [n](std::span<const T> g, std::span<std::span<T>> gi) {
      const T share = static_cast<T>(g[0] / n);
      for (auto& v : gi[0]) v += share;
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape) {
  if (numel(shape) != x.size())
    throw DimensionError("reshape: cannot view " + to_string(x.shape()) + " as " +
                         to_string(shape));
  BasicTensor<T> y(std::move(shape), std::vector<T>(x.data().begin(), x.data().end()));
  if (tape<T>().wants({&x})) {
    tape<T>().record(y, {x}, [](std::span<const T> g, std::span<std::span<T>> gi) {
      for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
    });
  }
  return y;
}

namespace {

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

// Visits every element of the permuted view in row-major order, passing the
// flat source offset to `fn`.
template <typename Fn>
void for_each_permuted(const Shape& in_shape, std::span<const std::size_t> axes, Fn&& fn) {
  const auto in_strides = strides_of(in_shape);
  const std::size_t rank = axes.size();
  Shape out_shape(rank);
  std::vector<std::size_t> step(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    out_shape[i] = in_shape[axes[i]];
    step[i] = in_strides[axes[i]];
  }
  const std::size_t total = numel(out_shape);
  std::vector<std::size_t> index(rank, 0);
  std::size_t offset = 0;
  for (std::size_t n = 0; n < total; ++n) {
    fn(n, offset);
    for (std::size_t a = rank; a-- > 0;) {
      offset += step[a];
      if (++index[a] < out_shape[a]) break;
      offset -= step[a] * out_shape[a];
      index[a] = 0;
    }
  }
}

}  // namespace

template <typename T>
BasicTensor<T> permute(const BasicTensor<T>& x, std::span<const std::size_t> axes) {
  if (axes.size() != x.rank())
    throw DimensionError("permute: " + std::to_string(axes.size()) + " axes for rank " +
                         std::to_string(x.rank()));
  std::vector<bool> seen(axes.size(), false);
  for (auto a : axes) {
    if (a >= axes.size() || seen[a]) throw DimensionError("permute: axes are not a permutation");
    seen[a] = true;
  }
  Shape out_shape(axes.size());
  for (std::size_t i = 0; i < axes.size(); ++i) out_shape[i] = x.dim(axes[i]);

  std::vector<T> out(x.size());
  const auto src = x.data();
  for_each_permuted(x.shape(), axes, [&](std::size_t n, std::size_t off) { out[n] = src[off]; });
  BasicTensor<T> y(std::move(out_shape), std::move(out));

  if (tape<T>().wants({&x})) {
    std::vector<std::size_t> axes_copy(axes.begin(), axes.end());
    tape<T>().record(y, {x}, [in_shape = x.shape(), axes_copy](std::span<const T> g,
                                                               std::span<std::span<T>> gi) {
      for_each_permuted(in_shape, axes_copy,
                        [&](std::size_t n, std::size_t off) { gi[0][off] += g[n]; });
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> gather_rows(const BasicTensor<T>& table, std::span<const std::size_t> rows) {
  if (table.rank() != 2)
    throw DimensionError("gather_rows: table must be rank 2, got " + to_string(table.shape()));
  const std::size_t k = table.dim(0), d = table.dim(1);
  if (rows.empty()) throw ContractError("gather_rows: no rows requested");
  std::vector<T> out(rows.size() * d);
  for (std::size_t n = 0; n < rows.size(); ++n) {
    if (rows[n] >= k)
      throw ContractError("gather_rows: row " + std::to_string(rows[n]) + " out of range [0, " +
                          std::to_string(k) + ")");
    std::copy_n(table.data().begin() + rows[n] * d, d, out.begin() + n * d);
  }
  BasicTensor<T> y({rows.size(), d}, std::move(out));
  if (tape<T>().wants({&table})) {
    std::vector<std::size_t> rows_copy(rows.begin(), rows.end());
    tape<T>().record(y, {table}, [rows_copy, d](std::span<const T> g, std::span<std::span<T>> gi) {
      for (std::size_t n = 0; n < rows_copy.size(); ++n)
        for (std::size_t j = 0; j < d; ++j) gi[0][rows_copy[n] * d + j] += g[n * d + j];
    });
  }
  return y;
}

#define V2A_INSTANTIATE_OPS(T)                                                                   \
  template BasicTensor<T> linear(const BasicTensor<T>&, const BasicTensor<T>&,                  \
                                 const BasicTensor<T>&);                                        \
  template BasicTensor<T> conv3d(const BasicTensor<T>&, const BasicTensor<T>&,                  \
                                 const BasicTensor<T>&, const Conv3dOptions&);                  \
  template BasicTensor<T> conv3d_transpose(const BasicTensor<T>&, const BasicTensor<T>&,        \
                                           const BasicTensor<T>&, const Conv3dOptions&);        \
  template BasicTensor<T> activation(const BasicTensor<T>&, Activation);                        \
  template BasicTensor<T> mse(const BasicTensor<T>&, const BasicTensor<T>&);                    \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                    \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                    \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                    \
  template BasicTensor<T> scale(const BasicTensor<T>&, double);                                 \
  template BasicTensor<T> sum(const BasicTensor<T>&);                                           \
  template BasicTensor<T> mean(const BasicTensor<T>&);                                          \
  template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);                                \
  template BasicTensor<T> permute(const BasicTensor<T>&, std::span<const std::size_t>);         \
  template BasicTensor<T> gather_rows(const BasicTensor<T>&, std::span<const std::size_t>);

V2A_INSTANTIATE_OPS(float)
V2A_INSTANTIATE_OPS(double)

#undef V2A_INSTANTIATE_OPS

}  // namespace v2a
