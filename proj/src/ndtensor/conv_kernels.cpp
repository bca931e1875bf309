#include "conv_kernels.hpp"

#include <cblas.h>

#include <algorithm>
#include <vector>

namespace v2a::detail {
namespace {

// Caps one im2col buffer at 2^21 doubles (16 MiB).
constexpr std::size_t kColumnBudget = std::size_t{1} << 21;

struct Chunking {
  std::size_t rows;         // Cin * kernel volume
  std::size_t plane;        // out H * out W
  std::size_t slices;       // output time slices per chunk
};

Chunking plan(const ConvGeometry& g) {
  Chunking c{};
  c.rows = g.in_channels * g.kernel_volume();
  c.plane = g.out[1] * g.out[2];
  c.slices = std::max<std::size_t>(1, kColumnBudget / std::max<std::size_t>(1, c.rows * c.plane));
  c.slices = std::min(c.slices, g.out[0]);
  return c;
}

// Input index along one axis for output position o and kernel tap k, or -1
// when it falls in the zero padding.
inline long source(std::size_t o, std::size_t k, std::size_t stride, std::size_t pad,
                   std::size_t extent) {
  const long i = static_cast<long>(o * stride + k) - static_cast<long>(pad);
  return (i < 0 || i >= static_cast<long>(extent)) ? -1 : i;
}

// col[r, p] for output time slices [t0, t1) of one batch item.
void im2col(const ConvGeometry& g, const double* input_item, std::size_t t0, std::size_t t1,
            double* col) {
  const auto [kT, kH, kW] = g.kernel;
  const std::size_t cols = (t1 - t0) * g.out[1] * g.out[2];
  std::size_t r = 0;
  for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
    const double* channel = input_item + ci * g.in_volume();
    for (std::size_t kt = 0; kt < kT; ++kt)
      for (std::size_t kh = 0; kh < kH; ++kh)
        for (std::size_t kw = 0; kw < kW; ++kw, ++r) {
          double* dst = col + r * cols;
          for (std::size_t t = t0; t < t1; ++t) {
            const long it = source(t, kt, g.stride[0], g.padding[0], g.in[0]);
            for (std::size_t h = 0; h < g.out[1]; ++h) {
              const long ih = source(h, kh, g.stride[1], g.padding[1], g.in[1]);
              if (it < 0 || ih < 0) {
                std::fill_n(dst, g.out[2], 0.0);
                dst += g.out[2];
                continue;
              }
              const double* row = channel + (static_cast<std::size_t>(it) * g.in[1] +
                                             static_cast<std::size_t>(ih)) * g.in[2];
              for (std::size_t w = 0; w < g.out[2]; ++w) {
                const long iw = source(w, kw, g.stride[2], g.padding[2], g.in[2]);
                *dst++ = iw < 0 ? 0.0 : row[iw];
              }
            }
          }
        }
  }
}

// Scatter-add of col back onto the input grid (adjoint of im2col).
void col2im(const ConvGeometry& g, const double* col, std::size_t t0, std::size_t t1,
            double* input_item) {
  const auto [kT, kH, kW] = g.kernel;
  const std::size_t cols = (t1 - t0) * g.out[1] * g.out[2];
  std::size_t r = 0;
  for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
    double* channel = input_item + ci * g.in_volume();
    for (std::size_t kt = 0; kt < kT; ++kt)
      for (std::size_t kh = 0; kh < kH; ++kh)
        for (std::size_t kw = 0; kw < kW; ++kw, ++r) {
          const double* src = col + r * cols;
          for (std::size_t t = t0; t < t1; ++t) {
            const long it = source(t, kt, g.stride[0], g.padding[0], g.in[0]);
            for (std::size_t h = 0; h < g.out[1]; ++h) {
              const long ih = source(h, kh, g.stride[1], g.padding[1], g.in[1]);
              if (it < 0 || ih < 0) {
                src += g.out[2];
                continue;
              }
              double* row = channel + (static_cast<std::size_t>(it) * g.in[1] +
                                       static_cast<std::size_t>(ih)) * g.in[2];
              for (std::size_t w = 0; w < g.out[2]; ++w, ++src) {
                const long iw = source(w, kw, g.stride[2], g.padding[2], g.in[2]);
                if (iw >= 0) row[iw] += *src;
              }
            }
          }
        }
  }
}

int as_int(std::size_t v) { return static_cast<int>(v); }

}  // namespace

void conv_forward(const ConvGeometry& g, const double* input, const double* weight,
                  double* output) {
  const auto c = plan(g);
  std::vector<double> col(c.rows * c.slices * c.plane);
  for (std::size_t b = 0; b < g.batch; ++b) {
    const double* item = input + b * g.in_channels * g.in_volume();
    double* out_item = output + b * g.out_channels * g.out_volume();
    for (std::size_t t0 = 0; t0 < g.out[0]; t0 += c.slices) {
      const std::size_t t1 = std::min(g.out[0], t0 + c.slices);
      const std::size_t cols = (t1 - t0) * c.plane;
      im2col(g, item, t0, t1, col.data());
      cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, as_int(g.out_channels),
                  as_int(cols), as_int(c.rows), 1.0, weight, as_int(c.rows), col.data(),
                  as_int(cols), 1.0, out_item + t0 * c.plane, as_int(g.out_volume()));
    }
  }
}

void conv_backward_data(const ConvGeometry& g, const double* grad_output, const double* weight,
                        double* grad_input) {
  const auto c = plan(g);
  std::vector<double> col(c.rows * c.slices * c.plane);
  for (std::size_t b = 0; b < g.batch; ++b) {
    const double* gout = grad_output + b * g.out_channels * g.out_volume();
    double* gin = grad_input + b * g.in_channels * g.in_volume();
    for (std::size_t t0 = 0; t0 < g.out[0]; t0 += c.slices) {
      const std::size_t t1 = std::min(g.out[0], t0 + c.slices);
      const std::size_t cols = (t1 - t0) * c.plane;
      cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, as_int(c.rows), as_int(cols),
                  as_int(g.out_channels), 1.0, weight, as_int(c.rows), gout + t0 * c.plane,
                  as_int(g.out_volume()), 0.0, col.data(), as_int(cols));
      col2im(g, col.data(), t0, t1, gin);
    }
  }
}

void conv_backward_weight(const ConvGeometry& g, const double* input, const double* grad_output,
                          double* grad_weight) {
  const auto c = plan(g);
  std::vector<double> col(c.rows * c.slices * c.plane);
  for (std::size_t b = 0; b < g.batch; ++b) {
    const double* item = input + b * g.in_channels * g.in_volume();
    const double* gout = grad_output + b * g.out_channels * g.out_volume();
    for (std::size_t t0 = 0; t0 < g.out[0]; t0 += c.slices) {
      const std::size_t t1 = std::min(g.out[0], t0 + c.slices);
      const std::size_t cols = (t1 - t0) * c.plane;
      im2col(g, item, t0, t1, col.data());
      cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, as_int(g.out_channels),
                  as_int(c.rows), as_int(cols), 1.0, gout + t0 * c.plane, as_int(g.out_volume()),
                  col.data(), as_int(cols), 1.0, grad_weight, as_int(c.rows));
    }
  }
}

}  // namespace v2a::detail
