#pragma once

#include <cstddef>
#include <functional>

#include "v2a/tensor.hpp"

namespace v2a {

template <typename T>
using ScalarFunction = std::function<BasicTensor<T>(const BasicTensor<T>&)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;  // at worst_index
  double numeric = 0.0;   // at worst_index
};

// Compares the tape gradient of f at x against central differences
//   (f(x + eps e_i) - f(x - eps e_i)) / (2 eps)
// element by element. Relative error is |a - n| / max(1e-8, |a| + |n|).
// f must be deterministic and return a scalar.
template <typename T>
GradCheckReport grad_check_report(const ScalarFunction<T>& f, const BasicTensor<T>& x,
                                  double epsilon);

template <typename T>
double grad_check(const ScalarFunction<T>& f, const BasicTensor<T>& x, double epsilon) {
  return grad_check_report(f, x, epsilon).max_relative_error;
}

extern template GradCheckReport grad_check_report(const ScalarFunction<float>&,
                                                  const BasicTensor<float>&, double);
extern template GradCheckReport grad_check_report(const ScalarFunction<double>&,
                                                  const BasicTensor<double>&, double);

}  // namespace v2a
