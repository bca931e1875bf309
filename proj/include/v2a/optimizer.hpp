#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "v2a/tensor.hpp"

namespace v2a {

enum class OptimizerMode { gradient_descent, adaptive };

struct OptimizerSettings {
  OptimizerMode mode = OptimizerMode::adaptive;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First-order updater. Plain mode: p -= lr * g. Adaptive mode keeps bias-
// corrected first/second moment estimates per parameter element.
//
// The parameter list passed to step() must keep the same order and shapes
// from call to call; the moment buffers are bound by position.
template <typename T>
class Optimizer {
 public:
  explicit Optimizer(OptimizerSettings settings = {}) : settings_(settings) {}

  // Applies one update to every parameter and clears their gradients.
  // Throws ContractError (naming the parameter) if any gradient is missing;
  // in that case nothing is modified.
  void step(std::span<NamedTensor<T>> params);

  std::uint64_t steps() const noexcept { return steps_; }
  const OptimizerSettings& settings() const noexcept { return settings_; }
  void set_learning_rate(double lr) { settings_.learning_rate = lr; }

 private:
  OptimizerSettings settings_;
  std::uint64_t steps_ = 0;
  std::vector<Shape> shapes_;
  std::vector<std::vector<double>> first_moment_;
  std::vector<std::vector<double>> second_moment_;
};

extern template class Optimizer<float>;
extern template class Optimizer<double>;

}  // namespace v2a
