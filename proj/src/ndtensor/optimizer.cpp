#include "v2a/optimizer.hpp"

#include <cmath>

#include "v2a/error.hpp"

namespace v2a {

template <typename T>
void Optimizer<T>::step(std::span<NamedTensor<T>> params) {
  if (!shapes_.empty() && shapes_.size() != params.size())
    throw ContractError("optimizer was bound to " + std::to_string(shapes_.size()) +
                        " parameters, got " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (!p.tensor.has_grad())
      throw ContractError("optimizer step: parameter '" + p.name + "' has no gradient");
    if (!shapes_.empty() && shapes_[i] != p.tensor.shape())
      throw ContractError("optimizer step: parameter '" + p.name + "' changed shape");
    for (auto g : p.tensor.grad())
      if (!std::isfinite(g))
        throw NumericError("optimizer step: non-finite gradient in '" + p.name + "'");
  }
  if (shapes_.empty()) {
    for (const auto& p : params) {
      shapes_.push_back(p.tensor.shape());
      if (settings_.mode == OptimizerMode::adaptive) {
        first_moment_.emplace_back(p.tensor.size(), 0.0);
        second_moment_.emplace_back(p.tensor.size(), 0.0);
      }
    }
  }

  ++steps_;
  const double lr = settings_.learning_rate;
  if (settings_.mode == OptimizerMode::gradient_descent) {
    for (auto& p : params) {
      auto values = p.tensor.mutable_data();
      const auto grad = p.tensor.grad();
      for (std::size_t j = 0; j < values.size(); ++j)
        values[j] = static_cast<T>(values[j] - lr * grad[j]);
      p.tensor.clear_grad();
    }
    return;
  }

  const double b1 = settings_.beta1, b2 = settings_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].tensor.mutable_data();
    const auto grad = params[i].tensor.grad();
    auto& m = first_moment_[i];
    auto& v = second_moment_[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad[j];
      m[j] = b1 * m[j] + (1.0 - b1) * g;
      v[j] = b2 * v[j] + (1.0 - b2) * g * g;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      values[j] = static_cast<T>(values[j] - lr * m_hat / (std::sqrt(v_hat) + settings_.epsilon));
    }
    params[i].tensor.clear_grad();
  }
}

template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace v2a
