#include "v2a/tensor.hpp"

#include <algorithm>
#include <unordered_map>

#include "v2a/error.hpp"

namespace v2a {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string to_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data, bool requires_grad)
    : impl_(std::make_shared<Impl>()) {
  if (std::find(shape.begin(), shape.end(), std::size_t{0}) != shape.end())
    throw DimensionError("tensor extents must be positive, got " + to_string(shape));
  if (numel(shape) != data.size())
    throw DimensionError("shape " + to_string(shape) + " holds " +
                         std::to_string(numel(shape)) + " values, data has " +
                         std::to_string(data.size()));
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T{0}, requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value, bool requires_grad) {
  const auto n = numel(shape);
  return BasicTensor(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::scalar(T value, bool requires_grad) {
  return BasicTensor(Shape{}, std::vector<T>{value}, requires_grad);
}

template <typename T>
T BasicTensor<T>::item() const {
  if (size() != 1)
    throw ContractError("item() on tensor of shape " + to_string(shape()));
  return impl_->data[0];
}

template <typename T>
std::span<const T> BasicTensor<T>::grad() const {
  if (!impl_->grad) throw ContractError("tensor has no gradient");
  return *impl_->grad;
}

template <typename T>
std::span<T> BasicTensor<T>::mutable_grad() {
  if (!impl_->grad) throw ContractError("tensor has no gradient");
  return *impl_->grad;
}

template <typename T>
void BasicTensor<T>::zero_grad() {
  impl_->grad.emplace(impl_->data.size(), T{0});
}

template <typename T>
BasicTensor<T> BasicTensor<T>::detach() const {
  return BasicTensor(impl_->shape, impl_->data, false);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::clone() const {
  BasicTensor copy(impl_->shape, impl_->data, impl_->requires_grad);
  copy.impl_->grad = impl_->grad;
  return copy;
}

template <typename T>
Tape<T>& Tape<T>::current() {
  thread_local Tape tape;
  return tape;
}

template <typename T>
bool Tape<T>::wants(std::initializer_list<const BasicTensor<T>*> inputs) const {
  if (!recording()) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const BasicTensor<T>* t) {
    return t != nullptr && t->defined() && t->requires_grad();
  });
}

template <typename T>
void Tape<T>::record(BasicTensor<T>& output, std::vector<BasicTensor<T>> inputs,
                     BackwardRule rule) {
  output.impl_->leaf = false;
  output.impl_->requires_grad = true;
  entries_.push_back(Entry{std::move(inputs), output, std::move(rule)});
}

template <typename T>
void Tape<T>::backward(const BasicTensor<T>& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw ContractError("backward() needs a scalar loss, got shape " +
                        (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));

  if (loss.is_leaf()) {
    if (loss.requires_grad()) {
      if (!loss.impl_->grad) loss.impl_->grad.emplace(1, T{0});
      (*loss.impl_->grad)[0] += T{1};
    }
    clear();
    return;
  }

  const bool on_tape = std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) {
    return e.output.id() == loss.id();
  });
  if (!on_tape) throw ContractError("backward(): loss was not produced on the current tape");

  // Recorded leaves start from zero so a disconnected parameter reads as 0.
  for (auto& entry : entries_)
    for (auto& input : entry.inputs)
      if (input.is_leaf() && input.requires_grad() && !input.impl_->grad)
        input.impl_->grad.emplace(input.size(), T{0});

  std::unordered_map<const void*, std::vector<T>> pending;
  pending.emplace(loss.id(), std::vector<T>{T{1}});

  std::vector<std::span<T>> grad_inputs;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    auto found = pending.find(it->output.id());
    if (found == pending.end()) continue;
    const std::vector<T> grad_output = std::move(found->second);
    pending.erase(found);

    grad_inputs.clear();
    for (auto& input : it->inputs) {
      if (!input.requires_grad()) {
        grad_inputs.emplace_back();
      } else if (input.is_leaf()) {
        grad_inputs.emplace_back(*input.impl_->grad);
      } else {
        auto [slot, inserted] = pending.try_emplace(input.id());
        if (inserted) slot->second.assign(input.size(), T{0});
        grad_inputs.emplace_back(slot->second);
      }
    }
    it->rule(grad_output, grad_inputs);
  }
  clear();
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace v2a
