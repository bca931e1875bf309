#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace v2a {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

template <typename T>
class Tape;

// Dense row-major tensor handle. Copies share storage (like a shared_ptr);
// use clone() for an independent copy. Values produced by an operation are
// never written again; only parameters are updated in place by an optimizer.
//
// The engine is instantiated for float (every model and file format) and
// double (used by the finite-difference verification harness).
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  BasicTensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static BasicTensor zeros(Shape shape, bool requires_grad = false);
  static BasicTensor full(Shape shape, T value, bool requires_grad = false);
  static BasicTensor scalar(T value, bool requires_grad = false);

  bool defined() const noexcept { return impl_ != nullptr; }

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t size() const { return impl_->data.size(); }

  std::span<const T> data() const { return impl_->data; }
  // Parameter initialisation and optimizer updates only.
  std::span<T> mutable_data() { return impl_->data; }
  T item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool flag) { impl_->requires_grad = flag; }
  bool is_leaf() const { return impl_->leaf; }

  bool has_grad() const { return impl_->grad.has_value(); }
  std::span<const T> grad() const;
  std::span<T> mutable_grad();
  void zero_grad();
  void clear_grad() { impl_->grad.reset(); }

  // Same values, cut from any graph, never requires grad.
  BasicTensor detach() const;
  BasicTensor clone() const;

  // Identity of the underlying storage; used to key tape bookkeeping.
  const void* id() const noexcept { return impl_.get(); }

 private:
  friend class Tape<T>;

  struct Impl {
    Shape shape;
    std::vector<T> data;
    bool requires_grad = false;
    bool leaf = true;
    std::optional<std::vector<T>> grad;
  };

  std::shared_ptr<Impl> impl_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

template <typename T>
struct NamedTensor {
  std::string name;
  BasicTensor<T> tensor;
};

// Ordered record of differentiable operations executed on this thread.
// Backward replays it in exact reverse order, then discards it.
template <typename T>
class Tape {
 public:
  // grad_inputs[i] is empty when input i does not need a gradient; otherwise
  // the rule must accumulate (+=) into it.
  using BackwardRule = std::function<void(std::span<const T> grad_output,
                                          std::span<std::span<T>> grad_inputs)>;

  static Tape& current();

  bool recording() const noexcept { return paused_ == 0; }
  std::size_t size() const noexcept { return entries_.size(); }

  // True when recording is on and any input needs a gradient.
  bool wants(std::initializer_list<const BasicTensor<T>*> inputs) const;

  // Registers `output` as produced from `inputs`; marks it non-leaf and
  // requires_grad. Caller is expected to check wants() first.
  void record(BasicTensor<T>& output, std::vector<BasicTensor<T>> inputs,
              BackwardRule rule);

  void backward(const BasicTensor<T>& loss);
  void clear() { entries_.clear(); }

 private:
  template <typename>
  friend class NoGradGuard;

  struct Entry {
    std::vector<BasicTensor<T>> inputs;
    BasicTensor<T> output;
    BackwardRule rule;
  };

  std::vector<Entry> entries_;
  int paused_ = 0;
};

// Suspends recording on the current thread's tape for scalar type T.
template <typename T>
class NoGradGuard {
 public:
  NoGradGuard() { ++Tape<T>::current().paused_; }
  ~NoGradGuard() { --Tape<T>::current().paused_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

// Propagates d(loss)/d(leaf) into every requires_grad leaf reachable from
// the scalar `loss` on the current tape, then clears the tape.
template <typename T>
void backward(const BasicTensor<T>& loss) {
  Tape<T>::current().backward(loss);
}

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace v2a
