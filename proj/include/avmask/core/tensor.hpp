// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace avmask {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <class T>
struct TensorStorage {
  Shape shape;
  std::vector<T> data;
  // Empty until a gradient is first accumulated.
  std::vector<T> grad;
  bool requires_grad = false;
};

// Dense row-major array with an optional gradient buffer.
//
// A tensor is a cheap handle: copies share storage. Ops never write into their
// inputs; only optimizers and loaders mutate data in place. Training runs on
// float; the double instantiation exists for gradient verification.
template <class T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  static BasicTensor zeros(Shape shape);
  static BasicTensor filled(Shape shape, T value);
  static BasicTensor from(Shape shape, std::vector<T> values);
  static BasicTensor scalar(T value);

  bool defined() const noexcept { return static_cast<bool>(storage_); }

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const noexcept { return storage_ ? storage_->data.size() : 0; }

  std::span<const T> data() const;
  std::span<T> mutable_data();
  T item() const;
  T operator[](std::size_t i) const { return data()[i]; }

  bool requires_grad() const noexcept { return storage_ && storage_->requires_grad; }
  BasicTensor& set_requires_grad(bool on = true);

  bool has_grad() const noexcept { return storage_ && !storage_->grad.empty(); }
  std::span<const T> grad() const;
  // Gradient accumulation is bookkeeping on the shared storage, so it is
  // allowed through const handles (ops capture their inputs by value).
  std::span<T> mutable_grad() const;  // allocates zeros on first use
  void zero_grad();

  // Deep copy of the values, no gradient history.
  BasicTensor detach() const;

  // Value copy converted to another element type.
  template <class U>
  BasicTensor<U> cast() const {
    auto src = data();
    return BasicTensor<U>::from(shape(), std::vector<U>(src.begin(), src.end()));
  }

 private:
  explicit BasicTensor(std::shared_ptr<TensorStorage<T>> s) : storage_(std::move(s)) {}

  std::shared_ptr<TensorStorage<T>> storage_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

// Throws NumericError naming `what` if any element is NaN or Inf.
template <class T>
void check_finite(std::span<const T> values, const char* what);

}  // namespace avmask
