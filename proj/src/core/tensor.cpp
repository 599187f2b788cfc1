// SPDX-License-Identifier: Apache-2.0
#include "avmask/core/tensor.hpp"

#include <cmath>
#include <sstream>

#include "avmask/core/errors.hpp"

namespace avmask {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void validate_shape(const Shape& shape) {
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
  }
}

}  // namespace

template <class T>
BasicTensor<T> BasicTensor<T>::zeros(Shape shape) {
  return filled(std::move(shape), T{0});
}

template <class T>
BasicTensor<T> BasicTensor<T>::filled(Shape shape, T value) {
  validate_shape(shape);
  auto s = std::make_shared<TensorStorage<T>>();
  s->data.assign(shape_numel(shape), value);
  s->shape = std::move(shape);
  return BasicTensor(std::move(s));
}

template <class T>
BasicTensor<T> BasicTensor<T>::from(Shape shape, std::vector<T> values) {
  validate_shape(shape);
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_str(shape) + " needs " + std::to_string(shape_numel(shape)) +
                         " values, got " + std::to_string(values.size()));
  }
  auto s = std::make_shared<TensorStorage<T>>();
  s->shape = std::move(shape);
  s->data = std::move(values);
  return BasicTensor(std::move(s));
}

template <class T>
BasicTensor<T> BasicTensor<T>::scalar(T value) {
  return from({1}, {value});
}

template <class T>
const Shape& BasicTensor<T>::shape() const {
  if (!storage_) throw GraphError("use of undefined tensor");
  return storage_->shape;
}

template <class T>
std::size_t BasicTensor<T>::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  return s[axis];
}

template <class T>
std::span<const T> BasicTensor<T>::data() const {
  if (!storage_) throw GraphError("use of undefined tensor");
  return storage_->data;
}

template <class T>
std::span<T> BasicTensor<T>::mutable_data() {
  if (!storage_) throw GraphError("use of undefined tensor");
  return storage_->data;
}

template <class T>
T BasicTensor<T>::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  return storage_->data[0];
}

template <class T>
BasicTensor<T>& BasicTensor<T>::set_requires_grad(bool on) {
  if (!storage_) throw GraphError("use of undefined tensor");
  storage_->requires_grad = on;
  return *this;
}

template <class T>
std::span<const T> BasicTensor<T>::grad() const {
  if (!has_grad()) throw GraphError("tensor " + shape_str(shape()) + " has no gradient");
  return storage_->grad;
}

template <class T>
std::span<T> BasicTensor<T>::mutable_grad() const {
  if (!storage_) throw GraphError("use of undefined tensor");
  if (storage_->grad.empty()) storage_->grad.assign(storage_->data.size(), T{0});
  return storage_->grad;
}

template <class T>
void BasicTensor<T>::zero_grad() {
  if (storage_) storage_->grad.clear();
}

template <class T>
BasicTensor<T> BasicTensor<T>::detach() const {
  return from(shape(), std::vector<T>(data().begin(), data().end()));
}

template <class T>
void check_finite(std::span<const T> values, const char* what) {
  for (T v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + what);
  }
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template void check_finite<float>(std::span<const float>, const char*);
template void check_finite<double>(std::span<const double>, const char*);

}  // namespace avmask
