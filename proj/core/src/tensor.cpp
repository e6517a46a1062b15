#include "direcnet/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "direcnet/error.hpp"

namespace direcnet {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) {
    if (extent <= 0) {
      throw ShapeError("non-positive extent in shape " + shape_str(shape));
    }
    n *= static_cast<std::size_t>(extent);
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, bool requires_grad)
    : impl_(std::make_shared<Impl>()) {
  if (shape.empty()) throw ShapeError("tensor shape must have rank >= 1");
  impl_->data.assign(shape_numel(shape), T(0));
  impl_->shape = std::move(shape);
  impl_->requires_grad = requires_grad;
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> values, bool requires_grad)
    : impl_(std::make_shared<Impl>()) {
  if (shape.empty()) throw ShapeError("tensor shape must have rank >= 1");
  if (values.size() != shape_numel(shape)) {
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
  impl_->requires_grad = requires_grad;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value) {
  BasicTensor t(std::move(shape));
  std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
  return t;
}

template <typename T>
typename BasicTensor<T>::Impl& BasicTensor<T>::impl() const {
  if (!impl_) throw StateError("use of an undefined tensor");
  return *impl_;
}

template <typename T>
const Shape& BasicTensor<T>::shape() const {
  return impl().shape;
}

template <typename T>
std::span<T> BasicTensor<T>::data() {
  return impl().data;
}

template <typename T>
std::span<const T> BasicTensor<T>::data() const {
  return impl().data;
}

template <typename T>
T BasicTensor<T>::item() const {
  if (numel() != 1) {
    throw ContractError("item() on tensor of shape " + shape_str(shape()));
  }
  return impl().data[0];
}

template <typename T>
bool BasicTensor<T>::requires_grad() const {
  return impl().requires_grad;
}

template <typename T>
void BasicTensor<T>::set_requires_grad(bool flag) {
  impl().requires_grad = flag;
}

template <typename T>
bool BasicTensor<T>::has_grad() const {
  return !impl().grad.empty();
}

template <typename T>
std::span<T> BasicTensor<T>::grad() const {
  auto& im = impl();
  if (im.grad.empty()) im.grad.assign(im.data.size(), T(0));
  return im.grad;
}

template <typename T>
void BasicTensor<T>::zero_grad() {
  auto& im = impl();
  if (!im.grad.empty()) std::fill(im.grad.begin(), im.grad.end(), T(0));
}

template <typename T>
void BasicTensor<T>::release_grad() {
  auto& im = impl();
  im.grad.clear();
  im.grad.shrink_to_fit();
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const {
  if (shape_numel(shape) != numel()) {
    throw ShapeError("cannot reshape " + shape_str(this->shape()) + " to " + shape_str(shape));
  }
  return BasicTensor(std::move(shape), impl().data, requires_grad());
}

template <typename T>
BasicTensor<T> BasicTensor<T>::clone() const {
  return BasicTensor(shape(), impl().data, requires_grad());
}

template class BasicTensor<float>;
template class BasicTensor<double>;

}  // namespace direcnet
