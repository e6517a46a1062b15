#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace direcnet {

using Shape = std::vector<std::int64_t>;

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

template <typename T>
struct dtype_of;
template <>
struct dtype_of<float> {
  static constexpr DType value = DType::f32;
};
template <>
struct dtype_of<double> {
  static constexpr DType value = DType::f64;
};

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major tensor handle.
///
/// Copies share storage (the handle semantics of most autodiff libraries);
/// use clone() for an independent value. The shape is fixed at
/// construction. The gradient buffer is allocated lazily and always has
/// numel() elements when present.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, bool requires_grad = false);
  BasicTensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape)); }
  static BasicTensor full(Shape shape, T value);
  static BasicTensor scalar(T value) { return full({1}, value); }

  bool defined() const { return impl_ != nullptr; }

  const Shape& shape() const;
  std::int64_t dim(std::size_t axis) const { return shape()[axis]; }
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const { return data().size(); }
  static constexpr DType dtype() { return dtype_of<T>::value; }

  std::span<T> data();
  std::span<const T> data() const;
  T* ptr() { return data().data(); }
  const T* ptr() const { return data().data(); }
  T item() const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);

  bool has_grad() const;
  // Allocates a zero-filled gradient buffer if absent. The buffer belongs
  // to the shared storage, so a const handle can still accumulate into it.
  std::span<T> grad() const;
  void zero_grad();
  void release_grad();

  // New independent value with identical element count and a new shape.
  BasicTensor reshaped(Shape shape) const;
  BasicTensor clone() const;

  // Identity of the underlying storage.
  const void* id() const { return impl_.get(); }

 private:
  struct Impl {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;

  Impl& impl() const;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

/// Converts element type, e.g. to run a float model through a 64-bit
/// gradient check.
template <typename To, typename From>
BasicTensor<To> tensor_cast(const BasicTensor<From>& src) {
  std::vector<To> values(src.data().begin(), src.data().end());
  return BasicTensor<To>(src.shape(), std::move(values), src.requires_grad());
}

}  // namespace direcnet
