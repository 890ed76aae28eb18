#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "azarnet/errors.hpp"

namespace azarnet {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);

// Product of extents. The empty shape (a default-constructed tensor) has no
// elements.
std::size_t shape_size(const Shape& shape);

// Dense row-major array, last axis fastest. Training runs on `Tensor` (f32);
// gradient checking runs on `TensorD` (f64).
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T{});
  BasicTensor(Shape shape, std::vector<T> data);

  static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape)); }
  static BasicTensor filled(Shape shape, T value) {
    return BasicTensor(std::move(shape), value);
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  const std::vector<T>& vector() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  // Multi-index access; the number of indices must equal rank().
  template <typename... Idx>
  T& operator()(Idx... idx) noexcept {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <typename... Idx>
  const T& operator()(Idx... idx) const noexcept {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  BasicTensor reshaped(Shape new_shape) const&;
  BasicTensor reshaped(Shape new_shape) &&;

  void fill(T value);

  template <typename U>
  BasicTensor<U> cast() const {
    return BasicTensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  std::size_t offset(std::initializer_list<std::size_t> idx) const noexcept {
    std::size_t off = 0;
    std::size_t axis = 0;
    for (std::size_t i : idx) off = off * shape_[axis++] + i;
    return off;
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

// [m,k] x [k,n] -> [m,n].
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& t, Shape new_shape) {
  return t.reshaped(std::move(new_shape));
}

template <typename T>
BasicTensor<T> map_unary(const BasicTensor<T>& t, const std::function<T(T)>& f) {
  BasicTensor<T> out = t;
  for (T& v : out.values()) v = f(v);
  return out;
}

template <typename T>
T reduce_sum(const BasicTensor<T>& t) {
  T acc{};
  for (T v : t.values()) acc += v;
  return acc;
}

template <typename T>
bool all_finite(const BasicTensor<T>& t);

// Binary encoding shared by spectrogram caches and checkpoints:
// "AZTN0001", u32 LE rank, rank x u32 LE dims, f32 LE payload.
inline constexpr char kTensorMagic[9] = "AZTN0001";

void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);
std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

}  // namespace azarnet
