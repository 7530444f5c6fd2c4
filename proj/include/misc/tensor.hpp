#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "misc/errors.hpp"

namespace misc {

using Shape = std::vector<int>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

// Dense row-major array. Images and feature maps use C x H x W, conv weights
// O x C x k x k. The scalar type doubles as the precision mode: float for
// compute, double for verification.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)) {
    for (int d : shape_) {
      if (d < 0) throw ConfigError("negative extent in shape " + shape_str(shape_));
    }
    data_.assign(shape_numel(shape_), fill);
  }
  BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_)) {
      throw ConfigError("data length " + std::to_string(data_.size()) + " does not match shape " +
                        shape_str(shape_));
    }
  }

  static BasicTensor zeros_like(const BasicTensor& other) { return BasicTensor(other.shape()); }

  const Shape& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // C x H x W accessors; only meaningful for 3-D tensors.
  int channels() const { return shape_[0]; }
  int height() const { return shape_[1]; }
  int width() const { return shape_[2]; }
  std::size_t plane() const { return static_cast<std::size_t>(shape_[1]) * shape_[2]; }

  T& operator()(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }
  T operator()(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::span<T> channel(int c) { return std::span<T>(data_).subspan(c * plane(), plane()); }
  std::span<const T> channel(int c) const {
    return std::span<const T>(data_).subspan(c * plane(), plane());
  }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  // Reinterprets the buffer under a new shape with the same element count.
  BasicTensor reshaped(Shape shape) const { return BasicTensor(std::move(shape), data_); }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(), [](T v) { return static_cast<U>(v); });
    return BasicTensor<U>(shape_, std::move(out));
  }

  BasicTensor& operator+=(const BasicTensor& o) {
    require_same_shape(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  BasicTensor& operator-=(const BasicTensor& o) {
    require_same_shape(o, "-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  BasicTensor& operator*=(T s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  void require_same_shape(const BasicTensor& o, const char* what) const {
    if (o.shape_ != shape_) {
      throw ConfigError(std::string(what) + ": shape " + shape_str(shape_) + " vs " + shape_str(o.shape_));
    }
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

template <typename T>
BasicTensor<T> operator+(BasicTensor<T> a, const BasicTensor<T>& b) {
  a += b;
  return a;
}
template <typename T>
BasicTensor<T> operator-(BasicTensor<T> a, const BasicTensor<T>& b) {
  a -= b;
  return a;
}
template <typename T>
BasicTensor<T> operator*(BasicTensor<T> a, T s) {
  a *= s;
  return a;
}

template <typename T>
double max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  a.require_same_shape(b, "max_abs_diff");
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

// Throws NumericError naming `what` if any element is NaN/Inf.
template <typename T>
void require_finite(const BasicTensor<T>& t, const std::string& what) {
  if (!t.all_finite()) throw NumericError("non-finite values in " + what);
}

}  // namespace misc
