#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mcse/common.hpp"

namespace mcse {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

// Dense row-major n-d array. This is deliberately minimal: hot kernels work
// on raw pointers, everything else goes through at()/operator().
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(size_t(shape_numel(shape_)), fill) {}
  Tensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    MCSE_CHECK(int64_t(data_.size()) == shape_numel(shape_), ShapeError,
               "Tensor: data size does not match shape " + shape_str(shape_));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, T v) { return Tensor(std::move(shape), v); }
  static Tensor scalar(T v) { return Tensor(Shape{1}, std::vector<T>{v}); }

  const Shape& shape() const { return shape_; }
  int64_t dim(int i) const { return shape_[size_t(i)]; }
  int rank() const { return int(shape_.size()); }
  int64_t numel() const { return int64_t(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](int64_t i) { return data_[size_t(i)]; }
  const T& operator[](int64_t i) const { return data_[size_t(i)]; }

  T& operator()(int64_t i, int64_t j) { return data_[size_t(i * shape_[1] + j)]; }
  const T& operator()(int64_t i, int64_t j) const {
    return data_[size_t(i * shape_[1] + j)];
  }
  T& operator()(int64_t i, int64_t j, int64_t k) {
    return data_[size_t((i * shape_[1] + j) * shape_[2] + k)];
  }
  const T& operator()(int64_t i, int64_t j, int64_t k) const {
    return data_[size_t((i * shape_[1] + j) * shape_[2] + k)];
  }
  T& operator()(int64_t i, int64_t j, int64_t k, int64_t l) {
    return data_[size_t(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
  }
  const T& operator()(int64_t i, int64_t j, int64_t k, int64_t l) const {
    return data_[size_t(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (const T& v : data_)
      if (!std::isfinite(double(v))) return false;
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (int64_t i = 0; i < numel(); ++i) out[i] = U(data_[size_t(i)]);
    return out;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  MCSE_CHECK(a.same_shape(b), ShapeError, "max_abs_diff: shape mismatch");
  T m = 0;
  for (int64_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace mcse
