#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <vector>

#include "segattack/common.hpp"

namespace segattack {

/// Dense row-major tensor of doubles. Images and feature maps use
/// H x W x C order with channels contiguous.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator[](std::size_t i) { return data_[i]; }
  Scalar operator[](std::size_t i) const { return data_[i]; }

  // H x W x C access
  Scalar& at(std::size_t y, std::size_t x, std::size_t c) {
    return data_[(y * shape_[1] + x) * shape_[2] + c];
  }
  Scalar at(std::size_t y, std::size_t x, std::size_t c) const {
    return data_[(y * shape_[1] + x) * shape_[2] + c];
  }

  void fill(Scalar v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool operator==(const Tensor& o) const {
    return shape_ == o.shape_ && data_ == o.data_;
  }

  static std::size_t count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<Scalar> data_;
};

/// 2-D grid of POD values (label maps, binary masks).
template <typename T>
struct Grid {
  int h = 0;
  int w = 0;
  std::vector<T> v;

  Grid() = default;
  Grid(int height, int width, T init = T{})
      : h(height), w(width), v(static_cast<std::size_t>(height) * width, init) {}

  T& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
  T at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }

  std::size_t size() const { return v.size(); }
  bool same_shape(const Grid& o) const { return h == o.h && w == o.w; }
  bool operator==(const Grid& o) const {
    return h == o.h && w == o.w && v == o.v;
  }
};

using LabelMap = Grid<std::int32_t>;
using BinaryMask = Grid<std::uint8_t>;

inline std::size_t mask_count(const BinaryMask& m) {
  std::size_t n = 0;
  for (auto b : m.v) n += (b != 0);
  return n;
}

}  // namespace segattack
