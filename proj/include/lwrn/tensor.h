#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lwrn {

// Extents of an NCHW tensor.
struct Shape {
  int64_t n = 0;
  int64_t c = 0;
  int64_t h = 0;
  int64_t w = 0;

  int64_t numel() const { return n * c * h * w; }
  int64_t plane() const { return h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;  // "1x3x512x512"
};

// Dense 4-D float32 tensor, contiguous row-major in (N, C, H, W) order.
//
// Kernels build their output through mutable_data() and hand it back by
// value; once returned a tensor is treated as immutable and may be shared
// across threads.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, float fill);
  Tensor(Shape shape, std::vector<float> values);

  const Shape& shape() const { return shape_; }
  int64_t numel() const { return shape_.numel(); }
  bool empty() const { return data_.empty(); }

  std::span<const float> data() const { return data_; }
  std::span<float> mutable_data() { return data_; }

  int64_t offset(int64_t n, int64_t c, int64_t h, int64_t w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  float at(int64_t n, int64_t c, int64_t h, int64_t w) const {
    return data_[offset(n, c, h, w)];
  }
  float& at(int64_t n, int64_t c, int64_t h, int64_t w) {
    return data_[offset(n, c, h, w)];
  }

  // Pointer to the first element of channel plane (n, c).
  const float* plane(int64_t n, int64_t c) const {
    return data_.data() + (n * shape_.c + c) * shape_.plane();
  }
  float* plane(int64_t n, int64_t c) {
    return data_.data() + (n * shape_.c + c) * shape_.plane();
  }

 private:
  Shape shape_;
  std::vector<float> data_;
};

void check_shape(const Shape& shape);  // throws DimensionError on negative extents

}  // namespace lwrn
