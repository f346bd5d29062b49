#include "lwrn/tensor.h"

#include "lwrn/errors.h"

namespace lwrn {

std::string Shape::str() const {
  return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) +
         "x" + std::to_string(w);
}

void check_shape(const Shape& shape) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw DimensionError("negative extent in shape " + shape.str());
  }
}

Tensor::Tensor(Shape shape) : Tensor(shape, 0.0f) {}

Tensor::Tensor(Shape shape, float fill) : shape_(shape) {
  check_shape(shape);
  data_.assign(static_cast<size_t>(shape.numel()), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> values)
    : shape_(shape), data_(std::move(values)) {
  check_shape(shape);
  if (static_cast<int64_t>(data_.size()) != shape.numel()) {
    throw DimensionError("tensor of shape " + shape.str() + " needs " +
                         std::to_string(shape.numel()) + " values, got " +
                         std::to_string(data_.size()));
  }
}

}  // namespace lwrn
