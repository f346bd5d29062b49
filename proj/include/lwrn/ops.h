#pragma once

#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "lwrn/tensor.h"

namespace lwrn {

// Height/width pair used for kernel sizes, strides and paddings.
struct Extent2 {
  int h = 0;
  int w = 0;
  bool operator==(const Extent2&) const = default;
};

struct ConvParams {
  Extent2 kernel{1, 1};
  Extent2 stride{1, 1};
  Extent2 padding{0, 0};
  int groups = 1;
  bool bias = false;
  bool operator==(const ConvParams&) const = default;
};

struct PoolParams {
  Extent2 kernel{1, 1};
  Extent2 stride{1, 1};
  Extent2 padding{0, 0};
  bool operator==(const PoolParams&) const = default;
};

enum class OpKind { kInput, kOutput, kConv, kMaxPool, kRelu, kAdd, kUpsample, kBnAffine };

std::string_view op_name(OpKind op);
OpKind op_from_name(std::string_view name);  // throws CapabilityError

inline constexpr float kNoCap = std::numeric_limits<float>::infinity();

// floor((size + 2*pad - kernel) / stride) + 1; throws DegenerateShapeError
// when the result would be < 1.
int64_t window_output_extent(int64_t size, int kernel, int stride, int pad);

Shape conv2d_output_shape(const Shape& input, int64_t out_channels, const ConvParams& p);
Shape maxpool2d_output_shape(const Shape& input, const PoolParams& p);

// Forward kernels. None of them mutate their inputs.

// Cross-correlation (no kernel flip). weight is (Cout, Cin/groups, kh, kw);
// bias is empty or has Cout entries.
Tensor conv2d(const Tensor& input, const Tensor& weight, std::span<const float> bias,
              const ConvParams& p);

// Padding cells act as -inf.
Tensor maxpool2d(const Tensor& input, const PoolParams& p);

// max(0, x), clipped from above at cap (cap = 6 gives ReLU6).
Tensor relu(const Tensor& input, float cap = kNoCap);

Tensor add(const Tensor& a, const Tensor& b);

// Half-pixel bilinear resize: src = (dst + 0.5) * in/out - 0.5, clamped to
// the valid range.
Tensor upsample_bilinear(const Tensor& input, int64_t out_h, int64_t out_w);

// y = scale[c] * x + shift[c]; the inference form of batch norm.
Tensor bn_affine(const Tensor& input, std::span<const float> scale, std::span<const float> shift);

// Vector-Jacobian products. Each takes the tensors saved from the forward
// call and the gradient of the forward output.

struct ConvGrads {
  Tensor input;
  Tensor weight;
  std::vector<float> bias;
};
ConvGrads conv2d_vjp(const Tensor& input, const Tensor& weight, const ConvParams& p,
                     const Tensor& grad_out);

// Routes each output gradient to the first maximal cell of its window in
// row-major scan order.
Tensor maxpool2d_vjp(const Tensor& input, const PoolParams& p, const Tensor& grad_out);

Tensor relu_vjp(const Tensor& input, const Tensor& grad_out, float cap = kNoCap);

struct AddGrads {
  Tensor a;
  Tensor b;
};
AddGrads add_vjp(const Tensor& grad_out);

Tensor upsample_bilinear_vjp(const Shape& input_shape, const Tensor& grad_out);

struct BnGrads {
  Tensor input;
  std::vector<float> scale;
  std::vector<float> shift;
};
BnGrads bn_affine_vjp(const Tensor& input, std::span<const float> scale, const Tensor& grad_out);

// Attributes needed to replay any op generically.
struct OpAttrs {
  ConvParams conv;
  PoolParams pool;
  float relu_cap = kNoCap;
};

// Generic dispatcher: returns the gradients of the data inputs of `op`
// (one per saved input). `params` carries weights in the order the forward
// op consumes them (conv: weight[, bias]; bn-affine: scale, shift). Upsample
// takes its target size from grad_out and its second saved input (a size
// reference) receives a zero gradient. Throws CapabilityError for op kinds
// without a differentiable forward.
std::vector<Tensor> vjp(OpKind op, std::span<const Tensor> saved_inputs,
                        std::span<const Tensor> params, const OpAttrs& attrs,
                        const Tensor& grad_out);

}  // namespace lwrn
