#include <algorithm>
#include <cmath>
#include <string>

#include "lwrn/errors.h"
#include "lwrn/ops.h"
#include "lwrn/parallel.h"

namespace lwrn {

ConvGrads conv2d_vjp(const Tensor& input, const Tensor& weight, const ConvParams& p,
                     const Tensor& grad_out) {
  const Shape& in = input.shape();
  const Shape& ws = weight.shape();
  const Shape expected = conv2d_output_shape(in, ws.n, p);
  if (grad_out.shape() != expected) {
    throw DimensionError("conv2d_vjp: grad_out is " + grad_out.shape().str() + ", forward output is " +
                         expected.str());
  }
  const Shape& os = grad_out.shape();
  const int64_t cin_g = ws.c;
  const int64_t cout_g = ws.n / p.groups;
  const int64_t kh = p.kernel.h, kw = p.kernel.w;

  ConvGrads grads{Tensor(in), Tensor(ws), std::vector<float>(static_cast<size_t>(ws.n), 0.0f)};

  // d input: each (n, ci) plane is owned by one task.
  parallel_for(in.n * in.c, [&](int64_t plane) {
    const int64_t n = plane / in.c, ci = plane % in.c;
    const int64_t g = ci / cin_g, ci_local = ci % cin_g;
    float* gi = grads.input.plane(n, ci);
    for (int64_t co = g * cout_g; co < (g + 1) * cout_g; ++co) {
      const float* go = grad_out.plane(n, co);
      const float* w = weight.plane(co, ci_local);
      for (int64_t oy = 0; oy < os.h; ++oy) {
        for (int64_t ox = 0; ox < os.w; ++ox) {
          const float gv = go[oy * os.w + ox];
          if (gv == 0.0f) continue;
          for (int64_t ky = 0; ky < kh; ++ky) {
            const int64_t iy = oy * p.stride.h - p.padding.h + ky;
            if (iy < 0 || iy >= in.h) continue;
            for (int64_t kx = 0; kx < kw; ++kx) {
              const int64_t ix = ox * p.stride.w - p.padding.w + kx;
              if (ix < 0 || ix >= in.w) continue;
              gi[iy * in.w + ix] += w[ky * kw + kx] * gv;
            }
          }
        }
      }
    }
  });

  // d weight and d bias: each output channel is owned by one task.
  parallel_for(ws.n, [&](int64_t co) {
    const int64_t g = co / cout_g;
    double bias_acc = 0.0;
    for (int64_t n = 0; n < in.n; ++n) {
      const float* go = grad_out.plane(n, co);
      for (int64_t i = 0; i < os.plane(); ++i) bias_acc += go[i];
      for (int64_t ci_local = 0; ci_local < cin_g; ++ci_local) {
        const float* x = input.plane(n, g * cin_g + ci_local);
        float* gw = grads.weight.plane(co, ci_local);
        for (int64_t ky = 0; ky < kh; ++ky) {
          for (int64_t kx = 0; kx < kw; ++kx) {
            double acc = 0.0;
            for (int64_t oy = 0; oy < os.h; ++oy) {
              const int64_t iy = oy * p.stride.h - p.padding.h + ky;
              if (iy < 0 || iy >= in.h) continue;
              for (int64_t ox = 0; ox < os.w; ++ox) {
                const int64_t ix = ox * p.stride.w - p.padding.w + kx;
                if (ix < 0 || ix >= in.w) continue;
                acc += static_cast<double>(go[oy * os.w + ox]) * x[iy * in.w + ix];
              }
            }
            gw[ky * kw + kx] += static_cast<float>(acc);
          }
        }
      }
    }
    grads.bias[co] = static_cast<float>(bias_acc);
  });
  return grads;
}

Tensor maxpool2d_vjp(const Tensor& input, const PoolParams& p, const Tensor& grad_out) {
  const Shape& in = input.shape();
  const Shape expected = maxpool2d_output_shape(in, p);
  if (grad_out.shape() != expected) {
    throw DimensionError("maxpool2d_vjp: grad_out is " + grad_out.shape().str() +
                         ", forward output is " + expected.str());
  }
  Tensor grad(in);
  parallel_for(in.n * in.c, [&](int64_t plane) {
    const int64_t n = plane / in.c, c = plane % in.c;
    const float* x = input.plane(n, c);
    const float* go = grad_out.plane(n, c);
    float* gi = grad.plane(n, c);
    for (int64_t oy = 0; oy < expected.h; ++oy) {
      for (int64_t ox = 0; ox < expected.w; ++ox) {
        int64_t best = -1;
        float best_v = -std::numeric_limits<float>::infinity();
        for (int64_t ky = 0; ky < p.kernel.h; ++ky) {
          const int64_t iy = oy * p.stride.h - p.padding.h + ky;
          if (iy < 0 || iy >= in.h) continue;
          for (int64_t kx = 0; kx < p.kernel.w; ++kx) {
            const int64_t ix = ox * p.stride.w - p.padding.w + kx;
            if (ix < 0 || ix >= in.w) continue;
            const float v = x[iy * in.w + ix];
            if (best < 0 || v > best_v) {
              best = iy * in.w + ix;
              best_v = v;
            }
          }
        }
        gi[best] += go[oy * expected.w + ox];
      }
    }
  });
  return grad;
}

Tensor relu_vjp(const Tensor& input, const Tensor& grad_out, float cap) {
  if (input.shape() != grad_out.shape()) {
    throw DimensionError("relu_vjp: shape mismatch " + input.shape().str() + " vs " +
                         grad_out.shape().str());
  }
  Tensor grad(input.shape());
  auto x = input.data();
  auto go = grad_out.data();
  auto gi = grad.mutable_data();
  for (size_t i = 0; i < x.size(); ++i) gi[i] = (x[i] > 0.0f && x[i] < cap) ? go[i] : 0.0f;
  return grad;
}

AddGrads add_vjp(const Tensor& grad_out) { return {grad_out, grad_out}; }

Tensor upsample_bilinear_vjp(const Shape& input_shape, const Tensor& grad_out) {
  const Shape& os = grad_out.shape();
  if (os.n != input_shape.n || os.c != input_shape.c) {
    throw DimensionError("upsample_vjp: batch/channel mismatch " + input_shape.str() + " vs " +
                         os.str());
  }
  Tensor grad(input_shape);
  auto taps = [](int64_t in_size, int64_t out_size, int64_t o, int64_t& i0, int64_t& i1,
                 float& frac) {
    const double scale = static_cast<double>(in_size) / static_cast<double>(out_size);
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in_size - 1));
    i0 = static_cast<int64_t>(std::floor(src));
    i1 = std::min(i0 + 1, in_size - 1);
    frac = static_cast<float>(src - static_cast<double>(i0));
  };
  parallel_for(os.n * os.c, [&](int64_t plane) {
    const int64_t n = plane / os.c, c = plane % os.c;
    const float* go = grad_out.plane(n, c);
    float* gi = grad.plane(n, c);
    for (int64_t y = 0; y < os.h; ++y) {
      int64_t y0, y1;
      float fy;
      taps(input_shape.h, os.h, y, y0, y1, fy);
      for (int64_t x = 0; x < os.w; ++x) {
        int64_t x0, x1;
        float fx;
        taps(input_shape.w, os.w, x, x0, x1, fx);
        const float g = go[y * os.w + x];
        gi[y0 * input_shape.w + x0] += g * (1.0f - fy) * (1.0f - fx);
        gi[y0 * input_shape.w + x1] += g * (1.0f - fy) * fx;
        gi[y1 * input_shape.w + x0] += g * fy * (1.0f - fx);
        gi[y1 * input_shape.w + x1] += g * fy * fx;
      }
    }
  });
  return grad;
}

BnGrads bn_affine_vjp(const Tensor& input, std::span<const float> scale, const Tensor& grad_out) {
  const Shape& in = input.shape();
  if (grad_out.shape() != in || static_cast<int64_t>(scale.size()) != in.c) {
    throw DimensionError("bn_affine_vjp: shape mismatch " + in.str() + " vs " +
                         grad_out.shape().str());
  }
  BnGrads grads{Tensor(in), std::vector<float>(in.c, 0.0f), std::vector<float>(in.c, 0.0f)};
  for (int64_t n = 0; n < in.n; ++n) {
    for (int64_t c = 0; c < in.c; ++c) {
      const float* x = input.plane(n, c);
      const float* go = grad_out.plane(n, c);
      float* gi = grads.input.plane(n, c);
      double gs = 0.0, gb = 0.0;
      for (int64_t i = 0; i < in.plane(); ++i) {
        gi[i] = scale[c] * go[i];
        gs += static_cast<double>(go[i]) * x[i];
        gb += go[i];
      }
      grads.scale[c] += static_cast<float>(gs);
      grads.shift[c] += static_cast<float>(gb);
    }
  }
  return grads;
}

std::vector<Tensor> vjp(OpKind op, std::span<const Tensor> saved_inputs,
                        std::span<const Tensor> params, const OpAttrs& attrs,
                        const Tensor& grad_out) {
  auto need = [&](size_t inputs, size_t weights) {
    if (saved_inputs.size() < inputs || params.size() < weights) {
      throw DimensionError("vjp(" + std::string(op_name(op)) + "): expected " +
                           std::to_string(inputs) + " saved inputs and " + std::to_string(weights) +
                           " params");
    }
  };
  switch (op) {
    case OpKind::kConv:
      need(1, 1);
      return {conv2d_vjp(saved_inputs[0], params[0], attrs.conv, grad_out).input};
    case OpKind::kMaxPool:
      need(1, 0);
      return {maxpool2d_vjp(saved_inputs[0], attrs.pool, grad_out)};
    case OpKind::kRelu:
      need(1, 0);
      return {relu_vjp(saved_inputs[0], grad_out, attrs.relu_cap)};
    case OpKind::kAdd: {
      need(2, 0);
      auto g = add_vjp(grad_out);
      return {std::move(g.a), std::move(g.b)};
    }
    case OpKind::kUpsample: {
      need(1, 0);
      std::vector<Tensor> grads{upsample_bilinear_vjp(saved_inputs[0].shape(), grad_out)};
      if (saved_inputs.size() > 1) grads.emplace_back(saved_inputs[1].shape());
      return grads;
    }
    case OpKind::kBnAffine:
      need(1, 1);
      return {bn_affine_vjp(saved_inputs[0], params[0].data(), grad_out).input};
    case OpKind::kOutput:
      return {grad_out};
    case OpKind::kInput:
      break;
  }
  throw CapabilityError("vjp: op '" + std::string(op_name(op)) + "' has no differentiable forward");
}

}  // namespace lwrn
