#include <algorithm>
#include <cmath>
#include <string>

#include "lwrn/errors.h"
#include "lwrn/ops.h"
#include "lwrn/parallel.h"

namespace lwrn {

std::string_view op_name(OpKind op) {
  switch (op) {
    case OpKind::kInput: return "input";
    case OpKind::kOutput: return "output";
    case OpKind::kConv: return "conv";
    case OpKind::kMaxPool: return "maxpool";
    case OpKind::kRelu: return "relu";
    case OpKind::kAdd: return "add";
    case OpKind::kUpsample: return "upsample";
    case OpKind::kBnAffine: return "bn-affine";
  }
  return "?";
}

OpKind op_from_name(std::string_view name) {
  for (OpKind op : {OpKind::kInput, OpKind::kOutput, OpKind::kConv, OpKind::kMaxPool,
                    OpKind::kRelu, OpKind::kAdd, OpKind::kUpsample, OpKind::kBnAffine}) {
    if (op_name(op) == name) return op;
  }
  throw CapabilityError("unknown op kind '" + std::string(name) + "'");
}

int64_t window_output_extent(int64_t size, int kernel, int stride, int pad) {
  if (kernel < 1 || stride < 1 || pad < 0) {
    throw DimensionError("invalid window: kernel=" + std::to_string(kernel) +
                         " stride=" + std::to_string(stride) + " pad=" + std::to_string(pad));
  }
  const int64_t span = size + 2 * static_cast<int64_t>(pad) - kernel;
  if (span < 0) {
    throw DegenerateShapeError("window of " + std::to_string(kernel) + " does not fit extent " +
                               std::to_string(size) + " with padding " + std::to_string(pad));
  }
  return span / stride + 1;
}

Shape conv2d_output_shape(const Shape& input, int64_t out_channels, const ConvParams& p) {
  return {input.n, out_channels,
          window_output_extent(input.h, p.kernel.h, p.stride.h, p.padding.h),
          window_output_extent(input.w, p.kernel.w, p.stride.w, p.padding.w)};
}

Shape maxpool2d_output_shape(const Shape& input, const PoolParams& p) {
  // A window lying wholly inside the padding would have no real cell to take
  // the max over; that happens exactly when pad >= kernel.
  if (p.padding.h >= p.kernel.h || p.padding.w >= p.kernel.w) {
    throw DegenerateShapeError("max-pool window can fall entirely into padding (kernel " +
                               std::to_string(p.kernel.h) + "x" + std::to_string(p.kernel.w) +
                               ", pad " + std::to_string(p.padding.h) + "x" +
                               std::to_string(p.padding.w) + ")");
  }
  return {input.n, input.c,
          window_output_extent(input.h, p.kernel.h, p.stride.h, p.padding.h),
          window_output_extent(input.w, p.kernel.w, p.stride.w, p.padding.w)};
}

namespace {

// Splits a flat elementwise loop into fixed-size chunks.
template <typename F>
void for_chunks(int64_t count, F&& body) {
  constexpr int64_t kChunk = 1 << 16;
  const int64_t chunks = (count + kChunk - 1) / kChunk;
  parallel_for(chunks, [&](int64_t t) {
    const int64_t begin = t * kChunk;
    body(begin, std::min(count, begin + kChunk));
  });
}

// Max over a 1-D window sequence. out[o] = max(in[o*stride - pad + j]) for
// j in [0, kernel), skipping indices outside [0, size).
void window_max_1d(const float* in, int64_t size, int64_t in_step, float* out, int64_t out_size,
                   int64_t out_step, int kernel, int stride, int pad) {
  for (int64_t o = 0; o < out_size; ++o) {
    const int64_t start = o * stride - pad;
    const int64_t lo = std::max<int64_t>(0, start);
    const int64_t hi = std::min<int64_t>(size, start + kernel);
    float best = -std::numeric_limits<float>::infinity();
    for (int64_t i = lo; i < hi; ++i) best = std::max(best, in[i * in_step]);
    out[o * out_step] = best;
  }
}

}  // namespace

Tensor maxpool2d(const Tensor& input, const PoolParams& p) {
  const Shape& in = input.shape();
  const Shape out_shape = maxpool2d_output_shape(in, p);
  Tensor out(out_shape);
  // Separable: max along rows first (H x Wo), then along columns.
  parallel_for(in.n * in.c, [&](int64_t plane) {
    const int64_t n = plane / in.c, c = plane % in.c;
    const float* src = input.plane(n, c);
    float* dst = out.plane(n, c);
    std::vector<float> rows(static_cast<size_t>(in.h * out_shape.w));
    for (int64_t y = 0; y < in.h; ++y) {
      window_max_1d(src + y * in.w, in.w, 1, rows.data() + y * out_shape.w, out_shape.w, 1,
                    p.kernel.w, p.stride.w, p.padding.w);
    }
    for (int64_t x = 0; x < out_shape.w; ++x) {
      window_max_1d(rows.data() + x, in.h, out_shape.w, dst + x, out_shape.h, out_shape.w,
                    p.kernel.h, p.stride.h, p.padding.h);
    }
  });
  return out;
}

Tensor relu(const Tensor& input, float cap) {
  Tensor out(input.shape());
  const float* src = input.data().data();
  float* dst = out.mutable_data().data();
  for_chunks(input.numel(), [&](int64_t begin, int64_t end) {
    for (int64_t i = begin; i < end; ++i) dst[i] = std::min(std::max(src[i], 0.0f), cap);
  });
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
  Tensor out(a.shape());
  const float* x = a.data().data();
  const float* y = b.data().data();
  float* dst = out.mutable_data().data();
  for_chunks(a.numel(), [&](int64_t begin, int64_t end) {
    for (int64_t i = begin; i < end; ++i) dst[i] = x[i] + y[i];
  });
  return out;
}

namespace {

struct LerpTap {
  int64_t i0;
  int64_t i1;
  float frac;
};

std::vector<LerpTap> lerp_taps(int64_t in_size, int64_t out_size) {
  std::vector<LerpTap> taps(static_cast<size_t>(out_size));
  const double scale = static_cast<double>(in_size) / static_cast<double>(out_size);
  for (int64_t o = 0; o < out_size; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in_size - 1));
    const auto i0 = static_cast<int64_t>(std::floor(src));
    const int64_t i1 = std::min(i0 + 1, in_size - 1);
    taps[o] = {i0, i1, static_cast<float>(src - static_cast<double>(i0))};
  }
  return taps;
}

}  // namespace

Tensor upsample_bilinear(const Tensor& input, int64_t out_h, int64_t out_w) {
  const Shape& in = input.shape();
  if (out_h < 1 || out_w < 1) {
    throw DegenerateShapeError("upsample: output extents must be >= 1, got " +
                               std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  if (in.h < 1 || in.w < 1) throw DegenerateShapeError("upsample: empty input " + in.str());
  Tensor out({in.n, in.c, out_h, out_w});
  const auto ty = lerp_taps(in.h, out_h);
  const auto tx = lerp_taps(in.w, out_w);
  parallel_for(in.n * in.c, [&](int64_t plane) {
    const int64_t n = plane / in.c, c = plane % in.c;
    const float* src = input.plane(n, c);
    float* dst = out.plane(n, c);
    for (int64_t y = 0; y < out_h; ++y) {
      const float* r0 = src + ty[y].i0 * in.w;
      const float* r1 = src + ty[y].i1 * in.w;
      const float fy = ty[y].frac;
      for (int64_t x = 0; x < out_w; ++x) {
        const LerpTap& t = tx[x];
        const float top = r0[t.i0] + (r0[t.i1] - r0[t.i0]) * t.frac;
        const float bot = r1[t.i0] + (r1[t.i1] - r1[t.i0]) * t.frac;
        dst[y * out_w + x] = top + (bot - top) * fy;
      }
    }
  });
  return out;
}

Tensor bn_affine(const Tensor& input, std::span<const float> scale, std::span<const float> shift) {
  const Shape& in = input.shape();
  if (static_cast<int64_t>(scale.size()) != in.c || static_cast<int64_t>(shift.size()) != in.c) {
    throw DimensionError("bn-affine: channel axis mismatch, input C=" + std::to_string(in.c) +
                         " scale=" + std::to_string(scale.size()) +
                         " shift=" + std::to_string(shift.size()));
  }
  Tensor out(in);
  parallel_for(in.n * in.c, [&](int64_t plane) {
    const int64_t n = plane / in.c, c = plane % in.c;
    const float* src = input.plane(n, c);
    float* dst = out.plane(n, c);
    for (int64_t i = 0; i < in.plane(); ++i) dst[i] = scale[c] * src[i] + shift[c];
  });
  return out;
}

}  // namespace lwrn
