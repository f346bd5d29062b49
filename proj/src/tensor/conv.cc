// Convolution forward pass.
//
// Dense and grouped convolutions are lowered per column tile: a K x tile
// panel of the im2col matrix is materialised (or, for 1x1/stride-1/no-pad
// convolutions, read straight from the input) and multiplied by the packed
// weight matrix with a 6x16 register-blocked micro-kernel. Depthwise
// convolutions use a direct loop.
//
// Every output cell is produced as bias + sum_k w[k] * x[k] with k visited in
// increasing order and one fused multiply-add per step, no matter which tile,
// block or worker computes it. Results are therefore bit-identical across
// worker counts.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <string>

#include "lwrn/errors.h"
#include "lwrn/ops.h"
#include "lwrn/parallel.h"

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#define LWRN_HAVE_AVX2 1
#endif

namespace lwrn {
namespace {

constexpr int64_t kMr = 6;
constexpr int64_t kNr = 16;
constexpr int64_t kKc = 256;
constexpr int64_t kColTile = 192;  // multiple of kNr

std::unique_ptr<float[]> uninit(int64_t count) {
  return std::unique_ptr<float[]>(new float[static_cast<size_t>(count)]);
}

// C[6 x 16] = (accumulate ? C : init) + A * B over kc steps.
//   a: packed, a[k * 6 + r]
//   b: row k at b + k * ldb, 16 contiguous floats
void micro_kernel(int64_t kc, const float* a, const float* b, int64_t ldb, float* c, int64_t ldc,
                  bool accumulate, const float* init) {
#ifdef LWRN_HAVE_AVX2
  __m256 acc[kMr][2];
  for (int r = 0; r < kMr; ++r) {
    if (accumulate) {
      acc[r][0] = _mm256_loadu_ps(c + r * ldc);
      acc[r][1] = _mm256_loadu_ps(c + r * ldc + 8);
    } else {
      acc[r][0] = acc[r][1] = _mm256_set1_ps(init[r]);
    }
  }
  for (int64_t k = 0; k < kc; ++k) {
    const __m256 b0 = _mm256_loadu_ps(b + k * ldb);
    const __m256 b1 = _mm256_loadu_ps(b + k * ldb + 8);
    const float* ak = a + k * kMr;
    for (int r = 0; r < kMr; ++r) {
      const __m256 av = _mm256_broadcast_ss(ak + r);
      acc[r][0] = _mm256_fmadd_ps(av, b0, acc[r][0]);
      acc[r][1] = _mm256_fmadd_ps(av, b1, acc[r][1]);
    }
  }
  for (int r = 0; r < kMr; ++r) {
    _mm256_storeu_ps(c + r * ldc, acc[r][0]);
    _mm256_storeu_ps(c + r * ldc + 8, acc[r][1]);
  }
#else
  float acc[kMr][kNr];
  for (int r = 0; r < kMr; ++r) {
    for (int j = 0; j < kNr; ++j) acc[r][j] = accumulate ? c[r * ldc + j] : init[r];
  }
  for (int64_t k = 0; k < kc; ++k) {
    for (int r = 0; r < kMr; ++r) {
      for (int j = 0; j < kNr; ++j) acc[r][j] = std::fma(a[k * kMr + r], b[k * ldb + j], acc[r][j]);
    }
  }
  for (int r = 0; r < kMr; ++r) {
    for (int j = 0; j < kNr; ++j) c[r * ldc + j] = acc[r][j];
  }
#endif
}

// Same arithmetic as micro_kernel for a partial (rows x cols) block: the block
// is staged through zero-padded buffers so the full kernel can run on it.
void edge_kernel(int64_t kc, const float* a, const float* b, int64_t ldb, float* c, int64_t ldc,
                 bool accumulate, const float* init, int64_t rows, int64_t cols) {
  alignas(32) float cbuf[kMr * kNr] = {};
  const float* bsrc = b;
  int64_t bld = ldb;
  std::unique_ptr<float[]> bbuf;
  if (cols < kNr) {
    bbuf = uninit(kc * kNr);
    for (int64_t k = 0; k < kc; ++k) {
      float* row = bbuf.get() + k * kNr;
      std::memcpy(row, b + k * ldb, static_cast<size_t>(cols) * sizeof(float));
      std::fill(row + cols, row + kNr, 0.0f);
    }
    bsrc = bbuf.get();
    bld = kNr;
  }
  if (accumulate) {
    for (int64_t r = 0; r < rows; ++r) std::memcpy(cbuf + r * kNr, c + r * ldc, cols * sizeof(float));
  }
  micro_kernel(kc, a, bsrc, bld, cbuf, kNr, accumulate, init);
  for (int64_t r = 0; r < rows; ++r) std::memcpy(c + r * ldc, cbuf + r * kNr, cols * sizeof(float));
}

// Packs a row-major M x K matrix into ceil(M/6) panels of K x 6 (rows past M
// are zero).
std::unique_ptr<float[]> pack_weights(const float* w, int64_t m, int64_t k) {
  const int64_t blocks = (m + kMr - 1) / kMr;
  auto packed = uninit(blocks * k * kMr);
  for (int64_t blk = 0; blk < blocks; ++blk) {
    float* dst = packed.get() + blk * k * kMr;
    for (int64_t kk = 0; kk < k; ++kk) {
      for (int64_t r = 0; r < kMr; ++r) {
        const int64_t row = blk * kMr + r;
        dst[kk * kMr + r] = row < m ? w[row * k + kk] : 0.0f;
      }
    }
  }
  return packed;
}

struct GemmView {
  const float* packed_a;  // from pack_weights
  int64_t m;
  int64_t k;
  const float* bias;  // m entries, or nullptr
};

// C[m x cols] = bias + A * B for one column tile.
void gemm_tile(const GemmView& g, const float* b, int64_t ldb, float* c, int64_t ldc,
               int64_t cols) {
  float init[kMr];
  for (int64_t k0 = 0; k0 < g.k; k0 += kKc) {
    const int64_t kc = std::min(kKc, g.k - k0);
    for (int64_t n0 = 0; n0 < cols; n0 += kNr) {
      const int64_t nc = std::min(kNr, cols - n0);
      for (int64_t m0 = 0; m0 < g.m; m0 += kMr) {
        const int64_t mc = std::min(kMr, g.m - m0);
        for (int64_t r = 0; r < kMr; ++r) {
          init[r] = (g.bias != nullptr && m0 + r < g.m) ? g.bias[m0 + r] : 0.0f;
        }
        const float* a = g.packed_a + (m0 / kMr) * g.k * kMr + k0 * kMr;
        const float* bk = b + k0 * ldb + n0;
        float* cb = c + m0 * ldc + n0;
        if (mc == kMr && nc == kNr) {
          micro_kernel(kc, a, bk, ldb, cb, ldc, k0 > 0, init);
        } else {
          edge_kernel(kc, a, bk, ldb, cb, ldc, k0 > 0, init, mc, nc);
        }
      }
    }
  }
}

void check_conv_args(const Tensor& input, const Tensor& weight, std::span<const float> bias,
                     const ConvParams& p) {
  const Shape& in = input.shape();
  const Shape& ws = weight.shape();
  if (p.groups < 1) throw DimensionError("conv2d: groups must be >= 1");
  if (ws.h != p.kernel.h || ws.w != p.kernel.w) {
    throw DimensionError("conv2d: kernel axis mismatch, weight is " + ws.str() + " but params say " +
                         std::to_string(p.kernel.h) + "x" + std::to_string(p.kernel.w));
  }
  if (ws.n % p.groups != 0) {
    throw DimensionError("conv2d: output-channel axis " + std::to_string(ws.n) +
                         " not divisible by groups " + std::to_string(p.groups));
  }
  if (ws.c * p.groups != in.c) {
    throw DimensionError("conv2d: input-channel axis mismatch, input C=" + std::to_string(in.c) +
                         " but weight expects " + std::to_string(ws.c) + "x" +
                         std::to_string(p.groups) + " groups");
  }
  if (!bias.empty() && static_cast<int64_t>(bias.size()) != ws.n) {
    throw DimensionError("conv2d: bias axis has " + std::to_string(bias.size()) +
                         " entries, expected " + std::to_string(ws.n));
  }
}

Tensor conv_depthwise(const Tensor& input, const Tensor& weight, std::span<const float> bias,
                      const ConvParams& p, const Shape& out_shape) {
  const Shape& in = input.shape();
  Tensor out(out_shape);
  const int64_t kh = p.kernel.h, kw = p.kernel.w;
  parallel_for(in.n * in.c, [&](int64_t plane) {
    const int64_t n = plane / in.c, c = plane % in.c;
    const float* src = input.plane(n, c);
    const float* w = weight.plane(c, 0);
    float* dst = out.plane(n, c);
    const float b = bias.empty() ? 0.0f : bias[c];
    for (int64_t oy = 0; oy < out_shape.h; ++oy) {
      for (int64_t ox = 0; ox < out_shape.w; ++ox) {
        float acc = b;
        for (int64_t ky = 0; ky < kh; ++ky) {
          const int64_t iy = oy * p.stride.h - p.padding.h + ky;
          if (iy < 0 || iy >= in.h) continue;
          for (int64_t kx = 0; kx < kw; ++kx) {
            const int64_t ix = ox * p.stride.w - p.padding.w + kx;
            if (ix < 0 || ix >= in.w) continue;
            acc = std::fma(w[ky * kw + kx], src[iy * in.w + ix], acc);
          }
        }
        dst[oy * out_shape.w + ox] = acc;
      }
    }
  });
  return out;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, std::span<const float> bias,
              const ConvParams& p) {
  check_conv_args(input, weight, bias, p);
  const Shape& in = input.shape();
  const int64_t cout = weight.shape().n;
  const Shape out_shape = conv2d_output_shape(in, cout, p);

  if (p.groups == in.c && cout == in.c && weight.shape().c == 1) {
    return conv_depthwise(input, weight, bias, p, out_shape);
  }

  Tensor out(out_shape);
  const int64_t groups = p.groups;
  const int64_t cin_g = in.c / groups;
  const int64_t cout_g = cout / groups;
  const int64_t kh = p.kernel.h, kw = p.kernel.w;
  const int64_t k = cin_g * kh * kw;
  const int64_t cols = out_shape.h * out_shape.w;
  const int64_t tiles = (cols + kColTile - 1) / kColTile;
  const bool direct = kh == 1 && kw == 1 && p.stride.h == 1 && p.stride.w == 1 &&
                      p.padding.h == 0 && p.padding.w == 0;

  std::vector<std::unique_ptr<float[]>> packed(static_cast<size_t>(groups));
  for (int64_t g = 0; g < groups; ++g) {
    packed[g] = pack_weights(weight.data().data() + g * cout_g * k, cout_g, k);
  }

  parallel_for(in.n * groups * tiles, [&](int64_t task) {
    const int64_t tile = task % tiles;
    const int64_t g = (task / tiles) % groups;
    const int64_t n = task / (tiles * groups);
    const int64_t col0 = tile * kColTile;
    const int64_t width = std::min(kColTile, cols - col0);
    const float* src = input.plane(n, g * cin_g);
    float* dst = out.plane(n, g * cout_g) + col0;
    const GemmView view{packed[g].get(), cout_g, k, bias.empty() ? nullptr : bias.data() + g * cout_g};

    if (direct) {
      gemm_tile(view, src + col0, in.plane(), dst, cols, width);
      return;
    }
    // im2col panel: row (ci, ky, kx), column j -> output cell col0 + j.
    auto panel = uninit(k * width);
    std::vector<int64_t> base_y(static_cast<size_t>(width)), base_x(static_cast<size_t>(width));
    for (int64_t j = 0; j < width; ++j) {
      base_y[j] = ((col0 + j) / out_shape.w) * p.stride.h - p.padding.h;
      base_x[j] = ((col0 + j) % out_shape.w) * p.stride.w - p.padding.w;
    }
    for (int64_t ci = 0; ci < cin_g; ++ci) {
      const float* plane = src + ci * in.plane();
      for (int64_t ky = 0; ky < kh; ++ky) {
        for (int64_t kx = 0; kx < kw; ++kx) {
          float* row = panel.get() + ((ci * kh + ky) * kw + kx) * width;
          for (int64_t j = 0; j < width; ++j) {
            const int64_t iy = base_y[j] + ky;
            const int64_t ix = base_x[j] + kx;
            row[j] = (iy >= 0 && iy < in.h && ix >= 0 && ix < in.w) ? plane[iy * in.w + ix] : 0.0f;
          }
        }
      }
    }
    gemm_tile(view, panel.get(), width, dst, cols, width);
  });
  return out;
}

}  // namespace lwrn
