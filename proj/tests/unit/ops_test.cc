#include <gtest/gtest.h>

#include <random>

#include "lwrn/errors.h"
#include "lwrn/ops.h"
#include "reference.h"

namespace lwrn {
namespace {

ConvParams conv_params(int k, int s, int p, int groups = 1, bool bias = false) {
  return ConvParams{{k, k}, {s, s}, {p, p}, groups, bias};
}

TEST(Conv2d, IdentityKernel) {
  std::mt19937_64 rng(1);
  const Tensor x = ref::random_tensor({1, 1, 5, 7}, rng);
  const Tensor w({1, 1, 1, 1}, std::vector<float>{1.0f});
  const Tensor y = conv2d(x, w, {}, conv_params(1, 1, 0));
  EXPECT_EQ(y.shape(), x.shape());
  EXPECT_EQ(ref::max_abs_diff(x, y), 0.0);
}

TEST(Conv2d, ResNetStemShape) {
  EXPECT_EQ(conv2d_output_shape({1, 3, 512, 512}, 64, conv_params(7, 2, 3)), (Shape{1, 64, 256, 256}));
  EXPECT_EQ(conv2d_output_shape({1, 3, 625, 468}, 64, conv_params(7, 2, 3)), (Shape{1, 64, 313, 234}));
}

TEST(Conv2d, MatchesDirectLoopsOnSmallCase) {
  std::mt19937_64 rng(2);
  const Tensor x = ref::random_tensor({2, 3, 9, 9}, rng);
  const Tensor w = ref::random_tensor({4, 3, 3, 3}, rng);
  const ConvParams p = conv_params(3, 1, 1);
  const Tensor y = conv2d(x, w, {}, p);
  EXPECT_LE(ref::max_abs_diff(y, ref::conv2d(ref::Array(x), ref::Array(w), {}, p)), 1e-5);
}

TEST(Conv2d, BiasIsAddedPerChannel) {
  const Tensor x({1, 2, 3, 3}, 0.0f);
  const Tensor w({2, 2, 1, 1}, 1.0f);
  const std::vector<float> bias{0.5f, -2.0f};
  const Tensor y = conv2d(x, w, bias, conv_params(1, 1, 0, 1, true));
  for (int64_t i = 0; i < 9; ++i) {
    EXPECT_EQ(y.plane(0, 0)[i], 0.5f);
    EXPECT_EQ(y.plane(0, 1)[i], -2.0f);
  }
}

TEST(Conv2d, DimensionErrorsNameTheAxis) {
  const Tensor x({1, 3, 8, 8}, 1.0f);
  try {
    conv2d(x, Tensor({4, 2, 3, 3}, 1.0f), {}, conv_params(3, 1, 1));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("input-channel"), std::string::npos) << e.what();
  }
  try {
    conv2d(x, Tensor({4, 3, 3, 3}, 1.0f), std::vector<float>(3), conv_params(3, 1, 1, 1, true));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("bias"), std::string::npos) << e.what();
  }
  EXPECT_THROW(conv2d(x, Tensor({4, 3, 5, 5}, 1.0f), {}, conv_params(3, 1, 1)), DimensionError);
  EXPECT_THROW(conv2d(x, Tensor({4, 1, 3, 3}, 1.0f), {}, conv_params(3, 1, 1, 2)), DimensionError);
}

TEST(Conv2d, DegenerateOutputIsReported) {
  const Tensor x({1, 1, 2, 2}, 1.0f);
  EXPECT_THROW(conv2d(x, Tensor({1, 1, 3, 3}, 1.0f), {}, conv_params(3, 1, 0)), DegenerateShapeError);
}

TEST(Conv2d, DepthwiseMatchesOracle) {
  std::mt19937_64 rng(4);
  const Tensor x = ref::random_tensor({1, 6, 11, 10}, rng);
  const Tensor w = ref::random_tensor({6, 1, 3, 3}, rng);
  const std::vector<float> b{0.1f, 0.2f, 0.3f, 0.4f, 0.5f, 0.6f};
  for (int s : {1, 2}) {
    const ConvParams p = conv_params(3, s, 1, 6, true);
    const Tensor y = conv2d(x, w, b, p);
    const ref::Array want = ref::conv2d(ref::Array(x), ref::Array(w), {b.begin(), b.end()}, p);
    EXPECT_LE(ref::max_abs_diff(y, want), 1e-5) << "stride " << s;
  }
}

TEST(MaxPool, ConstantInputIsPreserved) {
  const Tensor x({1, 2, 7, 6}, 3.25f);
  const Tensor y = maxpool2d(x, PoolParams{{5, 5}, {1, 1}, {2, 2}});
  EXPECT_EQ(y.shape(), x.shape());
  for (float v : y.data()) EXPECT_EQ(v, 3.25f);
}

TEST(MaxPool, SingleWindow) {
  const Tensor x({1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  const Tensor y = maxpool2d(x, PoolParams{{2, 2}, {1, 1}, {0, 0}});
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y.data()[0], 4.0f);
}

TEST(MaxPool, MatchesOracleExactly) {
  std::mt19937_64 rng(5);
  const Tensor x = ref::random_tensor({1, 4, 11, 13}, rng);
  const PoolParams p{{5, 5}, {1, 1}, {2, 2}};
  EXPECT_EQ(ref::max_abs_diff(maxpool2d(x, p), ref::maxpool2d(ref::Array(x), p)), 0.0);
}

TEST(MaxPool, NegativeInputsIgnorePadding) {
  const Tensor x({1, 1, 3, 3}, -5.0f);
  const Tensor y = maxpool2d(x, PoolParams{{3, 3}, {2, 2}, {1, 1}});
  for (float v : y.data()) EXPECT_EQ(v, -5.0f);
}

TEST(MaxPool, WindowInsidePaddingIsDegenerate) {
  const Tensor x({1, 1, 4, 4}, 1.0f);
  EXPECT_THROW(maxpool2d(x, PoolParams{{2, 2}, {1, 1}, {2, 2}}), DegenerateShapeError);
}

TEST(Relu, ClampsNegativesAndCap) {
  const Tensor x({1, 1, 1, 4}, std::vector<float>{-1.0f, 0.0f, 3.0f, 9.0f});
  const Tensor y = relu(x);
  EXPECT_EQ(std::vector<float>(y.data().begin(), y.data().end()), (std::vector<float>{0, 0, 3, 9}));
  const Tensor y6 = relu(x, 6.0f);
  EXPECT_EQ(std::vector<float>(y6.data().begin(), y6.data().end()), (std::vector<float>{0, 0, 3, 6}));
}

TEST(Add, SumsAndRejectsMismatch) {
  const Tensor a({1, 1, 1, 2}, std::vector<float>{1, 2});
  const Tensor b({1, 1, 1, 2}, std::vector<float>{10, 20});
  const Tensor c = add(a, b);
  EXPECT_EQ(c.data()[0], 11.0f);
  EXPECT_EQ(c.data()[1], 22.0f);
  EXPECT_THROW(add(a, Tensor({1, 1, 2, 1}, 0.0f)), DimensionError);
}

TEST(Upsample, ConstantStaysConstant) {
  const Tensor x({1, 2, 3, 5}, 0.75f);
  for (auto [h, w] : {std::pair{1, 1}, {7, 4}, {12, 20}, {3, 5}}) {
    const Tensor y = upsample_bilinear(x, h, w);
    EXPECT_EQ(y.shape(), (Shape{1, 2, h, w}));
    for (float v : y.data()) EXPECT_FLOAT_EQ(v, 0.75f);
  }
}

TEST(Upsample, SameSizeIsIdentity) {
  const Tensor x({1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  EXPECT_EQ(ref::max_abs_diff(upsample_bilinear(x, 2, 2), x), 0.0);
}

TEST(Upsample, TwoToFourHandComputed) {
  // Source coordinates for 2 -> 4: (i + 0.5) / 2 - 0.5 = -0.25, 0.25, 0.75, 1.25,
  // clamped to 0, 0.25, 0.75, 1. Per-axis weights on (v0, v1):
  // (1,0), (0.75,0.25), (0.25,0.75), (0,1).
  const Tensor x({1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  const double wy[4][2] = {{1, 0}, {0.75, 0.25}, {0.25, 0.75}, {0, 1}};
  const Tensor y = upsample_bilinear(x, 4, 4);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const double want = wy[i][0] * wy[j][0] * 1 + wy[i][0] * wy[j][1] * 2 +
                          wy[i][1] * wy[j][0] * 3 + wy[i][1] * wy[j][1] * 4;
      EXPECT_NEAR(y.at(0, 0, i, j), want, 1e-6) << i << "," << j;
    }
  }
  EXPECT_FLOAT_EQ(y.at(0, 0, 1, 1), 1.75f);
}

TEST(Upsample, RejectsEmptyTarget) {
  EXPECT_THROW(upsample_bilinear(Tensor({1, 1, 2, 2}, 1.0f), 0, 3), DegenerateShapeError);
}

TEST(BnAffine, PerChannelScaleShift) {
  const Tensor x({1, 2, 1, 2}, std::vector<float>{1, 2, 3, 4});
  const std::vector<float> scale{2, -1}, shift{0.5, 1};
  const Tensor y = bn_affine(x, scale, shift);
  EXPECT_EQ(std::vector<float>(y.data().begin(), y.data().end()), (std::vector<float>{2.5, 4.5, -2, -3}));
  EXPECT_THROW(bn_affine(x, std::vector<float>{1}, std::vector<float>{1}), DimensionError);
}

TEST(OpNames, RoundTrip) {
  for (OpKind op : {OpKind::kInput, OpKind::kOutput, OpKind::kConv, OpKind::kMaxPool, OpKind::kRelu,
                    OpKind::kAdd, OpKind::kUpsample, OpKind::kBnAffine}) {
    EXPECT_EQ(op_from_name(op_name(op)), op);
  }
  EXPECT_EQ(op_name(OpKind::kBnAffine), "bn-affine");
  EXPECT_THROW(op_from_name("concat"), CapabilityError);
}

TEST(Kernels, DoNotMutateInputs) {
  std::mt19937_64 rng(6);
  const Tensor x = ref::random_tensor({1, 3, 6, 6}, rng);
  const Tensor copy = x;
  const Tensor w = ref::random_tensor({3, 3, 3, 3}, rng);
  conv2d(x, w, {}, conv_params(3, 1, 1));
  maxpool2d(x, PoolParams{{3, 3}, {1, 1}, {1, 1}});
  relu(x);
  add(x, x);
  upsample_bilinear(x, 9, 9);
  EXPECT_EQ(ref::max_abs_diff(x, copy), 0.0);
}

}  // namespace
}  // namespace lwrn
