#include <gtest/gtest.h>

#include <chrono>
#include <cstring>
#include <random>

#include "lwrn/analyzer.h"
#include "lwrn/arch_spec.h"
#include "lwrn/errors.h"
#include "lwrn/models.h"
#include "reference.h"

namespace lwrn {
namespace {

Graph with_input() {
  Graph g;
  Node in;
  in.id = "input";
  in.op = OpKind::kInput;
  g.add(in);
  return g;
}

void finish(Graph& g, const std::string& from) {
  Node out;
  out.id = "output";
  out.op = OpKind::kOutput;
  out.inputs = {from};
  g.add(out);
  g.add_output("output");
}

int64_t params_of(const Graph& g) { return count_params(g).total.params; }

WeightStore zero_weights(const Graph& g) {
  WeightStore w = random_weights(g, 0);
  for (auto& [name, t] : w) std::fill(t.mutable_data().begin(), t.mutable_data().end(), 0.0f);
  return w;
}

bool bit_identical(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(float)) == 0;
}

TEST(Rcu, OriginalParamCount) {
  Graph g = with_input();
  build_rcu(g, "rcu", "input", 256, Variant::kOriginal, 1);
  EXPECT_EQ(params_of(g), 2 * (3 * 3 * 256 * 256 + 256));
  EXPECT_EQ(params_of(g), 1180160);
}

TEST(Rcu, BottleneckParamCount) {
  // relu, 1x1 256->128, relu, 3x3 128->128, relu, 1x1 128->256, all biased.
  Graph g = with_input();
  build_rcu(g, "rcu", "input", 256, Variant::kLwWithRcu, 1);
  EXPECT_EQ(params_of(g), (256 * 128 + 128) + (9 * 128 * 128 + 128) + (128 * 256 + 256));
  EXPECT_EQ(params_of(g), 213504);
}

TEST(Rcu, OddBottleneckWidthIsRejected) {
  Graph g = with_input();
  EXPECT_THROW(build_rcu(g, "rcu", "input", 7, Variant::kLwWithRcu, 1), BuildError);
}

TEST(Rcu, ZeroWeightsGiveIdentity) {
  for (Variant v : {Variant::kOriginal, Variant::kLwWithRcu}) {
    Graph g = with_input();
    const BlockHandle h = build_rcu(g, "rcu", "input", 6, v, 1);
    finish(g, h.exit);
    std::mt19937_64 rng(1);
    const Tensor x = ref::random_tensor({1, 6, 5, 7}, rng);
    EXPECT_TRUE(bit_identical(execute(g, zero_weights(g), x).at(0), x));
  }
}

TEST(Crp, LightWeightParamCount) {
  Graph g = with_input();
  build_crp(g, "crp", "input", 256, Variant::kLw, 4, 1);
  EXPECT_EQ(params_of(g), 4 * (256 * 256 + 256));
  EXPECT_EQ(params_of(g), 263168);
}

TEST(Crp, ZeroWeightsGiveRelu) {
  for (Variant v : {Variant::kOriginal, Variant::kLw}) {
    Graph g = with_input();
    const BlockHandle h = build_crp(g, "crp", "input", 4, v, 4, 1);
    finish(g, h.exit);
    std::mt19937_64 rng(2);
    const Tensor x = ref::random_tensor({1, 4, 9, 8}, rng);
    EXPECT_TRUE(bit_identical(execute(g, zero_weights(g), x).at(0), relu(x)));
  }
}

TEST(Crp, PreservesSpatialSize) {
  Graph g = with_input();
  const BlockHandle h = build_crp(g, "crp", "input", 3, Variant::kOriginal, 4, 1);
  EXPECT_EQ(infer_shapes(g, {1, 3, 3, 2}).at(h.exit), (Shape{1, 3, 3, 2}));
  EXPECT_THROW(build_crp(g, "crp2", "input", 3, Variant::kLw, 0, 1), BuildError);
}

struct FusionFixture {
  Graph g = with_input();
  BlockHandle out;
  FusionFixture(int64_t coarse_ch, int64_t fine_ch, int64_t out_ch) {
    NodeFactory f(g, "paths", "test", Subsystem::kDecoder);
    const std::string coarse = f.maxpool("down", "input", 2, 2, 0);
    const std::string cc = f.conv("coarse", coarse, 3, coarse_ch, 1, 1, false);
    const std::string fc = f.conv("fine", "input", 3, fine_ch, 1, 1, false);
    out = build_fusion(g, "fusion", BlockHandle{cc, cc, coarse_ch, 2}, BlockHandle{fc, fc, fine_ch, 1},
                       out_ch, Variant::kLw);
    finish(g, out.exit);
  }
};

TEST(Fusion, LightWeightParamCount) {
  FusionFixture f(512, 256, 256);
  const ModelReport r = count_params(f.g);
  int64_t fusion_params = 0;
  for (const auto& layer : r.layers) {
    if (layer.id.rfind("fusion.", 0) == 0) fusion_params += layer.counts.params;
  }
  EXPECT_EQ(fusion_params, (512 * 256 + 256) + (256 * 256 + 256));
  EXPECT_EQ(fusion_params, 197120);
}

TEST(Fusion, OutputTakesFinerSize) {
  FusionFixture f(4, 6, 5);
  const ShapeMap shapes = infer_shapes(f.g, {1, 3, 10, 7});
  EXPECT_EQ(shapes.at("paths.coarse"), (Shape{1, 4, 5, 3}));
  EXPECT_EQ(shapes.at(f.out.exit), (Shape{1, 5, 10, 7}));
}

TEST(Fusion, ZeroedPathLeavesTheOther) {
  FusionFixture f(4, 6, 5);
  WeightStore w = random_weights(f.g, 5);
  auto zero = [&](const std::string& name) {
    auto& t = w.at(name);
    std::fill(t.mutable_data().begin(), t.mutable_data().end(), 0.0f);
  };
  zero("fusion.conv_fine.weight");
  zero("fusion.conv_fine.bias");
  std::mt19937_64 rng(3);
  const Tensor x = ref::random_tensor({1, 3, 10, 8}, rng);
  const auto values = execute_retaining(f.g, w, x, "output");
  const Tensor& up = values.at("fusion.upsample");
  EXPECT_TRUE(bit_identical(values.at("output"), up));
  const Tensor manual = upsample_bilinear(
      conv2d(values.at("paths.coarse"), w.at("fusion.conv_coarse.weight"), w.at("fusion.conv_coarse.bias").data(),
             f.g.node("fusion.conv_coarse").attrs.conv),
      10, 8);
  EXPECT_TRUE(bit_identical(up, manual));
}

TEST(Fusion, SameLevelNeedsExplicitPermission) {
  Graph g = with_input();
  const BlockHandle a{"input", "input", 3, 2};
  EXPECT_THROW(build_fusion(g, "f", a, a, 4, Variant::kLw), BuildError);
  EXPECT_THROW(build_fusion(g, "f", BlockHandle{"input", "input", 3, 1}, a, 4, Variant::kLw), BuildError);
  const BlockHandle ok = build_fusion(g, "f", a, a, 4, Variant::kLw, true);
  EXPECT_EQ(infer_shapes(g, {1, 3, 4, 4}).at(ok.exit), (Shape{1, 4, 4, 4}));
}

TEST(Clf, ParamsAndZeroWeights) {
  Graph g = with_input();
  const BlockHandle h = build_clf(g, "clf", "input", 256, 21);
  EXPECT_EQ(params_of(g), 3 * 3 * 256 * 21 + 21);
  EXPECT_EQ(params_of(g), 48405);
  EXPECT_EQ(infer_shapes(g, {1, 256, 4, 4}).at(h.exit).c, 21);
  finish(g, h.exit);
  const Tensor y = execute(g, zero_weights(g), Tensor({1, 256, 4, 4}, 1.0f)).at(0);
  for (float v : y.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Backbones, ResNetParamCounts) {
  // Head excluded, BN as scale+shift; the fc layer would add 2048*1000+1000.
  const std::pair<int, int64_t> expected[] = {{50, 23508032}, {101, 42500160}, {152, 58143808}};
  for (auto [depth, params] : expected) {
    Graph g = with_input();
    build_resnet(g, "input", depth);
    EXPECT_EQ(params_of(g), params) << depth;
  }
  Graph g = with_input();
  build_resnet(g, "input", 50);
  EXPECT_NEAR((params_of(g) + 2048 * 1000 + 1000) / 1e6, 25.6, 0.05);
  Graph h = with_input();
  build_resnet(h, "input", 101);
  EXPECT_NEAR((params_of(h) + 2048 * 1000 + 1000) / 1e6, 44.5, 0.1);
  Graph bad = with_input();
  EXPECT_THROW(build_resnet(bad, "input", 34), BuildError);
}

TEST(Backbones, ResNetTapShapesAndMacs) {
  Graph g = with_input();
  const BackboneTaps taps = build_resnet(g, "input", 50);
  const ShapeMap shapes = infer_shapes(g, {1, 3, 512, 512});
  const int64_t sizes[] = {128, 64, 32, 16};
  const int64_t channels[] = {256, 512, 1024, 2048};
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(shapes.at(taps.nodes[i]), (Shape{1, channels[i], sizes[i], sizes[i]}));
    EXPECT_EQ(taps.channels[i], channels[i]);
  }
  EXPECT_EQ(count_flops(g, {1, 3, 224, 224}).total.macs, 4087136256);
}

TEST(Backbones, MobileNetV2) {
  Graph g = with_input();
  const BackboneTaps taps = build_mobilenet_v2(g, "input");
  // Without the final 1x1 (320 -> 1280) layer and classifier.
  EXPECT_EQ(params_of(g), 1811712);
  EXPECT_NEAR((params_of(g) + 320 * 1280 + 2 * 1280) / 1e6, 2.2, 0.05);
  const ShapeMap shapes = infer_shapes(g, {1, 3, 512, 512});
  const int64_t sizes[] = {128, 64, 32, 16};
  const int64_t channels[] = {24, 32, 96, 320};
  for (int i = 0; i < 4; ++i) EXPECT_EQ(shapes.at(taps.nodes[i]), (Shape{1, channels[i], sizes[i], sizes[i]}));
  int capped = 0;
  for (const auto& [id, n] : g.nodes()) capped += n.op == OpKind::kRelu && n.attrs.relu_cap == 6.0f;
  EXPECT_EQ(capped, 1 + 16 * 2 + 1);
}

TEST(Backbones, ToyTaps) {
  Graph g = with_input();
  const BackboneTaps taps = build_toy(g, "input");
  const ShapeMap shapes = infer_shapes(g, {1, 3, 64, 64});
  const int64_t sizes[] = {16, 8, 4, 2};
  const int64_t channels[] = {8, 16, 32, 64};
  for (int i = 0; i < 4; ++i) EXPECT_EQ(shapes.at(taps.nodes[i]), (Shape{1, channels[i], sizes[i], sizes[i]}));
}

TEST(Assembly, ToyLightWeightRunsQuickly) {
  const Graph g = build_graph(parse_spec("backbone=toy variant=lw num_classes=21"));
  const WeightStore w = random_weights(g, 1);
  const Tensor x(Shape{1, 3, 64, 64}, 0.5f);
  const auto t0 = std::chrono::steady_clock::now();
  const Tensor y = execute(g, w, x).at(0);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_EQ(y.shape(), (Shape{1, 21, 64, 64}));
  EXPECT_LT(seconds, 1.0);
}

TEST(Assembly, ShapeContractOnRandomSpecs) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> pick(0, 1000);
  for (int i = 0; i < 30; ++i) {
    ArchSpec s;
    s.backbone = Backbone::kToy;
    s.variant = static_cast<Variant>(pick(rng) % 3);
    s.num_classes = 1 + pick(rng) % 30;
    for (int& c : s.channel_plan) c = 2 * (1 + pick(rng) % 24);
    s.crp_stages = 1 + pick(rng) % 5;
    const Graph g = build_graph(s);
    const Shape in{1, 3, 32 + pick(rng) % 64, 32 + pick(rng) % 64};
    const ShapeMap shapes = infer_shapes(g, in);
    EXPECT_EQ(shapes.at("output"), (Shape{1, s.num_classes, in.h, in.w}));
    for (int level = 1; level <= 4; ++level) {
      const std::string crp = "decoder.l" + std::to_string(level) + ".crp.relu";
      EXPECT_EQ(shapes.at(crp).c, s.channel_plan[4 - level]);
    }
  }
}

TEST(Assembly, LightWeightUsesOnlyOneByOneOutsideClassifier) {
  for (Backbone b : {Backbone::kResNet50, Backbone::kMobileNetV2, Backbone::kToy}) {
    ArchSpec s;
    s.backbone = b;
    const Graph g = build_graph(s);
    for (const auto& [id, n] : g.nodes()) {
      if (n.op != OpKind::kConv) continue;
      EXPECT_NE(n.attrs.conv.kernel.h, 5) << id;
      if (n.subsystem == Subsystem::kBackbone) continue;
      EXPECT_EQ(n.attrs.conv.kernel.h, id == "clf.conv" ? 3 : 1) << id;
    }
  }
}

TEST(Assembly, ParamMonotonicityAcrossVariants) {
  for (int b = 0; b < 5; ++b) {
    int64_t p[3];
    for (int v = 0; v < 3; ++v) {
      ArchSpec s;
      s.backbone = static_cast<Backbone>(b);
      s.variant = static_cast<Variant>(v);
      p[v] = params_of(build_graph(s));
    }
    EXPECT_GT(p[0], p[1]) << b;
    EXPECT_GT(p[1], p[2]) << b;
  }
}

TEST(Assembly, ZeroedDecoderBlocksReduceToInputs) {
  // With every RCU and CRP conv zeroed, each RCU is the identity and each
  // CRP is a relu.
  const Graph g = build_graph(parse_spec("backbone=toy variant=original num_classes=3 channel_plan=8,8,8,8"));
  WeightStore w = random_weights(g, 4);
  for (const auto& [id, n] : g.nodes()) {
    if (n.block_kind != "rcu" && n.block_kind != "crp") continue;
    for (const auto& name : n.weight_names) {
      auto& t = w.at(name);
      std::fill(t.mutable_data().begin(), t.mutable_data().end(), 0.0f);
    }
  }
  std::mt19937_64 rng(5);
  const Tensor x = ref::random_tensor({1, 3, 64, 64}, rng);
  const auto v = execute_retaining(g, w, x, "output");
  for (int level = 1; level <= 4; ++level) {
    const std::string base = "decoder.l" + std::to_string(level);
    const std::string crp_in = g.node(base + ".crp.relu").inputs[0];
    EXPECT_TRUE(bit_identical(v.at(base + ".crp.sum4"), relu(v.at(crp_in))));
    EXPECT_TRUE(bit_identical(v.at(base + ".rcu_post2.sum"), v.at(base + ".crp.sum4")));
    EXPECT_TRUE(bit_identical(v.at(base + ".rcu_pre1.sum"), v.at(base + ".adapt.conv")));
  }
}

}  // namespace
}  // namespace lwrn
