#include <array>

#include "lwrn/errors.h"
#include "lwrn/models.h"

namespace lwrn {
namespace {

std::string two_digits(int i) {
  return (i < 10 ? "0" : "") + std::to_string(i);
}

}  // namespace

BackboneTaps build_resnet(Graph& g, const std::string& input, int depth) {
  std::array<int, 4> blocks{};
  switch (depth) {
    case 50: blocks = {3, 4, 6, 3}; break;
    case 101: blocks = {3, 4, 23, 3}; break;
    case 152: blocks = {3, 8, 36, 3}; break;
    default: throw BuildError("unsupported ResNet depth " + std::to_string(depth));
  }
  NodeFactory stem(g, "backbone.stem", "stem", Subsystem::kBackbone);
  std::string x = stem.conv("conv", input, 3, 64, 7, 2, false);
  x = stem.bn("bn", x, 64);
  x = stem.relu("relu", x);
  x = stem.maxpool("pool", x, 3, 2, 1);

  BackboneTaps taps;
  int64_t cin = 64;
  for (int stage = 0; stage < 4; ++stage) {
    const int64_t width = int64_t{64} << stage;
    const int64_t cout = 4 * width;
    for (int b = 0; b < blocks[stage]; ++b) {
      const int stride = (b == 0 && stage > 0) ? 2 : 1;
      NodeFactory f(g, "backbone.layer" + std::to_string(stage + 1) + ".block" + two_digits(b),
                    "bottleneck", Subsystem::kBackbone);
      std::string y = f.bn("bn1", f.conv("conv1", x, cin, width, 1, 1, false), width);
      y = f.relu("relu1", y);
      y = f.bn("bn2", f.conv("conv2", y, width, width, 3, stride, false), width);
      y = f.relu("relu2", y);
      y = f.bn("bn3", f.conv("conv3", y, width, cout, 1, 1, false), cout);
      std::string shortcut = x;
      if (b == 0) {
        shortcut = f.bn("down_bn", f.conv("down_conv", x, cin, cout, 1, stride, false), cout);
      }
      x = f.relu("relu", f.add("sum", y, shortcut));
      cin = cout;
    }
    taps.nodes[stage] = x;
    taps.channels[stage] = cout;
  }
  return taps;
}

BackboneTaps build_mobilenet_v2(Graph& g, const std::string& input) {
  constexpr float kCap = 6.0f;
  NodeFactory stem(g, "backbone.stem", "stem", Subsystem::kBackbone);
  std::string x = stem.relu("relu", stem.bn("bn", stem.conv("conv", input, 3, 32, 3, 2, false), 32), kCap);

  struct Setting {
    int t, c, n, s;
  };
  constexpr std::array<Setting, 7> settings{{
      {1, 16, 1, 1}, {6, 24, 2, 2}, {6, 32, 3, 2}, {6, 64, 4, 2},
      {6, 96, 3, 1}, {6, 160, 3, 2}, {6, 320, 1, 1},
  }};
  BackboneTaps taps;
  int tap = 0;
  int64_t cin = 32;
  int index = 0;
  for (const auto& st : settings) {
    for (int i = 0; i < st.n; ++i, ++index) {
      const int stride = i == 0 ? st.s : 1;
      const int64_t hidden = cin * st.t;
      NodeFactory f(g, "backbone.ir" + two_digits(index), "inverted_residual", Subsystem::kBackbone);
      std::string y = x;
      if (st.t != 1) y = f.relu("expand_relu", f.bn("expand_bn", f.conv("expand", y, cin, hidden, 1, 1, false), hidden), kCap);
      y = f.conv("dw", y, hidden, hidden, 3, stride, false, static_cast<int>(hidden));
      y = f.relu("dw_relu", f.bn("dw_bn", y, hidden), kCap);
      y = f.bn("project_bn", f.conv("project", y, hidden, st.c, 1, 1, false), st.c);
      if (stride == 1 && cin == st.c) y = f.add("sum", y, x);
      x = y;
      cin = st.c;
    }
    if (st.c == 24 || st.c == 32 || st.c == 96 || st.c == 320) {
      taps.nodes[tap] = x;
      taps.channels[tap] = st.c;
      ++tap;
    }
  }
  return taps;
}

BackboneTaps build_toy(Graph& g, const std::string& input) {
  NodeFactory stem(g, "backbone.stem", "stem", Subsystem::kBackbone);
  std::string x = stem.relu("relu", stem.conv("conv", input, 3, 8, 3, 1, true));
  x = stem.maxpool("pool", x, 2, 2, 0);
  BackboneTaps taps;
  int64_t cin = 8;
  constexpr std::array<int64_t, 4> widths{8, 16, 32, 64};
  for (int s = 0; s < 4; ++s) {
    NodeFactory f(g, "backbone.stage" + std::to_string(s + 1), "stage", Subsystem::kBackbone);
    x = f.relu("relu", f.conv("conv", x, cin, widths[s], 3, 2, true));
    taps.nodes[s] = x;
    taps.channels[s] = widths[s];
    cin = widths[s];
  }
  return taps;
}

Graph build_graph(const ArchSpec& spec) {
  Graph g;
  g.meta = GraphMeta{model_name(spec), std::string(variant_name(spec.variant)), std::string(backbone_name(spec.backbone)),
                     spec.num_classes};
  Node in;
  in.id = "input";
  in.op = OpKind::kInput;
  g.add(in);

  BackboneTaps taps;
  switch (spec.backbone) {
    case Backbone::kResNet50: taps = build_resnet(g, "input", 50); break;
    case Backbone::kResNet101: taps = build_resnet(g, "input", 101); break;
    case Backbone::kResNet152: taps = build_resnet(g, "input", 152); break;
    case Backbone::kMobileNetV2: taps = build_mobilenet_v2(g, "input"); break;
    case Backbone::kToy: taps = build_toy(g, "input"); break;
  }

  const bool has_rcu = spec.variant != Variant::kLw;
  const int k = spec.variant == Variant::kOriginal ? 3 : 1;
  BlockHandle prev;
  for (int level = 4; level >= 1; --level) {
    const std::string base = "decoder.l" + std::to_string(level);
    const int64_t width = spec.channel_plan[4 - level];
    NodeFactory adapt(g, base + ".adapt", "adapt", Subsystem::kDecoder);
    const std::string a = adapt.conv("conv", taps.nodes[level - 1], taps.channels[level - 1], width, k, 1, true);
    BlockHandle cur{a, a, width, level};
    if (has_rcu) {
      for (int i = 0; i < 2; ++i) {
        cur.exit = build_rcu(g, base + ".rcu_pre" + std::to_string(i), cur.exit, width, spec.variant, level).exit;
      }
    }
    if (level < 4) cur.exit = build_fusion(g, base + ".fusion", prev, cur, width, spec.variant).exit;
    cur.exit = build_crp(g, base + ".crp", cur.exit, width, spec.variant, spec.crp_stages, level).exit;
    if (has_rcu) {
      for (int i = 0; i < 3; ++i) {
        cur.exit = build_rcu(g, base + ".rcu_post" + std::to_string(i), cur.exit, width, spec.variant, level).exit;
      }
    }
    prev = cur;
  }

  const BlockHandle clf = build_clf(g, "clf", prev.exit, prev.channels, spec.num_classes);
  NodeFactory head(g, "clf", "clf", Subsystem::kClf);
  const std::string up = head.upsample("upsample", clf.exit, "input");
  Node out;
  out.id = "output";
  out.op = OpKind::kOutput;
  out.inputs = {up};
  out.subsystem = Subsystem::kClf;
  g.add(out);
  g.add_output("output");
  return g;
}

}  // namespace lwrn
