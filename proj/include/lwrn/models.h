#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "lwrn/arch_spec.h"
#include "lwrn/graph.h"

namespace lwrn {

// Appends nodes to a graph under a common block tag.
class NodeFactory {
 public:
  NodeFactory(Graph& graph, std::string block, std::string block_kind, Subsystem subsystem)
      : graph_(graph), block_(std::move(block)), kind_(std::move(block_kind)), sub_(subsystem) {}

  const std::string& block() const { return block_; }
  Graph& graph() { return graph_; }

  // Conv with "<id>.weight" and, if biased, "<id>.bias". Padding defaults
  // to "same" for odd kernels at stride 1.
  std::string conv(const std::string& name, const std::string& input, int64_t cin, int64_t cout,
                   int kernel, int stride, bool bias, int groups = 1);
  std::string bn(const std::string& name, const std::string& input, int64_t channels);
  std::string relu(const std::string& name, const std::string& input, float cap = kNoCap);
  std::string add(const std::string& name, const std::string& a, const std::string& b);
  std::string maxpool(const std::string& name, const std::string& input, int kernel, int stride,
                      int pad);
  std::string upsample(const std::string& name, const std::string& input,
                       const std::string& size_ref);

 private:
  std::string push(Node n, const std::string& name);

  Graph& graph_;
  std::string block_;
  std::string kind_;
  Subsystem sub_;
};

// Entry and exit of a block plus the decoder level it works at (1 = finest,
// stride 4; 4 = coarsest, stride 32).
struct BlockHandle {
  std::string entry;
  std::string exit;
  int64_t channels = 0;
  int level = 0;
};

// Residual conv unit. original: relu, 3x3, relu, 3x3, skip add.
// lw_with_rcu and lw: relu, 1x1 (C -> C/2), relu, 3x3, relu, 1x1 (C/2 -> C),
// skip add; C must be even.
BlockHandle build_rcu(Graph& g, const std::string& prefix, const std::string& input,
                      int64_t channels, Variant variant, int level);

// Chained residual pooling: relu, then `stages` rounds of 5x5/1 max pool
// followed by a conv (3x3 original, 1x1 light-weight), each added to a
// running sum that starts at the relu output.
BlockHandle build_crp(Graph& g, const std::string& prefix, const std::string& input,
                      int64_t channels, Variant variant, int stages, int level);

// Multi-resolution fusion: conv on each path, bilinear upsample of the
// coarse path to the fine path's size, sum. Both inputs must come from
// different levels unless allow_same_level is set.
BlockHandle build_fusion(Graph& g, const std::string& prefix, const BlockHandle& coarse,
                         const BlockHandle& fine, int64_t out_channels, Variant variant,
                         bool allow_same_level = false);

// 3x3 classifier producing per-class logits.
BlockHandle build_clf(Graph& g, const std::string& prefix, const std::string& input,
                      int64_t channels, int num_classes);

// Backbone feature taps ordered by stride 4, 8, 16, 32.
struct BackboneTaps {
  std::array<std::string, 4> nodes;
  std::array<int64_t, 4> channels{};
};

// Classification-style backbones without their pooling/fc head. `input`
// names an existing input node.
BackboneTaps build_resnet(Graph& g, const std::string& input, int depth);  // 50, 101, 152
BackboneTaps build_mobilenet_v2(Graph& g, const std::string& input);
// Small five-stage backbone for tests: 3x3/1 stem (8 ch), 2x2/2 max pool,
// then 3x3/2 convs to 8, 16, 32, 64 channels.
BackboneTaps build_toy(Graph& g, const std::string& input);

}  // namespace lwrn
