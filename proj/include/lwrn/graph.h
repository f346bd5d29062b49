#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lwrn/ops.h"
#include "lwrn/tensor.h"

namespace lwrn {

// Which part of a segmentation model a node belongs to; drives the
// per-subsystem totals of the analyzer.
enum class Subsystem { kBackbone, kDecoder, kClf };
std::string_view subsystem_name(Subsystem s);

struct Node {
  std::string id;
  OpKind op = OpKind::kInput;
  OpAttrs attrs;
  int64_t in_channels = 0;   // conv, bn-affine
  int64_t out_channels = 0;  // conv
  std::vector<std::string> weight_names;
  std::vector<std::string> inputs;  // upsample: {data, size reference}
  std::string block;                // enclosing block instance, e.g. "decoder.l4.crp"
  std::string block_kind;           // "rcu", "crp", "fusion", "adapt", "clf", ...
  Subsystem subsystem = Subsystem::kBackbone;
};

struct GraphMeta {
  std::string model;  // table row name
  std::string variant;
  std::string backbone;
  int num_classes = 0;
};

class Graph {
 public:
  // Throws GraphError if the id is already taken. Inputs are not resolved
  // here; topo_order() validates references.
  const Node& add(Node node);

  const Node& node(const std::string& id) const;
  bool contains(const std::string& id) const { return nodes_.count(id) != 0; }
  const std::map<std::string, Node>& nodes() const { return nodes_; }
  size_t size() const { return nodes_.size(); }

  const std::vector<std::string>& inputs() const { return inputs_; }
  const std::vector<std::string>& outputs() const { return outputs_; }
  void add_output(const std::string& id) { outputs_.push_back(id); }

  // Kahn's algorithm; among ready nodes the smallest id runs first. Throws
  // GraphError on dangling references or cycles.
  std::vector<std::string> topo_order() const;

  // id -> ids of nodes reading it, in topological order.
  std::map<std::string, std::vector<std::string>> consumers() const;

  GraphMeta meta;

 private:
  std::map<std::string, Node> nodes_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
};

using ShapeMap = std::map<std::string, Shape>;

// Throws GraphError for cycles and DimensionError (naming both producers)
// for incompatible add inputs.
ShapeMap infer_shapes(const Graph& graph, const Shape& input);

// Name -> tensor.
using WeightStore = std::map<std::string, Tensor>;

// Weights a node consumes, with the shapes it requires.
std::vector<std::pair<std::string, Shape>> declared_weights(const Node& node);

// Fan-in scaled uniform weights: conv weights in +-sqrt(6 / fan_in), conv
// biases in +-1/sqrt(fan_in), bn-affine scale 1 and shift 0. Each tensor is
// drawn from a stream keyed by (seed, weight name).
WeightStore random_weights(const Graph& graph, uint64_t seed);

// Checks every declared weight is present with the right shape. Throws
// ResolutionError for missing names, DimensionError for wrong shapes.
void check_weights(const Graph& graph, const WeightStore& weights);

struct ExecStats {
  int64_t allocations = 0;  // node outputs materialised
  int64_t peak_live = 0;    // most node outputs alive at once
};

// Runs the graph in topological order, releasing each intermediate as soon
// as its last consumer has run. Shapes and weights are validated before any
// kernel executes.
std::vector<Tensor> execute(const Graph& graph, const WeightStore& weights, const Tensor& input,
                            ExecStats* stats = nullptr);

// Like execute, but keeps every node output that `target` depends on (and
// target itself). Used for gradient computation.
std::map<std::string, Tensor> execute_retaining(const Graph& graph, const WeightStore& weights,
                                                const Tensor& input, const std::string& target);

// Evaluates one node given its input tensors.
Tensor run_node(const Node& node, std::span<const Tensor* const> inputs,
                const WeightStore& weights);

// One line per node in topological order:
//   <id> <op> <attrs> in=[a,b] block=<kind>:<instance> out=<shape>
std::string dump_graph(const Graph& graph, const ShapeMap* shapes = nullptr);

// Nodes that `target` transitively depends on, including target.
std::vector<std::string> ancestors(const Graph& graph, const std::string& target);

}  // namespace lwrn
