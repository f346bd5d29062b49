#include "lwrn/graph.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "lwrn/errors.h"

namespace lwrn {

std::string_view subsystem_name(Subsystem s) {
  switch (s) {
    case Subsystem::kBackbone: return "backbone";
    case Subsystem::kDecoder: return "decoder";
    case Subsystem::kClf: return "clf";
  }
  return "?";
}

const Node& Graph::add(Node node) {
  if (node.id.empty()) throw GraphError("node id must not be empty");
  if (node.op == OpKind::kInput) inputs_.push_back(node.id);
  auto [it, inserted] = nodes_.emplace(node.id, std::move(node));
  if (!inserted) throw GraphError("duplicate node id '" + it->first + "'");
  return it->second;
}

const Node& Graph::node(const std::string& id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw GraphError("no node '" + id + "'");
  return it->second;
}

std::vector<std::string> Graph::topo_order() const {
  std::map<std::string, int> pending;
  std::map<std::string, std::vector<std::string>> readers;
  for (const auto& [id, n] : nodes_) {
    pending[id] = static_cast<int>(n.inputs.size());
    for (const auto& in : n.inputs) {
      if (!nodes_.count(in)) {
        throw GraphError("node '" + id + "' reads unknown node '" + in + "'");
      }
      readers[in].push_back(id);
    }
  }
  std::set<std::string> ready;
  for (const auto& [id, count] : pending) {
    if (count == 0) ready.insert(id);
  }
  std::vector<std::string> order;
  order.reserve(nodes_.size());
  while (!ready.empty()) {
    std::string id = *ready.begin();
    ready.erase(ready.begin());
    for (const auto& r : readers[id]) {
      if (--pending[r] == 0) ready.insert(r);
    }
    order.push_back(std::move(id));
  }
  if (order.size() != nodes_.size()) {
    std::string stuck;
    for (const auto& [id, count] : pending) {
      if (count > 0) {
        stuck = id;
        break;
      }
    }
    throw GraphError("graph has a cycle through '" + stuck + "'");
  }
  return order;
}

std::map<std::string, std::vector<std::string>> Graph::consumers() const {
  std::map<std::string, std::vector<std::string>> result;
  for (const auto& id : topo_order()) {
    for (const auto& in : nodes_.at(id).inputs) result[in].push_back(id);
  }
  return result;
}

namespace {

void expect_inputs(const Node& n, size_t count) {
  if (n.inputs.size() != count) {
    throw GraphError("node '" + n.id + "' (" + std::string(op_name(n.op)) + ") needs " +
                     std::to_string(count) + " inputs, has " + std::to_string(n.inputs.size()));
  }
}

Shape node_output_shape(const Node& n, const ShapeMap& shapes, const Shape& input) {
  auto in = [&](size_t i) -> const Shape& { return shapes.at(n.inputs[i]); };
  switch (n.op) {
    case OpKind::kInput:
      expect_inputs(n, 0);
      return input;
    case OpKind::kOutput:
    case OpKind::kRelu:
      expect_inputs(n, 1);
      return in(0);
    case OpKind::kBnAffine:
      expect_inputs(n, 1);
      if (in(0).c != n.in_channels) {
        throw DimensionError("node '" + n.id + "': channel axis is " + std::to_string(in(0).c) +
                             ", declared " + std::to_string(n.in_channels));
      }
      return in(0);
    case OpKind::kConv:
      expect_inputs(n, 1);
      if (in(0).c != n.in_channels) {
        throw DimensionError("node '" + n.id + "': input channel axis is " +
                             std::to_string(in(0).c) + " (from '" + n.inputs[0] +
                             "'), declared " + std::to_string(n.in_channels));
      }
      return conv2d_output_shape(in(0), n.out_channels, n.attrs.conv);
    case OpKind::kMaxPool:
      expect_inputs(n, 1);
      return maxpool2d_output_shape(in(0), n.attrs.pool);
    case OpKind::kAdd:
      expect_inputs(n, 2);
      if (in(0) != in(1)) {
        throw DimensionError("node '" + n.id + "': add of '" + n.inputs[0] + "' (" +
                             in(0).str() + ") and '" + n.inputs[1] + "' (" + in(1).str() + ")");
      }
      return in(0);
    case OpKind::kUpsample:
      expect_inputs(n, 2);
      if (in(1).h < 1 || in(1).w < 1) {
        throw DegenerateShapeError("node '" + n.id + "': empty upsample target");
      }
      return {in(0).n, in(0).c, in(1).h, in(1).w};
  }
  throw CapabilityError("unknown op in node '" + n.id + "'");
}

}  // namespace

ShapeMap infer_shapes(const Graph& graph, const Shape& input) {
  check_shape(input);
  ShapeMap shapes;
  for (const auto& id : graph.topo_order()) {
    const Node& n = graph.node(id);
    try {
      shapes[id] = node_output_shape(n, shapes, input);
    } catch (const DegenerateShapeError& e) {
      throw DegenerateShapeError("node '" + id + "': " + e.what());
    }
  }
  return shapes;
}

std::vector<std::pair<std::string, Shape>> declared_weights(const Node& node) {
  std::vector<std::pair<std::string, Shape>> result;
  if (node.op == OpKind::kConv) {
    const ConvParams& p = node.attrs.conv;
    const size_t expected = p.bias ? 2 : 1;
    if (node.weight_names.size() != expected) {
      throw GraphError("conv node '" + node.id + "' declares " +
                       std::to_string(node.weight_names.size()) + " weights, expected " +
                       std::to_string(expected));
    }
    result.emplace_back(node.weight_names[0],
                        Shape{node.out_channels, node.in_channels / p.groups, p.kernel.h, p.kernel.w});
    if (p.bias) result.emplace_back(node.weight_names[1], Shape{node.out_channels, 1, 1, 1});
  } else if (node.op == OpKind::kBnAffine) {
    if (node.weight_names.size() != 2) {
      throw GraphError("bn-affine node '" + node.id + "' needs scale and shift weights");
    }
    result.emplace_back(node.weight_names[0], Shape{node.in_channels, 1, 1, 1});
    result.emplace_back(node.weight_names[1], Shape{node.in_channels, 1, 1, 1});
  }
  return result;
}

namespace {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

// Uniform in [-bound, bound) from the top 24 bits of each draw.
void fill_uniform(std::span<float> values, float bound, uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (float& v : values) {
    const float u = static_cast<float>(rng() >> 40) * (1.0f / 16777216.0f);
    v = (2.0f * u - 1.0f) * bound;
  }
}

}  // namespace

WeightStore random_weights(const Graph& graph, uint64_t seed) {
  WeightStore store;
  for (const auto& [id, node] : graph.nodes()) {
    const auto decl = declared_weights(node);
    for (size_t i = 0; i < decl.size(); ++i) {
      const auto& [name, shape] = decl[i];
      Tensor t(shape);
      if (node.op == OpKind::kConv) {
        const ConvParams& p = node.attrs.conv;
        const double fan_in =
            static_cast<double>(node.in_channels / p.groups) * p.kernel.h * p.kernel.w;
        const auto bound = static_cast<float>(i == 0 ? std::sqrt(6.0 / fan_in) : 1.0 / std::sqrt(fan_in));
        fill_uniform(t.mutable_data(), bound, seed ^ fnv1a(name));
      } else if (node.op == OpKind::kBnAffine && i == 0) {
        std::fill(t.mutable_data().begin(), t.mutable_data().end(), 1.0f);
      }
      store.emplace(name, std::move(t));
    }
  }
  return store;
}

void check_weights(const Graph& graph, const WeightStore& weights) {
  std::vector<std::string> missing;
  for (const auto& [id, node] : graph.nodes()) {
    for (const auto& [name, shape] : declared_weights(node)) {
      auto it = weights.find(name);
      if (it == weights.end()) {
        missing.push_back(name);
      } else if (it->second.shape() != shape) {
        throw DimensionError("weight '" + name + "' has shape " + it->second.shape().str() +
                             ", node '" + id + "' needs " + shape.str());
      }
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw ResolutionError("unresolved weights: " + list);
  }
}

Tensor run_node(const Node& n, std::span<const Tensor* const> in, const WeightStore& weights) {
  auto w = [&](size_t i) -> const Tensor& { return weights.at(n.weight_names[i]); };
  switch (n.op) {
    case OpKind::kOutput:
      return *in[0];
    case OpKind::kConv:
      return conv2d(*in[0], w(0), n.attrs.conv.bias ? w(1).data() : std::span<const float>{},
                    n.attrs.conv);
    case OpKind::kMaxPool:
      return maxpool2d(*in[0], n.attrs.pool);
    case OpKind::kRelu:
      return relu(*in[0], n.attrs.relu_cap);
    case OpKind::kAdd:
      return add(*in[0], *in[1]);
    case OpKind::kUpsample:
      return upsample_bilinear(*in[0], in[1]->shape().h, in[1]->shape().w);
    case OpKind::kBnAffine:
      return bn_affine(*in[0], w(0).data(), w(1).data());
    case OpKind::kInput:
      break;
  }
  throw CapabilityError("node '" + n.id + "' cannot be evaluated");
}

namespace {

// Shared driver. When `keep` is non-null only those nodes run and all of
// them are retained; otherwise every node runs and buffers are released
// after their last reader.
std::map<std::string, Tensor> run_graph(const Graph& graph, const WeightStore& weights,
                                        const Tensor& input, const std::set<std::string>* keep,
                                        ExecStats* stats) {
  infer_shapes(graph, input.shape());
  check_weights(graph, weights);

  const auto order = graph.topo_order();
  std::map<std::string, int> remaining;
  for (const auto& id : order) {
    for (const auto& in : graph.node(id).inputs) ++remaining[in];
  }
  std::set<std::string> pinned(graph.outputs().begin(), graph.outputs().end());

  std::map<std::string, Tensor> live;
  ExecStats local;
  for (const auto& id : order) {
    if (keep && !keep->count(id)) continue;
    const Node& n = graph.node(id);
    if (n.op == OpKind::kInput) {
      live.emplace(id, input);
    } else {
      std::vector<const Tensor*> args;
      args.reserve(n.inputs.size());
      for (const auto& in : n.inputs) args.push_back(&live.at(in));
      live.emplace(id, run_node(n, args, weights));
    }
    ++local.allocations;
    local.peak_live = std::max<int64_t>(local.peak_live, static_cast<int64_t>(live.size()));
    if (!keep) {
      for (const auto& in : n.inputs) {
        if (--remaining[in] == 0 && !pinned.count(in)) live.erase(in);
      }
    }
  }
  if (stats) *stats = local;
  return live;
}

}  // namespace

std::vector<Tensor> execute(const Graph& graph, const WeightStore& weights, const Tensor& input,
                            ExecStats* stats) {
  if (graph.outputs().empty()) throw GraphError("graph has no outputs");
  auto live = run_graph(graph, weights, input, nullptr, stats);
  std::vector<Tensor> outputs;
  for (const auto& id : graph.outputs()) outputs.push_back(live.at(id));
  return outputs;
}

std::vector<std::string> ancestors(const Graph& graph, const std::string& target) {
  graph.node(target);
  std::set<std::string> seen{target};
  std::vector<std::string> stack{target};
  while (!stack.empty()) {
    const std::string id = stack.back();
    stack.pop_back();
    for (const auto& in : graph.node(id).inputs) {
      if (seen.insert(in).second) stack.push_back(in);
    }
  }
  return {seen.begin(), seen.end()};
}

std::map<std::string, Tensor> execute_retaining(const Graph& graph, const WeightStore& weights,
                                                const Tensor& input, const std::string& target) {
  const auto needed = ancestors(graph, target);
  const std::set<std::string> keep(needed.begin(), needed.end());
  return run_graph(graph, weights, input, &keep, nullptr);
}

namespace {

std::string extent(const Extent2& e) { return std::to_string(e.h) + "x" + std::to_string(e.w); }

std::string format_float(float v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::string dump_graph(const Graph& graph, const ShapeMap* shapes) {
  std::ostringstream out;
  for (const auto& id : graph.topo_order()) {
    const Node& n = graph.node(id);
    out << id << ' ' << op_name(n.op);
    switch (n.op) {
      case OpKind::kConv: {
        const ConvParams& p = n.attrs.conv;
        out << " k=" << extent(p.kernel) << " s=" << extent(p.stride) << " p=" << extent(p.padding)
            << " g=" << p.groups << " cin=" << n.in_channels << " cout=" << n.out_channels
            << " bias=" << (p.bias ? 1 : 0);
        break;
      }
      case OpKind::kMaxPool:
        out << " k=" << extent(n.attrs.pool.kernel) << " s=" << extent(n.attrs.pool.stride)
            << " p=" << extent(n.attrs.pool.padding);
        break;
      case OpKind::kRelu:
        if (std::isfinite(n.attrs.relu_cap)) out << " cap=" << format_float(n.attrs.relu_cap);
        break;
      case OpKind::kBnAffine:
        out << " c=" << n.in_channels;
        break;
      default:
        break;
    }
    out << " in=[";
    for (size_t i = 0; i < n.inputs.size(); ++i) out << (i ? "," : "") << n.inputs[i];
    out << "]";
    if (!n.block_kind.empty()) out << " block=" << n.block_kind << ':' << n.block;
    out << " sub=" << subsystem_name(n.subsystem);
    if (shapes) out << " out=" << shapes->at(id).str();
    out << '\n';
  }
  return out.str();
}

}  // namespace lwrn
