#include "structure.h"

#include <sstream>

namespace lwrn::testing {
namespace {

class Checker {
 public:
  explicit Checker(const Graph& g) : g_(g) {}

  const Node* get(const std::string& id) {
    if (!g_.contains(id)) {
      fail(id + ": missing");
      return nullptr;
    }
    return &g_.node(id);
  }

  void conv(const std::string& id, int k, int64_t cin, int64_t cout, const std::string& input) {
    const Node* n = get(id);
    if (!n) return;
    if (n->op != OpKind::kConv) return fail(id + ": not a conv");
    const ConvParams& p = n->attrs.conv;
    if (p.kernel != Extent2{k, k}) fail(id + ": kernel " + std::to_string(p.kernel.h) + ", want " + std::to_string(k));
    if (p.stride != Extent2{1, 1}) fail(id + ": stride is not 1");
    if (!p.bias) fail(id + ": no bias");
    if (n->in_channels != cin || n->out_channels != cout) {
      fail(id + ": channels " + std::to_string(n->in_channels) + "->" + std::to_string(n->out_channels) +
           ", want " + std::to_string(cin) + "->" + std::to_string(cout));
    }
    inputs(id, {input});
  }

  void inputs(const std::string& id, const std::vector<std::string>& want) {
    const Node* n = get(id);
    if (n && n->inputs != want) {
      std::string got;
      for (const auto& s : n->inputs) got += s + " ";
      fail(id + ": inputs are " + got);
    }
  }

  void op(const std::string& id, OpKind kind) {
    const Node* n = get(id);
    if (n && n->op != kind) fail(id + ": op " + std::string(op_name(n->op)));
  }

  void absent(const std::string& id) {
    if (g_.contains(id)) fail(id + ": unexpected node");
  }

  void fail(const std::string& msg) { errors.push_back(msg); }

  std::vector<std::string> errors;

 private:
  const Graph& g_;
};

// Returns the id of the block's output.
std::string check_rcu(Checker& c, const std::string& prefix, const std::string& input, int64_t w,
                      Variant v) {
  c.inputs(prefix + ".relu1", {input});
  if (v == Variant::kOriginal) {
    c.conv(prefix + ".conv1", 3, w, w, prefix + ".relu1");
    c.inputs(prefix + ".relu2", {prefix + ".conv1"});
    c.conv(prefix + ".conv2", 3, w, w, prefix + ".relu2");
    c.absent(prefix + ".conv3");
    c.inputs(prefix + ".sum", {prefix + ".conv2", input});
  } else {
    c.conv(prefix + ".conv1", 1, w, w / 2, prefix + ".relu1");
    c.conv(prefix + ".conv2", 3, w / 2, w / 2, prefix + ".relu2");
    c.conv(prefix + ".conv3", 1, w / 2, w, prefix + ".relu3");
    c.inputs(prefix + ".sum", {prefix + ".conv3", input});
  }
  c.op(prefix + ".sum", OpKind::kAdd);
  return prefix + ".sum";
}

}  // namespace

std::vector<std::string> structural_violations(const ArchSpec& spec, const Graph& graph) {
  Checker c(graph);
  const Variant v = spec.variant;
  const int k = v == Variant::kOriginal ? 3 : 1;
  const int rcus = v == Variant::kLw ? 0 : 1;

  std::string prev;
  int64_t prev_width = 0;
  for (int level = 4; level >= 1; --level) {
    const std::string p = "decoder.l" + std::to_string(level);
    const int64_t w = spec.channel_plan[4 - level];
    const Node* adapt = c.get(p + ".adapt.conv");
    if (adapt) c.conv(p + ".adapt.conv", k, adapt->in_channels, w, adapt->inputs.at(0));
    std::string x = p + ".adapt.conv";

    for (int i = 0; i < 2 * rcus; ++i) x = check_rcu(c, p + ".rcu_pre" + std::to_string(i), x, w, v);
    c.absent(p + ".rcu_pre" + std::to_string(2 * rcus) + ".sum");

    if (level == 4) {
      c.absent(p + ".fusion.sum");
    } else {
      const std::string f = p + ".fusion";
      c.conv(f + ".conv_fine", k, w, w, x);
      c.conv(f + ".conv_coarse", k, prev_width, w, prev);
      c.op(f + ".upsample", OpKind::kUpsample);
      c.inputs(f + ".upsample", {f + ".conv_coarse", f + ".conv_fine"});
      c.op(f + ".sum", OpKind::kAdd);
      c.inputs(f + ".sum", {f + ".conv_fine", f + ".upsample"});
      x = f + ".sum";
    }

    const std::string crp = p + ".crp";
    c.op(crp + ".relu", OpKind::kRelu);
    c.inputs(crp + ".relu", {x});
    std::string chain = crp + ".relu", acc = crp + ".relu";
    for (int i = 1; i <= spec.crp_stages; ++i) {
      const std::string s = std::to_string(i);
      const Node* pool = c.get(crp + ".pool" + s);
      if (pool) {
        const PoolParams want{{5, 5}, {1, 1}, {2, 2}};
        if (pool->op != OpKind::kMaxPool || !(pool->attrs.pool == want)) c.fail(crp + ".pool" + s + ": not 5x5/1 pad 2");
      }
      c.inputs(crp + ".pool" + s, {chain});
      c.conv(crp + ".conv" + s, k, w, w, crp + ".pool" + s);
      c.inputs(crp + ".sum" + s, {acc, crp + ".conv" + s});
      chain = crp + ".conv" + s;
      acc = crp + ".sum" + s;
    }
    c.absent(crp + ".pool" + std::to_string(spec.crp_stages + 1));
    x = acc;

    for (int i = 0; i < 3 * rcus; ++i) x = check_rcu(c, p + ".rcu_post" + std::to_string(i), x, w, v);
    c.absent(p + ".rcu_post" + std::to_string(3 * rcus) + ".sum");
    prev = x;
    prev_width = w;
  }

  c.conv("clf.conv", 3, prev_width, spec.num_classes, prev);
  c.inputs("clf.upsample", {"clf.conv", graph.inputs().empty() ? "" : graph.inputs().front()});
  c.op("output", OpKind::kOutput);
  if (graph.outputs() != std::vector<std::string>{"output"}) c.fail("graph outputs are not {output}");

  for (const auto& [id, n] : graph.nodes()) {
    if (v == Variant::kLw && n.block_kind == "rcu") c.fail(id + ": rcu in a light-weight decoder");
    if (n.subsystem == Subsystem::kDecoder && n.op == OpKind::kConv && n.block_kind != "rcu" &&
        n.attrs.conv.kernel.h != k) {
      c.fail(id + ": decoder conv kernel " + std::to_string(n.attrs.conv.kernel.h));
    }
  }

  const ShapeMap shapes = infer_shapes(graph, {1, 3, spec.input_size.h, spec.input_size.w});
  const Shape want{1, spec.num_classes, spec.input_size.h, spec.input_size.w};
  if (shapes.at("output") != want) c.fail("output shape " + shapes.at("output").str() + ", want " + want.str());
  return c.errors;
}

}  // namespace lwrn::testing
