#include <utility>

#include "lwrn/errors.h"
#include "lwrn/models.h"

namespace lwrn {

std::string NodeFactory::push(Node n, const std::string& name) {
  n.id = block_ + "." + name;
  n.block = block_;
  n.block_kind = kind_;
  n.subsystem = sub_;
  return graph_.add(std::move(n)).id;
}

std::string NodeFactory::conv(const std::string& name, const std::string& input, int64_t cin,
                              int64_t cout, int kernel, int stride, bool bias, int groups) {
  Node n;
  n.op = OpKind::kConv;
  n.inputs = {input};
  n.in_channels = cin;
  n.out_channels = cout;
  n.attrs.conv = ConvParams{{kernel, kernel}, {stride, stride}, {kernel / 2, kernel / 2}, groups, bias};
  const std::string id = block_ + "." + name;
  n.weight_names = {id + ".weight"};
  if (bias) n.weight_names.push_back(id + ".bias");
  return push(std::move(n), name);
}

std::string NodeFactory::bn(const std::string& name, const std::string& input, int64_t channels) {
  Node n;
  n.op = OpKind::kBnAffine;
  n.inputs = {input};
  n.in_channels = channels;
  n.out_channels = channels;
  const std::string id = block_ + "." + name;
  n.weight_names = {id + ".scale", id + ".shift"};
  return push(std::move(n), name);
}

std::string NodeFactory::relu(const std::string& name, const std::string& input, float cap) {
  Node n;
  n.op = OpKind::kRelu;
  n.inputs = {input};
  n.attrs.relu_cap = cap;
  return push(std::move(n), name);
}

std::string NodeFactory::add(const std::string& name, const std::string& a, const std::string& b) {
  Node n;
  n.op = OpKind::kAdd;
  n.inputs = {a, b};
  return push(std::move(n), name);
}

std::string NodeFactory::maxpool(const std::string& name, const std::string& input, int kernel,
                                 int stride, int pad) {
  Node n;
  n.op = OpKind::kMaxPool;
  n.inputs = {input};
  n.attrs.pool = PoolParams{{kernel, kernel}, {stride, stride}, {pad, pad}};
  return push(std::move(n), name);
}

std::string NodeFactory::upsample(const std::string& name, const std::string& input,
                                  const std::string& size_ref) {
  Node n;
  n.op = OpKind::kUpsample;
  n.inputs = {input, size_ref};
  return push(std::move(n), name);
}

BlockHandle build_rcu(Graph& g, const std::string& prefix, const std::string& input,
                      int64_t channels, Variant variant, int level) {
  NodeFactory f(g, prefix, "rcu", Subsystem::kDecoder);
  BlockHandle h{prefix + ".relu1", "", channels, level};
  const std::string r1 = f.relu("relu1", input);
  if (variant == Variant::kOriginal) {
    const std::string c1 = f.conv("conv1", r1, channels, channels, 3, 1, true);
    const std::string r2 = f.relu("relu2", c1);
    const std::string c2 = f.conv("conv2", r2, channels, channels, 3, 1, true);
    h.exit = f.add("sum", c2, input);
    return h;
  }
  if (channels % 2 != 0) {
    throw BuildError("bottleneck RCU '" + prefix + "' needs an even width, got " +
                     std::to_string(channels));
  }
  const int64_t mid = channels / 2;
  const std::string c1 = f.conv("conv1", r1, channels, mid, 1, 1, true);
  const std::string r2 = f.relu("relu2", c1);
  const std::string c2 = f.conv("conv2", r2, mid, mid, 3, 1, true);
  const std::string r3 = f.relu("relu3", c2);
  const std::string c3 = f.conv("conv3", r3, mid, channels, 1, 1, true);
  h.exit = f.add("sum", c3, input);
  return h;
}

BlockHandle build_crp(Graph& g, const std::string& prefix, const std::string& input,
                      int64_t channels, Variant variant, int stages, int level) {
  if (stages < 1) throw BuildError("CRP '" + prefix + "' needs at least one stage");
  NodeFactory f(g, prefix, "crp", Subsystem::kDecoder);
  const int k = variant == Variant::kOriginal ? 3 : 1;
  std::string top = f.relu("relu", input);
  std::string sum = top;
  BlockHandle h{top, "", channels, level};
  for (int i = 1; i <= stages; ++i) {
    const std::string s = std::to_string(i);
    const std::string pooled = f.maxpool("pool" + s, top, 5, 1, 2);
    top = f.conv("conv" + s, pooled, channels, channels, k, 1, true);
    sum = f.add("sum" + s, sum, top);
  }
  h.exit = sum;
  return h;
}

BlockHandle build_fusion(Graph& g, const std::string& prefix, const BlockHandle& coarse,
                         const BlockHandle& fine, int64_t out_channels, Variant variant,
                         bool allow_same_level) {
  if (coarse.level == fine.level && !allow_same_level) {
    throw BuildError("fusion '" + prefix + "': both paths are at level " +
                     std::to_string(fine.level) + ", nothing to fuse");
  }
  if (coarse.level < fine.level) {
    throw BuildError("fusion '" + prefix + "': coarse path (level " + std::to_string(coarse.level) +
                     ") is finer than fine path (level " + std::to_string(fine.level) + ")");
  }
  NodeFactory f(g, prefix, "fusion", Subsystem::kDecoder);
  const int k = variant == Variant::kOriginal ? 3 : 1;
  const std::string cc = f.conv("conv_coarse", coarse.exit, coarse.channels, out_channels, k, 1, true);
  const std::string cf = f.conv("conv_fine", fine.exit, fine.channels, out_channels, k, 1, true);
  const std::string up = f.upsample("upsample", cc, cf);
  return BlockHandle{cc, f.add("sum", cf, up), out_channels, fine.level};
}

BlockHandle build_clf(Graph& g, const std::string& prefix, const std::string& input,
                      int64_t channels, int num_classes) {
  NodeFactory f(g, prefix, "clf", Subsystem::kClf);
  const std::string c = f.conv("conv", input, channels, num_classes, 3, 1, true);
  return BlockHandle{c, c, num_classes, 1};
}

}  // namespace lwrn
