#include "lwrn/analyzer.h"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "lwrn/errors.h"

namespace lwrn {

Counts& Counts::operator+=(const Counts& o) {
  params += o.params;
  macs += o.macs;
  conv_flops += o.conv_flops;
  other_flops += o.other_flops;
  return *this;
}

namespace {

int64_t node_params(const Node& n) {
  int64_t total = 0;
  for (const auto& [name, shape] : declared_weights(n)) total += shape.numel();
  return total;
}

Counts node_counts(const Node& n, const Shape& out, const Conventions& conv) {
  Counts c;
  c.params = node_params(n);
  const int64_t elems = out.numel();
  switch (n.op) {
    case OpKind::kConv: {
      const ConvParams& p = n.attrs.conv;
      const int64_t per_out = int64_t{p.kernel.h} * p.kernel.w * (n.in_channels / p.groups);
      c.macs = per_out * elems;
      c.conv_flops = conv.flops_per_mac * c.macs + (p.bias ? elems : 0);
      break;
    }
    case OpKind::kBnAffine:
      c.other_flops = conv.bn_flops_per_element * elems;
      break;
    case OpKind::kRelu:
      c.other_flops = conv.relu_flops_per_element * elems;
      break;
    case OpKind::kAdd:
      c.other_flops = conv.add_flops_per_element * elems;
      break;
    case OpKind::kMaxPool:
      c.other_flops = (int64_t{n.attrs.pool.kernel.h} * n.attrs.pool.kernel.w - 1) * elems;
      break;
    case OpKind::kUpsample:
      c.other_flops = conv.upsample_flops_per_element * elems;
      break;
    case OpKind::kInput:
    case OpKind::kOutput:
      break;
  }
  return c;
}

ModelReport make_report(const Graph& graph, const ShapeMap* shapes, const Shape& input) {
  ModelReport r;
  r.backbone = graph.meta.backbone;
  r.variant = graph.meta.variant;
  r.model = graph.meta.model.empty() ? "graph" : graph.meta.model;
  r.input = input;
  for (const auto& id : graph.topo_order()) {
    const Node& n = graph.node(id);
    LayerReport layer{id, n.op, n.subsystem, {}, {}};
    if (shapes) {
      layer.output = shapes->at(id);
      layer.counts = node_counts(n, layer.output, r.conventions);
    } else {
      layer.counts.params = node_params(n);
    }
    r.total += layer.counts;
    r.by_subsystem[static_cast<size_t>(n.subsystem)] += layer.counts;
    r.layers.push_back(std::move(layer));
  }
  return r;
}

double ratio(int64_t a, int64_t b) {
  if (b == 0) return a == 0 ? 1.0 : std::numeric_limits<double>::infinity();
  return static_cast<double>(a) / static_cast<double>(b);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

constexpr std::array<Subsystem, 3> kSubsystems{Subsystem::kBackbone, Subsystem::kDecoder,
                                               Subsystem::kClf};

}  // namespace

ModelReport count_params(const Graph& graph) { return make_report(graph, nullptr, Shape{}); }

ModelReport count_flops(const Graph& graph, const Shape& input) {
  const ShapeMap shapes = infer_shapes(graph, input);
  return make_report(graph, &shapes, input);
}

Comparison compare_reports(const ModelReport& a, const ModelReport& b) {
  if (!(a.conventions == b.conventions)) {
    throw ComparisonError("reports for '" + a.model + "' and '" + b.model +
                          "' use different counting conventions");
  }
  Comparison cmp;
  cmp.model_a = a.model;
  cmp.model_b = b.model;
  auto row = [](std::string name, const Counts& x, const Counts& y) {
    return Ratio{std::move(name), x, y, ratio(x.params, y.params), ratio(x.macs, y.macs),
                 ratio(x.flops(), y.flops())};
  };
  cmp.rows.push_back(row("total", a.total, b.total));
  const double dp = static_cast<double>(a.total.params - b.total.params);
  const double df = static_cast<double>(a.total.flops() - b.total.flops());
  double best_p = -std::numeric_limits<double>::infinity();
  double best_f = best_p;
  for (Subsystem s : kSubsystems) {
    const size_t i = static_cast<size_t>(s);
    const Counts& x = a.by_subsystem[i];
    const Counts& y = b.by_subsystem[i];
    cmp.rows.push_back(row(std::string(subsystem_name(s)), x, y));
    const double sp = static_cast<double>(x.params - y.params);
    const double sf = static_cast<double>(x.flops() - y.flops());
    cmp.params_share[i] = dp == 0 ? 0.0 : sp / dp;
    cmp.flops_share[i] = df == 0 ? 0.0 : sf / df;
    if (std::abs(sp) > best_p) {
      best_p = std::abs(sp);
      cmp.dominant_params = std::string(subsystem_name(s));
    }
    if (std::abs(sf) > best_f) {
      best_f = std::abs(sf);
      cmp.dominant_flops = std::string(subsystem_name(s));
    }
  }
  if (dp == 0) cmp.dominant_params = "none";
  if (df == 0) cmp.dominant_flops = "none";
  return cmp;
}

std::string render_table(const ModelReport& r) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-32s %12s %12s %12s %12s\n", "Model", "Params,M", "GMACs",
                "GFLOPs", "Other GFLOPs");
  out << line;
  auto emit = [&](const std::string& name, const Counts& c) {
    std::snprintf(line, sizeof(line), "%-32s %12.2f %12.2f %12.2f %12.3f\n", name.c_str(),
                  c.params / 1e6, c.macs / 1e9, c.flops() / 1e9, c.other_flops / 1e9);
    out << line;
  };
  emit(r.model, r.total);
  for (Subsystem s : kSubsystems) {
    emit("  " + std::string(subsystem_name(s)), r.by_subsystem[static_cast<size_t>(s)]);
  }
  out << "input " << r.input.str() << "; flops = " << r.conventions.flops_per_mac
      << " x macs + bias adds; table GFLOPs compare to " << r.conventions.table_gflops << '\n';
  return out.str();
}

std::string render_kv(const ModelReport& r) {
  std::ostringstream out;
  out << "model=" << r.model << '\n';
  out << "backbone=" << r.backbone << '\n';
  out << "variant=" << r.variant << '\n';
  out << "input=" << r.input.str() << '\n';
  auto counts = [&](const std::string& prefix, const Counts& c) {
    out << prefix << "params=" << c.params << '\n';
    out << prefix << "macs=" << c.macs << '\n';
    out << prefix << "flops=" << c.flops() << '\n';
    out << prefix << "conv_flops=" << c.conv_flops << '\n';
    out << prefix << "other_flops=" << c.other_flops << '\n';
  };
  counts("total.", r.total);
  for (Subsystem s : kSubsystems) {
    counts(std::string(subsystem_name(s)) + ".", r.by_subsystem[static_cast<size_t>(s)]);
  }
  const Conventions& c = r.conventions;
  out << "convention.flops_per_mac=" << c.flops_per_mac << '\n';
  out << "convention.bias_adds_counted=" << (c.bias_adds_counted ? 1 : 0) << '\n';
  out << "convention.bn_affine_params=" << (c.bn_affine_params ? 1 : 0) << '\n';
  out << "convention.bn_flops_per_element=" << c.bn_flops_per_element << '\n';
  out << "convention.relu_flops_per_element=" << c.relu_flops_per_element << '\n';
  out << "convention.add_flops_per_element=" << c.add_flops_per_element << '\n';
  out << "convention.upsample_flops_per_element=" << c.upsample_flops_per_element << '\n';
  out << "convention.table_gflops=" << c.table_gflops << '\n';
  return out.str();
}

std::string render_table(const Comparison& cmp) {
  std::ostringstream out;
  char line[256];
  out << cmp.model_a << " vs " << cmp.model_b << '\n';
  std::snprintf(line, sizeof(line), "%-10s %10s %10s %8s %10s %10s %8s\n", "part", "Params,M A",
                "Params,M B", "ratio", "GMACs A", "GMACs B", "ratio");
  out << line;
  for (const auto& r : cmp.rows) {
    std::snprintf(line, sizeof(line), "%-10s %10.2f %10.2f %8.3f %10.2f %10.2f %8.3f\n",
                  r.name.c_str(), r.a.params / 1e6, r.b.params / 1e6, r.params_ratio,
                  r.a.macs / 1e9, r.b.macs / 1e9, r.macs_ratio);
    out << line;
  }
  out << "dominant params delta: " << cmp.dominant_params
      << "; dominant flops delta: " << cmp.dominant_flops << '\n';
  return out.str();
}

std::string render_kv(const Comparison& cmp) {
  std::ostringstream out;
  out << "model_a=" << cmp.model_a << '\n';
  out << "model_b=" << cmp.model_b << '\n';
  for (const auto& r : cmp.rows) {
    out << r.name << ".params_ratio=" << fixed(r.params_ratio, 6) << '\n';
    out << r.name << ".macs_ratio=" << fixed(r.macs_ratio, 6) << '\n';
    out << r.name << ".flops_ratio=" << fixed(r.flops_ratio, 6) << '\n';
  }
  for (Subsystem s : kSubsystems) {
    const size_t i = static_cast<size_t>(s);
    out << subsystem_name(s) << ".params_delta_share=" << fixed(cmp.params_share[i], 6) << '\n';
    out << subsystem_name(s) << ".flops_delta_share=" << fixed(cmp.flops_share[i], 6) << '\n';
  }
  out << "dominant_params=" << cmp.dominant_params << '\n';
  out << "dominant_flops=" << cmp.dominant_flops << '\n';
  return out.str();
}

}  // namespace lwrn
