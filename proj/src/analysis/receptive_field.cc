#include "lwrn/receptive_field.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "lwrn/errors.h"

namespace lwrn {

bool Box::contains(const Box& o) const {
  if (o.empty()) return true;
  if (empty()) return false;
  return y0 <= o.y0 && x0 <= o.x0 && y1 >= o.y1 && x1 >= o.x1;
}

namespace {

AxisRF window(const AxisRF& a, int kernel, int stride, int pad) {
  return {a.start - pad * a.jump, a.size + (kernel - 1) * a.jump, a.jump * stride};
}

AxisRF unite(const AxisRF& a, const AxisRF& b) {
  const double lo = std::min(a.start, b.start);
  const double hi = std::max(a.start + a.size, b.start + b.size);
  return {lo, hi - lo, std::max(a.jump, b.jump)};
}

// Output unit i samples source coordinate (i + 0.5) * r - 0.5 and reads the
// two neighbouring source units.
AxisRF resample(const AxisRF& a, int64_t in, int64_t out) {
  const double r = static_cast<double>(in) / static_cast<double>(out);
  return {a.start + (0.5 * r - 1.5) * a.jump, a.size + 2 * a.jump, a.jump * r};
}

}  // namespace

RFInfo analytic_rf(const Graph& graph, const std::string& node_id, const Shape& input) {
  const ShapeMap shapes = infer_shapes(graph, input);
  const auto needed = ancestors(graph, node_id);
  const std::set<std::string> keep(needed.begin(), needed.end());
  std::map<std::string, RFInfo> rf;
  for (const auto& id : graph.topo_order()) {
    if (!keep.count(id)) continue;
    const Node& n = graph.node(id);
    if (n.op == OpKind::kInput) {
      if (id == graph.inputs().front()) rf[id] = RFInfo{};
      continue;
    }
    auto src = [&](size_t i) -> const RFInfo* {
      auto it = rf.find(n.inputs[i]);
      return it == rf.end() ? nullptr : &it->second;
    };
    const RFInfo* a = src(0);
    if (n.op == OpKind::kAdd) {
      const RFInfo* b = src(1);
      if (a && b) {
        rf[id] = RFInfo{unite(a->h, b->h), unite(a->w, b->w)};
      } else if (a || b) {
        rf[id] = a ? *a : *b;
      }
      continue;
    }
    if (!a) continue;
    switch (n.op) {
      case OpKind::kConv: {
        const ConvParams& p = n.attrs.conv;
        rf[id] = RFInfo{window(a->h, p.kernel.h, p.stride.h, p.padding.h),
                        window(a->w, p.kernel.w, p.stride.w, p.padding.w)};
        break;
      }
      case OpKind::kMaxPool: {
        const PoolParams& p = n.attrs.pool;
        rf[id] = RFInfo{window(a->h, p.kernel.h, p.stride.h, p.padding.h),
                        window(a->w, p.kernel.w, p.stride.w, p.padding.w)};
        break;
      }
      case OpKind::kUpsample: {
        const Shape& in = shapes.at(n.inputs[0]);
        const Shape& out = shapes.at(id);
        rf[id] = RFInfo{resample(a->h, in.h, out.h), resample(a->w, in.w, out.w)};
        break;
      }
      default:
        rf[id] = *a;
        break;
    }
  }
  auto it = rf.find(node_id);
  if (it == rf.end()) throw GraphError("node '" + node_id + "' is not reachable from the input");
  return it->second;
}

Box analytic_box(const RFInfo& rf, int64_t y, int64_t x, const Shape& input) {
  auto span = [](const AxisRF& a, int64_t u, int64_t extent, int64_t& lo, int64_t& hi) {
    const double first = a.start + static_cast<double>(u) * a.jump;
    lo = std::max<int64_t>(0, static_cast<int64_t>(std::floor(first)));
    hi = std::min<int64_t>(extent - 1, static_cast<int64_t>(std::ceil(first + a.size - 1)));
  };
  Box b;
  span(rf.h, y, input.h, b.y0, b.y1);
  span(rf.w, x, input.w, b.x0, b.x1);
  return b;
}

namespace {

SupportMask make_mask(const std::vector<double>& mag, int64_t h, int64_t w, double cut) {
  SupportMask m{h, w, std::vector<uint8_t>(mag.size(), 0), Box{}, 0};
  Box box{h, w, -1, -1};
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      if (mag[y * w + x] > cut) {
        m.cells[y * w + x] = 1;
        ++m.count;
        box.y0 = std::min(box.y0, y);
        box.x0 = std::min(box.x0, x);
        box.y1 = std::max(box.y1, y);
        box.x1 = std::max(box.x1, x);
      }
    }
  }
  if (m.count > 0) m.box = box;
  return m;
}

void accumulate(std::map<std::string, Tensor>& grads, const std::string& id, const Tensor& g) {
  auto it = grads.find(id);
  if (it == grads.end()) {
    grads.emplace(id, g);
    return;
  }
  auto dst = it->second.mutable_data();
  auto src = g.data();
  for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Gradient of unit w.r.t. the input, reduced to max |grad| over channels.
std::vector<double> input_grad_magnitude(const Graph& graph, const WeightStore& weights,
                                         const std::string& node_id, const Unit& unit,
                                         const Tensor& probe) {
  const auto values = execute_retaining(graph, weights, probe, node_id);
  const Tensor& target = values.at(node_id);
  const Shape& ts = target.shape();
  if (unit.c < 0 || unit.c >= ts.c || unit.y < 0 || unit.y >= ts.h || unit.x < 0 || unit.x >= ts.w) {
    throw DimensionError("unit (" + std::to_string(unit.c) + "," + std::to_string(unit.y) + "," +
                         std::to_string(unit.x) + ") outside node '" + node_id + "' of shape " +
                         ts.str());
  }
  std::map<std::string, Tensor> grads;
  Tensor seed(ts, 0.0f);
  seed.at(0, unit.c, unit.y, unit.x) = 1.0f;
  grads.emplace(node_id, std::move(seed));

  auto order = graph.topo_order();
  std::reverse(order.begin(), order.end());
  for (const auto& id : order) {
    auto git = grads.find(id);
    if (git == grads.end()) continue;
    const Node& n = graph.node(id);
    if (n.op == OpKind::kInput) continue;
    std::vector<Tensor> saved;
    for (const auto& in : n.inputs) saved.push_back(values.at(in));
    std::vector<Tensor> params;
    for (const auto& name : n.weight_names) params.push_back(weights.at(name));
    const auto in_grads = vjp(n.op, saved, params, n.attrs, git->second);
    const size_t data_inputs = n.op == OpKind::kUpsample ? 1 : n.inputs.size();
    for (size_t i = 0; i < data_inputs; ++i) accumulate(grads, n.inputs[i], in_grads[i]);
    grads.erase(git);
  }

  const Shape& is = probe.shape();
  std::vector<double> mag(static_cast<size_t>(is.h * is.w), 0.0);
  for (const auto& in_id : graph.inputs()) {
    auto it = grads.find(in_id);
    if (it == grads.end()) continue;
    const Tensor& g = it->second;
    for (int64_t c = 0; c < is.c; ++c) {
      const float* p = g.plane(0, c);
      for (int64_t i = 0; i < is.h * is.w; ++i) mag[i] = std::max(mag[i], std::fabs(double{p[i]}));
    }
  }
  return mag;
}

EmpiricalRF masks_from(const std::vector<double>& mag, int64_t h, int64_t w, double threshold_frac) {
  EmpiricalRF r;
  r.max_abs_grad = mag.empty() ? 0.0 : *std::max_element(mag.begin(), mag.end());
  r.nonzero = make_mask(mag, h, w, 0.0);
  r.thresholded = make_mask(mag, h, w, threshold_frac * r.max_abs_grad);
  return r;
}

}  // namespace

EmpiricalRF empirical_rf(const Graph& graph, const WeightStore& weights, const std::string& node_id,
                         const Unit& unit, const Tensor& probe, double threshold_frac) {
  if (probe.shape().n != 1) throw DimensionError("empirical receptive field needs batch size 1");
  const auto mag = input_grad_magnitude(graph, weights, node_id, unit, probe);
  return masks_from(mag, probe.shape().h, probe.shape().w, threshold_frac);
}

EmpiricalRF empirical_rf_ramps(const Graph& graph, const WeightStore& weights,
                               const std::string& node_id, const Unit& unit, const Shape& input,
                               double threshold_frac) {
  if (input.n != 1) throw DimensionError("empirical receptive field needs batch size 1");
  auto up = input_grad_magnitude(graph, weights, node_id, unit, ramp_probe(input, true));
  const auto down = input_grad_magnitude(graph, weights, node_id, unit, ramp_probe(input, false));
  for (size_t i = 0; i < up.size(); ++i) up[i] = std::max(up[i], down[i]);
  return masks_from(up, input.h, input.w, threshold_frac);
}

Tensor ramp_probe(const Shape& shape, bool increasing) {
  Tensor t(shape);
  const double span = static_cast<double>(shape.h + shape.w);
  for (int64_t n = 0; n < shape.n; ++n) {
    for (int64_t c = 0; c < shape.c; ++c) {
      for (int64_t y = 0; y < shape.h; ++y) {
        for (int64_t x = 0; x < shape.w; ++x) {
          const double s = increasing ? static_cast<double>(y + x) : span - 2 - static_cast<double>(y + x);
          t.at(n, c, y, x) = static_cast<float>(0.5 + s / span);
        }
      }
    }
  }
  return t;
}

Tensor random_probe(const Shape& shape, uint64_t seed) {
  Tensor t(shape);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(0.1f, 1.0f);
  for (float& v : t.mutable_data()) v = dist(rng);
  return t;
}

WeightStore positive_weights(const WeightStore& weights, float floor) {
  WeightStore out;
  for (const auto& [name, t] : weights) {
    Tensor p = t;
    for (float& v : p.mutable_data()) v = std::fabs(v) + floor;
    out.emplace(name, std::move(p));
  }
  return out;
}

}  // namespace lwrn
