#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lwrn/graph.h"

namespace lwrn {

// Receptive field along one axis, in input pixels. Unit u of the feature map
// covers [start + u*jump, start + u*jump + size - 1].
struct AxisRF {
  double start = 0;
  double size = 1;
  double jump = 1;
  double offset() const { return start + (size - 1) / 2; }  // centre of unit 0
  bool operator==(const AxisRF&) const = default;
};

struct RFInfo {
  AxisRF h;
  AxisRF w;
  bool operator==(const RFInfo&) const = default;
};

// Inclusive pixel box; empty when y1 < y0.
struct Box {
  int64_t y0 = 0, x0 = 0, y1 = -1, x1 = -1;
  bool empty() const { return y1 < y0 || x1 < x0; }
  int64_t height() const { return empty() ? 0 : y1 - y0 + 1; }
  int64_t width() const { return empty() ? 0 : x1 - x0 + 1; }
  bool contains(const Box& o) const;
  bool operator==(const Box&) const = default;
};

// Composes window ops along every path from the input. Adds take the union
// of their operands' windows; bilinear upsampling (needs the input shape for
// its scale) widens the window by one source step on each side. Throws
// GraphError if the node does not depend on the input.
RFInfo analytic_rf(const Graph& graph, const std::string& node_id, const Shape& input);

// Input box covered by unit (y, x), clipped to the input extent.
Box analytic_box(const RFInfo& rf, int64_t y, int64_t x, const Shape& input);

struct Unit {
  int64_t c = 0, y = 0, x = 0;
};

struct SupportMask {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<uint8_t> cells;  // 1 where the input influences the unit
  Box box;
  int64_t count = 0;
};

struct EmpiricalRF {
  SupportMask thresholded;  // |grad| > threshold_frac * max|grad|
  SupportMask nonzero;      // |grad| > 0
  double max_abs_grad = 0;
};

// Back-propagates a one-hot gradient at `unit` of `node_id` to the input
// evaluated at `probe`. A dead path gives empty masks. threshold_frac = 0
// makes both masks the exact nonzero support.
EmpiricalRF empirical_rf(const Graph& graph, const WeightStore& weights, const std::string& node_id,
                         const Unit& unit, const Tensor& probe, double threshold_frac = 0.01);

// Support over the union of two probes: an increasing and a decreasing
// ramp in (y + x). With positive weights, max pools then route gradients to
// both window extremes so the combined box reaches the analytic bound.
EmpiricalRF empirical_rf_ramps(const Graph& graph, const WeightStore& weights,
                               const std::string& node_id, const Unit& unit, const Shape& input,
                               double threshold_frac = 0.01);

// Positive values in [lo, hi) with ramp slope along y + x.
Tensor ramp_probe(const Shape& shape, bool increasing);
Tensor random_probe(const Shape& shape, uint64_t seed);  // uniform in [0.1, 1)

// Replaces every weight by its absolute value plus `floor`.
WeightStore positive_weights(const WeightStore& weights, float floor = 0.01f);

}  // namespace lwrn
