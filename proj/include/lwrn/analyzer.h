#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lwrn/graph.h"

namespace lwrn {

// Counting rules recorded in every report so two reports can be checked for
// comparability.
struct Conventions {
  int flops_per_mac = 2;
  bool bias_adds_counted = true;
  bool bn_affine_params = true;  // scale and shift; running statistics excluded
  int bn_flops_per_element = 2;
  int relu_flops_per_element = 1;
  int add_flops_per_element = 1;
  int upsample_flops_per_element = 11;
  // What a "GFLOPs" column counts when comparing against external figures.
  std::string table_gflops = "macs";

  bool operator==(const Conventions&) const = default;
};

struct Counts {
  int64_t params = 0;
  int64_t macs = 0;
  int64_t conv_flops = 0;   // 2 * macs + bias adds
  int64_t other_flops = 0;  // bn, relu, add, pool, upsample

  int64_t flops() const { return conv_flops + other_flops; }
  Counts& operator+=(const Counts& o);
  bool operator==(const Counts&) const = default;
};

struct LayerReport {
  std::string id;
  OpKind op = OpKind::kInput;
  Subsystem subsystem = Subsystem::kBackbone;
  Counts counts;
  Shape output;
};

struct ModelReport {
  std::string model;  // e.g. "RefineNet-101-LW"
  std::string backbone;
  std::string variant;
  Shape input;
  std::vector<LayerReport> layers;  // topological order
  Counts total;
  std::array<Counts, 3> by_subsystem{};  // indexed by Subsystem
  Conventions conventions;
};

// Parameters only; needs no shapes.
ModelReport count_params(const Graph& graph);

// Full accounting at one input shape.
ModelReport count_flops(const Graph& graph, const Shape& input);

struct Ratio {
  std::string name;  // "total", "backbone", "decoder", "clf"
  Counts a;
  Counts b;
  double params_ratio = 0;  // a / b; 0 when b is 0 and a is 0, inf if only b is 0
  double macs_ratio = 0;
  double flops_ratio = 0;
};

struct Comparison {
  std::string model_a;
  std::string model_b;
  std::vector<Ratio> rows;           // total first, then subsystems
  std::string dominant_params;       // subsystem carrying most of the param delta
  std::string dominant_flops;        // subsystem carrying most of the flop delta
  std::array<double, 3> params_share{};  // fraction of total param delta per subsystem
  std::array<double, 3> flops_share{};
};

// Throws ComparisonError when the conventions differ.
Comparison compare_reports(const ModelReport& a, const ModelReport& b);

// Fixed-width human table: one row for the model plus a row per subsystem.
std::string render_table(const ModelReport& report);
// Stable-ordered key=value lines.
std::string render_kv(const ModelReport& report);

std::string render_table(const Comparison& cmp);
std::string render_kv(const Comparison& cmp);

}  // namespace lwrn
