#pragma once

#include <cstdint>
#include <string>

#include "lwrn/graph.h"

namespace lwrn {

struct HostInfo {
  std::string cpu;  // model name from /proc/cpuinfo, or "unknown"
  int logical_cpus = 0;
};
HostInfo host_info();

struct BenchResult {
  double mean_ms = 0;
  double std_ms = 0;  // sample standard deviation; 0 for a single iteration
  double min_ms = 0;
  double max_ms = 0;
  int iterations = 0;
  int warmup = 0;
  Shape input;
  int workers = 0;
  HostInfo host;
};

struct BenchOptions {
  int iterations = 100;
  int warmup = 10;
  uint64_t seed = 0;
};

// Times execute() alone: the random input of each run is generated before
// the clock starts. Failures are rethrown naming the iteration.
BenchResult benchmark(const Graph& graph, const WeightStore& weights, const Shape& input,
                      const BenchOptions& options = {});

std::string render_kv(const BenchResult& r);

}  // namespace lwrn
