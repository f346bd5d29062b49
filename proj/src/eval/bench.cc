#include "lwrn/bench.h"

#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "lwrn/errors.h"
#include "lwrn/parallel.h"

namespace lwrn {

HostInfo host_info() {
  HostInfo info{"unknown", static_cast<int>(std::thread::hardware_concurrency())};
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) {
        info.cpu = line.substr(line.find_first_not_of(" \t", colon + 1));
      }
      break;
    }
  }
  return info;
}

BenchResult benchmark(const Graph& graph, const WeightStore& weights, const Shape& input,
                      const BenchOptions& options) {
  if (options.iterations < 1) throw Error("benchmark needs at least one iteration");
  if (options.warmup < 0) throw Error("warmup count must be non-negative");
  infer_shapes(graph, input);
  check_weights(graph, weights);

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  Tensor x(input);
  auto refill = [&] {
    for (float& v : x.mutable_data()) v = dist(rng);
  };

  std::vector<double> times;
  const int total = options.warmup + options.iterations;
  for (int i = 0; i < total; ++i) {
    refill();
    const auto t0 = std::chrono::steady_clock::now();
    try {
      execute(graph, weights, x);
    } catch (const std::exception& e) {
      throw Error("benchmark iteration " + std::to_string(i) + " failed: " + e.what());
    }
    const auto t1 = std::chrono::steady_clock::now();
    if (i >= options.warmup) times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }

  BenchResult r;
  r.iterations = options.iterations;
  r.warmup = options.warmup;
  r.input = input;
  r.workers = worker_count();
  r.host = host_info();
  double sum = 0;
  r.min_ms = times.front();
  r.max_ms = times.front();
  for (double t : times) {
    sum += t;
    r.min_ms = std::min(r.min_ms, t);
    r.max_ms = std::max(r.max_ms, t);
  }
  r.mean_ms = sum / times.size();
  if (times.size() > 1) {
    double sq = 0;
    for (double t : times) sq += (t - r.mean_ms) * (t - r.mean_ms);
    r.std_ms = std::sqrt(sq / (times.size() - 1));
  }
  return r;
}

std::string render_kv(const BenchResult& r) {
  std::ostringstream out;
  out.precision(4);
  out << std::fixed;
  out << "bench.mean_ms=" << r.mean_ms << '\n';
  out << "bench.std_ms=" << r.std_ms << '\n';
  out << "bench.min_ms=" << r.min_ms << '\n';
  out << "bench.max_ms=" << r.max_ms << '\n';
  out << "bench.iterations=" << r.iterations << '\n';
  out << "bench.warmup=" << r.warmup << '\n';
  out << "bench.input=" << r.input.str() << '\n';
  out << "bench.workers=" << r.workers << '\n';
  out << "host.cpu=" << r.host.cpu << '\n';
  out << "host.logical_cpus=" << r.host.logical_cpus << '\n';
  return out.str();
}

}  // namespace lwrn
