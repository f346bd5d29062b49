#include "cli.h"

#include <CLI11.hpp>
#include <charconv>
#include <cstdlib>
#include <optional>
#include <ostream>

#include "lwrn/analyzer.h"
#include "lwrn/arch_spec.h"
#include "lwrn/bench.h"
#include "lwrn/errors.h"
#include "lwrn/image_io.h"
#include "lwrn/parallel.h"
#include "lwrn/receptive_field.h"
#include "lwrn/tensor_io.h"

namespace lwrn::cli {
namespace {

struct UsageError : Error {
  using Error::Error;
};

Extent2 parse_size(const std::string& text) {
  int h = 0, w = 0;
  const auto x = text.find('x');
  if (x == std::string::npos) throw UsageError("input size must look like HxW, got '" + text + "'");
  auto a = std::from_chars(text.data(), text.data() + x, h);
  auto b = std::from_chars(text.data() + x + 1, text.data() + text.size(), w);
  if (a.ec != std::errc() || a.ptr != text.data() + x || b.ec != std::errc() ||
      b.ptr != text.data() + text.size() || h < 1 || w < 1) {
    throw UsageError("input size must look like HxW, got '" + text + "'");
  }
  return {h, w};
}

Shape input_shape(const ArchSpec& spec, const std::string& size_flag) {
  const Extent2 e = size_flag.empty() ? spec.input_size : parse_size(size_flag);
  return {1, 3, e.h, e.w};
}

std::string number(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

WeightStore load_weights(const std::string& path, const Graph& g, uint64_t seed) {
  if (path.empty()) return random_weights(g, seed);
  return to_tensors(load_weight_container(path));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Inference engine and static profiler for RefineNet-style segmentation models", "lwrn"};
  app.require_subcommand(1);
  int workers = 0;
  app.add_option("--workers", workers, "Kernel worker threads (default: $LWRN_WORKERS or all cores)")
      ->check(CLI::PositiveNumber);

  std::string spec_path, spec_b_path, size_flag, format = "table", weights_path;
  std::string image_path, out_path, node, unit_flag, mode = "analytic", probe = "ramp";
  int iters = 100, warmup = 10;
  uint64_t seed = 0;
  double threshold = 0.01;
  bool positive = false;

  auto* analyze = app.add_subcommand("analyze", "Parameter and FLOP report");
  analyze->add_option("spec", spec_path, "Architecture spec file")->required();
  analyze->add_option("--input-size", size_flag, "HxW (default: the spec's input_size)");
  analyze->add_option("--format", format, "table or kv")->check(CLI::IsMember({"table", "kv"}));

  auto* compare = app.add_subcommand("compare", "Compare two reports");
  compare->add_option("spec_a", spec_path, "First spec")->required();
  compare->add_option("spec_b", spec_b_path, "Second spec")->required();
  compare->add_option("--input-size", size_flag, "HxW (default: first spec's input_size)");
  compare->add_option("--format", format, "table or kv")->check(CLI::IsMember({"table", "kv"}));

  auto* bench = app.add_subcommand("bench", "Time forward passes on random inputs");
  bench->add_option("spec", spec_path, "Architecture spec file")->required();
  bench->add_option("--iters", iters, "Timed iterations")->check(CLI::PositiveNumber);
  bench->add_option("--warmup", warmup, "Untimed warmup iterations")->check(CLI::NonNegativeNumber);
  bench->add_option("--seed", seed, "Seed for inputs and random weights");
  bench->add_option("--input-size", size_flag, "HxW (default: the spec's input_size)");
  bench->add_option("--weights", weights_path, "Weight container (default: random weights)");

  auto* rf = app.add_subcommand("rf", "Receptive field of a node");
  rf->add_option("spec", spec_path, "Architecture spec file")->required();
  rf->add_option("--node", node, "Node id")->required();
  rf->add_option("--unit", unit_flag, "c,y,x of the unit (default: centre of channel 0)");
  rf->add_option("--mode", mode, "analytic or empirical")->check(CLI::IsMember({"analytic", "empirical"}));
  rf->add_option("--input-size", size_flag, "HxW (default: the spec's input_size)");
  rf->add_option("--threshold", threshold, "Support threshold as a fraction of max |grad|");
  rf->add_option("--probe", probe, "ramp or random")->check(CLI::IsMember({"ramp", "random"}));
  rf->add_option("--seed", seed, "Seed for the probe and random weights");
  rf->add_option("--weights", weights_path, "Weight container (default: random weights)");
  rf->add_flag("--positive", positive, "Use absolute weight values");
  rf->add_option("--out", out_path, "Write the thresholded support mask as PGM");

  auto* infer = app.add_subcommand("infer", "Segment a PPM image");
  infer->add_option("spec", spec_path, "Architecture spec file")->required();
  infer->add_option("weights", weights_path, "Weight container")->required();
  infer->add_option("image", image_path, "Binary PPM input")->required();
  infer->add_option("output", out_path, "Palette PPM output")->required();

  auto* dump = app.add_subcommand("dump", "Node listing with output shapes");
  dump->add_option("spec", spec_path, "Architecture spec file")->required();
  dump->add_option("--input-size", size_flag, "HxW (default: the spec's input_size)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    std::optional<ScopedWorkers> scoped;
    if (workers > 0) scoped.emplace(workers);

    const ArchSpec spec = load_spec(spec_path);
    const Graph graph = build_graph(spec);
    const Shape input = input_shape(spec, size_flag);

    if (*analyze) {
      const ModelReport report = count_flops(graph, input);
      out << (format == "kv" ? render_kv(report) : render_table(report));
    } else if (*compare) {
      const ArchSpec spec_b = load_spec(spec_b_path);
      const Comparison cmp =
          compare_reports(count_flops(graph, input), count_flops(build_graph(spec_b), input));
      out << (format == "kv" ? render_kv(cmp) : render_table(cmp));
    } else if (*bench) {
      const WeightStore weights = load_weights(weights_path, graph, seed);
      const BenchResult r = benchmark(graph, weights, input, BenchOptions{iters, warmup, seed});
      out << "model=" << model_name(spec) << '\n' << render_kv(r);
    } else if (*rf) {
      const ShapeMap shapes = infer_shapes(graph, input);
      if (!graph.contains(node)) throw GraphError("unknown node '" + node + "'");
      const Shape& ns = shapes.at(node);
      Unit unit{0, ns.h / 2, ns.w / 2};
      if (!unit_flag.empty()) {
        int64_t v[3];
        size_t pos = 0;
        for (int i = 0; i < 3; ++i) {
          const size_t end = i < 2 ? unit_flag.find(',', pos) : unit_flag.size();
          if (end == std::string::npos) throw UsageError("--unit must be c,y,x");
          auto r = std::from_chars(unit_flag.data() + pos, unit_flag.data() + end, v[i]);
          if (r.ec != std::errc() || r.ptr != unit_flag.data() + end) throw UsageError("--unit must be c,y,x");
          pos = end + 1;
        }
        unit = {v[0], v[1], v[2]};
      }
      const RFInfo info = analytic_rf(graph, node, input);
      if (mode == "analytic") {
        for (const auto& [axis, a] : {std::pair{"h", info.h}, std::pair{"w", info.w}}) {
          out << "axis=" << axis << " size=" << number(a.size) << " jump=" << number(a.jump)
              << " offset=" << number(a.offset()) << '\n';
        }
        const Box box = analytic_box(info, unit.y, unit.x, input);
        out << "box=" << box.y0 << ',' << box.x0 << ',' << box.y1 << ',' << box.x1 << '\n';
      } else {
        WeightStore weights = load_weights(weights_path, graph, seed);
        if (positive) weights = positive_weights(weights);
        const EmpiricalRF e =
            probe == "ramp"
                ? empirical_rf_ramps(graph, weights, node, unit, input, threshold)
                : empirical_rf(graph, weights, node, unit, random_probe(input, seed), threshold);
        const Box& b = e.thresholded.box;
        out << "support=" << e.thresholded.count << '\n';
        out << "box=" << b.y0 << ',' << b.x0 << ',' << b.y1 << ',' << b.x1 << '\n';
        out << "nonzero_support=" << e.nonzero.count << '\n';
        if (!out_path.empty()) {
          GrayImage img{e.thresholded.width, e.thresholded.height, e.thresholded.cells};
          for (auto& p : img.pixels) p = p ? 255 : 0;
          save_pgm(out_path, img);
          out << "mask=" << out_path << '\n';
        }
      }
    } else if (*infer) {
      const WeightStore weights = to_tensors(load_weight_container(weights_path));
      const RgbImage image = load_ppm(image_path);
      const Tensor x = normalize_image(image, spec.mean, spec.stddev);
      const Tensor scores = execute(graph, weights, x).front();
      save_ppm(out_path, colorize(argmax_labels(scores), image.height, image.width));
      out << "wrote " << out_path << " (" << image.width << 'x' << image.height << ")\n";
    } else if (*dump) {
      const ShapeMap shapes = infer_shapes(graph, input);
      out << dump_graph(graph, &shapes);
    }
    return 0;
  } catch (const ParseError& e) {
    err << "error: " << spec_path << ": " << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace lwrn::cli
