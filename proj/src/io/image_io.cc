#include "lwrn/image_io.h"

#include <fstream>
#include <istream>
#include <ostream>

#include "lwrn/errors.h"

namespace lwrn {
namespace {

int64_t header_number(std::istream& in, const char* what) {
  while (true) {
    const int ch = in.peek();
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') {
      in.get();
    } else {
      break;
    }
  }
  int64_t v = -1;
  if (!(in >> v) || v < 0) throw FormatError(std::string("bad ") + what + " in image header");
  return v;
}

std::vector<uint8_t> read_netpbm(std::istream& in, const char* magic, int channels, int64_t& w,
                                 int64_t& h) {
  char m[2] = {0, 0};
  in.read(m, 2);
  if (!in || m[0] != magic[0] || m[1] != magic[1]) {
    throw FormatError(std::string("not a binary ") + magic + " image");
  }
  w = header_number(in, "width");
  h = header_number(in, "height");
  const int64_t maxval = header_number(in, "maxval");
  if (w < 1 || h < 1) throw FormatError("empty image");
  if (maxval != 255) throw FormatError("only maxval 255 is supported, got " + std::to_string(maxval));
  const int sep = in.get();
  if (sep != ' ' && sep != '\n' && sep != '\t' && sep != '\r') {
    throw FormatError("missing whitespace after image header");
  }
  std::vector<uint8_t> pixels(static_cast<size_t>(w * h * channels));
  in.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(pixels.size())) {
    throw FormatError("truncated pixel data: expected " + std::to_string(pixels.size()) +
                      " bytes, got " + std::to_string(in.gcount()));
  }
  return pixels;
}

void write_netpbm(std::ostream& out, const char* magic, int64_t w, int64_t h,
                  const std::vector<uint8_t>& pixels) {
  out << magic << '\n' << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace

RgbImage read_ppm(std::istream& in) {
  RgbImage img;
  img.pixels = read_netpbm(in, "P6", 3, img.width, img.height);
  return img;
}

RgbImage load_ppm(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_ppm(in);
}

void write_ppm(std::ostream& out, const RgbImage& image) {
  write_netpbm(out, "P6", image.width, image.height, image.pixels);
}

void save_ppm(const std::filesystem::path& path, const RgbImage& image) {
  auto out = open_out(path);
  write_ppm(out, image);
}

GrayImage read_pgm(std::istream& in) {
  GrayImage img;
  img.pixels = read_netpbm(in, "P5", 1, img.width, img.height);
  return img;
}

GrayImage load_pgm(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_pgm(in);
}

void write_pgm(std::ostream& out, const GrayImage& image) {
  write_netpbm(out, "P5", image.width, image.height, image.pixels);
}

void save_pgm(const std::filesystem::path& path, const GrayImage& image) {
  auto out = open_out(path);
  write_pgm(out, image);
}

Tensor normalize_image(const RgbImage& image, const std::array<float, 3>& mean,
                       const std::array<float, 3>& stddev) {
  Tensor t(Shape{1, 3, image.height, image.width});
  const int64_t plane = image.height * image.width;
  for (int64_t c = 0; c < 3; ++c) {
    float* dst = t.plane(0, c);
    for (int64_t i = 0; i < plane; ++i) {
      dst[i] = (image.pixels[i * 3 + c] / 255.0f - mean[c]) / stddev[c];
    }
  }
  return t;
}

std::vector<uint8_t> argmax_labels(const Tensor& scores) {
  const Shape& s = scores.shape();
  if (s.n != 1) throw DimensionError("argmax expects batch size 1, got " + s.str());
  if (s.c < 1 || s.c > 255) throw DimensionError("argmax needs 1..255 channels, got " + s.str());
  std::vector<uint8_t> labels(static_cast<size_t>(s.plane()), 0);
  std::vector<float> best(scores.plane(0, 0), scores.plane(0, 0) + s.plane());
  for (int64_t c = 1; c < s.c; ++c) {
    const float* p = scores.plane(0, c);
    for (int64_t i = 0; i < s.plane(); ++i) {
      if (p[i] > best[i]) {
        best[i] = p[i];
        labels[i] = static_cast<uint8_t>(c);
      }
    }
  }
  return labels;
}

std::array<uint8_t, 3> palette_color(uint8_t label) {
  if (label >= 21) return {255, 255, 255};
  // Bit-interleaved VOC colour map.
  std::array<uint8_t, 3> rgb{0, 0, 0};
  int id = label;
  for (int shift = 7; id > 0 && shift >= 0; --shift, id >>= 3) {
    for (int ch = 0; ch < 3; ++ch) rgb[ch] |= static_cast<uint8_t>(((id >> ch) & 1) << shift);
  }
  return rgb;
}

RgbImage colorize(const std::vector<uint8_t>& labels, int64_t height, int64_t width) {
  if (static_cast<int64_t>(labels.size()) != height * width) {
    throw DimensionError("label map has " + std::to_string(labels.size()) + " entries, expected " +
                         std::to_string(height * width));
  }
  RgbImage img{width, height, std::vector<uint8_t>(labels.size() * 3)};
  for (size_t i = 0; i < labels.size(); ++i) {
    const auto rgb = palette_color(labels[i]);
    for (int ch = 0; ch < 3; ++ch) img.pixels[i * 3 + ch] = rgb[ch];
  }
  return img;
}

}  // namespace lwrn
