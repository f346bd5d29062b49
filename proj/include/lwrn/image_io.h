#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lwrn/tensor.h"

namespace lwrn {

// 8-bit interleaved RGB image.
struct RgbImage {
  int64_t width = 0;
  int64_t height = 0;
  std::vector<uint8_t> pixels;  // height * width * 3
};

// Binary PPM (P6, maxval 255); '#' comments allowed in the header. Throws
// FormatError on anything else.
RgbImage read_ppm(std::istream& in);
RgbImage load_ppm(const std::filesystem::path& path);
void write_ppm(std::ostream& out, const RgbImage& image);
void save_ppm(const std::filesystem::path& path, const RgbImage& image);

// Binary PGM (P5, maxval 255).
struct GrayImage {
  int64_t width = 0;
  int64_t height = 0;
  std::vector<uint8_t> pixels;
};
GrayImage read_pgm(std::istream& in);
GrayImage load_pgm(const std::filesystem::path& path);
void write_pgm(std::ostream& out, const GrayImage& image);
void save_pgm(const std::filesystem::path& path, const GrayImage& image);

// (1, 3, H, W) tensor of (pixel / 255 - mean[c]) / std[c].
Tensor normalize_image(const RgbImage& image, const std::array<float, 3>& mean,
                       const std::array<float, 3>& stddev);

// Per-pixel argmax over channels of a (1, K, H, W) score map; ties go to the
// lower class.
std::vector<uint8_t> argmax_labels(const Tensor& scores);

// The 21-entry VOC palette; labels beyond it (and 255) render white.
std::array<uint8_t, 3> palette_color(uint8_t label);
RgbImage colorize(const std::vector<uint8_t>& labels, int64_t height, int64_t width);

}  // namespace lwrn
