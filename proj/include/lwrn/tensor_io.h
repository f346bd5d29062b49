#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "lwrn/tensor.h"

namespace lwrn {

// Raw tensor file: "RTEN", u32 version = 1, u32 rank = 4, four u64 extents,
// then N*C*H*W little-endian float32 values.
void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);
void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

// One named entry of a weight container, with its extents as stored.
struct ContainerTensor {
  std::vector<uint64_t> extents;
  std::vector<float> values;
};

// Weight container: "RNLW", u32 version = 1, u32 count, then per tensor
// u16 name length, UTF-8 name, u8 dtype (0 = f32), u8 rank, rank x u64
// extents, little-endian f32 payload. Names must be unique.
using WeightContainer = std::map<std::string, ContainerTensor>;

WeightContainer read_weight_container(std::istream& in);
WeightContainer load_weight_container(const std::filesystem::path& path);

// Rank <= 4 entries become NCHW tensors, with missing trailing extents set
// to 1 (a bias vector of length C becomes C x 1 x 1 x 1).
Tensor to_tensor(const std::string& name, const ContainerTensor& entry);

// Every entry converted with to_tensor, keyed by name.
std::map<std::string, Tensor> to_tensors(const WeightContainer& container);

namespace le {
// Little-endian primitives shared by the binary formats.
void put_u16(std::ostream& out, uint16_t v);
void put_u32(std::ostream& out, uint32_t v);
void put_u64(std::ostream& out, uint64_t v);
void put_f32s(std::ostream& out, const float* values, size_t count);
uint8_t get_u8(std::istream& in);
uint16_t get_u16(std::istream& in);
uint32_t get_u32(std::istream& in);
uint64_t get_u64(std::istream& in);
void get_f32s(std::istream& in, float* values, size_t count);
}  // namespace le

}  // namespace lwrn
