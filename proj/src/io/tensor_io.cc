#include "lwrn/tensor_io.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "lwrn/errors.h"

namespace lwrn {
namespace le {
namespace {

template <typename T>
void put(std::ostream& out, T v) {
  unsigned char bytes[sizeof(T)];
  for (size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw FormatError("unexpected end of file");
  }
  T v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

void put_u16(std::ostream& out, uint16_t v) { put(out, v); }
void put_u32(std::ostream& out, uint32_t v) { put(out, v); }
void put_u64(std::ostream& out, uint64_t v) { put(out, v); }

void put_f32s(std::ostream& out, const float* values, size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values), static_cast<std::streamsize>(count * 4));
  } else {
    for (size_t i = 0; i < count; ++i) put(out, std::bit_cast<uint32_t>(values[i]));
  }
}

uint8_t get_u8(std::istream& in) { return get<uint8_t>(in); }
uint16_t get_u16(std::istream& in) { return get<uint16_t>(in); }
uint32_t get_u32(std::istream& in) { return get<uint32_t>(in); }
uint64_t get_u64(std::istream& in) { return get<uint64_t>(in); }

void get_f32s(std::istream& in, float* values, size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    if (!in.read(reinterpret_cast<char*>(values), static_cast<std::streamsize>(count * 4))) {
      throw FormatError("truncated float payload");
    }
  } else {
    for (size_t i = 0; i < count; ++i) values[i] = std::bit_cast<float>(get<uint32_t>(in));
  }
}

}  // namespace le

namespace {

void expect_magic(std::istream& in, const char (&magic)[5]) {
  char got[4];
  if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
    throw FormatError(std::string("bad magic, expected \"") + magic + "\"");
  }
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return in;
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor& t) {
  out.write("RTEN", 4);
  le::put_u32(out, 1);
  le::put_u32(out, 4);
  const Shape& s = t.shape();
  for (int64_t e : {s.n, s.c, s.h, s.w}) le::put_u64(out, static_cast<uint64_t>(e));
  le::put_f32s(out, t.data().data(), t.data().size());
}

Tensor read_tensor(std::istream& in) {
  expect_magic(in, "RTEN");
  if (uint32_t version = le::get_u32(in); version != 1) {
    throw FormatError("unsupported RTEN version " + std::to_string(version));
  }
  if (uint32_t rank = le::get_u32(in); rank != 4) {
    throw FormatError("RTEN rank must be 4, got " + std::to_string(rank));
  }
  uint64_t e[4];
  for (auto& v : e) v = le::get_u64(in);
  const Shape shape{static_cast<int64_t>(e[0]), static_cast<int64_t>(e[1]),
                    static_cast<int64_t>(e[2]), static_cast<int64_t>(e[3])};
  std::vector<float> values(static_cast<size_t>(shape.numel()));
  le::get_f32s(in, values.data(), values.size());
  return Tensor(shape, std::move(values));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  write_tensor(out, t);
}

Tensor load_tensor(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_tensor(in);
}

WeightContainer read_weight_container(std::istream& in) {
  expect_magic(in, "RNLW");
  if (uint32_t version = le::get_u32(in); version != 1) {
    throw FormatError("unsupported RNLW version " + std::to_string(version));
  }
  const uint32_t count = le::get_u32(in);
  WeightContainer container;
  for (uint32_t i = 0; i < count; ++i) {
    std::string name(le::get_u16(in), '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name.size()))) {
      throw FormatError("truncated tensor name");
    }
    if (uint8_t dtype = le::get_u8(in); dtype != 0) {
      throw FormatError("tensor '" + name + "': unsupported dtype code " + std::to_string(dtype));
    }
    ContainerTensor entry;
    entry.extents.resize(le::get_u8(in));
    uint64_t count_values = 1;
    for (auto& e : entry.extents) {
      e = le::get_u64(in);
      count_values *= e;
    }
    entry.values.resize(static_cast<size_t>(count_values));
    le::get_f32s(in, entry.values.data(), entry.values.size());
    if (!container.emplace(name, std::move(entry)).second) {
      throw FormatError("duplicate tensor name '" + name + "'");
    }
  }
  return container;
}

WeightContainer load_weight_container(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_weight_container(in);
}

Tensor to_tensor(const std::string& name, const ContainerTensor& entry) {
  if (entry.extents.size() > 4) {
    throw DimensionError("tensor '" + name + "' has rank " + std::to_string(entry.extents.size()) +
                         ", at most 4 supported");
  }
  int64_t e[4] = {1, 1, 1, 1};
  for (size_t i = 0; i < entry.extents.size(); ++i) e[i] = static_cast<int64_t>(entry.extents[i]);
  return Tensor({e[0], e[1], e[2], e[3]}, entry.values);
}

std::map<std::string, Tensor> to_tensors(const WeightContainer& container) {
  std::map<std::string, Tensor> out;
  for (const auto& [name, entry] : container) out.emplace(name, to_tensor(name, entry));
  return out;
}

}  // namespace lwrn
