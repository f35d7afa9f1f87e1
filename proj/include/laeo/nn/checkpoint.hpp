#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "laeo/nn/params.hpp"

namespace laeo::nn {

// Little-endian primitives shared by the binary formats.
namespace bin {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
 public:
  Reader(std::string_view data, std::string source) : data_(data), source_(std::move(source)) {}

  std::uint64_t uint(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
  std::uint64_t u64() { return uint(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == data_.size(); }
  [[noreturn]] void fail(const std::string& what) const {
    throw IoError(source_ + ": " + what + " at byte " + std::to_string(pos_));
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) fail("truncated file");
  }
  std::string_view data_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace bin

inline constexpr std::string_view kCheckpointMagic = "LAEO1";

// Layout: "LAEO1", u32 tensor count, then per tensor {u32 name length, name,
// u32 rank, rank x u32 dims, u64 byte offset into payload}, u64 payload
// size, payload of little-endian float32 values.
inline std::string encode_checkpoint(const ParamSet<float>& params) {
  std::string out(kCheckpointMagic);
  bin::put_u32(out, static_cast<std::uint32_t>(params.entries().size()));
  std::uint64_t offset = 0;
  for (const auto& e : params.entries()) {
    bin::put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    bin::put_u32(out, static_cast<std::uint32_t>(e.value.rank()));
    for (std::size_t d : e.value.shape()) bin::put_u32(out, static_cast<std::uint32_t>(d));
    bin::put_u64(out, offset);
    offset += 4 * e.value.size();
  }
  bin::put_u64(out, offset);
  for (const auto& e : params.entries())
    for (float v : e.value.values()) bin::put_f32(out, v);
  return out;
}

inline ParamSet<float> decode_checkpoint(std::string_view data, const std::string& source = "checkpoint") {
  bin::Reader r(data, source);
  if (r.bytes(kCheckpointMagic.size()) != kCheckpointMagic) r.fail("bad magic (expected LAEO1)");
  const std::uint32_t n = r.u32();
  struct Item {
    std::string name;
    Shape shape;
    std::uint64_t offset;
  };
  std::vector<Item> items;
  for (std::uint32_t i = 0; i < n; ++i) {
    Item it;
    it.name = r.bytes(r.u32());
    const std::uint32_t rank = r.u32();
    for (std::uint32_t k = 0; k < rank; ++k) it.shape.push_back(r.u32());
    it.offset = r.u64();
    items.push_back(std::move(it));
  }
  const std::uint64_t payload = r.u64();
  const std::size_t base = r.pos();
  if (data.size() - base != payload) r.fail("payload size mismatch");
  ParamSet<float> out;
  for (const auto& it : items) {
    const std::size_t count = shape_size(it.shape);
    if (it.offset + 4 * count > payload) r.fail("tensor '" + it.name + "' exceeds payload");
    bin::Reader pr(data.substr(base + it.offset, 4 * count), source);
    std::vector<float> v(count);
    for (auto& x : v) x = pr.f32();
    out.add(it.name, Tensor<float>(it.shape, std::move(v)));
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline void save_checkpoint(const std::string& path, const ParamSet<float>& params) {
  write_file(path, encode_checkpoint(params));
}

inline ParamSet<float> load_checkpoint(const std::string& path) {
  return decode_checkpoint(read_file(path), path);
}

}  // namespace laeo::nn
