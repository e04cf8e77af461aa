#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "viper/tensor.hpp"

namespace viper::io {

// Little-endian primitive writer with byte-offset tracking.
class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void u8(std::uint8_t v);
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void bytes(const void* data, std::size_t n);
  std::size_t offset() const { return offset_; }

 private:
  std::ostream& out_;
  std::size_t offset_ = 0;
};

// Little-endian primitive reader. Truncation throws FormatError carrying the
// byte offset where data ran out.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  void bytes(void* data, std::size_t n);
  bool at_eof();
  std::size_t offset() const { return offset_; }

 private:
  std::istream& in_;
  std::size_t offset_ = 0;
};

// Ordered named-tensor container used by the checkpoint format.
struct NamedTensors {
  std::vector<std::pair<std::string, Tensor>> items;

  const Tensor* find(const std::string& name) const;
  void add(std::string name, Tensor t) { items.emplace_back(std::move(name), std::move(t)); }
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Checkpoint container: magic "VIPR", version u32, aggregator kind u8, then
// per tensor: name length u16, name bytes, rank u8, extents u32 each, f64
// payload. Records run to end of file.
void write_checkpoint(std::ostream& out, std::uint8_t aggregator_kind,
                      const NamedTensors& tensors);
std::uint8_t read_checkpoint(std::istream& in, NamedTensors& tensors);

// FNV-1a over a byte stream; used for dataset/config digests.
std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a_file(const std::string& path);
std::string hex64(std::uint64_t v);

}  // namespace viper::io
