#include "viper/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "viper/errors.hpp"

namespace viper::io {

void Writer::bytes(const void* data, std::size_t n) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out_) throw Error("write failed at byte " + std::to_string(offset_));
  offset_ += n;
}

void Writer::u8(std::uint8_t v) { bytes(&v, 1); }

void Writer::u16(std::uint16_t v) {
  std::uint8_t b[2] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8)};
  bytes(b, 2);
}

void Writer::u32(std::uint32_t v) {
  std::uint8_t b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
  bytes(b, 4);
}

void Writer::u64(std::uint64_t v) {
  std::uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
  bytes(b, 8);
}

void Writer::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void Writer::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void Reader::bytes(void* data, std::size_t n) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) {
    throw FormatError("unexpected end of data", offset_ + static_cast<std::size_t>(in_.gcount()));
  }
  offset_ += n;
}

std::uint8_t Reader::u8() {
  std::uint8_t v;
  bytes(&v, 1);
  return v;
}

std::uint16_t Reader::u16() {
  std::uint8_t b[2];
  bytes(b, 2);
  return static_cast<std::uint16_t>(b[0] | (static_cast<std::uint16_t>(b[1]) << 8));
}

std::uint32_t Reader::u32() {
  std::uint8_t b[4];
  bytes(b, 4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

std::uint64_t Reader::u64() {
  std::uint8_t b[8];
  bytes(b, 8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

float Reader::f32() { return std::bit_cast<float>(u32()); }

double Reader::f64() { return std::bit_cast<double>(u64()); }

bool Reader::at_eof() {
  return in_.peek() == std::char_traits<char>::eof();
}

const Tensor* NamedTensors::find(const std::string& name) const {
  for (const auto& [n, t] : items) {
    if (n == name) return &t;
  }
  return nullptr;
}

void write_checkpoint(std::ostream& out, std::uint8_t aggregator_kind,
                      const NamedTensors& tensors) {
  Writer w(out);
  w.bytes("VIPR", 4);
  w.u32(kCheckpointVersion);
  w.u8(aggregator_kind);
  for (const auto& [name, t] : tensors.items) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t e : t.shape()) w.u32(static_cast<std::uint32_t>(e));
    for (std::size_t i = 0; i < t.size(); ++i) w.f64(t.at(i));
  }
}

std::uint8_t read_checkpoint(std::istream& in, NamedTensors& tensors) {
  Reader r(in);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "VIPR", 4) != 0) {
    throw FormatError("bad checkpoint magic, expected VIPR", 0);
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw IncompatibilityError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint8_t aggregator_kind = r.u8();
  while (!r.at_eof()) {
    const std::uint16_t name_len = r.u16();
    std::string name(name_len, '\0');
    r.bytes(name.data(), name_len);
    const std::uint8_t rank = r.u8();
    std::vector<std::size_t> shape(rank);
    std::size_t numel = 1;
    for (std::uint8_t i = 0; i < rank; ++i) {
      shape[i] = r.u32();
      if (shape[i] == 0) throw FormatError("zero tensor extent", r.offset() - 4);
      numel *= shape[i];
    }
    std::vector<double> data(numel);
    for (std::size_t i = 0; i < numel; ++i) data[i] = r.f64();
    tensors.add(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return aggregator_kind;
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file for hashing: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::size_t got = static_cast<std::size_t>(in.gcount());
    if (got == 0) break;
    h = fnv1a(buf, got, h);
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return s;
}

}  // namespace viper::io
