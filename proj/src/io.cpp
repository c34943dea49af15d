#include "hyper/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <zlib.h>

#include "hyper/error.hpp"

namespace hyper::io {

void ByteWriter::raw(std::string_view bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

void ByteWriter::u8(std::uint8_t v) { buf_.push_back(v); }

void ByteWriter::u16(std::uint16_t v) {
  for (int i = 0; i < 2; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

const std::uint8_t* ByteReader::take(std::size_t n) {
  if (n > remaining())
    throw FormatError(FormatError::Kind::truncated,
                      what_ + ": truncated at byte " + std::to_string(pos_) + " (needed " + std::to_string(n) + ")");
  const std::uint8_t* p = data_.data() + pos_;
  pos_ += n;
  return p;
}

std::string ByteReader::raw(std::size_t n) {
  const auto* p = take(n);
  return std::string(reinterpret_cast<const char*>(p), n);
}

std::uint8_t ByteReader::u8() { return *take(1); }

std::uint16_t ByteReader::u16() {
  const auto* p = take(2);
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t ByteReader::u32() {
  const auto* p = take(4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint64_t ByteReader::u64() {
  const auto* p = take(8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes a uInt length; feed large buffers in pieces.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    crc = ::crc32(crc, bytes.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::io, "cannot open " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw FormatError(FormatError::Kind::io, "read failed: " + path.string());
  return data;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatError::Kind::io, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError(FormatError::Kind::io, "write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<std::uint8_t> encode_params(const ParamHeader& header, std::span<const double> values) {
  if (header.magic.size() != 4) throw InvalidArgument("parameter magic must be four bytes");
  ByteWriter w;
  w.raw(header.magic);
  w.u16(header.version);
  w.u64(header.architecture_hash);
  w.u32(header.width);
  w.u32(header.height);
  w.u32(header.aux);
  w.u32(static_cast<std::uint32_t>(values.size()));
  for (double v : values) w.f32(static_cast<float>(v));
  const auto& b = w.bytes();
  w.u32(crc32(std::span(b).subspan(4)));
  return w.bytes();
}

DecodedParams decode_params(std::span<const std::uint8_t> bytes, std::string_view magic,
                            std::uint16_t expected_version, const std::string& what) {
  ByteReader r(bytes, what);
  const std::string got = r.raw(4);
  if (got != magic) throw FormatError(FormatError::Kind::bad_magic, what + ": bad magic, expected " + std::string(magic));
  DecodedParams d;
  d.header.magic = got;
  d.header.version = r.u16();
  if (d.header.version != expected_version)
    throw FormatError(FormatError::Kind::version, what + ": file version " + std::to_string(d.header.version) +
                                                      ", supported version " + std::to_string(expected_version));
  d.header.architecture_hash = r.u64();
  d.header.width = r.u32();
  d.header.height = r.u32();
  d.header.aux = r.u32();
  const std::uint32_t count = r.u32();
  if (static_cast<std::size_t>(count) * 4 + 4 > r.remaining())
    throw FormatError(FormatError::Kind::truncated, what + ": truncated parameter payload");
  d.values.resize(count);
  for (auto& v : d.values) v = r.f32();
  const std::size_t body_end = r.position();
  const std::uint32_t stored = r.u32();
  if (r.remaining() != 0) throw FormatError(FormatError::Kind::truncated, what + ": trailing bytes after checksum");
  if (crc32(bytes.subspan(4, body_end - 4)) != stored)
    throw FormatError(FormatError::Kind::checksum, what + ": checksum mismatch");
  return d;
}

}  // namespace hyper::io
