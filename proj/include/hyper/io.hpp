#pragma once

// Little-endian byte encoding and the shared parameter-file container.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hyper::io {

class ByteWriter {
 public:
  void raw(std::string_view bytes);
  void u8(std::uint8_t v);
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);

  const std::vector<std::uint8_t>& bytes() const { return buf_; }
  std::vector<std::uint8_t>& bytes() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

/// Reads little-endian values; running past the end throws FormatError(truncated).
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, std::string what) : data_(data), what_(std::move(what)) {}

  std::string raw(std::size_t n);
  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  const std::uint8_t* take(std::size_t n);

  std::span<const std::uint8_t> data_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and rename, so readers never see partial files.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Header of a network parameter file.
struct ParamHeader {
  std::string magic;  ///< four characters
  std::uint16_t version = 1;
  std::uint64_t architecture_hash = 0;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t aux = 0;  ///< network-specific shape value (hidden channels, chunk size)
};

/// magic, u16 version, u64 arch hash, u32 width, u32 height, u32 aux,
/// u32 count, count f32 values, u32 CRC32 of everything after the magic.
std::vector<std::uint8_t> encode_params(const ParamHeader& header, std::span<const double> values);

struct DecodedParams {
  ParamHeader header;
  std::vector<double> values;
};

/// Validates magic and version; the architecture hash is left to the caller.
DecodedParams decode_params(std::span<const std::uint8_t> bytes, std::string_view magic,
                            std::uint16_t expected_version, const std::string& what);

}  // namespace hyper::io
