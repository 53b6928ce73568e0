#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace reconnet {

// Little-endian serializer used by the binary container formats.
class ByteWriter {
 public:
  void bytes(std::string_view raw) { buffer_.insert(buffer_.end(), raw.begin(), raw.end()); }
  void u8(std::uint8_t v) { buffer_.push_back(v); }
  void u32(std::uint32_t v) { little(v); }
  void u64(std::uint64_t v) { little(v); }
  void f32(float v) { little(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { little(std::bit_cast<std::uint64_t>(v)); }

  const std::vector<std::uint8_t>& buffer() const { return buffer_; }
  std::vector<std::uint8_t> take() { return std::move(buffer_); }

 private:
  template <typename U>
  void little(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) buffer_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> buffer_;
};

// Little-endian reader; every read names the field so truncation errors
// point at what was missing. Throws FormatError.
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, std::string format) : data_(data), format_(std::move(format)) {}

  void expect_magic(std::string_view magic);
  std::uint8_t u8(std::string_view field);
  std::uint32_t u32(std::string_view field);
  std::uint64_t u64(std::string_view field);
  float f32(std::string_view field);
  double f64(std::string_view field);

  std::size_t offset() const { return offset_; }
  std::size_t remaining() const { return data_.size() - offset_; }
  // Throws if unread bytes remain.
  void expect_end();
  [[noreturn]] void fail(std::string_view field, std::string_view what) const;

 private:
  template <typename U>
  U little(std::string_view field) {
    need(sizeof(U), field);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(data_[offset_ + i]) << (8 * i));
    offset_ += sizeof(U);
    return v;
  }
  void need(std::size_t count, std::string_view field);

  std::span<const std::uint8_t> data_;
  std::string format_;
  std::size_t offset_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace reconnet
